/*
 * Copyright 2026 The CollabEdit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "collabedit/editor.h"

#include <string>
#include <utility>

namespace collabedit {

LayerStack::LayerStack(StackKind kind, std::vector<SyntheticLayer> layers, EditRange edit_range)
    : kind_(kind), layers_(std::move(layers)), edit_range_(edit_range) {}

LayerStack LayerStack::memory(SyntheticLayer layer) {
  if (layer.W.size() == 0) throw InvalidArgument("memory stack: layer has no weights");
  if (layer.C0.rows() != layer.W.cols() || layer.C0.cols() != layer.W.cols()) {
    throw DimensionMismatch("memory stack: C0 must be d_key x d_key");
  }
  std::vector<SyntheticLayer> layers;
  layers.push_back(std::move(layer));
  return LayerStack(StackKind::kMemory, std::move(layers), EditRange{0, 0});
}

LayerStack LayerStack::residual(std::vector<SyntheticLayer> layers, EditRange edit_range) {
  if (layers.empty()) throw InvalidArgument("residual stack: no layers");
  if (edit_range.first > edit_range.last || edit_range.last >= layers.size()) {
    throw InvalidArgument("residual stack: edit range [" + std::to_string(edit_range.first) + ", " +
                          std::to_string(edit_range.last) + "] outside " +
                          std::to_string(layers.size()) + " layers");
  }
  const Eigen::Index d = layers.front().W.rows();
  for (const auto& layer : layers) {
    if (layer.W.rows() != d || layer.W.cols() != d) {
      throw DimensionMismatch("residual stack: every layer must be " + shape_string(d, d));
    }
    if (layer.C0.rows() != d || layer.C0.cols() != d) {
      throw DimensionMismatch("residual stack: C0 must be " + shape_string(d, d));
    }
  }
  return LayerStack(StackKind::kResidual, std::move(layers), edit_range);
}

Matrix LayerStack::keys_at(std::size_t l, const Matrix& inputs) const {
  if (l >= layers_.size()) throw InvalidArgument("keys_at: layer index out of range");
  if (inputs.rows() != input_dim()) {
    throw DimensionMismatch("keys_at: inputs have " + std::to_string(inputs.rows()) +
                            " rows, expected " + std::to_string(input_dim()));
  }
  if (kind_ == StackKind::kMemory) return inputs;
  Matrix h = inputs;
  for (std::size_t i = 0; i < l; ++i) h += layers_[i].W * h;
  return h;
}

Matrix LayerStack::hidden_after(std::size_t l, const Matrix& inputs) const {
  const Matrix k = keys_at(l, inputs);
  if (kind_ == StackKind::kMemory) return layers_[l].W * k;
  return k + layers_[l].W * k;
}

Matrix LayerStack::forward(const Matrix& inputs) const { return hidden_after(depth() - 1, inputs); }

Vector LayerStack::forward(const Vector& input) const {
  return forward(Matrix(input)).col(0);
}

void LayerStack::apply_delta(std::size_t l, const Matrix& delta) {
  auto& w = layers_.at(l).W;
  if (delta.rows() != w.rows() || delta.cols() != w.cols()) {
    throw DimensionMismatch("apply_delta: update is " + shape_string(delta.rows(), delta.cols()) +
                            ", layer is " + shape_string(w.rows(), w.cols()));
  }
  w += delta;
}

EditBatch compute_batch(const SyntheticLayer& layer, const Universe& universe,
                        std::span<const EditRequest> requests) {
  if (requests.empty()) throw InvalidArgument("compute_batch: empty request list");
  EditBatch batch;
  batch.K = universe.inputs(requests);
  batch.V = universe.targets(requests);
  batch.R = batch.V - matmul(layer.W, batch.K);
  return batch;
}

Matrix edit_delta(const Matrix& keys, const Matrix& residuals, const Matrix& prior) {
  if (keys.cols() != residuals.cols()) {
    throw DimensionMismatch("edit_delta: " + std::to_string(keys.cols()) + " keys but " +
                            std::to_string(residuals.cols()) + " residuals");
  }
  if (prior.rows() != keys.rows() || prior.cols() != keys.rows()) {
    throw DimensionMismatch("edit_delta: prior must be " + shape_string(keys.rows(), keys.rows()));
  }
  // Δ (C + K Kᵀ) = R Kᵀ  <=>  (C + K Kᵀ) Δᵀ = K Rᵀ for symmetric C.
  const Matrix a = prior + gram(keys);
  return solve_spd(a, keys * residuals.transpose()).transpose();
}

Matrix edit_delta(const EditBatch& batch, const Matrix& prior) {
  return edit_delta(batch.K, batch.R, prior);
}

Matrix global_edit(const SyntheticLayer& layer, const Universe& universe,
                   std::span<const EditRequest> all_requests, const Matrix& prior) {
  return edit_delta(compute_batch(layer, universe, all_requests), prior);
}

std::vector<LayerEdit> edit_stack_in_place(LayerStack& stack, const Matrix& inputs,
                                           const Matrix& targets,
                                           std::span<const Matrix> priors) {
  const EditRange range = stack.edit_range();
  if (priors.size() != range.size()) {
    throw InvalidArgument("edit_stack: expected " + std::to_string(range.size()) +
                          " priors, got " + std::to_string(priors.size()));
  }
  if (targets.rows() != stack.layer(range.last).W.rows()) {
    throw DimensionMismatch("edit_stack: targets have " + std::to_string(targets.rows()) +
                            " rows, stack width is " +
                            std::to_string(stack.layer(range.last).W.rows()));
  }
  if (targets.cols() != inputs.cols()) {
    throw DimensionMismatch("edit_stack: inputs and targets differ in column count");
  }

  std::vector<LayerEdit> edits;
  edits.reserve(range.size());
  for (std::size_t l = range.first; l <= range.last; ++l) {
    const Matrix keys = stack.keys_at(l, inputs);
    const double remaining_layers = static_cast<double>(range.last - l + 1);
    const Matrix residuals = (targets - stack.hidden_after(range.last, inputs)) / remaining_layers;
    Matrix delta = edit_delta(keys, residuals, priors[l - range.first]);
    stack.apply_delta(l, delta);
    edits.push_back(LayerEdit{l, std::move(delta), gram(keys)});
  }
  return edits;
}

LayerStack edit_stack(LayerStack stack, const Matrix& inputs, const Matrix& targets,
                      std::span<const Matrix> priors) {
  edit_stack_in_place(stack, inputs, targets, priors);
  return stack;
}

LayerStack edit_stack(LayerStack stack, const Universe& universe,
                      std::span<const EditRequest> requests, std::span<const Matrix> priors) {
  return edit_stack(std::move(stack), universe.inputs(requests), universe.targets(requests),
                    priors);
}

std::vector<Matrix> layer_priors(const LayerStack& stack) {
  std::vector<Matrix> priors;
  for (std::size_t l = stack.edit_range().first; l <= stack.edit_range().last; ++l) {
    priors.push_back(stack.layer(l).C0);
  }
  return priors;
}

std::vector<Matrix> global_stack_edit(const LayerStack& stack, const Matrix& inputs,
                                      const Matrix& targets, std::span<const Matrix> priors) {
  LayerStack copy = stack;
  std::vector<Matrix> deltas;
  for (auto& e : edit_stack_in_place(copy, inputs, targets, priors)) {
    deltas.push_back(std::move(e.delta));
  }
  return deltas;
}

}  // namespace collabedit
