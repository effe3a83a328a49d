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

#ifndef COLLABEDIT_EDITOR_H_
#define COLLABEDIT_EDITOR_H_

#include <cstddef>
#include <span>
#include <vector>

#include "collabedit/knowledge_model.h"
#include "collabedit/numkernel.h"

namespace collabedit {

// Keys, desired values and residual of one batch against one layer.
struct EditBatch {
  Matrix K;  // d_key x E
  Matrix V;  // d_val x E
  Matrix R;  // d_val x E, V − W K
};

// Contiguous, inclusive range of editable layer indices.
struct EditRange {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t size() const noexcept { return last - first + 1; }
  bool contains(std::size_t l) const noexcept { return l >= first && l <= last; }
  friend bool operator==(const EditRange&, const EditRange&) = default;
};

enum class StackKind {
  kMemory,    // one layer, output = W k
  kResidual,  // square layers, h^{l+1} = h^l + W^l h^l
};

class LayerStack {
 public:
  static LayerStack memory(SyntheticLayer layer);
  static LayerStack residual(std::vector<SyntheticLayer> layers, EditRange edit_range);

  StackKind kind() const noexcept { return kind_; }
  std::size_t depth() const noexcept { return layers_.size(); }
  const EditRange& edit_range() const noexcept { return edit_range_; }
  const SyntheticLayer& layer(std::size_t l) const { return layers_.at(l); }
  SyntheticLayer& layer(std::size_t l) { return layers_.at(l); }
  const std::vector<SyntheticLayer>& layers() const noexcept { return layers_; }

  Eigen::Index input_dim() const { return layers_.front().W.cols(); }
  Eigen::Index output_dim() const { return layers_.back().W.rows(); }

  // Inputs seen by layer l (the keys it is edited on), one column per input.
  Matrix keys_at(std::size_t l, const Matrix& inputs) const;
  // Hidden state right after layer l.
  Matrix hidden_after(std::size_t l, const Matrix& inputs) const;
  Matrix forward(const Matrix& inputs) const;
  Vector forward(const Vector& input) const;

  void apply_delta(std::size_t l, const Matrix& delta);

 private:
  LayerStack(StackKind kind, std::vector<SyntheticLayer> layers, EditRange edit_range);

  StackKind kind_;
  std::vector<SyntheticLayer> layers_;
  EditRange edit_range_;
};

// One edited layer: the applied update and the Gram of the keys it used.
struct LayerEdit {
  std::size_t layer = 0;
  Matrix delta;
  Matrix gram;
};

EditBatch compute_batch(const SyntheticLayer& layer, const Universe& universe,
                        std::span<const EditRequest> requests);

// R Kᵀ (C + K Kᵀ)⁻¹, computed as a solve against (C + K Kᵀ).
Matrix edit_delta(const Matrix& keys, const Matrix& residuals, const Matrix& prior);
Matrix edit_delta(const EditBatch& batch, const Matrix& prior);

// Upper bound: every client's requests edited jointly on one layer.
Matrix global_edit(const SyntheticLayer& layer, const Universe& universe,
                   std::span<const EditRequest> all_requests, const Matrix& prior);

// Edits every layer of the stack's edit range in ascending order. At each
// layer the keys are recomputed through the already-edited layers and the
// remaining residual at the last edited layer is spread evenly over the
// layers still to go. `priors` is indexed by position inside the edit range.
std::vector<LayerEdit> edit_stack_in_place(LayerStack& stack, const Matrix& inputs,
                                           const Matrix& targets,
                                           std::span<const Matrix> priors);

LayerStack edit_stack(LayerStack stack, const Matrix& inputs, const Matrix& targets,
                      std::span<const Matrix> priors);
LayerStack edit_stack(LayerStack stack, const Universe& universe,
                      std::span<const EditRequest> requests, std::span<const Matrix> priors);

// The stack's own C0 for every layer in the edit range.
std::vector<Matrix> layer_priors(const LayerStack& stack);

// Per-layer deltas of a joint edit of all requests, on a copy of the stack.
std::vector<Matrix> global_stack_edit(const LayerStack& stack, const Matrix& inputs,
                                      const Matrix& targets, std::span<const Matrix> priors);

}  // namespace collabedit

#endif  // COLLABEDIT_EDITOR_H_
