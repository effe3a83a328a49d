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

#include "collabedit/collab.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>
#include <string>
#include <utility>

#include "collabedit/errors.h"

namespace collabedit {
namespace {

constexpr double kPsdTolerance = 1e-9;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string packet_label(const EditPacket& p) {
  return "packet (client " + std::to_string(p.client_id) + ", round " +
         std::to_string(p.round) + ")";
}

// Non-empty packets in ascending client_id, each checked against the range.
std::vector<const EditPacket*> ordered_packets(std::span<const EditPacket> packets,
                                               const EditRange& range) {
  std::vector<const EditPacket*> out;
  for (const auto& p : packets) {
    if (p.entries.empty()) continue;
    if (p.entries.size() != range.size()) {
      throw InvalidArgument(packet_label(p) + " has " + std::to_string(p.entries.size()) +
                            " layers, expected " + std::to_string(range.size()));
    }
    for (std::size_t i = 0; i < p.entries.size(); ++i) {
      if (p.entries[i].layer_id != range.first + i) {
        throw InvalidArgument(packet_label(p) + " entry " + std::to_string(i) +
                              " targets layer " + std::to_string(p.entries[i].layer_id) +
                              ", expected " + std::to_string(range.first + i));
      }
    }
    out.push_back(&p);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EditPacket* a, const EditPacket* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->client_id == out[i - 1]->client_id) {
      throw InvalidArgument("duplicate packets from client " + std::to_string(out[i]->client_id));
    }
  }
  // Shapes must agree across clients.
  for (const auto* p : out) {
    for (std::size_t i = 0; i < p->entries.size(); ++i) {
      const auto& ref = out.front()->entries[i];
      const auto& e = p->entries[i];
      if (e.delta.rows() != ref.delta.rows() || e.delta.cols() != ref.delta.cols() ||
          e.gram.rows() != ref.gram.rows() || e.gram.cols() != ref.gram.cols()) {
        throw DimensionMismatch(packet_label(*p) + " layer " + std::to_string(e.layer_id) +
                                " shape differs from client " +
                                std::to_string(out.front()->client_id));
      }
    }
  }
  return out;
}

void check_priors(std::span<const Matrix> priors, const EditRange& range,
                  const std::vector<const EditPacket*>& packets) {
  if (priors.size() != range.size()) {
    throw InvalidArgument("expected " + std::to_string(range.size()) + " priors, got " +
                          std::to_string(priors.size()));
  }
  if (packets.empty()) return;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const auto d = packets.front()->entries[i].gram.rows();
    if (priors[i].rows() != d || priors[i].cols() != d) {
      throw DimensionMismatch("prior " + std::to_string(i) + " is " +
                              shape_string(priors[i].rows(), priors[i].cols()) + ", grams are " +
                              shape_string(d, d));
    }
  }
}

Matrix gram_sum(const std::vector<const EditPacket*>& packets, std::size_t layer) {
  Matrix sum = Matrix::Zero(packets.front()->entries[layer].gram.rows(),
                            packets.front()->entries[layer].gram.cols());
  for (const auto* p : packets) sum += p->entries[layer].gram;
  return sum;
}

}  // namespace

void validate_packet(const EditPacket& packet) {
  for (const auto& e : packet.entries) {
    const std::string where = packet_label(packet) + " layer " + std::to_string(e.layer_id);
    if (e.gram.rows() != e.gram.cols()) throw DimensionMismatch(where + ": gram is not square");
    if (e.delta.cols() != e.gram.rows()) {
      throw DimensionMismatch(where + ": delta is " + shape_string(e.delta.rows(), e.delta.cols()) +
                              ", gram is " + shape_string(e.gram.rows(), e.gram.cols()));
    }
    if (!all_finite(e.delta) || !all_finite(e.gram)) {
      throw InvalidArgument(where + ": non-finite entries");
    }
    if (!is_symmetric(e.gram, kPsdTolerance)) throw InvalidArgument(where + ": gram is not symmetric");
    if (e.gram.size() == 0) continue;
    // PSD within tolerance iff G + tol·‖G‖·I admits a Cholesky factor.
    const double shift = kPsdTolerance * std::max(1.0, e.gram.norm());
    Matrix shifted = e.gram;
    shifted.diagonal().array() += shift;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) {
      throw InvalidArgument(where + ": gram is not positive semi-definite");
    }
  }
}

std::string_view strategy_name(const MergeStrategy& strategy) {
  return std::visit(Overloaded{
                        [](const CollabEdit&) { return std::string_view("collabedit"); },
                        [](const SimpleAverage&) { return std::string_view("sa"); },
                        [](const TaskArithmetic&) { return std::string_view("ta"); },
                        [](const TiesMerging&) { return std::string_view("ties"); },
                    },
                    strategy);
}

void validate_strategy(const MergeStrategy& strategy) {
  std::visit(Overloaded{
                 [](const CollabEdit&) {},
                 [](const SimpleAverage&) {},
                 [](const TaskArithmetic& ta) {
                   if (!std::isfinite(ta.lambda)) throw InvalidArgument("ta: lambda must be finite");
                 },
                 [](const TiesMerging& t) {
                   if (!(t.keep_frac > 0.0 && t.keep_frac <= 1.0)) {
                     throw InvalidArgument("ties: keep_frac must be in (0, 1]");
                   }
                   if (!std::isfinite(t.lambda)) throw InvalidArgument("ties: lambda must be finite");
                 },
             },
             strategy);
}

std::vector<Matrix> base_priors(const LayerStack& stack, const PriorMode& mode) {
  return std::visit(
      Overloaded{
          [&](const CovariancePrior&) { return layer_priors(stack); },
          [&](const IdentityPrior& p) {
            const EditRange range = stack.edit_range();
            if (p.kappa.size() != 1 && p.kappa.size() != range.size()) {
              throw InvalidArgument("identity prior: need 1 or " + std::to_string(range.size()) +
                                    " kappa values, got " + std::to_string(p.kappa.size()));
            }
            std::vector<Matrix> out;
            for (std::size_t i = 0; i < range.size(); ++i) {
              const double kappa = p.kappa.size() == 1 ? p.kappa[0] : p.kappa[i];
              if (!(kappa > 0.0) || !std::isfinite(kappa)) {
                throw InvalidArgument("identity prior: kappa must be positive");
              }
              const auto d = stack.layer(range.first + i).W.cols();
              out.push_back(kappa * Matrix::Identity(d, d));
            }
            return out;
          },
      },
      mode);
}

EditPacket client_get_delta_and_kkt(const LayerStack& snapshot, const Matrix& inputs,
                                    const Matrix& targets, std::span<const Matrix> priors,
                                    std::uint32_t client_id, std::uint32_t round) {
  EditPacket packet{client_id, round, {}};
  if (inputs.cols() == 0) return packet;
  LayerStack local = snapshot;
  for (auto& e : edit_stack_in_place(local, inputs, targets, priors)) {
    packet.entries.push_back(
        PacketEntry{static_cast<std::uint16_t>(e.layer), std::move(e.delta), std::move(e.gram)});
  }
  return packet;
}

EditPacket client_get_delta_and_kkt(const LayerStack& snapshot, const Universe& universe,
                                    std::span<const EditRequest> requests,
                                    std::span<const Matrix> priors, std::uint32_t client_id,
                                    std::uint32_t round) {
  if (requests.empty()) return EditPacket{client_id, round, {}};
  return client_get_delta_and_kkt(snapshot, universe.inputs(requests), universe.targets(requests),
                                  priors, client_id, round);
}

std::vector<Matrix> server_collab_merge(std::span<const EditPacket> packets,
                                        std::span<const Matrix> priors, const EditRange& range) {
  const auto ordered = ordered_packets(packets, range);
  check_priors(priors, range, ordered);
  std::vector<Matrix> out;
  if (ordered.empty()) return out;
  for (std::size_t i = 0; i < range.size(); ++i) {
    const Matrix& c = priors[i];
    const Matrix a = c + gram_sum(ordered, i);
    Matrix numer = Matrix::Zero(ordered.front()->entries[i].delta.rows(), c.cols());
    for (const auto* p : ordered) numer.noalias() += p->entries[i].delta * (c + p->entries[i].gram);
    // Δ_G A = N  <=>  A Δ_Gᵀ = Nᵀ.
    out.push_back(solve_spd(a, numer.transpose()).transpose());
  }
  return out;
}

Matrix ties_merge(std::span<const Matrix> deltas, double keep_frac, double lambda) {
  if (deltas.empty()) throw InvalidArgument("ties: no deltas");
  if (!(keep_frac > 0.0 && keep_frac <= 1.0)) throw InvalidArgument("ties: keep_frac must be in (0, 1]");
  const auto rows = deltas.front().rows();
  const auto cols = deltas.front().cols();
  const auto n = static_cast<std::size_t>(rows * cols);
  const auto keep = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(keep_frac * static_cast<double>(n) - 1e-12)));

  std::vector<Matrix> trimmed;
  trimmed.reserve(deltas.size());
  std::vector<std::size_t> order(n);
  for (const auto& d : deltas) {
    if (d.rows() != rows || d.cols() != cols) throw DimensionMismatch("ties: delta shapes differ");
    const double* x = d.data();
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto by_magnitude = [x](std::size_t a, std::size_t b) {
      const double fa = std::abs(x[a]);
      const double fb = std::abs(x[b]);
      return fa > fb || (fa == fb && a < b);
    };
    Matrix t = Matrix::Zero(rows, cols);
    if (keep > 0) {
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                       order.end(), by_magnitude);
      for (std::size_t j = 0; j < keep; ++j) t.data()[order[j]] = x[order[j]];
    }
    trimmed.push_back(std::move(t));
  }

  Matrix elected = Matrix::Zero(rows, cols);
  for (const auto& t : trimmed) elected += t;
  Matrix merged = Matrix::Zero(rows, cols);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = elected.data()[j];
    if (s == 0.0) continue;
    double sum = 0.0;
    int count = 0;
    for (const auto& t : trimmed) {
      const double v = t.data()[j];
      if (v != 0.0 && (v > 0.0) == (s > 0.0)) {
        sum += v;
        ++count;
      }
    }
    if (count > 0) merged.data()[j] = sum / count;
  }
  return lambda * merged;
}

std::vector<Matrix> server_baseline_merge(std::span<const EditPacket> packets,
                                          const MergeStrategy& strategy, const EditRange& range) {
  validate_strategy(strategy);
  const auto ordered = ordered_packets(packets, range);
  std::vector<Matrix> out;
  if (ordered.empty()) return out;
  for (std::size_t i = 0; i < range.size(); ++i) {
    std::vector<Matrix> deltas;
    for (const auto* p : ordered) deltas.push_back(p->entries[i].delta);
    const auto sum = [&] {
      Matrix s = Matrix::Zero(deltas.front().rows(), deltas.front().cols());
      for (const auto& d : deltas) s += d;
      return s;
    };
    out.push_back(std::visit(
        Overloaded{
            [&](const CollabEdit&) -> Matrix {
              throw InvalidArgument("collabedit is not a baseline strategy");
            },
            [&](const SimpleAverage&) -> Matrix {
              return sum() / static_cast<double>(deltas.size());
            },
            [&](const TaskArithmetic& ta) -> Matrix { return ta.lambda * sum(); },
            [&](const TiesMerging& t) -> Matrix {
              return ties_merge(deltas, t.keep_frac, t.lambda);
            },
        },
        strategy));
  }
  return out;
}

std::vector<Matrix> merge_packets(std::span<const EditPacket> packets,
                                  const MergeStrategy& strategy, std::span<const Matrix> priors,
                                  const EditRange& range) {
  if (std::holds_alternative<CollabEdit>(strategy)) {
    return server_collab_merge(packets, priors, range);
  }
  return server_baseline_merge(packets, strategy, range);
}

std::vector<Matrix> gap_formula(std::span<const EditPacket> packets,
                                std::span<const Matrix> priors, const EditRange& range,
                                double lambda) {
  const auto ordered = ordered_packets(packets, range);
  check_priors(priors, range, ordered);
  std::vector<Matrix> out;
  if (ordered.empty()) return out;
  for (std::size_t i = 0; i < range.size(); ++i) {
    const Matrix& c = priors[i];
    const Matrix a = c + gram_sum(ordered, i);
    const auto d = c.rows();
    Matrix gap = Matrix::Zero(ordered.front()->entries[i].delta.rows(), d);
    for (const auto* p : ordered) {
      // (C + G_i) A⁻¹ = (A⁻¹ (C + G_i))ᵀ since both factors are symmetric.
      const Matrix weight = solve_spd(a, c + p->entries[i].gram).transpose();
      gap.noalias() += p->entries[i].delta * (weight - lambda * Matrix::Identity(d, d));
    }
    out.push_back(std::move(gap));
  }
  return out;
}

ServerState::ServerState(LayerStack stack, ServerOptions options)
    : stack_(std::move(stack)), options_(std::move(options)) {
  if (options_.dynamic_covariance) {
    if (!std::isfinite(options_.beta0) || !std::isfinite(options_.beta1) ||
        options_.beta0 < 0.0 || options_.beta1 < 0.0) {
      throw InvalidArgument("server: beta0 and beta1 must be finite and non-negative");
    }
  }
  base_prior_ = base_priors(stack_, options_.prior);
  covariance_ = base_prior_;
  if (options_.dynamic_covariance) {
    for (auto& c : covariance_) c *= options_.beta0;
  }
}

std::vector<Matrix> ServerState::apply_packets(std::span<const EditPacket> packets,
                                               const MergeStrategy& strategy) {
  for (const auto& p : packets) {
    if (p.round != round_) {
      throw StaleSnapshot(packet_label(p) + " was built against round " + std::to_string(p.round) +
                          ", server is at round " + std::to_string(round_));
    }
    validate_packet(p);
  }
  const EditRange range = stack_.edit_range();
  std::vector<Matrix> deltas = merge_packets(packets, strategy, covariance_, range);
  for (std::size_t i = 0; i < deltas.size(); ++i) stack_.apply_delta(range.first + i, deltas[i]);
  if (options_.dynamic_covariance) {
    const auto ordered = ordered_packets(packets, range);
    if (!ordered.empty()) {
      for (std::size_t i = 0; i < range.size(); ++i) {
        covariance_[i] += options_.beta1 * gram_sum(ordered, i);
      }
    }
  }
  ++round_;
  return deltas;
}

RoundReport run_round(ServerState& state, std::span<const ClientEdits> clients,
                      const MergeStrategy& strategy, const RoundOptions& options) {
  validate_strategy(strategy);
  const auto start = std::chrono::steady_clock::now();
  const LayerStack snapshot = state.stack();
  const std::vector<Matrix> priors = state.covariance();
  const std::uint32_t round = state.round();

  std::vector<EditPacket> packets(clients.size());
  const auto work = [&](std::size_t i) {
    return client_get_delta_and_kkt(snapshot, clients[i].inputs, clients[i].targets, priors,
                                    clients[i].client_id, round);
  };
  if (options.parallel_clients && clients.size() > 1) {
    std::vector<std::future<EditPacket>> futures;
    futures.reserve(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
      futures.push_back(std::async(std::launch::async, work, i));
    }
    for (std::size_t i = 0; i < clients.size(); ++i) packets[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < clients.size(); ++i) packets[i] = work(i);
  }

  RoundReport report;
  report.round = round;
  report.strategy = std::string(strategy_name(strategy));
  for (const auto& c : clients) {
    if (c.inputs.cols() > 0) ++report.n_clients;
    report.n_edits += static_cast<std::size_t>(c.inputs.cols());
  }

  const std::vector<Matrix> deltas = state.apply_packets(packets, strategy);

  std::vector<Matrix> global;
  if (options.measure_global_gap && report.n_edits > 0) {
    std::vector<const ClientEdits*> order;
    for (const auto& c : clients) order.push_back(&c);
    std::stable_sort(order.begin(), order.end(), [](const ClientEdits* a, const ClientEdits* b) {
      return a->client_id < b->client_id;
    });
    Matrix inputs(snapshot.input_dim(), static_cast<Eigen::Index>(report.n_edits));
    Matrix targets(snapshot.output_dim(), static_cast<Eigen::Index>(report.n_edits));
    Eigen::Index col = 0;
    for (const auto* c : order) {
      const auto n = c->inputs.cols();
      inputs.middleCols(col, n) = c->inputs;
      targets.middleCols(col, n) = c->targets;
      col += n;
    }
    global = global_stack_edit(snapshot, inputs, targets, priors);
  }

  const EditRange range = snapshot.edit_range();
  for (std::size_t i = 0; i < range.size(); ++i) {
    LayerRoundStats stats;
    stats.layer_id = static_cast<std::uint16_t>(range.first + i);
    if (i < deltas.size()) stats.delta_norm = deltas[i].norm();
    if (i < global.size() && i < deltas.size()) {
      stats.gap_to_global = relative_error(deltas[i], global[i]);
    }
    report.layers.push_back(stats);
  }
  if (options.keep_packets) report.packets = std::move(packets);
  report.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<ClientEdits> to_client_edits(const Universe& universe,
                                         std::span<const std::vector<EditRequest>> per_client) {
  std::vector<ClientEdits> out;
  out.reserve(per_client.size());
  for (std::size_t i = 0; i < per_client.size(); ++i) {
    const auto& reqs = per_client[i];
    ClientEdits c;
    c.client_id = static_cast<std::uint32_t>(i);
    c.inputs = universe.inputs(reqs);
    c.targets = universe.targets(reqs);
    out.push_back(std::move(c));
  }
  return out;
}

RoundReport run_round(ServerState& state, const Universe& universe,
                      std::span<const std::vector<EditRequest>> per_client,
                      const MergeStrategy& strategy, const RoundOptions& options) {
  for (std::size_t i = 0; i < per_client.size(); ++i) {
    for (const auto& r : per_client[i]) {
      if (r.client_id != i) {
        throw InvalidArgument("request for client " + std::to_string(r.client_id) +
                              " listed under client " + std::to_string(i));
      }
      if (r.round != state.round()) {
        throw StaleSnapshot("request stamped round " + std::to_string(r.round) +
                            ", server is at round " + std::to_string(state.round()));
      }
    }
  }
  const auto clients = to_client_edits(universe, per_client);
  return run_round(state, clients, strategy, options);
}

}  // namespace collabedit
