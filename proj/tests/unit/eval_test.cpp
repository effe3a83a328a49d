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

#include "collabedit/eval.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "collabedit/errors.h"

namespace collabedit {
namespace {

struct Model {
  Universe universe;
  InitializedLayer init;
  LayerStack stack;
};

Model make_model(Eigen::Index d_key = 64, Eigen::Index d_val = 48, std::size_t n_init = 512,
                 double mu = 1.5e4, std::uint64_t seed = 1) {
  FeatureMapConfig cfg;
  cfg.d_key = d_key;
  cfg.d_val = d_val;
  Universe u(cfg);
  LayerInitOptions opts;
  opts.mu = mu;
  auto init = init_layer(u, n_init, seed, opts);
  LayerStack stack = LayerStack::memory(init.layer);
  return Model{std::move(u), std::move(init), std::move(stack)};
}

LayerStack edited(const Model& m, std::span<const EditRequest> reqs, const Matrix& prior) {
  LayerStack s = m.stack;
  s.apply_delta(0, global_edit(m.init.layer, m.universe, reqs, prior));
  return s;
}

TEST(ObjectDistributionTest, UniformWhenEquidistant) {
  Model m = make_model(8, 6, 16);
  m.stack.layer(0).W.setZero();
  const auto dist = object_distribution(m.stack, m.universe.codebook, key_of(m.universe.config, 1, 1), 0.1);
  const double expected = 1.0 / static_cast<double>(m.universe.codebook.size());
  for (Eigen::Index o = 0; o < dist.size(); ++o) EXPECT_NEAR(dist.prob(o), expected, 1e-12);
}

TEST(ObjectDistributionTest, SmallTemperatureConcentratesOnNearest) {
  const Model m = make_model(16, 12, 64);
  const Vector k = m.init.base_keys.col(0);
  const auto sharp = object_distribution(m.stack, m.universe.codebook, k, 1e-4);
  const auto soft = object_distribution(m.stack, m.universe.codebook, k, 10.0);
  EXPECT_EQ(sharp.argmax(), soft.argmax());
  EXPECT_GT(sharp.prob(sharp.argmax()), 0.999);
  EXPECT_LT(soft.prob(soft.argmax()), 0.5);
}

TEST(ObjectDistributionTest, TwoObjectHandInstance) {
  FeatureMapConfig cfg;
  cfg.d_key = 2;
  cfg.d_val = 2;
  cfg.codebook_size = 2;
  Universe u(cfg);
  SyntheticLayer layer;
  layer.W = Matrix::Identity(2, 2);
  layer.C0 = Matrix::Identity(2, 2);
  const LayerStack stack = LayerStack::memory(layer);
  Vector k(2);
  k << 0.6, 0.8;
  const double d0 = (k - u.codebook.vectors().col(0)).squaredNorm();
  const double d1 = (k - u.codebook.vectors().col(1)).squaredNorm();
  const double tau = 0.5;
  const double p0 = 1.0 / (1.0 + std::exp(-(d1 - d0) / tau));
  EXPECT_NEAR(prob_of(stack, u.codebook, k, 0, tau), p0, 1e-14);
  EXPECT_NEAR(prob_of(stack, u.codebook, k, 1, tau), 1.0 - p0, 1e-14);
}

TEST(ObjectDistributionTest, NormalizedAndBounded) {
  const Model m = make_model();
  for (Eigen::Index j = 0; j < 20; ++j) {
    for (double tau : {1e-3, 0.1, 5.0}) {
      const auto dist = object_distribution(m.stack, m.universe.codebook, m.init.base_keys.col(j), tau);
      EXPECT_NEAR(dist.log_probs().array().exp().sum(), 1.0, 1e-12);
      EXPECT_LE(dist.log_probs().maxCoeff(), 0.0);
    }
  }
}

TEST(ObjectDistributionTest, RejectsUnknownObject) {
  const Model m = make_model(8, 6, 16);
  EXPECT_THROW(prob_of(m.stack, m.universe.codebook, m.init.base_keys.col(0), 999, 0.1),
               InvalidArgument);
}

TEST(EfficacyScoreTest, InterpolationLimitIsPerfect) {
  const Model m = make_model();
  const auto reqs = flatten(sample_edit_requests(m.universe, 20, 1, 2, m.init.layer.base_facts));
  const LayerStack s = edited(m, reqs, 1e-10 * Matrix::Identity(64, 64));
  EXPECT_EQ(efficacy_score(s, m.universe, reqs), 100.0);
}

TEST(EfficacyScoreTest, UneditedLayerIsNearChance) {
  const Model m = make_model();
  const auto reqs = flatten(sample_edit_requests(m.universe, 200, 1, 3, m.init.layer.base_facts));
  const double es = efficacy_score(m.stack, m.universe, reqs);
  EXPECT_GE(es, 0.0);
  EXPECT_LE(es, 100.0);
  RecordProperty("unedited_es", std::to_string(es));
}

TEST(EfficacyScoreTest, EmptyRequestsRejected) {
  const Model m = make_model(8, 6, 16);
  EXPECT_THROW(efficacy_score(m.stack, m.universe, {}), InvalidArgument);
}

TEST(ParaphraseScoreTest, ZeroSigmaUsesStrictComparison) {
  Model m = make_model();
  m.universe.config.paraphrase_sigma = 0.0;
  const auto reqs = flatten(sample_edit_requests(m.universe, 30, 1, 2, m.init.layer.base_facts));
  const LayerStack s = edited(m, reqs, m.init.layer.C0);
  EXPECT_LE(paraphrase_score(s, m.universe, reqs, EvalOptions{}), efficacy_score(s, m.universe, reqs));
  // A request whose new and old objects coincide ties: counted by ES, not PS.
  std::vector<EditRequest> tie = {reqs[0]};
  tie[0].old_object = tie[0].fact.object;
  EXPECT_EQ(efficacy_score(s, m.universe, tie), 100.0);
  EXPECT_EQ(paraphrase_score(s, m.universe, tie, EvalOptions{}), 0.0);
}

TEST(ParaphraseScoreTest, DropsAsParaphrasesDrift) {
  Model m = make_model();
  const auto reqs = flatten(sample_edit_requests(m.universe, 100, 1, 2, m.init.layer.base_facts));
  const LayerStack s = edited(m, reqs, 1e-2 * m.init.layer.C0);
  EvalOptions opts;
  opts.n_paraphrases = 4;
  std::vector<double> scores;
  for (double sigma : {0.0, 0.5, 2.0, 8.0}) {
    m.universe.config.paraphrase_sigma = sigma;
    scores.push_back(paraphrase_score(s, m.universe, reqs, opts));
  }
  EXPECT_GT(scores.front(), scores.back());
}

TEST(NeighborhoodScoreTest, NoEditsMeansVacuousPreservation) {
  const Model m = make_model();
  const auto neighbors = select_neighbors(m.init.layer.base_facts, {}, 4, 1);
  EXPECT_TRUE(neighbors.empty());
  EXPECT_EQ(neighborhood_score(m.stack, m.universe, neighbors), 100.0);
}

TEST(NeighborhoodScoreTest, LargerPriorPreservesMore) {
  const Model small = make_model(64, 48, 512, 10.0, 3);
  const Model large = make_model(64, 48, 512, 1e5, 3);
  const auto reqs = flatten(sample_edit_requests(small.universe, 100, 1, 4, small.init.layer.base_facts));
  const auto neighbors = select_neighbors(small.init.layer.base_facts, reqs, 4, 5);
  const double ns_small = neighborhood_score(edited(small, reqs, small.init.layer.C0), small.universe, neighbors);
  const double ns_large = neighborhood_score(edited(large, reqs, large.init.layer.C0), large.universe, neighbors);
  EXPECT_GT(ns_large, ns_small);
}

TEST(NeighborhoodScoreTest, HandInstance) {
  FeatureMapConfig cfg;
  cfg.d_key = 2;
  cfg.d_val = 2;
  cfg.codebook_size = 3;
  Universe u(cfg);
  SyntheticLayer layer;
  layer.C0 = Matrix::Identity(2, 2);
  // Maps (s, r) = (0, 0) exactly onto object 2's value.
  const Vector k = key_of(cfg, 0, 0);
  layer.W = u.codebook.vectors().col(2) * k.transpose();
  const LayerStack stack = LayerStack::memory(layer);
  const std::vector<Neighbor> keeps = {Neighbor{Fact{0, 0, 2}, 0, false}};
  const std::vector<Neighbor> loses = {Neighbor{Fact{0, 0, 0}, 2, false}};
  EXPECT_EQ(neighborhood_score(stack, u, keeps), 100.0);
  EXPECT_EQ(neighborhood_score(stack, u, loses), 0.0);
}

TEST(SelectNeighborsTest, PrefersSharedRelationAndOldObject) {
  const Model m = make_model();
  const auto reqs = flatten(sample_edit_requests(m.universe, 50, 1, 2, m.init.layer.base_facts));
  const auto neighbors = select_neighbors(m.init.layer.base_facts, reqs, 4, 1);
  EXPECT_EQ(neighbors.size(), 200u);
  std::size_t idx = 0;
  for (const auto& r : reqs) {
    for (int j = 0; j < 4; ++j, ++idx) {
      const auto& n = neighbors[idx];
      EXPECT_EQ(n.new_object, r.fact.object);
      EXPECT_NE(n.fact.object, r.fact.object);
      if (!n.fallback) {
        EXPECT_EQ(n.fact.relation, r.fact.relation);
        EXPECT_EQ(n.fact.object, r.old_object);
      }
    }
  }
  EXPECT_EQ(select_neighbors(m.init.layer.base_facts, reqs, 4, 1).size(), neighbors.size());
}

TEST(AccuracyMetricsTest, InterpolationGivesFullEfficacyAccuracy) {
  const Model m = make_model();
  const auto reqs = flatten(sample_edit_requests(m.universe, 20, 1, 2, m.init.layer.base_facts));
  const LayerStack s = edited(m, reqs, 1e-10 * Matrix::Identity(64, 64));
  EXPECT_EQ(accuracy_metrics(s, m.universe, reqs, {}, EvalOptions{}).EA, 100.0);
}

TEST(AccuracyMetricsTest, HandInstance) {
  FeatureMapConfig cfg;
  cfg.d_key = 2;
  cfg.d_val = 2;
  cfg.codebook_size = 3;
  cfg.paraphrase_sigma = 0.0;
  Universe u(cfg);
  SyntheticLayer layer;
  layer.C0 = Matrix::Identity(2, 2);
  const Vector k = key_of(cfg, 0, 0);
  layer.W = u.codebook.vectors().col(1) * k.transpose();
  const LayerStack stack = LayerStack::memory(layer);
  const std::vector<EditRequest> hit = {{Fact{0, 0, 1}, 0, 0, 0}};
  const std::vector<EditRequest> miss = {{Fact{0, 0, 2}, 0, 0, 0}};
  EXPECT_EQ(accuracy_metrics(stack, u, hit, {}, EvalOptions{}).EA, 100.0);
  EXPECT_EQ(accuracy_metrics(stack, u, hit, {}, EvalOptions{}).PA, 100.0);
  EXPECT_EQ(accuracy_metrics(stack, u, miss, {}, EvalOptions{}).EA, 0.0);
}

TEST(MetricsTest, TemperatureInvariance) {
  const Model m = make_model();
  const auto reqs = flatten(sample_edit_requests(m.universe, 60, 1, 7, m.init.layer.base_facts));
  const auto neighbors = select_neighbors(m.init.layer.base_facts, reqs, 4, 1);
  const LayerStack s = edited(m, reqs, m.init.layer.C0);
  EvalOptions a;
  EvalOptions b;
  b.tau = 37.0;
  const Metrics ma = evaluate(s, m.universe, reqs, neighbors, a);
  const Metrics mb = evaluate(s, m.universe, reqs, neighbors, b);
  EXPECT_EQ(ma.ES, mb.ES);
  EXPECT_EQ(ma.PS, mb.PS);
  EXPECT_EQ(ma.NS, mb.NS);
  EXPECT_EQ(ma.EA, mb.EA);
  EXPECT_EQ(ma.PA, mb.PA);
  EXPECT_EQ(ma.NA, mb.NA);
  // Direct probability comparison agrees with the distance comparison.
  for (std::size_t i = 0; i < 10; ++i) {
    const Vector k = key_of(m.universe.config, reqs[i].fact.subject, reqs[i].fact.relation);
    for (double tau : {0.01, 1.0}) {
      const auto dist = object_distribution(s, m.universe.codebook, k, tau);
      const bool wins = dist.log_prob(reqs[i].fact.object) >= dist.log_prob(reqs[i].old_object);
      EXPECT_EQ(wins, efficacy_score(s, m.universe, std::span(&reqs[i], 1)) == 100.0);
    }
  }
}

TEST(MetricsTest, HarmonicScore) {
  EXPECT_DOUBLE_EQ(harmonic_score(50.0, 80.0, 100.0), 3.0 / (1.0 / 50 + 1.0 / 80 + 1.0 / 100));
  EXPECT_EQ(harmonic_score(0.0, 80.0, 100.0), 0.0);
  EXPECT_DOUBLE_EQ(harmonic_score(100.0, 100.0, 100.0), 100.0);
}

TEST(MetricsTest, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), InvalidArgument);
}

TEST(PredictedObjectsTest, DeskModelStoresEveryBaseFact) {
  ScenarioConfig cfg;
  cfg.features.d_key = 256;
  cfg.features.d_val = 256;
  cfg.n_init = 512;
  cfg.init.mu = 234.375;
  const Scenario s = make_scenario(cfg);
  const auto predicted = predicted_objects(s.stack, s.universe.codebook, s.base_inputs);
  ASSERT_EQ(predicted.size(), s.base_facts.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    EXPECT_EQ(predicted[i], s.base_facts[i].object) << "base fact " << i;
  }
}

TEST(GapCurveTest, ShapeAndCollabEditIdentity) {
  GapCurveConfig cfg;
  cfg.sizes = {64, 512};
  cfg.seeds = {1, 2, 3};
  const GapCurveResult r = gap_curve(cfg);
  EXPECT_EQ(r.rows.size(), 2u * 3u * 4u);
  EXPECT_EQ(r.medians.size(), 2u * 4u);
  for (const auto& row : r.rows) {
    if (row.strategy == "collabedit") {
      EXPECT_LE(row.weight_gap, 1e-8);
    }
    EXPECT_EQ(row.n_clients, row.size / 64);
  }
  auto med = [&](std::size_t size, const std::string& name) {
    for (const auto& m : r.medians) {
      if (m.size == size && m.strategy == name) return m.weight_gap;
    }
    return -1.0;
  };
  EXPECT_GT(med(512, "ta"), med(64, "ta"));
}

TEST(GapCurveTest, Deterministic) {
  GapCurveConfig cfg;
  cfg.sizes = {64, 128};
  cfg.seeds = {4};
  const auto a = gap_curve(cfg);
  const auto b = gap_curve(cfg);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].weight_gap, b.rows[i].weight_gap);
    EXPECT_EQ(a.rows[i].score_merged, b.rows[i].score_merged);
  }
}

}  // namespace
}  // namespace collabedit
