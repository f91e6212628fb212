// Copyright 2026 The Hopview Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "hopview/ablation.hpp"
#include "hopview/eval.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <regex>

namespace fs = std::filesystem;
using namespace hopview;

namespace {

GraphBundle sbm(std::uint64_t seed, double p_in, double p_out, std::size_t n = 200) {
  SbmSpec s;
  s.num_nodes = n;
  s.num_classes = 2;
  s.p_in = p_in;
  s.p_out = p_out;
  s.feature_dim = 16;
  s.train_per_class = 10;
  s.val_count = 20;
  s.seed = seed;
  return make_sbm(s);
}

}  // namespace

TEST(Probe, SeparableDataScoresNearPerfect) {
  SbmSpec s;
  s.num_nodes = 300;
  s.num_classes = 3;
  s.feature_dim = 8;
  s.signal = 4.0;
  s.noise = 0.5;
  s.p_in = s.p_out = 0.0;
  const auto g = make_sbm(s);
  ProbeConfig pc;
  pc.runs = 3;
  const auto r = probe(Matrix<float>(g.features), *g.labels, 3, *g.splits, pc);
  EXPECT_GE(r.mean, 0.98);
  EXPECT_EQ(r.accuracy.size(), 3u);
}

TEST(Probe, ShuffledLabelsScoreNearChance) {
  SbmSpec s;
  s.num_nodes = 600;
  s.num_classes = 4;
  s.feature_dim = 8;
  s.signal = 4.0;
  s.p_in = s.p_out = 0.0;
  const auto g = make_sbm(s);
  auto y = *g.labels;
  Rng rng(1);
  const auto perm = random_permutation(y.size(), rng);
  std::vector<int> shuffled(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) shuffled[i] = y[perm[i]];
  ProbeConfig pc;
  pc.runs = 3;
  const auto r = probe(Matrix<float>(g.features), shuffled, 4, *g.splits, pc);
  EXPECT_LT(r.mean, 0.35);
}

TEST(Probe, RunsAreSeededAndRepeatable) {
  const auto g = sbm(1, 0.05, 0.01);
  ProbeConfig pc;
  pc.runs = 4;
  const auto a = probe(Matrix<float>(g.features), *g.labels, 2, *g.splits, pc);
  const auto b = probe(Matrix<float>(g.features), *g.labels, 2, *g.splits, pc);
  EXPECT_EQ(a.accuracy, b.accuracy);
}

TEST(Probe, RejectsBadInput) {
  const auto g = sbm(1, 0.05, 0.01);
  ProbeConfig pc;
  pc.runs = 0;
  EXPECT_THROW(probe(Matrix<float>(g.features), *g.labels, 2, *g.splits, pc), ConfigError);
  pc.runs = 1;
  Splits empty;
  EXPECT_THROW(probe(Matrix<float>(g.features), *g.labels, 2, empty, pc), DataError);
}

TEST(FormatAccuracy, OneDecimalMeanAndSpread) {
  ProbeResult r;
  r.mean = 0.8421;
  r.std = 0.0049;
  EXPECT_EQ(format_accuracy(r), "84.2±0.5");
  r.mean = 0.705;
  r.std = 0.0;
  EXPECT_TRUE(std::regex_match(format_accuracy(r), std::regex(R"(\d+\.\d±0\.0)")));
}

TEST(Infer, UsesNoSparseOps) {
  const auto g = sbm(2, 0.05, 0.01);
  TrainConfig cfg = preset("cora");
  cfg.hidden = 8;
  cfg.epochs = 2;
  cfg.pool_size = 1;
  const auto p = prepare<float>(g, cfg);
  const auto res = train<float>(p.inputs(), cfg);
  const auto before = sparse_op_count();
  const auto H = infer(res.state.model, p.positive.hop(2));
  EXPECT_EQ(sparse_op_count(), before);
  EXPECT_EQ(H.rows(), 200);
  EXPECT_EQ(H.cols(), 8);
}

TEST(Embeddings, RoundTrip) {
  Matrix<float> H(5, 3);
  for (Eigen::Index i = 0; i < H.size(); ++i) H.data()[i] = 0.5f * i - 1;
  const auto dir = fs::temp_directory_path() / "hopview_eval_emb";
  fs::remove_all(dir);
  save_embeddings(H, {"aa", "bb"}, dir);
  EXPECT_EQ(load_embeddings(dir), H);
  EXPECT_THROW(load_embeddings(dir / "nowhere"), DataError);
}

TEST(Bench, Smoke) {
  const auto g = sbm(3, 0.05, 0.01);
  TrainConfig cfg = preset("cora");
  cfg.hidden = 8;
  cfg.pool_size = 1;
  const auto rep = bench(g, cfg, BenchConfig{1, 3});
  EXPECT_GT(rep.train_ms_per_epoch, 0);
  EXPECT_GT(rep.infer_ms, 0);
  EXPECT_GT(rep.gcn_forward_ms, 0);
  EXPECT_EQ(rep.sparse_ops_infer, 0u);
  EXPECT_EQ(rep.sparse_ops_gcn, 2u);
  EXPECT_TRUE(rep.to_json().contains("machine"));
}

TEST(Median, OddEvenEmpty) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({}), 0);
}

TEST(Separation, HomophilousSbmGrowsWithHops) {
  const auto g = sbm(5, 0.1, 0.005);
  const auto rep = hop_separation_diagnostic(g, 4, true, 1);
  ASSERT_EQ(rep.score.size(), 5u);
  EXPECT_NEAR(rep.score[0], 0.0, 1e-9);
  EXPECT_GT(rep.score[4], rep.score[1]);
  EXPECT_TRUE(rep.homophily.has_value());
  const auto j = rep.to_json();
  EXPECT_EQ(j["hops"].size(), 5u);
  EXPECT_EQ(j["hops"][2]["hop"], 2);
}

TEST(Separation, CentroidScoreIsScaleFree) {
  Matrix<double> a(2, 1), b(2, 1);
  a << 0, 2;
  b << 10, 12;
  EXPECT_DOUBLE_EQ(centroid_separation(a, b), 10.0);
  EXPECT_DOUBLE_EQ(centroid_separation(a * 3, b * 3), 10.0);
}

TEST(Ablation, GridAndSuiteShape) {
  const auto grid = ablation_grid();
  ASSERT_EQ(grid.size(), 6u);
  EXPECT_EQ(grid.back().mode, WeightMode::kMinMax);
  EXPECT_TRUE(grid.back().structure);
  const auto g = sbm(6, 0.05, 0.01, 100);
  TrainConfig cfg = preset("cora");
  cfg.hidden = 8;
  cfg.epochs = 3;
  cfg.pool_size = 1;
  ProbeConfig pc;
  pc.runs = 1;
  pc.iters = 20;
  const auto cells = ablation_suite(g, cfg, pc, {0, 1}, grid);
  ASSERT_EQ(cells.size(), 6u);
  for (const auto& c : cells) {
    EXPECT_EQ(c.per_seed.size(), 2u);
    EXPECT_GE(c.mean, 0.0);
    EXPECT_LE(c.mean, 1.0);
  }
}
