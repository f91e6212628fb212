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


#include "hopview/eval.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace hopview;

namespace {

GraphBundle sbm(std::uint64_t seed = 0) {
  SbmSpec s;
  s.num_nodes = 120;
  s.num_classes = 3;
  s.p_in = 0.08;
  s.p_out = 0.01;
  s.feature_dim = 16;
  s.train_per_class = 5;
  s.val_count = 20;
  s.seed = seed;
  return make_sbm(s);
}

TrainConfig small_cfg() {
  TrainConfig c = preset("cora");
  c.hidden = 16;
  c.epochs = 30;
  c.lr = 5e-3;
  c.pool_size = 3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hopview_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Preset, PublishedValues) {
  const auto cora = preset("cora");
  EXPECT_EQ(cora.hidden, 512u);
  EXPECT_EQ(cora.hops, 2u);
  EXPECT_EQ(cora.lr, 1e-3);
  EXPECT_EQ(cora.weights.alpha, 1.0);
  EXPECT_EQ(cora.weights.beta, 0.01);
  EXPECT_EQ(cora.weights.gamma, 0.05);
  const auto cs = preset("citeseer");
  EXPECT_EQ(cs.hidden, 1024u);
  EXPECT_EQ(cs.hops, 1u);
  EXPECT_EQ(cs.lr, 5e-4);
  EXPECT_EQ(preset("photo").weights.gamma, 0.02);
  EXPECT_EQ(preset("arxiv-desk").hops, 3u);
  for (const auto& n : preset_names()) EXPECT_NO_THROW(preset(n).check());
  EXPECT_THROW(preset("reddit"), ConfigError);
}

TEST(TrainConfig, RejectsInvalidValues) {
  auto c = small_cfg();
  c.encoder_layers = 2;
  EXPECT_THROW(c.check(), ConfigError);
  c = small_cfg();
  c.mask_prob = 1.5;
  EXPECT_THROW(c.check(), ConfigError);
  c = small_cfg();
  c.lr = 0;
  EXPECT_THROW(c.check(), ConfigError);
  c = small_cfg();
  c.weights.gamma = -1;
  EXPECT_THROW(c.check(), ConfigError);
  c = small_cfg();
  c.structure = false;
  EXPECT_EQ(c.loss_weights().beta, 0.0);
  EXPECT_EQ(c.loss_weights().gamma, 0.0);
  EXPECT_EQ(c.loss_weights().alpha, 1.0);
}

TEST(WeightMode, ParseRoundTrip) {
  for (auto m : {WeightMode::kMinMax, WeightMode::kMin, WeightMode::kFixedLast, WeightMode::kFixedUniform})
    EXPECT_EQ(parse_weight_mode(to_string(m)), m);
  EXPECT_THROW(parse_weight_mode("max"), ConfigError);
}

TEST(Train, LossDecreasesAndLambdaStaysOnSimplex) {
  const auto g = sbm();
  auto cfg = small_cfg();
  cfg.epochs = 60;
  const auto res = train<float>(g, cfg);
  ASSERT_EQ(res.metrics.size(), 60u);
  double first = 0, last = 0;
  for (int e = 0; e < 5; ++e) first += res.metrics[e].loss.total;
  for (int e = 55; e < 60; ++e) last += res.metrics[e].loss.total;
  EXPECT_LT(last, first);
  for (const auto& m : res.metrics) {
    double s = 0;
    for (double l : m.lambda) {
      EXPECT_GT(l, 0.0);
      s += l;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Train, SingleHopHasNoHopLoss) {
  const auto g = sbm();
  auto cfg = small_cfg();
  cfg.hops = 1;
  const auto res = train<double>(g, cfg);
  for (const auto& m : res.metrics) {
    EXPECT_EQ(m.lambda, std::vector<double>{1.0});
    EXPECT_NEAR(m.loss.total, m.loss.gd + 0.05 * m.loss.degree, 1e-12);
  }
}

TEST(Train, ZeroLambdaRateFreezesHopWeights) {
  const auto g = sbm();
  auto cfg = small_cfg();
  cfg.lr_lambda = 0.0;
  const auto res = train<float>(g, cfg);
  for (const auto& m : res.metrics) EXPECT_EQ(m.lambda, res.metrics.front().lambda);
}

TEST(Train, FixedModesReportFixedWeights) {
  const auto g = sbm();
  auto cfg = small_cfg();
  cfg.epochs = 3;
  cfg.weight_mode = WeightMode::kFixedLast;
  EXPECT_EQ(train<float>(g, cfg).metrics.back().lambda, (std::vector<double>{0.0, 1.0}));
  cfg.weight_mode = WeightMode::kFixedUniform;
  EXPECT_EQ(train<float>(g, cfg).metrics.back().lambda, (std::vector<double>{1.0, 1.0}));
}

TEST(Train, MaxStepDoesNotLowerTheLoss) {
  // One ascent step on the hop-weight logits, everything else frozen, on
  // the batch it was computed from.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto in = oracle::random_instance(300 + seed, 16, 8, 3);
    const std::size_t K = in.pos.K();
    if (K < 2) continue;
    const LossWeights w{1.0, 0.01, 0.05};
    Vector<double> lam = softmax(in.logits);
    const Matrix<double> proj = in.batch.rows * in.model.encoder.weight;
    SagdGrads<double> g;
    const auto before = sagd_evaluate<double>(in.batch, proj, in.model, {lam.data(), K}, w, &g, false);
    const Vector<double> dl = softmax_backward<double>(lam, g.lambda);
    Adam<double> opt;
    opt.begin_step();
    opt.update({in.logits.data(), K}, {dl.data(), K}, 1e-4, Direction::kAscend);
    lam = softmax(in.logits);
    const auto after = sagd_evaluate<double>(in.batch, proj, in.model, {lam.data(), K}, w);
    EXPECT_GE(after.total, before.total) << seed;
  }
}

TEST(Train, DeterministicAcrossRunsAndThreadCounts) {
  const auto g = sbm(4);
  auto cfg = small_cfg();
  cfg.seed = 9;
  const auto dir = scratch("det");
  std::vector<std::string> ckpts, streams;
  for (int threads : {1, 1, 3}) {
    set_num_threads(threads);
    const auto res = train<float>(g, cfg);
    const auto path = dir / ("ckpt_" + std::to_string(ckpts.size()) + ".bin");
    save_checkpoint(res.state, path);
    ckpts.push_back(slurp(path));
    std::string s;
    for (const auto& m : res.metrics) s += to_json(m, false).dump() + "\n";
    streams.push_back(s);
  }
  set_num_threads(0);
  EXPECT_EQ(ckpts[0], ckpts[1]);
  EXPECT_EQ(ckpts[0], ckpts[2]);
  EXPECT_EQ(streams[0], streams[1]);
  EXPECT_EQ(streams[0], streams[2]);

  cfg.seed = 10;
  const auto other = train<float>(g, cfg);
  save_checkpoint(other.state, dir / "other.bin");
  EXPECT_NE(slurp(dir / "other.bin"), ckpts[0]);
}

TEST(Train, PatienceStopsEarlyAndKeepsBest) {
  const auto g = sbm();
  auto cfg = small_cfg();
  cfg.epochs = 400;
  cfg.lr = 0.05;
  cfg.patience = 3;
  const auto res = train<float>(g, cfg);
  EXPECT_LT(res.metrics.size(), 400u);
}

TEST(Train, RejectsMismatchedHops) {
  const auto g = sbm();
  auto cfg = small_cfg();
  const auto p = prepare<float>(g, cfg);
  cfg.hops = 3;
  EXPECT_THROW(train<float>(p.inputs(), cfg), ConfigError);
}

TEST(Checkpoint, RoundTrip) {
  const auto g = sbm();
  auto cfg = small_cfg();
  cfg.epochs = 5;
  const auto res = train<float>(g, cfg);
  const auto dir = scratch("ckpt");
  save_checkpoint(res.state, dir / "c.bin");
  const auto back = load_checkpoint(dir / "c.bin", cfg.activation, cfg.aux_heads, cfg.weight_mode);
  EXPECT_EQ(back.model.encoder.weight, res.state.model.encoder.weight);
  EXPECT_EQ(back.model.encoder.slope, res.state.model.encoder.slope);
  EXPECT_EQ(back.model.hop.bias, res.state.model.hop.bias);
  EXPECT_EQ(back.lambda.logits, res.state.lambda.logits);
  save_checkpoint(back, dir / "d.bin");
  EXPECT_EQ(slurp(dir / "c.bin"), slurp(dir / "d.bin"));
  const auto h = 16u, d = 16u;
  EXPECT_EQ(fs::file_size(dir / "c.bin"), 5u + 12u + 4u * (d * h + h + 1 + 3 * (h * h + h) + 2));
}

TEST(Checkpoint, RejectsDamage) {
  const auto dir = scratch("damage");
  EXPECT_THROW(load_checkpoint(dir / "none.bin", Activation::kPrelu, AuxHeads::kLearned, WeightMode::kMinMax),
               DataError);
  std::ofstream(dir / "bad.bin") << "SAGD2xxxxxxxxxxxxxxxx";
  EXPECT_THROW(load_checkpoint(dir / "bad.bin", Activation::kPrelu, AuxHeads::kLearned, WeightMode::kMinMax),
               DataError);
  const auto g = sbm();
  auto cfg = small_cfg();
  cfg.epochs = 1;
  save_checkpoint(train<float>(g, cfg).state, dir / "t.bin");
  fs::resize_file(dir / "t.bin", fs::file_size(dir / "t.bin") - 1);
  EXPECT_THROW(load_checkpoint(dir / "t.bin", Activation::kPrelu, AuxHeads::kLearned, WeightMode::kMinMax),
               DataError);
}

TEST(Prepare, ViewAndPoolManifests) {
  const auto g = sbm();
  const auto cfg = small_cfg();
  const auto p = prepare<float>(g, cfg);
  EXPECT_EQ(p.positive.manifest, view_manifest(bundle_digest(g), cfg.hops, cfg.self_loops));
  EXPECT_EQ(p.pool.size(), cfg.pool_size);
  EXPECT_EQ(p.pool.seed, stream_seed(cfg.seed, kPoolStream));
  EXPECT_EQ(p.pool.entries[1].views.manifest,
            view_manifest(bundle_digest(g), cfg.hops, cfg.self_loops, 2, p.pool.seed));
}
