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

// Two-step min-max training over the hop views.
//
// Per epoch, on one sampled batch:
//   1. max: encoder and heads frozen, Adam-ascend the hop-weight logits
//   2. min: hop weights frozen at their new value, Adam-descend everything else
//
// Hop weights are softmax(logits), so they stay on the simplex.

#pragma once

#include "hopview/graph.hpp"
#include "hopview/nn.hpp"
#include "hopview/perturb.hpp"
#include "hopview/sagd.hpp"
#include "hopview/views.hpp"

#include <json.hpp>

#include <chrono>
#include <functional>
#include <limits>

namespace hopview {

enum class WeightMode {
  kMinMax,        // ascend lambda, descend theta
  kMin,           // descend lambda and theta jointly
  kFixedLast,     // lambda = [0, ..., 0, 1]
  kFixedUniform,  // lambda = [1, ..., 1]
};

inline WeightMode parse_weight_mode(std::string_view s) {
  if (s == "minmax") return WeightMode::kMinMax;
  if (s == "min") return WeightMode::kMin;
  if (s == "fixed_last") return WeightMode::kFixedLast;
  if (s == "fixed_uniform") return WeightMode::kFixedUniform;
  throw ConfigError("unknown weight_mode: " + std::string(s));
}

inline const char* to_string(WeightMode m) {
  switch (m) {
    case WeightMode::kMinMax: return "minmax";
    case WeightMode::kMin: return "min";
    case WeightMode::kFixedLast: return "fixed_last";
    case WeightMode::kFixedUniform: return "fixed_uniform";
  }
  return "?";
}

inline AuxHeads parse_aux_heads(std::string_view s) {
  if (s == "learned") return AuxHeads::kLearned;
  if (s == "sum") return AuxHeads::kSum;
  throw ConfigError("unknown aux_heads: " + std::string(s));
}

inline const char* to_string(AuxHeads a) { return a == AuxHeads::kLearned ? "learned" : "sum"; }
inline const char* to_string(HopLabelMode m) { return m == HopLabelMode::kBinary ? "binary" : "soft"; }

struct TrainConfig {
  std::string preset = "cora";
  std::size_t hops = 2;
  std::size_t hidden = 512;
  double mask_prob = 0.2;
  std::size_t epochs = 500;
  double lr = 1e-3;
  std::optional<double> lr_lambda;  // defaults to lr
  LossWeights weights;
  bool structure = true;
  std::size_t pool_size = 8;
  std::uint64_t seed = 0;
  bool self_loops = true;
  Activation activation = Activation::kPrelu;
  HopLabelMode hop_label_mode = HopLabelMode::kBinary;
  WeightMode weight_mode = WeightMode::kMinMax;
  AuxHeads aux_heads = AuxHeads::kLearned;
  bool mask_negatives = false;
  std::size_t encoder_layers = 1;
  std::size_t patience = 0;  // 0 disables early stopping

  double lambda_lr() const { return lr_lambda.value_or(lr); }

  /// Loss weights after the structure switch.
  LossWeights loss_weights() const {
    LossWeights w = weights;
    if (!structure) w.beta = w.gamma = 0.0;
    return w;
  }

  void check() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (hops < 1) throw ConfigError("hops must be >= 1");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (lambda_lr() < 0) throw ConfigError("lr_lambda must be >= 0");
    if (!(mask_prob >= 0 && mask_prob <= 1)) throw ConfigError("mask_prob must lie in [0, 1]");
    if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
    if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0)
      throw ConfigError("loss weights must be non-negative");
    if (encoder_layers != 1)
      throw ConfigError("encoder_layers = " + std::to_string(encoder_layers) +
                        " is not supported; analytic gradients exist for a single layer only");
  }
};

/// Per-dataset presets. Epoch counts are not part of the published settings.
inline TrainConfig preset(std::string_view name) {
  TrainConfig c;
  c.preset = std::string(name);
  auto set = [&](std::size_t hidden, std::size_t hops, double lr, double gamma, std::size_t epochs) {
    c.hidden = hidden;
    c.hops = hops;
    c.lr = lr;
    c.weights = {1.0, 0.01, gamma};
    c.epochs = epochs;
  };
  if (name == "cora") set(512, 2, 1e-3, 0.05, 500);
  else if (name == "citeseer") set(1024, 1, 5e-4, 0.05, 500);
  else if (name == "pubmed") set(1024, 2, 1e-3, 0.05, 500);
  else if (name == "computers") set(1024, 2, 5e-4, 0.05, 1000);
  else if (name == "photo") set(512, 2, 1e-4, 0.02, 1000);
  else if (name == "arxiv-desk") set(1500, 3, 5e-5, 0.05, 500);
  else throw ConfigError("unknown preset: " + std::string(name));
  return c;
}

inline std::vector<std::string> preset_names() {
  return {"cora", "citeseer", "pubmed", "computers", "photo", "arxiv-desk"};
}

/// Derived seed for an independent purpose under one master seed.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t stream) {
  return Rng(master).split(stream).engine()();
}

enum Stream : std::uint64_t { kInitStream = 1, kMaskStream = 2, kBatchStream = 3, kPoolStream = 4 };

template <class T>
struct LambdaState {
  Vector<T> logits;

  Vector<T> weights() const { return softmax(logits); }

  static LambdaState xavier(std::size_t K, Rng& rng) {
    // A 1 x K tensor: fan_in = K, fan_out = 1.
    LambdaState s;
    const Matrix<T> m = xavier_uniform<T>(K, 1, rng);
    s.logits = Eigen::Map<const Vector<T>>(m.data(), static_cast<Eigen::Index>(K));
    return s;
  }
};

template <class T>
Vector<T> fixed_lambda(WeightMode mode, std::size_t K) {
  if (mode == WeightMode::kFixedUniform) return Vector<T>::Ones(K);
  Vector<T> v = Vector<T>::Zero(K);
  v[K - 1] = T(1);
  return v;
}

template <class T>
struct ModelState {
  Model<T> model;
  LambdaState<T> lambda;
  WeightMode weight_mode = WeightMode::kMinMax;

  /// Hop weights used to scale inputs.
  Vector<T> hop_weights() const {
    if (weight_mode == WeightMode::kMinMax || weight_mode == WeightMode::kMin) return lambda.weights();
    return fixed_lambda<T>(weight_mode, static_cast<std::size_t>(lambda.logits.size()));
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  LossParts<double> loss;
  std::vector<double> lambda;
  double ms = 0;
};

inline nlohmann::ordered_json to_json(const EpochMetrics& m, bool with_time = true) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["total"] = m.loss.total;
  j["L_GD"] = m.loss.gd;
  j["L_hop"] = m.loss.hop;
  j["L_degree"] = m.loss.degree;
  j["lambda"] = m.lambda;
  if (with_time) j["ms"] = m.ms;
  return j;
}

/// Everything training consumes, prepared once.
template <class T>
struct TrainInputs {
  const ViewSet<T>* positive = nullptr;
  const CorruptionPool<T>* pool = nullptr;
  const StructureLabels* labels = nullptr;
};

template <class T>
struct TrainResult {
  ModelState<T> state;
  std::vector<EpochMetrics> metrics;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;

template <class T>
TrainResult<T> train(const TrainInputs<T>& in, const TrainConfig& cfg, const MetricsSink& sink = {}) {
  cfg.check();
  const ViewSet<T>& pos = *in.positive;
  const auto& pool = *in.pool;
  const std::size_t K = pos.K();
  if (K != cfg.hops) throw ConfigError("view cache has K=" + std::to_string(K) + " but hops=" + std::to_string(cfg.hops));
  if (pool.size() == 0) throw ConfigError("empty corruption pool");

  Rng init_rng(stream_seed(cfg.seed, kInitStream));
  Rng mask_rng(stream_seed(cfg.seed, kMaskStream));
  Rng batch_rng(stream_seed(cfg.seed, kBatchStream));

  TrainResult<T> res;
  auto& st = res.state;
  st.weight_mode = cfg.weight_mode;
  st.model = init_model<T>(pos.cols(), cfg.hidden, cfg.activation, cfg.aux_heads, init_rng);
  st.lambda = LambdaState<T>::xavier(K, init_rng);

  const LossWeights lw = cfg.loss_weights();
  const BatchOptions bopt{cfg.hop_label_mode, cfg.mask_negatives};

  Adam<T> theta_opt, lambda_opt;
  SagdGrads<T> grads;
  grads.model = st.model.zeros_like();

  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  ModelState<T> best_state;

  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const MaskSpec mask = draw_mask(pos.cols(), cfg.mask_prob, mask_rng);
    const auto& neg = pool.at_epoch(e).views;

    Vector<T> lambda = st.hop_weights();
    const auto batch = assemble_epoch_batch<T>(pos, neg, *in.labels, {lambda.data(), K}, &mask, batch_rng, bopt);
    const Matrix<T> proj = batch.rows * st.model.encoder.weight;

    LossParts<T> parts;
    if (cfg.weight_mode == WeightMode::kMinMax) {
      sagd_evaluate<T>(batch, proj, st.model, {lambda.data(), K}, lw, &grads, false);
      const Vector<T> g = softmax_backward<T>(lambda, grads.lambda);
      lambda_opt.begin_step();
      lambda_opt.update({st.lambda.logits.data(), K}, {g.data(), K}, cfg.lambda_lr(), Direction::kAscend);
      lambda = st.hop_weights();
    }
    parts = sagd_evaluate<T>(batch, proj, st.model, {lambda.data(), K}, lw, &grads, true);
    if (!std::isfinite(static_cast<double>(parts.total)))
      throw DivergenceError("non-finite loss at epoch " + std::to_string(e));
    if (cfg.weight_mode == WeightMode::kMin) {
      const Vector<T> g = softmax_backward<T>(lambda, grads.lambda);
      lambda_opt.begin_step();
      lambda_opt.update({st.lambda.logits.data(), K}, {g.data(), K}, cfg.lambda_lr(), Direction::kDescend);
    }
    theta_opt.begin_step();
    st.model.zip(grads.model, [&](std::span<T> p, std::span<T> g) {
      theta_opt.update(p, std::span<const T>(g.data(), g.size()), cfg.lr);
    });

    EpochMetrics m;
    m.epoch = e;
    m.loss = {static_cast<double>(parts.total), static_cast<double>(parts.gd), static_cast<double>(parts.hop),
              static_cast<double>(parts.degree)};
    const Vector<T> shown = st.hop_weights();
    m.lambda.assign(shown.data(), shown.data() + K);
    m.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (sink) sink(m);
    res.metrics.push_back(std::move(m));

    if (cfg.patience > 0) {
      if (parts.total < best) {
        best = parts.total;
        since_best = 0;
        best_state = st;
      } else if (++since_best >= cfg.patience) {
        st = best_state;
        break;
      }
    }
  }
  return res;
}

/// Owns every precomputed input for one (bundle, config) pair.
template <class T>
struct Prepared {
  SparseAdj adj;
  StructureLabels labels;
  Digest bundle;
  ViewSet<T> positive;
  CorruptionPool<T> pool;
  double precompute_ms = 0;

  TrainInputs<T> inputs() const { return {&positive, &pool, &labels}; }
};

template <class T>
Prepared<T> prepare(const GraphBundle& g, const TrainConfig& cfg) {
  Prepared<T> p;
  const auto t0 = std::chrono::steady_clock::now();
  p.bundle = bundle_digest(g);
  p.adj = normalize_adjacency(g, cfg.self_loops);
  p.labels = relative_degrees(g);
  const Matrix<T> x = g.features.template cast<T>();
  p.positive = propagate(p.adj, x, cfg.hops);
  p.positive.manifest = view_manifest(p.bundle, cfg.hops, cfg.self_loops);
  p.pool = build_pool(p.adj, x, cfg.hops, cfg.pool_size, stream_seed(cfg.seed, kPoolStream), p.bundle);
  p.precompute_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return p;
}

/// End-to-end training from a bundle.
template <class T = float>
TrainResult<T> train(const GraphBundle& g, const TrainConfig& cfg, const MetricsSink& sink = {}) {
  cfg.check();
  const auto p = prepare<T>(g, cfg);
  return train<T>(p.inputs(), cfg, sink);
}

// Checkpoint: "SAGD1", u32 d, u32 d', u32 K, tensors as f32 in Model::zip
// order, then K lambda logits as f32. Config goes to a JSON sidecar.
inline constexpr std::array<char, 5> kCheckpointMagic{'S', 'A', 'G', 'D', '1'};

inline void save_checkpoint(const ModelState<float>& s, const std::filesystem::path& path) {
  auto st = s;
  detail::atomic_write(path, [&](std::ostream& out) {
    out.write(kCheckpointMagic.data(), 5);
    detail::put_u32(out, static_cast<std::uint32_t>(st.model.encoder.in_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(st.model.encoder.out_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(st.lambda.logits.size()));
    st.model.each([&](std::span<float> t) {
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size_bytes()));
    });
    out.write(reinterpret_cast<const char*>(st.lambda.logits.data()),
              static_cast<std::streamsize>(sizeof(float) * st.lambda.logits.size()));
  });
}

/// Reads a checkpoint. Activation, aux-head mode and weight mode live in the
/// sidecar and are passed in.
inline ModelState<float> load_checkpoint(const std::filesystem::path& path, Activation act, AuxHeads aux,
                                         WeightMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing upstream artifact: " + path.string());
  std::array<char, 5> magic{};
  in.read(magic.data(), 5);
  if (!in || magic != kCheckpointMagic) throw DataError("corrupt checkpoint (bad magic): " + path.string());
  const auto d = detail::get_u32(in), h = detail::get_u32(in), K = detail::get_u32(in);
  if (!in || d == 0 || h == 0 || K == 0) throw DataError("corrupt checkpoint header: " + path.string());
  ModelState<float> s;
  s.weight_mode = mode;
  s.model.encoder.weight.resize(d, h);
  s.model.encoder.bias.resize(h);
  s.model.encoder.act = act;
  for (auto* hd : {&s.model.gd, &s.model.degree, &s.model.hop}) {
    hd->weight.resize(h, h);
    hd->bias.resize(h);
  }
  s.model.aux = aux;
  s.model.each([&](std::span<float> t) {
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size_bytes()));
  });
  s.lambda.logits.resize(K);
  in.read(reinterpret_cast<char*>(s.lambda.logits.data()), static_cast<std::streamsize>(sizeof(float) * K));
  if (!in) throw DataError("corrupt checkpoint (short read): " + path.string());
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("corrupt checkpoint (trailing bytes)");
  return s;
}

inline Digest file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing file: " + path.string());
  Hasher h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.bytes(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

}  // namespace hopview
