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

// Inference, linear-probe evaluation, timing and the hop-separation
// diagnostic.

#pragma once

#include "hopview/graph.hpp"
#include "hopview/nn.hpp"
#include "hopview/perturb.hpp"
#include "hopview/trainer.hpp"
#include "hopview/views.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>

namespace hopview {

/// Embeddings from the last hop only: H = encode(A^K X). Takes no graph, so
/// it cannot issue a sparse op.
template <class T>
Matrix<T> infer(const Model<T>& model, const Matrix<T>& last_hop) {
  if (static_cast<std::size_t>(last_hop.cols()) != model.encoder.in_dim())
    throw DataError("dim mismatch: view has " + std::to_string(last_hop.cols()) + " columns, checkpoint expects " +
                    std::to_string(model.encoder.in_dim()));
  return encode(model.encoder, last_hop);
}

/// Reads hop k (1-based) from a view cache without loading the others.
inline Matrix<float> load_view_hop(const std::filesystem::path& path, std::size_t k,
                                   const std::optional<Digest>& expected, Digest* manifest_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing upstream artifact: " + path.string());
  const auto h = read_view_header(in, path.string());
  if (expected && h.manifest != *expected) throw DataError("stale cache: " + path.string());
  if (k < 1 || k > h.K) throw DataError("view cache holds " + std::to_string(h.K) + " hops, asked for " + std::to_string(k));
  const auto block = std::uintmax_t{h.n} * h.d * 4;
  if (std::filesystem::file_size(path) != kViewHeaderBytes + block * h.K)
    throw DataError("corrupt view cache (size): " + path.string());
  in.seekg(static_cast<std::streamoff>(kViewHeaderBytes + block * (k - 1)));
  Matrix<float> m(h.n, h.d);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(block));
  if (!in) throw DataError("corrupt view cache (short read): " + path.string());
  if (manifest_out) *manifest_out = h.manifest;
  return m;
}

struct EmbeddingProvenance {
  std::string checkpoint_sha256;
  std::string view_manifest;
};

inline void save_embeddings(const Matrix<float>& H, const EmbeddingProvenance& prov, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::atomic_write(dir / "embeddings.bin", [&](std::ostream& out) {
    out.write(reinterpret_cast<const char*>(H.data()), static_cast<std::streamsize>(sizeof(float) * H.size()));
  });
  nlohmann::ordered_json j;
  j["num_nodes"] = H.rows();
  j["dim"] = H.cols();
  j["dtype"] = "f32";
  j["checkpoint_sha256"] = prov.checkpoint_sha256;
  j["view_manifest"] = prov.view_manifest;
  std::ofstream(dir / "embeddings.json") << j.dump(2) << "\n";
}

inline Matrix<float> load_embeddings(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "embeddings.json");
  if (!meta_in) throw DataError("missing upstream artifact: " + (dir / "embeddings.json").string());
  const auto j = nlohmann::json::parse(meta_in);
  const auto n = j.at("num_nodes").get<Eigen::Index>(), d = j.at("dim").get<Eigen::Index>();
  const auto path = dir / "embeddings.bin";
  if (!std::filesystem::exists(path)) throw DataError("missing upstream artifact: " + path.string());
  if (std::filesystem::file_size(path) != static_cast<std::uintmax_t>(n * d * 4))
    throw DataError("embeddings.bin size does not match embeddings.json");
  Matrix<float> H(n, d);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(H.data()), static_cast<std::streamsize>(sizeof(float) * H.size()));
  return H;
}

// ---------------------------------------------------------------------------
// Linear probe

struct ProbeConfig {
  std::size_t runs = 10;
  double lr = 0.01;
  std::size_t iters = 300;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
};

struct ProbeModel {
  Matrix<double> weight;  // d' x C
  Vector<double> bias;    // C
};

struct ProbeResult {
  double mean = 0, std = 0;
  std::vector<double> accuracy;
};

/// "84.2±0.5" style, in percent.
inline std::string format_accuracy(const ProbeResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100.0 * r.mean, 100.0 * r.std);
  return buf;
}

namespace detail {
inline Matrix<double> gather_rows(const Matrix<double>& x, const std::vector<NodeId>& idx) {
  Matrix<double> out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(i) = x.row(idx[i]);
  return out;
}
}  // namespace detail

/// Softmax regression trained full-batch with Adam on frozen features.
inline ProbeModel fit_probe(const Matrix<double>& x, const std::vector<int>& y, int classes, const ProbeConfig& cfg,
                            Rng& rng) {
  const auto n = x.rows(), d = x.cols();
  ProbeModel m;
  m.weight = xavier_uniform<double>(d, classes, rng);
  m.bias = Vector<double>::Zero(classes);
  Matrix<double> onehot = Matrix<double>::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, y[i]) = 1.0;

  Adam<double> opt;
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    Matrix<double> logits = x * m.weight;
    logits.rowwise() += m.bias.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp();
      logits.row(i) /= logits.row(i).sum();
    }
    const Matrix<double> dlogits = (logits - onehot) / static_cast<double>(n);
    Matrix<double> gw = x.transpose() * dlogits;
    Vector<double> gb = dlogits.colwise().sum().transpose();
    gw += cfg.weight_decay * m.weight;
    gb += cfg.weight_decay * m.bias;
    opt.begin_step();
    opt.update({m.weight.data(), static_cast<std::size_t>(m.weight.size())},
               {gw.data(), static_cast<std::size_t>(gw.size())}, cfg.lr);
    opt.update({m.bias.data(), static_cast<std::size_t>(m.bias.size())},
               {gb.data(), static_cast<std::size_t>(gb.size())}, cfg.lr);
  }
  return m;
}

inline double probe_accuracy(const ProbeModel& m, const Matrix<double>& x, const std::vector<int>& y) {
  if (x.rows() == 0) return 0.0;
  Matrix<double> logits = x * m.weight;
  logits.rowwise() += m.bias.transpose();
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    hit += static_cast<int>(arg) == y[i];
  }
  return static_cast<double>(hit) / static_cast<double>(x.rows());
}

/// Trains `runs` independently initialised probes on the train split and
/// scores each on the test split.
template <class T>
ProbeResult probe(const Matrix<T>& H, const std::vector<int>& labels, int classes, const Splits& splits,
                  const ProbeConfig& cfg) {
  if (cfg.runs < 1) throw ConfigError("probe runs must be >= 1");
  if (splits.train.empty()) throw DataError("empty train split");
  if (splits.test.empty()) throw DataError("empty test split");
  if (labels.size() != static_cast<std::size_t>(H.rows())) throw DataError("label count does not match embeddings");
  const Matrix<double> x = H.template cast<double>();
  const auto xtr = detail::gather_rows(x, splits.train), xte = detail::gather_rows(x, splits.test);
  std::vector<int> ytr, yte;
  for (auto i : splits.train) ytr.push_back(labels[i]);
  for (auto i : splits.test) yte.push_back(labels[i]);

  ProbeResult r;
  const Rng root(cfg.seed);
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    Rng rng = root.split(run);
    const auto m = fit_probe(xtr, ytr, classes, cfg, rng);
    r.accuracy.push_back(probe_accuracy(m, xte, yte));
  }
  double s = 0;
  for (double a : r.accuracy) s += a;
  r.mean = s / static_cast<double>(r.accuracy.size());
  double v = 0;
  for (double a : r.accuracy) v += (a - r.mean) * (a - r.mean);
  r.std = std::sqrt(v / static_cast<double>(r.accuracy.size()));
  return r;
}

// ---------------------------------------------------------------------------
// Timing

/// Untrained 2-layer GCN-style forward used only as a timing reference:
/// (A X) W1 -> rectifier -> (A H) W2 -> rectifier.
template <class T>
struct GcnReference {
  Matrix<T> w1, w2;

  GcnReference(std::size_t in_dim, std::size_t hidden, Rng& rng)
      : w1(xavier_uniform<T>(in_dim, hidden, rng)), w2(xavier_uniform<T>(hidden, hidden, rng)) {}

  Matrix<T> forward(const SparseAdj& adj, const Matrix<T>& x) const {
    Matrix<T> h = spmm(adj, x) * w1;
    h = h.cwiseMax(T(0));
    h = spmm(adj, h) * w2;
    return h.cwiseMax(T(0));
  }
};

inline std::string machine_descriptor() {
  std::string model = "unknown";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto p = line.find(':');
      if (p != std::string::npos) model = line.substr(p + 2);
      break;
    }
  }
  return model + " | threads=" + std::to_string(num_threads()) +
         " | hw_concurrency=" + std::to_string(std::thread::hardware_concurrency());
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct BenchConfig {
  std::size_t warmup = 3;
  std::size_t reps = 20;
};

struct BenchReport {
  double train_ms_per_epoch = 0;
  double infer_ms = 0;
  double gcn_forward_ms = 0;
  double precompute_ms = 0;
  std::uint64_t sparse_ops_infer = 0;
  std::uint64_t sparse_ops_gcn = 0;
  std::string machine;

  double speedup() const { return infer_ms > 0 ? gcn_forward_ms / infer_ms : 0.0; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["train_ms_per_epoch"] = train_ms_per_epoch;
    j["infer_ms"] = infer_ms;
    j["gcn_forward_ms"] = gcn_forward_ms;
    j["precompute_ms"] = precompute_ms;
    j["sparse_ops_infer"] = sparse_ops_infer;
    j["sparse_ops_gcn"] = sparse_ops_gcn;
    j["machine"] = machine;
    return j;
  }
};

/// Times training epochs, last-hop inference and the GCN reference forward.
/// Warmup runs are excluded; each figure is the median over `reps` runs.
inline BenchReport bench(const GraphBundle& g, TrainConfig cfg, const BenchConfig& bc = {}) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  BenchReport rep;
  rep.machine = machine_descriptor();

  const auto prep = prepare<float>(g, cfg);
  rep.precompute_ms = prep.precompute_ms;

  cfg.epochs = bc.warmup + bc.reps;
  cfg.patience = 0;
  const auto trained = train<float>(prep.inputs(), cfg);
  std::vector<double> epoch_ms;
  for (std::size_t e = bc.warmup; e < trained.metrics.size(); ++e) epoch_ms.push_back(trained.metrics[e].ms);
  rep.train_ms_per_epoch = median(epoch_ms);

  const auto& last = prep.positive.hop(cfg.hops);
  std::vector<double> infer_ms;
  volatile float sink = 0;
  const auto before = sparse_op_count();
  for (std::size_t r = 0; r < bc.warmup + bc.reps; ++r) {
    const auto t0 = clock::now();
    const auto H = infer(trained.state.model, last);
    const double t = ms_since(t0);
    sink = sink + H(0, 0);
    if (r >= bc.warmup) infer_ms.push_back(t);
  }
  rep.sparse_ops_infer = sparse_op_count() - before;
  rep.infer_ms = median(infer_ms);

  Rng rng(stream_seed(cfg.seed, 99));
  const Matrix<float> x = g.features;
  const GcnReference<float> gcn(x.cols(), cfg.hidden, rng);
  std::vector<double> gcn_ms;
  for (std::size_t r = 0; r < bc.warmup + bc.reps; ++r) {
    const auto ops0 = sparse_op_count();
    const auto t0 = clock::now();
    const auto H = gcn.forward(prep.adj, x);
    const double t = ms_since(t0);
    sink = sink + H(0, 0);
    if (r >= bc.warmup) gcn_ms.push_back(t);
    rep.sparse_ops_gcn = sparse_op_count() - ops0;
  }
  rep.gcn_forward_ms = median(gcn_ms);
  return rep;
}

// ---------------------------------------------------------------------------
// Hop-separation diagnostic

struct SeparationReport {
  std::vector<double> score;  // index = hop, 0..K_max
  std::optional<double> homophily;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["hops"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < score.size(); ++k) j["hops"].push_back({{"hop", k}, {"separation", score[k]}});
    j["homophily"] = homophily ? nlohmann::ordered_json(*homophily) : nlohmann::ordered_json(nullptr);
    return j;
  }
};

/// Distance between the centroids of two row groups divided by the mean
/// distance of rows to their own group's centroid.
inline double centroid_separation(const Matrix<double>& pos, const Matrix<double>& neg) {
  const Vector<double> cp = pos.colwise().mean().transpose();
  const Vector<double> cn = neg.colwise().mean().transpose();
  double spread = 0;
  for (Eigen::Index i = 0; i < pos.rows(); ++i) spread += (pos.row(i).transpose() - cp).norm();
  for (Eigen::Index i = 0; i < neg.rows(); ++i) spread += (neg.row(i).transpose() - cn).norm();
  spread /= static_cast<double>(pos.rows() + neg.rows());
  const double dist = (cp - cn).norm();
  return spread > 0 ? dist / spread : 0.0;
}

/// Separation of A^k X from A^k P X for k = 0..max_hop under one random
/// permutation P.
inline SeparationReport hop_separation_diagnostic(const GraphBundle& g, std::size_t max_hop, bool self_loops,
                                                  std::uint64_t seed) {
  SeparationReport rep;
  if (g.labels) rep.homophily = homophily_ratio(g);
  const auto adj = normalize_adjacency(g, self_loops);
  Rng rng(seed);
  const auto perm = random_permutation(g.num_nodes, rng);
  Matrix<double> pos = g.features.cast<double>();
  Matrix<double> neg = permute_rows(pos, perm);
  rep.score.push_back(centroid_separation(pos, neg));
  for (std::size_t k = 1; k <= max_hop; ++k) {
    pos = spmm(adj, pos);
    neg = spmm(adj, neg);
    rep.score.push_back(centroid_separation(pos, neg));
  }
  return rep;
}

}  // namespace hopview
