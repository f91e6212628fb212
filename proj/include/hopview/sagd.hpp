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

// Structure-aware group discrimination.
//
// Each epoch draws N rows from the K hop views (N/K per view), pairs every
// positive row with the row at the same (node, hop) of a corrupted view set,
// and scores three binary tasks on the encoded rows:
//
//   group   positive (1) vs corrupted (0)
//   degree  relative degree > 1
//   hop     high vs low hop order
//
//   total = alpha * L_group + beta * L_hop + gamma * L_degree
//
// Every row of hop k enters the encoder scaled by lambda_k. The batch keeps
// rows unscaled and applies lambda inside the forward pass, which lets the
// projection rows * W be shared between the max and min steps.

#pragma once

#include "hopview/graph.hpp"
#include "hopview/nn.hpp"
#include "hopview/perturb.hpp"
#include "hopview/views.hpp"

#include <optional>

namespace hopview {

enum class HopLabelMode { kBinary, kSoft };

inline HopLabelMode parse_hop_label_mode(std::string_view s) {
  if (s == "binary") return HopLabelMode::kBinary;
  if (s == "soft") return HopLabelMode::kSoft;
  throw ConfigError("unknown hop_label_mode: " + std::string(s));
}

/// Binary: 1 when k > K/2. Soft: (k-1)/(K-1), 0 for K = 1.
inline double hop_label(std::size_t k, std::size_t K, HopLabelMode mode = HopLabelMode::kBinary) {
  if (k < 1 || k > K) throw DataError("hop index out of range");
  if (mode == HopLabelMode::kSoft) return K == 1 ? 0.0 : static_cast<double>(k - 1) / static_cast<double>(K - 1);
  return 2 * k > K ? 1.0 : 0.0;
}

struct LossWeights {
  double alpha = 1.0;
  double beta = 0.01;
  double gamma = 0.05;
};

template <class T>
struct EpochBatch {
  std::size_t K = 1;
  Matrix<T> rows;  // 2N' x d: positives first, then their paired negatives
  std::vector<NodeId> node;
  std::vector<std::uint32_t> hop;  // 1-based
  std::vector<T> group, degree, hop_target;

  std::size_t size() const { return node.size(); }
  std::size_t positives() const { return node.size() / 2; }

  /// Rows as the encoder sees them: row r multiplied by lambda[hop_r - 1].
  Matrix<T> scaled_rows(std::span<const T> lambda) const {
    Matrix<T> out = rows;
    for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) *= lambda[hop[r] - 1];
    return out;
  }
};

/// Rows drawn per view: floor(N / active) each, the remainder going one
/// apiece to the first active views. Views with zero weight get no rows.
inline std::vector<std::size_t> view_counts(std::size_t n, const std::vector<bool>& active) {
  const auto views = static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
  if (views == 0) throw ConfigError("no view has positive weight");
  if (n < views) throw DataError("need at least as many nodes as views (N >= K)");
  std::vector<std::size_t> counts(active.size(), 0);
  std::size_t rem = n % views, seen = 0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (!active[k]) continue;
    counts[k] = n / views + (seen < rem ? 1 : 0);
    ++seen;
  }
  return counts;
}

struct BatchOptions {
  HopLabelMode hop_mode = HopLabelMode::kBinary;
  bool mask_negatives = false;
};

/// Samples one epoch batch. `mask` (if any) is applied to positive rows
/// while gathering, which equals gathering from apply_mask(pos, mask).
template <class T>
EpochBatch<T> assemble_epoch_batch(const ViewSet<T>& pos, const ViewSet<T>& neg, const StructureLabels& labels,
                                   std::span<const T> lambda, const MaskSpec* mask, Rng& rng,
                                   const BatchOptions& opt = {}) {
  const std::size_t K = pos.K(), n = pos.rows(), d = pos.cols();
  if (neg.K() != K || neg.rows() != n || neg.cols() != d) throw DataError("positive/negative view shapes differ");
  if (lambda.size() != K) throw DataError("lambda length must equal K");
  if (labels.degree_label.size() != n) throw DataError("structure labels do not match node count");
  if (mask && mask->keep.size() != d) throw DataError("mask length mismatch");

  std::vector<bool> active(K);
  for (std::size_t k = 0; k < K; ++k) active[k] = lambda[k] > T(0);
  const auto counts = view_counts(n, active);

  EpochBatch<T> b;
  b.K = K;
  const std::size_t half = n;
  b.rows.resize(2 * half, d);
  b.node.resize(2 * half);
  b.hop.resize(2 * half);
  b.group.resize(2 * half);
  b.degree.resize(2 * half);
  b.hop_target.resize(2 * half);

  auto gather = [&](Eigen::Index dst, const Matrix<T>& src, NodeId i, bool masked) {
    if (masked) {
      const T* s = src.row(i).data();
      T* o = b.rows.row(dst).data();
      for (std::size_t c = 0; c < d; ++c) o[c] = mask->keep[c] ? s[c] : T(0);
    } else {
      b.rows.row(dst) = src.row(i);
    }
  };

  std::vector<NodeId> order(n);
  std::size_t r = 0;
  for (std::size_t k = 1; k <= K; ++k) {
    const auto take = counts[k - 1];
    if (take == 0) continue;
    // Partial Fisher-Yates: the first `take` slots are a uniform sample
    // without replacement.
    std::iota(order.begin(), order.end(), NodeId{0});
    for (std::size_t i = 0; i < take; ++i) std::swap(order[i], order[i + rng.below(n - i)]);
    const T hop_y = static_cast<T>(hop_label(k, K, opt.hop_mode));
    for (std::size_t i = 0; i < take; ++i, ++r) {
      const NodeId v = order[i];
      for (auto [row, group] : {std::pair{r, T(1)}, std::pair{r + half, T(0)}}) {
        b.node[row] = v;
        b.hop[row] = static_cast<std::uint32_t>(k);
        b.group[row] = group;
        b.degree[row] = static_cast<T>(labels.degree_label[v]);
        b.hop_target[row] = hop_y;
      }
      gather(static_cast<Eigen::Index>(r), pos.hop(k), v, mask != nullptr);
      gather(static_cast<Eigen::Index>(r + half), neg.hop(k), v, mask != nullptr && opt.mask_negatives);
    }
  }
  return b;
}

template <class T>
struct LossParts {
  T total = 0, gd = 0, hop = 0, degree = 0;
};

template <class T>
struct SagdGrads {
  Model<T> model;     // same layout as the model
  Vector<T> lambda;   // d total / d lambda_k
  bool has_weight = false;
};

/// Effective weights: the hop task is meaningless with a single hop.
inline LossWeights effective_weights(const LossWeights& w, std::size_t K) {
  LossWeights e = w;
  if (K <= 1) e.beta = 0.0;
  return e;
}

/// Forward (and optionally backward) pass given the precomputed projection
/// `proj = batch.rows * W`. When `grads` is set, gradients for every
/// parameter except W are filled; W's gradient costs one more GEMM and is
/// computed only if `weight_grad` is true.
template <class T>
LossParts<T> sagd_evaluate(const EpochBatch<T>& b, const Matrix<T>& proj, const Model<T>& m,
                           std::span<const T> lambda, const LossWeights& weights, SagdGrads<T>* grads = nullptr,
                           bool weight_grad = true) {
  const auto B = static_cast<Eigen::Index>(b.size());
  const auto H = static_cast<Eigen::Index>(m.encoder.out_dim());
  if (proj.rows() != B || proj.cols() != H) throw DataError("shape mismatch: projection vs batch/model");
  if (lambda.size() != b.K) throw DataError("lambda length must equal K");
  const auto w = effective_weights(weights, b.K);

  Vector<T> scale(B);
  for (Eigen::Index r = 0; r < B; ++r) scale[r] = lambda[b.hop[r] - 1];

  Matrix<T> z = proj;
  for (Eigen::Index r = 0; r < B; ++r) z.row(r) *= scale[r];
  z.rowwise() += m.encoder.bias.transpose();
  const T a = m.encoder.effective_slope();
  const Matrix<T> h = z.unaryExpr([a](T v) { return activate(v, a); });

  const Vector<T> w_gd = m.gd.weight.rowwise().sum();
  const bool learned = m.aux == AuxHeads::kLearned;
  const Vector<T> w_deg = learned ? Vector<T>(m.degree.weight.rowwise().sum()) : Vector<T>::Ones(H);
  const Vector<T> w_hop = learned ? Vector<T>(m.hop.weight.rowwise().sum()) : Vector<T>::Ones(H);
  const T c_gd = m.gd.bias.sum();
  const T c_deg = learned ? m.degree.bias.sum() : T(0);
  const T c_hop = learned ? m.hop.bias.sum() : T(0);

  const Vector<T> z_gd = (h * w_gd).array() + c_gd;
  const Vector<T> z_deg = (h * w_deg).array() + c_deg;
  const Vector<T> z_hop = (h * w_hop).array() + c_hop;
  if (!z_gd.allFinite() || !z_deg.allFinite() || !z_hop.allFinite())
    throw DivergenceError("non-finite logits");

  LossParts<T> out;
  out.gd = bce_with_logits<T>({z_gd.data(), b.size()}, b.group);
  out.degree = bce_with_logits<T>({z_deg.data(), b.size()}, b.degree);
  out.hop = bce_with_logits<T>({z_hop.data(), b.size()}, b.hop_target);
  out.total = static_cast<T>(w.alpha) * out.gd + static_cast<T>(w.beta) * out.hop +
              static_cast<T>(w.gamma) * out.degree;
  if (!grads) return out;

  // d total / d logit for each task.
  const T inv = T(1) / static_cast<T>(B);
  Vector<T> g_gd(B), g_deg(B), g_hop(B);
  for (Eigen::Index r = 0; r < B; ++r) {
    g_gd[r] = static_cast<T>(w.alpha) * (sigmoid(z_gd[r]) - b.group[r]) * inv;
    g_deg[r] = static_cast<T>(w.gamma) * (sigmoid(z_deg[r]) - b.degree[r]) * inv;
    g_hop[r] = static_cast<T>(w.beta) * (sigmoid(z_hop[r]) - b.hop_target[r]) * inv;
  }

  auto& gm = grads->model;
  if (gm.encoder.weight.rows() != m.encoder.weight.rows() || gm.encoder.weight.cols() != H) gm = m.zeros_like();

  auto head_grad = [&](Head<T>& g, const Vector<T>& gl) {
    const Vector<T> col = h.transpose() * gl;  // d logit / d W[i][j] = h_i for every j
    g.weight = col.replicate(1, H);
    g.bias = Vector<T>::Constant(H, gl.sum());
  };
  head_grad(gm.gd, g_gd);
  if (learned) {
    head_grad(gm.degree, g_deg);
    head_grad(gm.hop, g_hop);
  } else {
    gm.degree.weight.setZero();
    gm.degree.bias.setZero();
    gm.hop.weight.setZero();
    gm.hop.bias.setZero();
  }

  Matrix<T> dz = g_gd * w_gd.transpose();
  dz.noalias() += g_deg * w_deg.transpose();
  dz.noalias() += g_hop * w_hop.transpose();

  T d_slope = 0;
  for (Eigen::Index r = 0; r < B; ++r) {
    for (Eigen::Index c = 0; c < H; ++c) {
      T& g = dz(r, c);
      const T zv = z(r, c);
      if (!(zv > T(0))) {
        d_slope += g * zv;
        g *= a;
      }
    }
  }
  gm.encoder.slope = m.encoder.act == Activation::kPrelu ? d_slope : T(0);
  gm.encoder.bias = dz.colwise().sum().transpose();

  grads->lambda = Vector<T>::Zero(static_cast<Eigen::Index>(b.K));
  for (Eigen::Index r = 0; r < B; ++r) grads->lambda[b.hop[r] - 1] += dz.row(r).dot(proj.row(r));

  grads->has_weight = weight_grad;
  if (weight_grad) {
    for (Eigen::Index r = 0; r < B; ++r) dz.row(r) *= scale[r];
    gm.encoder.weight.noalias() = b.rows.transpose() * dz;
  } else {
    gm.encoder.weight.setZero();
  }
  return out;
}

/// Loss (and gradients) from scratch.
template <class T>
LossParts<T> sagd_loss(const EpochBatch<T>& b, const Model<T>& m, std::span<const T> lambda,
                       const LossWeights& weights, SagdGrads<T>* grads = nullptr) {
  if (static_cast<std::size_t>(b.rows.cols()) != m.encoder.in_dim()) throw DataError("shape mismatch: batch vs encoder");
  const Matrix<T> proj = b.rows * m.encoder.weight;
  return sagd_evaluate(b, proj, m, lambda, weights, grads, true);
}

template <class T>
Vector<T> softmax(const Vector<T>& logits) {
  const T mx = logits.maxCoeff();
  Vector<T> e = (logits.array() - mx).exp();
  return e / e.sum();
}

/// Chain rule through lambda = softmax(logits).
template <class T>
Vector<T> softmax_backward(const Vector<T>& lambda, const Vector<T>& d_lambda) {
  const T dot = lambda.dot(d_lambda);
  return lambda.array() * (d_lambda.array() - dot);
}

}  // namespace hopview
