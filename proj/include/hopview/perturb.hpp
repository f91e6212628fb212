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

// Positive samples: one Bernoulli column mask shared by every row.
// Negative samples: a uniformly random row permutation applied before
// propagation, so messages flow through the wrong neighbourhoods.

#pragma once

#include "hopview/common.hpp"
#include "hopview/views.hpp"

#include <numeric>
#include <random>

namespace hopview {

/// Seedable generator with deterministic child streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  /// Independent stream derived from (seed, stream); does not advance *this.
  Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL))); }

  std::mt19937_64& engine() { return engine_; }
  std::uint64_t seed() const { return seed_; }

  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

 private:
  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

struct MaskSpec {
  double drop_prob = 0.0;
  /// 1 keeps the column, 0 zeroes it. Broadcast to every row.
  std::vector<std::uint8_t> keep;

  std::size_t kept() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1)); }
};

inline MaskSpec draw_mask(std::size_t d, double drop_prob, Rng& rng) {
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw ConfigError("mask_prob must lie in [0, 1]");
  MaskSpec m;
  m.drop_prob = drop_prob;
  m.keep.resize(d);
  for (auto& k : m.keep) k = rng.bernoulli(1.0 - drop_prob) ? 1 : 0;
  return m;
}

/// Zeroes masked columns by assignment (never by multiplication, so a
/// negative entry cannot turn into -0).
template <class T>
Matrix<T> apply_mask(const Matrix<T>& x, const MaskSpec& m) {
  if (m.keep.size() != static_cast<std::size_t>(x.cols())) throw DataError("mask length mismatch");
  Matrix<T> out = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    if (!m.keep[c]) out.col(c).setZero();
  return out;
}

template <class T>
ViewSet<T> apply_mask(const ViewSet<T>& v, const MaskSpec& m) {
  ViewSet<T> out;
  out.manifest = v.manifest;
  out.self_loops = v.self_loops;
  out.hops.reserve(v.K());
  for (const auto& h : v.hops) out.hops.push_back(apply_mask(h, m));
  return out;
}

/// Uniform permutation of [0, n) by Fisher-Yates.
inline std::vector<NodeId> random_permutation(std::size_t n, Rng& rng) {
  std::vector<NodeId> p(n);
  std::iota(p.begin(), p.end(), NodeId{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

/// Row i of the result is row perm[i] of x.
template <class T>
Matrix<T> permute_rows(const Matrix<T>& x, const std::vector<NodeId>& perm) {
  Matrix<T> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = x.row(perm[i]);
  return out;
}

template <class T>
struct Corruption {
  std::vector<NodeId> perm;
  ViewSet<T> views;
};

template <class T>
Corruption<T> corrupt_with(const SparseAdj& adj, const Matrix<T>& feats, std::size_t K, std::vector<NodeId> perm) {
  Corruption<T> c;
  c.views = propagate(adj, permute_rows(feats, perm), K);
  c.perm = std::move(perm);
  return c;
}

template <class T>
Corruption<T> corrupt(const SparseAdj& adj, const Matrix<T>& feats, std::size_t K, Rng& rng) {
  if (feats.rows() < 2) throw DataError("corruption needs at least 2 nodes");
  return corrupt_with(adj, feats, K, random_permutation(static_cast<std::size_t>(feats.rows()), rng));
}

/// C pre-propagated corruptions, cycled through during training.
template <class T>
struct CorruptionPool {
  std::vector<Corruption<T>> entries;
  std::uint64_t seed = 0;

  std::size_t size() const { return entries.size(); }
  const Corruption<T>& at_epoch(std::size_t epoch) const { return entries[epoch % entries.size()]; }
};

/// Entry c draws its permutation from Rng(seed).split(c), so the pool is the
/// same whatever order entries are built in.
template <class T>
CorruptionPool<T> build_pool(const SparseAdj& adj, const Matrix<T>& feats, std::size_t K, std::size_t pool_size,
                             std::uint64_t seed, const Digest& bundle) {
  if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
  CorruptionPool<T> pool;
  pool.seed = seed;
  pool.entries.resize(pool_size);
  const Rng root(seed);
  // SpMM already fans out across rows; entries run one after another.
  for (std::size_t c = 0; c < pool_size; ++c) {
    Rng rng = root.split(c);
    pool.entries[c] = corrupt(adj, feats, K, rng);
    pool.entries[c].views.manifest = view_manifest(bundle, K, adj.self_loops, c + 1, seed);
  }
  return pool;
}

}  // namespace hopview
