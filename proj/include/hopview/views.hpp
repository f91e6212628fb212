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

// Multi-hop feature views: view k holds A^k X for k = 1..K, computed by K
// sparse-dense products and cached on disk behind a manifest hash.
//
// Cache layout: "AVGE1", u32 N, u32 d, u32 K, u32 flags, 32-byte manifest,
// then K row-major f32 blocks of N*d values. All integers little-endian.

#pragma once

#include "hopview/common.hpp"
#include "hopview/digest.hpp"
#include "hopview/graph.hpp"

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace hopview {

namespace detail {
inline std::atomic<std::uint64_t>& sparse_counter() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}
}  // namespace detail

/// Number of sparse-dense products executed by this process so far.
inline std::uint64_t sparse_op_count() { return detail::sparse_counter().load(); }

/// out = adj * x. Rows are independent and each row accumulates its
/// neighbours in sorted column order, so the result does not depend on the
/// thread count.
template <class T>
Matrix<T> spmm(const SparseAdj& adj, const Matrix<T>& x) {
  if (static_cast<std::size_t>(x.rows()) != adj.n)
    throw DataError("dimension mismatch: adjacency has " + std::to_string(adj.n) + " nodes, features have " +
                    std::to_string(x.rows()) + " rows");
  Matrix<T> out = Matrix<T>::Zero(x.rows(), x.cols());
  const auto d = x.cols();
  parallel_for(adj.n, [&](std::size_t i) {
    T* dst = out.row(i).data();
    for (auto e = adj.row_offsets[i]; e < adj.row_offsets[i + 1]; ++e) {
      const T w = static_cast<T>(adj.values[e]);
      const T* src = x.row(adj.cols[e]).data();
      for (Eigen::Index c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  });
  detail::sparse_counter().fetch_add(1);
  return out;
}

template <class T>
struct ViewSet {
  /// hops[k-1] = A^k X.
  std::vector<Matrix<T>> hops;
  Digest manifest{};
  bool self_loops = true;

  std::size_t K() const { return hops.size(); }
  std::size_t rows() const { return hops.empty() ? 0 : static_cast<std::size_t>(hops[0].rows()); }
  std::size_t cols() const { return hops.empty() ? 0 : static_cast<std::size_t>(hops[0].cols()); }
  const Matrix<T>& hop(std::size_t k) const { return hops.at(k - 1); }
};

/// Cache identity. `corruption` is 0 for the clean views and (entry + 1) for
/// pool entry `entry`, mixed with the pool seed.
inline Digest view_manifest(const Digest& bundle, std::size_t K, bool self_loops, std::uint64_t corruption = 0,
                            std::uint64_t corruption_seed = 0) {
  Hasher h;
  h.text("hopview.views.v1").digest(bundle).u64(K).u64(self_loops ? 1 : 0).u64(corruption).u64(corruption_seed);
  return h.finish();
}

template <class T>
ViewSet<T> propagate(const SparseAdj& adj, const Matrix<T>& feats, std::size_t K) {
  if (K < 1) throw ConfigError("hops must be >= 1");
  ViewSet<T> v;
  v.self_loops = adj.self_loops;
  v.hops.reserve(K);
  v.hops.push_back(spmm(adj, feats));
  for (std::size_t k = 1; k < K; ++k) v.hops.push_back(spmm(adj, v.hops.back()));
  return v;
}

inline constexpr std::array<char, 5> kViewMagic{'A', 'V', 'G', 'E', '1'};
inline constexpr std::size_t kViewHeaderBytes = 5 + 4 * 4 + 32;

namespace detail {
inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}
inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
}

// Writes to a sibling temp file and renames over the target.
template <class Fn>
void atomic_write(const std::filesystem::path& path, Fn&& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    body(out);
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}
}  // namespace detail

inline void save_views(const ViewSet<float>& v, const std::filesystem::path& path) {
  detail::atomic_write(path, [&](std::ostream& out) {
    out.write(kViewMagic.data(), kViewMagic.size());
    detail::put_u32(out, static_cast<std::uint32_t>(v.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(v.cols()));
    detail::put_u32(out, static_cast<std::uint32_t>(v.K()));
    detail::put_u32(out, v.self_loops ? 1u : 0u);
    out.write(reinterpret_cast<const char*>(v.manifest.data()), 32);
    for (const auto& m : v.hops)
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(float) * m.size()));
  });
}

/// Reads only the manifest and dimensions of a cache file.
struct ViewHeader {
  std::uint32_t n = 0, d = 0, K = 0, flags = 0;
  Digest manifest{};
};

inline ViewHeader read_view_header(std::istream& in, const std::string& name) {
  std::array<char, 5> magic{};
  in.read(magic.data(), 5);
  if (!in || magic != kViewMagic) throw DataError("corrupt view cache (bad magic): " + name);
  ViewHeader h;
  h.n = detail::get_u32(in);
  h.d = detail::get_u32(in);
  h.K = detail::get_u32(in);
  h.flags = detail::get_u32(in);
  in.read(reinterpret_cast<char*>(h.manifest.data()), 32);
  if (!in) throw DataError("corrupt view cache (short header): " + name);
  return h;
}

/// Loads a cache and rejects it unless its manifest equals `expected`.
inline ViewSet<float> load_views(const std::filesystem::path& path, const std::optional<Digest>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing upstream artifact: " + path.string());
  const auto h = read_view_header(in, path.string());
  if (expected && h.manifest != *expected) throw DataError("stale cache: " + path.string());
  const auto want = kViewHeaderBytes + std::uintmax_t{h.n} * h.d * h.K * 4;
  if (std::filesystem::file_size(path) != want) throw DataError("corrupt view cache (size): " + path.string());
  ViewSet<float> v;
  v.manifest = h.manifest;
  v.self_loops = (h.flags & 1u) != 0;
  for (std::uint32_t k = 0; k < h.K; ++k) {
    Matrix<float> m(h.n, h.d);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(float) * m.size()));
    if (!in) throw DataError("corrupt view cache (short read): " + path.string());
    v.hops.push_back(std::move(m));
  }
  return v;
}

}  // namespace hopview
