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

// Graph bundles on disk, the symmetric normalized adjacency, and the
// degree-derived structure labels.
//
// Bundle directory layout:
//   meta.json     {"num_nodes", "feature_dim", "num_classes" (int|null), "dtype": "f32"}
//   edges.tsv     "src\tdst" per line, 0-indexed
//   features.bin  little-endian f32, row-major, N*d values, no header
//   labels.tsv    optional, one class index per line
//   splits.json   optional, {"train": [...], "val": [...], "test": [...]}

#pragma once

#include "hopview/common.hpp"
#include "hopview/digest.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <utility>

namespace hopview {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

struct Splits {
  std::vector<NodeId> train, val, test;
};

struct GraphBundle {
  std::size_t num_nodes = 0;
  /// Directed entries, both directions of every undirected edge, sorted and
  /// without duplicates or self-loops.
  std::vector<Edge> edges;
  Matrix<float> features;
  std::optional<std::vector<int>> labels;
  std::optional<int> num_classes;
  std::optional<Splits> splits;

  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }
};

/// Sorts, symmetrizes and deduplicates an undirected edge list in place.
/// Self-loops are dropped; the propagation operator adds its own.
inline void symmetrize(std::vector<Edge>& edges) {
  std::vector<Edge> out;
  out.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u == v) continue;
    out.emplace_back(u, v);
    out.emplace_back(v, u);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  edges = std::move(out);
}

/// Checks every bundle invariant; throws DataError on the first violation.
inline void validate(const GraphBundle& g) {
  const auto n = g.num_nodes;
  if (static_cast<std::size_t>(g.features.rows()) != n)
    throw DataError("row count mismatch: features have " + std::to_string(g.features.rows()) +
                    " rows, expected " + std::to_string(n));
  if (g.features.cols() < 1) throw DataError("feature_dim must be >= 1");
  if (!g.features.allFinite()) throw DataError("non-finite feature value");
  for (auto [u, v] : g.edges)
    if (u >= n || v >= n)
      throw DataError("index out of range: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                      ") with num_nodes=" + std::to_string(n));
  if (g.labels) {
    if (g.labels->size() != n) throw DataError("label count mismatch");
    for (int y : *g.labels) {
      if (y < 0 || (g.num_classes && y >= *g.num_classes))
        throw DataError("label out of range: " + std::to_string(y));
    }
  }
  if (g.splits) {
    std::vector<std::uint8_t> seen(n, 0);
    for (const auto* part : {&g.splits->train, &g.splits->val, &g.splits->test}) {
      std::vector<std::uint8_t> here(n, 0);
      for (auto i : *part) {
        if (i >= n) throw DataError("index out of range: split node " + std::to_string(i));
        if (here[i]) continue;
        if (seen[i]) throw DataError("splits are not disjoint at node " + std::to_string(i));
        here[i] = seen[i] = 1;
      }
    }
  }
}

/// Hash over topology and feature bytes. Labels and splits are excluded:
/// they do not affect propagated views.
inline Digest bundle_digest(const GraphBundle& g) {
  Hasher h;
  h.text("hopview.bundle").u64(g.num_nodes).u64(g.feature_dim()).u64(g.edges.size());
  for (auto [u, v] : g.edges) h.u64((std::uint64_t{u} << 32) | v);
  h.bytes(g.features.data(), sizeof(float) * static_cast<std::size_t>(g.features.size()));
  return h.finish();
}

namespace detail {

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("missing file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<long long> parse_ints(std::string_view line, const std::string& where) {
  std::vector<long long> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p >= end) break;
    long long v = 0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc()) throw DataError("malformed integer in " + where);
    out.push_back(v);
    p = next;
  }
  return out;
}

inline std::vector<NodeId> node_list(const nlohmann::json& j, const char* key, std::size_t n) {
  std::vector<NodeId> out;
  if (!j.contains(key)) throw DataError(std::string("splits.json lacks key ") + key);
  for (const auto& v : j.at(key)) {
    const auto i = v.get<long long>();
    if (i < 0 || static_cast<std::size_t>(i) >= n)
      throw DataError("index out of range: split node " + std::to_string(i));
    out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

}  // namespace detail

inline GraphBundle load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  GraphBundle g;

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(detail::read_text(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("meta.json: ") + e.what());
  }
  if (meta.value("dtype", std::string{}) != "f32") throw DataError("meta.json: dtype must be \"f32\"");
  const auto n = meta.at("num_nodes").get<long long>();
  const auto d = meta.at("feature_dim").get<long long>();
  if (n < 0 || d < 1) throw DataError("meta.json: invalid num_nodes/feature_dim");
  g.num_nodes = static_cast<std::size_t>(n);
  if (meta.contains("num_classes") && !meta["num_classes"].is_null())
    g.num_classes = meta["num_classes"].get<int>();

  {
    const auto text = detail::read_text(dir / "edges.tsv");
    std::size_t pos = 0, lineno = 0;
    while (pos < text.size()) {
      auto eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      std::string_view line(text.data() + pos, eol - pos);
      ++lineno;
      pos = eol + 1;
      auto ids = detail::parse_ints(line, "edges.tsv line " + std::to_string(lineno));
      if (ids.empty()) continue;
      if (ids.size() != 2) throw DataError("edges.tsv line " + std::to_string(lineno) + ": expected 2 fields");
      for (auto v : ids)
        if (v < 0 || v >= n)
          throw DataError("index out of range: edges.tsv line " + std::to_string(lineno));
      g.edges.emplace_back(static_cast<NodeId>(ids[0]), static_cast<NodeId>(ids[1]));
    }
    symmetrize(g.edges);
  }

  {
    const auto path = dir / "features.bin";
    if (!fs::exists(path)) throw DataError("missing file: " + path.string());
    const auto expect = static_cast<std::uintmax_t>(n) * static_cast<std::uintmax_t>(d) * 4;
    if (fs::file_size(path) != expect)
      throw DataError("row count mismatch: features.bin holds " + std::to_string(fs::file_size(path)) +
                      " bytes, meta implies " + std::to_string(expect));
    g.features.resize(n, d);
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(g.features.data()), static_cast<std::streamsize>(expect));
    if (!in) throw DataError("short read on features.bin");
  }

  if (fs::exists(dir / "labels.tsv")) {
    const auto text = detail::read_text(dir / "labels.tsv");
    std::vector<int> labels;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      auto v = detail::parse_ints(line, "labels.tsv");
      if (v.empty()) continue;
      labels.push_back(static_cast<int>(v[0]));
    }
    if (labels.size() != g.num_nodes) throw DataError("labels.tsv: label count does not match num_nodes");
    if (!g.num_classes) g.num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    g.labels = std::move(labels);
  }

  if (fs::exists(dir / "splits.json")) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_text(dir / "splits.json"));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("splits.json: ") + e.what());
    }
    g.splits = Splits{detail::node_list(j, "train", g.num_nodes), detail::node_list(j, "val", g.num_nodes),
                      detail::node_list(j, "test", g.num_nodes)};
  }

  validate(g);
  return g;
}

/// Writes a bundle in the on-disk layout. Edges are written once per
/// undirected pair (u < v).
inline void write_bundle(const GraphBundle& g, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["num_nodes"] = g.num_nodes;
  meta["feature_dim"] = g.feature_dim();
  meta["num_classes"] = g.num_classes ? nlohmann::ordered_json(*g.num_classes) : nlohmann::ordered_json(nullptr);
  meta["dtype"] = "f32";
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";

  {
    std::ofstream out(dir / "edges.tsv", std::ios::binary);
    for (auto [u, v] : g.edges)
      if (u < v) out << u << '\t' << v << '\n';
  }
  {
    std::ofstream out(dir / "features.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(g.features.data()),
              static_cast<std::streamsize>(sizeof(float) * g.features.size()));
  }
  if (g.labels) {
    std::ofstream out(dir / "labels.tsv", std::ios::binary);
    for (int y : *g.labels) out << y << '\n';
  }
  if (g.splits) {
    nlohmann::ordered_json j;
    j["train"] = g.splits->train;
    j["val"] = g.splits->val;
    j["test"] = g.splits->test;
    std::ofstream(dir / "splits.json") << j.dump() << "\n";
  }
}

/// CSR holding D^{-1/2} A D^{-1/2} over the effective adjacency (A + I when
/// self_loops is set). `degrees` are always those of the raw A.
struct SparseAdj {
  std::size_t n = 0;
  std::vector<std::int64_t> row_offsets;
  std::vector<NodeId> cols;
  std::vector<double> values;
  std::vector<std::uint32_t> degrees;
  bool self_loops = true;

  std::size_t nnz() const { return cols.size(); }

  Matrix<double> dense() const {
    Matrix<double> m = Matrix<double>::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (auto e = row_offsets[i]; e < row_offsets[i + 1]; ++e) m(i, cols[e]) = values[e];
    return m;
  }
};

inline std::vector<std::uint32_t> raw_degrees(const GraphBundle& g) {
  std::vector<std::uint32_t> deg(g.num_nodes, 0);
  for (auto [u, v] : g.edges) ++deg[u];
  return deg;
}

inline SparseAdj normalize_adjacency(const GraphBundle& g, bool self_loops) {
  SparseAdj a;
  a.n = g.num_nodes;
  a.self_loops = self_loops;
  a.degrees = raw_degrees(g);
  const std::uint32_t extra = self_loops ? 1 : 0;

  a.row_offsets.assign(a.n + 1, 0);
  for (std::size_t i = 0; i < a.n; ++i) a.row_offsets[i + 1] = a.row_offsets[i] + a.degrees[i] + extra;
  a.cols.resize(a.row_offsets.back());
  a.values.resize(a.row_offsets.back());

  // g.edges is sorted by (src, dst); merge the diagonal in at its sorted slot.
  std::size_t e = 0;
  for (std::size_t i = 0; i < a.n; ++i) {
    auto out = a.row_offsets[i];
    bool diag_done = !self_loops;
    const double di = a.degrees[i] + extra;
    auto emit = [&](NodeId j) {
      const double dj = a.degrees[j] + extra;
      a.cols[out] = j;
      a.values[out] = 1.0 / std::sqrt(di * dj);
      ++out;
    };
    for (; e < g.edges.size() && g.edges[e].first == i; ++e) {
      const NodeId j = g.edges[e].second;
      if (!diag_done && j > i) {
        emit(static_cast<NodeId>(i));
        diag_done = true;
      }
      emit(j);
    }
    if (!diag_done) emit(static_cast<NodeId>(i));
  }
  return a;
}

/// Relative degree of each node against its neighbours plus the binary
/// "high relative degree" label (strictly greater than 1).
struct StructureLabels {
  std::vector<double> relative_degree;
  std::vector<std::uint8_t> degree_label;
};

inline StructureLabels relative_degrees(const GraphBundle& g) {
  const auto deg = raw_degrees(g);
  StructureLabels s;
  s.relative_degree.assign(g.num_nodes, 1.0);
  s.degree_label.assign(g.num_nodes, 0);
  std::size_t e = 0;
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    double sum = 0.0;
    for (; e < g.edges.size() && g.edges[e].first == i; ++e)
      sum += std::sqrt(static_cast<double>(deg[i]) / deg[g.edges[e].second]);
    // Isolated nodes keep the neutral value 1.
    if (deg[i] > 0) s.relative_degree[i] = sum / deg[i];
    s.degree_label[i] = s.relative_degree[i] > 1.0 ? 1 : 0;
  }
  return s;
}

/// Fraction of directed edge entries whose endpoints share a label.
inline double homophily_ratio(const GraphBundle& g) {
  if (!g.labels) throw DataError("homophily requires labels");
  if (g.edges.empty()) return 0.0;
  std::size_t same = 0;
  for (auto [u, v] : g.edges) same += (*g.labels)[u] == (*g.labels)[v];
  return static_cast<double>(same) / static_cast<double>(g.edges.size());
}

}  // namespace hopview
