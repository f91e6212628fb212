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

#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace hopview;

namespace {

GraphBundle small_sbm(std::uint64_t seed, std::size_t n = 50, std::size_t d = 6) {
  SbmSpec s;
  s.num_nodes = n;
  s.feature_dim = d;
  s.p_in = 0.2;
  s.p_out = 0.03;
  s.train_per_class = 2;
  s.val_count = 4;
  s.seed = seed;
  return make_sbm(s);
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hopview_views_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool bitwise_equal(const Matrix<float>& a, const Matrix<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * a.size()) == 0;
}

}  // namespace

TEST(Propagate, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = small_sbm(seed);
    for (bool loops : {true, false}) {
      const auto adj = normalize_adjacency(g, loops);
      const auto v = propagate(adj, Matrix<float>(g.features), 4);
      const auto vd = propagate(adj, Matrix<double>(g.features.cast<double>()), 4);
      const auto want = oracle::propagate(g, loops, 4);
      ASSERT_EQ(v.K(), 4u);
      for (std::size_t k = 1; k <= 4; ++k)
        for (std::size_t i = 0; i < g.num_nodes; ++i)
          for (std::size_t c = 0; c < g.feature_dim(); ++c) {
            ASSERT_NEAR(v.hop(k)(i, c), want[k - 1][i][c], 1e-5);
            ASSERT_NEAR(vd.hop(k)(i, c), want[k - 1][i][c], 1e-12);
          }
    }
  }
}

TEST(Propagate, CountsOneSparseOpPerHop) {
  const auto g = small_sbm(1);
  const auto adj = normalize_adjacency(g, true);
  const auto before = sparse_op_count();
  propagate(adj, Matrix<float>(g.features), 3);
  EXPECT_EQ(sparse_op_count() - before, 3u);
}

TEST(Propagate, RejectsZeroHops) {
  const auto g = small_sbm(1);
  EXPECT_THROW(propagate(normalize_adjacency(g, true), Matrix<float>(g.features), 0), ConfigError);
}

TEST(Spmm, IndependentOfThreadCount) {
  const auto g = small_sbm(3, 600, 16);
  const auto adj = normalize_adjacency(g, true);
  set_num_threads(1);
  const auto one = spmm(adj, Matrix<float>(g.features));
  set_num_threads(4);
  const auto four = spmm(adj, Matrix<float>(g.features));
  set_num_threads(0);
  EXPECT_TRUE(bitwise_equal(one, four));
}

TEST(Spmm, DimensionMismatch) {
  const auto g = small_sbm(1);
  EXPECT_THROW(spmm(normalize_adjacency(g, true), Matrix<float>(3, 2)), DataError);
}

TEST(ViewCache, RoundTripIsBitwise) {
  const auto g = small_sbm(4);
  const auto adj = normalize_adjacency(g, true);
  auto v = propagate(adj, Matrix<float>(g.features), 3);
  v.manifest = view_manifest(bundle_digest(g), 3, true);
  const auto path = scratch("rt") / "views.bin";
  save_views(v, path);
  const auto w = load_views(path, v.manifest);
  ASSERT_EQ(w.K(), 3u);
  EXPECT_EQ(w.manifest, v.manifest);
  EXPECT_TRUE(w.self_loops);
  for (std::size_t k = 1; k <= 3; ++k) EXPECT_TRUE(bitwise_equal(w.hop(k), v.hop(k)));
  EXPECT_TRUE(bitwise_equal(load_view_hop(path, 2, v.manifest), v.hop(2)));
}

TEST(ViewCache, HeaderLayout) {
  ViewSet<float> v;
  v.hops.push_back(Matrix<float>::Constant(2, 3, 1.5f));
  v.manifest.fill(0xab);
  const auto path = scratch("layout") / "views.bin";
  save_views(v, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(bytes.size(), 53u + 2 * 3 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "AVGE1");
  EXPECT_EQ(bytes[5], 2);   // N
  EXPECT_EQ(bytes[9], 3);   // d
  EXPECT_EQ(bytes[13], 1);  // K
  EXPECT_EQ(bytes[17], 1);  // flags: self-loops
  EXPECT_EQ(bytes[21], 0xab);
  float first;
  std::memcpy(&first, bytes.data() + 53, 4);
  EXPECT_EQ(first, 1.5f);
}

TEST(ViewCache, CoraSizedFile) {
  // Two hops over 2708 x 1433 float features.
  ViewSet<float> v;
  v.hops.assign(2, Matrix<float>::Zero(2708, 1433));
  const auto path = scratch("cora_size") / "views.bin";
  save_views(v, path);
  EXPECT_EQ(fs::file_size(path), 2u * 2708u * 1433u * 4u + 53u);
}

TEST(ViewCache, RejectsStaleManifest) {
  const auto g = small_sbm(5);
  auto v = propagate(normalize_adjacency(g, true), Matrix<float>(g.features), 2);
  v.manifest = view_manifest(bundle_digest(g), 2, true);
  const auto path = scratch("stale") / "views.bin";
  save_views(v, path);
  for (const auto& other : {view_manifest(bundle_digest(g), 3, true), view_manifest(bundle_digest(g), 2, false),
                            view_manifest(bundle_digest(small_sbm(6)), 2, true)}) {
    try {
      load_views(path, other);
      FAIL() << "stale cache accepted";
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find("stale cache"), std::string::npos);
    }
  }
}

TEST(ViewCache, MissingAndCorrupt) {
  const auto dir = scratch("corrupt");
  try {
    load_views(dir / "absent.bin", std::nullopt);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("missing upstream artifact"), std::string::npos);
  }
  std::ofstream(dir / "bad.bin") << "NOPE1 and more bytes to get past the header length check.........";
  EXPECT_THROW(load_views(dir / "bad.bin", std::nullopt), DataError);

  ViewSet<float> v;
  v.hops.push_back(Matrix<float>::Ones(4, 4));
  save_views(v, dir / "trunc.bin");
  fs::resize_file(dir / "trunc.bin", fs::file_size(dir / "trunc.bin") - 4);
  EXPECT_THROW(load_views(dir / "trunc.bin", std::nullopt), DataError);
}

TEST(ViewManifest, DistinguishesEveryInput) {
  const Digest b{};
  const auto base = view_manifest(b, 2, true);
  EXPECT_NE(base, view_manifest(b, 3, true));
  EXPECT_NE(base, view_manifest(b, 2, false));
  EXPECT_NE(base, view_manifest(b, 2, true, 1, 0));
  EXPECT_NE(view_manifest(b, 2, true, 1, 7), view_manifest(b, 2, true, 1, 8));
  EXPECT_EQ(base, view_manifest(b, 2, true));
}
