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

// Synthetic bundles: a planted-partition stochastic block model with
// class-dependent Gaussian features. Used by tests and the desk-scale
// experiments.

#pragma once

#include "hopview/graph.hpp"
#include "hopview/perturb.hpp"

#include <random>

namespace hopview {

struct SbmSpec {
  std::size_t num_nodes = 200;
  int num_classes = 2;
  double p_in = 0.1;    // edge probability inside a block
  double p_out = 0.005; // edge probability across blocks
  std::size_t feature_dim = 16;
  double signal = 1.0;  // scale of the class prototypes
  double noise = 1.0;   // per-entry Gaussian noise
  std::size_t train_per_class = 20;
  std::size_t val_count = 100;
  std::uint64_t seed = 0;
};

/// Labels are assigned round-robin, so blocks have equal size up to one.
/// Every node pair is sampled independently.
inline GraphBundle make_sbm(const SbmSpec& s) {
  Rng rng(s.seed);
  GraphBundle g;
  g.num_nodes = s.num_nodes;
  g.num_classes = s.num_classes;
  std::vector<int> y(s.num_nodes);
  for (std::size_t i = 0; i < s.num_nodes; ++i) y[i] = static_cast<int>(i % s.num_classes);

  for (std::size_t i = 0; i < s.num_nodes; ++i)
    for (std::size_t j = i + 1; j < s.num_nodes; ++j)
      if (rng.bernoulli(y[i] == y[j] ? s.p_in : s.p_out))
        g.edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
  symmetrize(g.edges);

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<double> proto(s.num_classes, s.feature_dim);
  for (Eigen::Index i = 0; i < proto.size(); ++i) proto.data()[i] = s.signal * normal(rng.engine());
  g.features.resize(s.num_nodes, s.feature_dim);
  for (std::size_t i = 0; i < s.num_nodes; ++i)
    for (std::size_t c = 0; c < s.feature_dim; ++c)
      g.features(i, c) = static_cast<float>(proto(y[i], c) + s.noise * normal(rng.engine()));

  // Planetoid-style splits: a fixed number per class for training, then a
  // validation block, the rest for testing.
  Splits sp;
  auto order = random_permutation(s.num_nodes, rng);
  std::vector<std::size_t> taken(s.num_classes, 0);
  std::vector<NodeId> rest;
  for (auto v : order) {
    if (taken[y[v]] < s.train_per_class) {
      ++taken[y[v]];
      sp.train.push_back(v);
    } else {
      rest.push_back(v);
    }
  }
  const auto nval = std::min(s.val_count, rest.size());
  sp.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(nval));
  sp.test.assign(rest.begin() + static_cast<std::ptrdiff_t>(nval), rest.end());
  g.labels = std::move(y);
  g.splits = std::move(sp);
  validate(g);
  return g;
}

}  // namespace hopview
