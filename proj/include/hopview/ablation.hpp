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

#pragma once

#include "hopview/eval.hpp"
#include "hopview/trainer.hpp"

namespace hopview {

struct AblationRow {
  std::string name;
  WeightMode mode = WeightMode::kMinMax;
  bool structure = true;
};

/// The six hop-weighting / structure-loss combinations, weakest first.
inline std::vector<AblationRow> ablation_grid() {
  return {
      {"fixed [0,..,1]", WeightMode::kFixedLast, false},
      {"fixed [1,..,1]", WeightMode::kFixedUniform, false},
      {"fixed [1,..,1] + structure", WeightMode::kFixedUniform, true},
      {"min", WeightMode::kMin, false},
      {"min-max", WeightMode::kMinMax, false},
      {"min-max + structure", WeightMode::kMinMax, true},
  };
}

struct AblationCell {
  AblationRow row;
  double mean = 0, std = 0;
  std::vector<double> per_seed;  // mean probe accuracy of each training seed
};

/// Trains every row once per seed and reports the mean and spread of the
/// per-seed probe accuracy. Views are propagated once and shared; each seed
/// builds its own corruption pool.
inline std::vector<AblationCell> ablation_suite(const GraphBundle& g, const TrainConfig& base,
                                                const ProbeConfig& probe_cfg, const std::vector<std::uint64_t>& seeds,
                                                const std::vector<AblationRow>& grid = ablation_grid(),
                                                const std::function<void(const std::string&)>& log = {}) {
  if (!g.labels || !g.splits || !g.num_classes) throw DataError("ablation needs labels and splits");
  base.check();
  const auto shared = prepare<float>(g, base);

  std::vector<AblationCell> cells;
  for (const auto& row : grid) cells.push_back({row, 0, 0, {}});

  for (auto seed : seeds) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    const auto pool = build_pool(shared.adj, Matrix<float>(g.features), cfg.hops, cfg.pool_size,
                                 stream_seed(seed, kPoolStream), shared.bundle);
    const TrainInputs<float> in{&shared.positive, &pool, &shared.labels};
    for (auto& cell : cells) {
      cfg.weight_mode = cell.row.mode;
      cfg.structure = cell.row.structure;
      const auto res = train<float>(in, cfg);
      const auto H = infer(res.state.model, shared.positive.hop(cfg.hops));
      ProbeConfig pc = probe_cfg;
      pc.seed = seed;
      const auto acc = probe(H, *g.labels, *g.num_classes, *g.splits, pc);
      cell.per_seed.push_back(acc.mean);
      if (log) log(cell.row.name + " seed=" + std::to_string(seed) + " acc=" + format_accuracy(acc));
    }
  }
  for (auto& c : cells) {
    double s = 0;
    for (double a : c.per_seed) s += a;
    c.mean = s / static_cast<double>(c.per_seed.size());
    double v = 0;
    for (double a : c.per_seed) v += (a - c.mean) * (a - c.mean);
    c.std = std::sqrt(v / static_cast<double>(c.per_seed.size()));
  }
  return cells;
}

}  // namespace hopview
