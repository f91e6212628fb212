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

#include "hopview/config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace fs = std::filesystem;
using namespace hopview;

namespace {

struct Invocation {
  std::string command;
  std::string config_file;
  std::map<std::string, std::string> raw;  // bound to CLI11 options
  std::map<std::string, CLI::Option*> opts;
};

Settings resolve(const Invocation& inv) {
  Settings file;
  if (!inv.config_file.empty()) file = load_config_file(inv.config_file);
  Settings flags;
  for (const auto& [k, opt] : inv.opts)
    if (opt->count() > 0) flags[k] = inv.raw.at(k);
  return resolve_settings(file, flags);
}

fs::path out_dir(const Settings& s) { return fs::path(s.at("out")); }
fs::path views_path(const Settings& s) { return out_dir(s) / "views.bin"; }
fs::path pool_path(const Settings& s, std::size_t c) {
  char name[32];
  std::snprintf(name, sizeof name, "neg_%03zu.bin", c);
  return out_dir(s) / "pool" / name;
}

GraphBundle need_bundle(const Settings& s) {
  const auto& dir = s.at("bundle");
  if (dir.empty()) throw ConfigError("--bundle is required for this command");
  return load_bundle(dir);
}

RunManifest manifest_for(const std::string& cmd, const Settings& s, const Invocation& inv) {
  RunManifest m;
  m.command = cmd;
  m.config = s;
  if (!inv.config_file.empty()) m.inputs["config_file"] = to_hex(file_digest(inv.config_file));
  return m;
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Settings& s, RunManifest& man) {
  const auto g = need_bundle(s);
  man.inputs["bundle"] = to_hex(bundle_digest(g));
  nlohmann::ordered_json j;
  j["num_nodes"] = g.num_nodes;
  j["undirected_edges"] = g.edges.size() / 2;
  j["feature_dim"] = g.features.cols();
  j["num_classes"] = g.num_classes ? nlohmann::ordered_json(*g.num_classes) : nlohmann::ordered_json(nullptr);
  j["homophily"] = g.labels ? nlohmann::ordered_json(homophily_ratio(g)) : nlohmann::ordered_json(nullptr);
  if (g.splits) j["splits"] = {g.splits->train.size(), g.splits->val.size(), g.splits->test.size()};
  j["bundle_sha256"] = man.inputs["bundle"];
  std::cout << j.dump(2) << "\n";
  write_json(out_dir(s) / "ingest.json", j);
  return 0;
}

int cmd_precompute(const Settings& s, RunManifest& man) {
  const auto cfg = train_config(s);
  const auto g = need_bundle(s);
  const auto p = prepare<float>(g, cfg);
  man.inputs["bundle"] = to_hex(p.bundle);
  fs::create_directories(out_dir(s) / "pool");
  save_views(p.positive, views_path(s));
  for (std::size_t c = 0; c < p.pool.size(); ++c) save_views(p.pool.entries[c].views, pool_path(s, c));
  std::cout << "views " << views_path(s).string() << " K=" << cfg.hops << " manifest=" << to_hex(p.positive.manifest)
            << "\npool " << p.pool.size() << " entries, precompute " << p.precompute_ms << " ms\n";
  return 0;
}

int cmd_train(const Settings& s, RunManifest& man) {
  const auto cfg = train_config(s);
  const auto g = need_bundle(s);
  const auto bundle = bundle_digest(g);
  man.inputs["bundle"] = to_hex(bundle);

  ViewSet<float> pos = load_views(views_path(s), view_manifest(bundle, cfg.hops, cfg.self_loops));
  CorruptionPool<float> pool;
  pool.seed = stream_seed(cfg.seed, kPoolStream);
  for (std::size_t c = 0; c < cfg.pool_size; ++c) {
    Corruption<float> e;
    e.views = load_views(pool_path(s, c), view_manifest(bundle, cfg.hops, cfg.self_loops, c + 1, pool.seed));
    pool.entries.push_back(std::move(e));
  }
  if (pos.rows() != g.num_nodes) throw DataError("view cache row count does not match bundle");
  const auto labels = relative_degrees(g);
  man.inputs["views"] = to_hex(pos.manifest);

  std::ofstream metrics(out_dir(s) / "metrics.jsonl");
  const auto res = train<float>({&pos, &pool, &labels}, cfg, [&](const EpochMetrics& m) {
    metrics << to_json(m).dump() << "\n";
  });
  metrics.close();

  const auto ckpt = out_dir(s) / "checkpoint.bin";
  save_checkpoint(res.state, ckpt);
  nlohmann::ordered_json side;
  side["format"] = "SAGD1";
  side["in_dim"] = pos.cols();
  side["hidden"] = cfg.hidden;
  side["hops"] = cfg.hops;
  side["activation"] = to_string(cfg.activation);
  side["aux_heads"] = to_string(cfg.aux_heads);
  side["weight_mode"] = to_string(cfg.weight_mode);
  side["self_loops"] = cfg.self_loops;
  side["seed"] = cfg.seed;
  side["epochs_run"] = res.metrics.size();
  const auto w = res.state.hop_weights();
  side["lambda"] = std::vector<float>(w.data(), w.data() + w.size());
  side["view_manifest"] = to_hex(pos.manifest);
  side["bundle_sha256"] = to_hex(bundle);
  side["checkpoint_sha256"] = to_hex(file_digest(ckpt));
  write_json(out_dir(s) / "checkpoint.json", side);

  const auto& last = res.metrics.back();
  std::cout << "trained " << res.metrics.size() << " epochs, final loss " << last.loss.total << ", lambda "
            << nlohmann::json(last.lambda).dump() << "\n";
  return 0;
}

// Needs only the checkpoint and the cached hop-K view; no bundle, no graph.
int cmd_embed(const Settings& s, RunManifest& man) {
  const auto side_path = out_dir(s) / "checkpoint.json";
  std::ifstream side_in(side_path);
  if (!side_in) throw DataError("missing upstream artifact: " + side_path.string());
  const auto side = nlohmann::json::parse(side_in);
  const auto ckpt = out_dir(s) / "checkpoint.bin";
  const auto state = load_checkpoint(ckpt, parse_activation(side.at("activation").get<std::string>()),
                                     parse_aux_heads(side.at("aux_heads").get<std::string>()),
                                     parse_weight_mode(side.at("weight_mode").get<std::string>()));
  const auto ckpt_hex = to_hex(file_digest(ckpt));
  if (ckpt_hex != side.at("checkpoint_sha256").get<std::string>())
    throw DataError("checkpoint does not match its sidecar: " + ckpt.string());
  const auto manifest = from_hex(side.at("view_manifest").get<std::string>());
  const auto K = side.at("hops").get<std::size_t>();

  const auto ops0 = sparse_op_count();
  const auto last = load_view_hop(views_path(s), K, manifest);
  const auto H = infer(state.model, last);
  const auto ops = sparse_op_count() - ops0;
  if (ops != 0) throw std::logic_error("embed issued sparse operations");

  save_embeddings(H, {ckpt_hex, to_hex(manifest)}, out_dir(s));
  man.inputs["checkpoint"] = ckpt_hex;
  man.inputs["views"] = to_hex(manifest);
  std::cout << "embeddings " << H.rows() << "x" << H.cols() << " sparse_ops=" << ops << "\n";
  return 0;
}

int cmd_probe(const Settings& s, RunManifest& man) {
  const auto pc = probe_config(s);
  const auto g = need_bundle(s);
  if (!g.labels || !g.splits || !g.num_classes) throw DataError("probe needs labels and splits in the bundle");
  const auto H = load_embeddings(out_dir(s));
  man.inputs["bundle"] = to_hex(bundle_digest(g));
  man.inputs["embeddings"] = to_hex(file_digest(out_dir(s) / "embeddings.bin"));
  const auto r = probe(H, *g.labels, *g.num_classes, *g.splits, pc);
  nlohmann::ordered_json j;
  j["mean"] = r.mean;
  j["std"] = r.std;
  j["runs"] = r.accuracy;
  j["formatted"] = format_accuracy(r);
  write_json(out_dir(s) / "probe.json", j);
  std::cout << format_accuracy(r) << "\n";
  return 0;
}

int cmd_bench(const Settings& s, RunManifest& man) {
  const auto cfg = train_config(s);
  const auto g = need_bundle(s);
  man.inputs["bundle"] = to_hex(bundle_digest(g));
  const auto rep = bench(g, cfg, bench_config(s));
  auto j = rep.to_json();
  j["speedup_vs_gcn"] = rep.speedup();
  write_json(out_dir(s) / "bench.json", j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_ablate(const Settings& s, RunManifest& man) {
  const auto cfg = train_config(s);
  const auto pc = probe_config(s);
  const auto g = need_bundle(s);
  man.inputs["bundle"] = to_hex(bundle_digest(g));
  const auto n = detail::as_uint(s, "ablation_seeds");
  if (n < 1) throw ConfigError("ablation_seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < n; ++i) seeds.push_back(cfg.seed + i);
  const auto cells = ablation_suite(g, cfg, pc, seeds, ablation_grid(),
                                    [](const std::string& line) { std::cerr << line << "\n"; });
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    j.push_back({{"row", c.row.name}, {"mean", c.mean}, {"std", c.std}, {"per_seed", c.per_seed}});
    std::printf("%-28s %.1f±%.1f\n", c.row.name.c_str(), 100 * c.mean, 100 * c.std);
  }
  write_json(out_dir(s) / "ablation.json", j);
  return 0;
}

int cmd_diagnose(const Settings& s, RunManifest& man) {
  const auto g = need_bundle(s);
  man.inputs["bundle"] = to_hex(bundle_digest(g));
  const auto rep = hop_separation_diagnostic(g, detail::as_uint(s, "diag_hops"), detail::as_bool(s, "self_loops"),
                                             detail::as_uint(s, "seed"));
  write_json(out_dir(s) / "diagnose.json", rep.to_json());
  std::cout << rep.to_json().dump(2) << "\n";
  return 0;
}

using Handler = int (*)(const Settings&, RunManifest&);

struct Command {
  const char* name;
  const char* help;
  Handler fn;
};

const Command kCommands[] = {
    {"ingest", "validate a graph bundle and print its summary", cmd_ingest},
    {"precompute", "propagate hop views and the corruption pool into the cache", cmd_precompute},
    {"train", "train encoder, heads and hop weights from the cache", cmd_train},
    {"embed", "embed nodes from the cached last hop and a checkpoint", cmd_embed},
    {"probe", "linear-probe saved embeddings", cmd_probe},
    {"bench", "time training, inference and a GCN reference forward", cmd_bench},
    {"ablate", "run the hop-weighting ablation grid", cmd_ablate},
    {"diagnose", "homophily and per-hop separation of clean vs corrupted views", cmd_diagnose},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hopview: graph embeddings from precomputed hop views"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help for every subcommand");

  const Settings defaults = defaults_for("cora");
  std::vector<std::unique_ptr<Invocation>> invs;
  for (const auto& c : kCommands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    auto inv = std::make_unique<Invocation>();
    inv->command = c.name;
    sub->add_option("--config", inv->config_file, "flat key = value config file");
    for (const auto& k : config_keys()) {
      std::string names = "--" + k.key;
      if (k.key == "probe_runs" && std::string(c.name) == "probe") names += ",--runs";
      auto* opt = sub->add_option(names, inv->raw[k.key], k.help);
      opt->default_str(defaults.at(k.key))->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
      inv->opts[k.key] = opt;
    }
    sub->footer("Defaults shown are for preset cora; choosing --preset replaces the preset-dependent ones.");
    invs.push_back(std::move(inv));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (std::size_t i = 0; i < std::size(kCommands); ++i) {
    if (!app.got_subcommand(kCommands[i].name)) continue;
    const auto& inv = *invs[i];
    try {
      const auto s = resolve(inv);
      set_num_threads(static_cast<int>(detail::as_uint(s, "threads")));
      auto man = manifest_for(inv.command, s, inv);
      fs::create_directories(out_dir(s));
      const int rc = kCommands[i].fn(s, man);
      man.write(out_dir(s));
      return rc;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    } catch (const DataError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return 3;
    } catch (const DivergenceError& e) {
      std::cerr << "numerical divergence: " << e.what() << "\n";
      return 4;
    } catch (const nlohmann::json::exception& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return 3;
    } catch (const std::invalid_argument& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
