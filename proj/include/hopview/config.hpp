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

// Flat key = value configuration. Resolution order, later wins:
//   built-in defaults < preset < config file < command-line flags
// Every key is known up front; anything else is an error.

#pragma once

#include "hopview/ablation.hpp"
#include "hopview/eval.hpp"
#include "hopview/trainer.hpp"

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <map>

namespace hopview {

inline constexpr const char* kToolVersion = "0.3.0";

struct KeySpec {
  std::string key;
  std::string help;
};

/// All configuration keys in display order.
inline const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"preset", "dataset preset: cora|citeseer|pubmed|computers|photo|arxiv-desk"},
      {"bundle", "graph bundle directory"},
      {"out", "artifact directory"},
      {"hops", "number of propagated views K"},
      {"hidden", "embedding width d'"},
      {"mask_prob", "feature-column drop probability for positives"},
      {"epochs", "training epochs"},
      {"lr", "Adam learning rate for encoder and heads"},
      {"lr_lambda", "Adam learning rate for hop-weight logits (auto = lr)"},
      {"alpha", "group-discrimination loss weight"},
      {"beta", "hop loss weight"},
      {"gamma", "relative-degree loss weight"},
      {"structure", "enable the hop and degree losses"},
      {"pool_size", "number of precomputed corruptions"},
      {"seed", "master seed for every random draw"},
      {"self_loops", "add self-loops before normalising the adjacency"},
      {"activation", "encoder activation: identity|relu|prelu"},
      {"hop_label_mode", "hop target: binary|soft"},
      {"weight_mode", "hop weighting: minmax|min|fixed_last|fixed_uniform"},
      {"aux_heads", "degree/hop heads: learned|sum"},
      {"mask_negatives", "also mask corrupted rows"},
      {"encoder_layers", "encoder depth (only 1 is supported)"},
      {"patience", "early-stop patience on training loss (0 = off)"},
      {"threads", "worker threads (0 = all cores)"},
      {"probe_runs", "linear-probe repetitions"},
      {"probe_lr", "linear-probe Adam learning rate"},
      {"probe_iters", "linear-probe iterations"},
      {"probe_weight_decay", "linear-probe weight decay"},
      {"bench_warmup", "untimed warmup repetitions"},
      {"bench_reps", "timed repetitions (median reported)"},
      {"diag_hops", "largest hop for the separation diagnostic"},
      {"ablation_seeds", "number of training seeds per ablation row"},
  };
  return keys;
}

using Settings = std::map<std::string, std::string>;

// Shortest text that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline Settings defaults_for(const std::string& preset_name) {
  const TrainConfig c = preset(preset_name);
  const ProbeConfig p;
  const BenchConfig b;
  auto flag = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"preset", preset_name},
      {"bundle", ""},
      {"out", "run"},
      {"hops", std::to_string(c.hops)},
      {"hidden", std::to_string(c.hidden)},
      {"mask_prob", fmt_double(c.mask_prob)},
      {"epochs", std::to_string(c.epochs)},
      {"lr", fmt_double(c.lr)},
      {"lr_lambda", "auto"},
      {"alpha", fmt_double(c.weights.alpha)},
      {"beta", fmt_double(c.weights.beta)},
      {"gamma", fmt_double(c.weights.gamma)},
      {"structure", flag(c.structure)},
      {"pool_size", std::to_string(c.pool_size)},
      {"seed", std::to_string(c.seed)},
      {"self_loops", flag(c.self_loops)},
      {"activation", to_string(c.activation)},
      {"hop_label_mode", to_string(c.hop_label_mode)},
      {"weight_mode", to_string(c.weight_mode)},
      {"aux_heads", to_string(c.aux_heads)},
      {"mask_negatives", flag(c.mask_negatives)},
      {"encoder_layers", std::to_string(c.encoder_layers)},
      {"patience", std::to_string(c.patience)},
      {"threads", "0"},
      {"probe_runs", std::to_string(p.runs)},
      {"probe_lr", fmt_double(p.lr)},
      {"probe_iters", std::to_string(p.iters)},
      {"probe_weight_decay", fmt_double(p.weight_decay)},
      {"bench_warmup", std::to_string(b.warmup)},
      {"bench_reps", std::to_string(b.reps)},
      {"diag_hops", "4"},
      {"ablation_seeds", "10"},
  };
}

inline bool is_known_key(const std::string& k) {
  for (const auto& s : config_keys())
    if (s.key == k) return true;
  return false;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Parses "key = value" lines; '#' starts a comment.
inline Settings parse_config_text(const std::string& text, const std::string& name = "config") {
  Settings out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (!is_known_key(key)) throw ConfigError(name + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = value;
  }
  return out;
}

inline Settings load_config_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), p.string());
}

/// Layers defaults, preset, file and flag values into one fully resolved map.
inline Settings resolve_settings(const Settings& file, const Settings& flags) {
  for (const auto& layer : {&file, &flags})
    for (const auto& [k, v] : *layer)
      if (!is_known_key(k)) throw ConfigError("unknown key '" + k + "'");
  std::string preset_name = "cora";
  if (auto it = file.find("preset"); it != file.end()) preset_name = it->second;
  if (auto it = flags.find("preset"); it != flags.end()) preset_name = it->second;
  Settings s = defaults_for(preset_name);
  for (const auto& layer : {&file, &flags})
    for (const auto& [k, v] : *layer) s[k] = v;
  return s;
}

namespace detail {
inline const std::string& get(const Settings& s, const std::string& k) {
  auto it = s.find(k);
  if (it == s.end()) throw ConfigError("unset key '" + k + "'");
  return it->second;
}
inline double as_double(const Settings& s, const std::string& k) {
  const auto& v = get(s, k);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + k + "' expects a number, got '" + v + "'");
  }
}
inline std::uint64_t as_uint(const Settings& s, const std::string& k) {
  const auto& v = get(s, k);
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("key '" + k + "' expects a non-negative integer, got '" + v + "'");
  return out;
}
inline bool as_bool(const Settings& s, const std::string& k) {
  const auto& v = get(s, k);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + k + "' expects true/false, got '" + v + "'");
}
}  // namespace detail

inline TrainConfig train_config(const Settings& s) {
  using namespace detail;
  TrainConfig c = preset(get(s, "preset"));
  c.hops = as_uint(s, "hops");
  c.hidden = as_uint(s, "hidden");
  c.mask_prob = as_double(s, "mask_prob");
  c.epochs = as_uint(s, "epochs");
  c.lr = as_double(s, "lr");
  if (get(s, "lr_lambda") == "auto") c.lr_lambda.reset();
  else c.lr_lambda = as_double(s, "lr_lambda");
  c.weights = {as_double(s, "alpha"), as_double(s, "beta"), as_double(s, "gamma")};
  c.structure = as_bool(s, "structure");
  c.pool_size = as_uint(s, "pool_size");
  c.seed = as_uint(s, "seed");
  c.self_loops = as_bool(s, "self_loops");
  c.activation = parse_activation(get(s, "activation"));
  c.hop_label_mode = parse_hop_label_mode(get(s, "hop_label_mode"));
  c.weight_mode = parse_weight_mode(get(s, "weight_mode"));
  c.aux_heads = parse_aux_heads(get(s, "aux_heads"));
  c.mask_negatives = as_bool(s, "mask_negatives");
  c.encoder_layers = as_uint(s, "encoder_layers");
  c.patience = as_uint(s, "patience");
  c.check();
  return c;
}

inline ProbeConfig probe_config(const Settings& s) {
  using namespace detail;
  ProbeConfig p;
  p.runs = as_uint(s, "probe_runs");
  p.lr = as_double(s, "probe_lr");
  p.iters = as_uint(s, "probe_iters");
  p.weight_decay = as_double(s, "probe_weight_decay");
  p.seed = as_uint(s, "seed");
  if (p.runs < 1) throw ConfigError("probe_runs must be >= 1");
  return p;
}

inline BenchConfig bench_config(const Settings& s) {
  return {detail::as_uint(s, "bench_warmup"), detail::as_uint(s, "bench_reps")};
}

inline std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Written next to every command's outputs.
struct RunManifest {
  std::string command;
  Settings config;
  std::map<std::string, std::string> inputs;  // name -> sha256 hex
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "hopview";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = config.count("seed") ? config.at("seed") : "0";
    j["started"] = iso_time(started);
    j["finished"] = iso_time(std::chrono::system_clock::now());
    j["threads"] = num_threads();
    nlohmann::ordered_json cfg;
    for (const auto& k : config_keys())
      if (config.count(k.key)) cfg[k.key] = config.at(k.key);
    j["config"] = cfg;
    j["inputs"] = inputs;
    return j;
  }

  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream(dir / (command + ".manifest.json")) << to_json().dump(2) << "\n";
  }
};

}  // namespace hopview
