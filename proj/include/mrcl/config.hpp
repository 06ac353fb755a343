// Copyright 2026 The mrcl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mrcl/dataset.hpp"
#include "mrcl/errors.hpp"
#include "mrcl/mlp.hpp"
#include "mrcl/pipeline.hpp"

// Flat `key = value` run configuration. Blank lines and lines starting with
// '#' are ignored; unknown and duplicate keys are errors.

namespace mrcl {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

struct RunConfig {
  std::map<std::string, std::string> entries;  // as written, after trimming
  std::filesystem::path base_dir;              // relative paths resolve against this

  // Data.
  std::string dataset;  // "idx" or "synthetic"
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::size_t downsample = 1;
  std::size_t train_limit = 0;  // 0 = all
  std::size_t test_limit = 0;
  std::size_t synthetic_points = 1000;
  std::size_t synthetic_classes = 10;
  std::size_t synthetic_dim = 64;
  double synthetic_noise = 0.1;

  // Model and training.
  std::vector<std::size_t> layers;
  bool bias = true;
  TrainConfig train;

  // Outputs and sweeps.
  std::filesystem::path output_dir = ".";
  std::vector<std::uint64_t> repro_seeds{0, 1, 2};
  std::vector<std::size_t> repro_block_sizes{20, 30, 40};

  ModelSpec model() const { return ModelSpec::mlp(layers, bias); }

  /// Hash of the normalised key/value set, independent of ordering,
  /// whitespace and comments.
  std::string hash() const {
    std::string canon;
    for (const auto& [k, v] : entries) canon += k + "=" + v + "\n";
    return hex64(fnv1a64(canon));
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
  }
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline const std::set<std::string, std::less<>>& known_keys() {
  static const std::set<std::string, std::less<>> keys{
      "dataset",          "train_images",      "train_labels",      "test_images",
      "test_labels",      "downsample",        "train_limit",       "test_limit",
      "synthetic_points", "synthetic_classes", "synthetic_dim",     "synthetic_noise",
      "layers",           "bias",              "parameterization",  "block_size",
      "budget_bits",      "learning_rate",     "batch_size",        "max_iters",
      "eps_beta0",        "eps_beta",          "finetune_steps",    "seed",
      "lambert",          "init_coding_log_std", "init_meanvar_log_std", "budget_slack_nats",
      "encode_threads",   "output_dir",        "repro_seeds",       "repro_block_sizes"};
  return keys;
}

}  // namespace detail

inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {}) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (!detail::known_keys().contains(key)) {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!cfg.entries.emplace(key, value).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }

  const auto& e = cfg.entries;
  auto require = [&](const char* key) -> const std::string& {
    const auto it = e.find(key);
    if (it == e.end()) throw ConfigError(std::string("missing required config key '") + key + "'");
    return it->second;
  };
  auto get = [&](const char* key) -> const std::string* {
    const auto it = e.find(key);
    return it == e.end() ? nullptr : &it->second;
  };
  auto path = [&](const std::string& v) {
    const std::filesystem::path p(v);
    return p.is_absolute() || cfg.base_dir.empty() ? p : cfg.base_dir / p;
  };
  using detail::parse_number;

  cfg.dataset = require("dataset");
  if (cfg.dataset == "idx") {
    cfg.train_images = path(require("train_images"));
    cfg.train_labels = path(require("train_labels"));
    cfg.test_images = path(require("test_images"));
    cfg.test_labels = path(require("test_labels"));
  } else if (cfg.dataset != "synthetic") {
    throw ConfigError("config key 'dataset': expected idx or synthetic, got '" + cfg.dataset + "'");
  }
  cfg.layers = detail::parse_list<std::size_t>("layers", require("layers"));
  cfg.train.parameterization = parse_parameterization(require("parameterization"));

  if (auto v = get("downsample")) cfg.downsample = parse_number<std::size_t>("downsample", *v);
  if (auto v = get("train_limit")) cfg.train_limit = parse_number<std::size_t>("train_limit", *v);
  if (auto v = get("test_limit")) cfg.test_limit = parse_number<std::size_t>("test_limit", *v);
  if (auto v = get("synthetic_points")) cfg.synthetic_points = parse_number<std::size_t>("synthetic_points", *v);
  if (auto v = get("synthetic_classes")) cfg.synthetic_classes = parse_number<std::size_t>("synthetic_classes", *v);
  if (auto v = get("synthetic_dim")) cfg.synthetic_dim = parse_number<std::size_t>("synthetic_dim", *v);
  if (auto v = get("synthetic_noise")) cfg.synthetic_noise = parse_number<double>("synthetic_noise", *v);
  if (auto v = get("bias")) cfg.bias = detail::parse_bool("bias", *v);

  TrainConfig& t = cfg.train;
  if (auto v = get("block_size")) t.block_size = parse_number<std::size_t>("block_size", *v);
  if (auto v = get("budget_bits")) t.budget_bits_per_block = parse_number<unsigned>("budget_bits", *v);
  if (auto v = get("learning_rate")) t.learning_rate = parse_number<double>("learning_rate", *v);
  if (auto v = get("batch_size")) t.batch_size = parse_number<std::size_t>("batch_size", *v);
  if (auto v = get("max_iters")) t.max_iters = parse_number<std::size_t>("max_iters", *v);
  if (auto v = get("eps_beta0")) t.eps_beta0 = parse_number<double>("eps_beta0", *v);
  if (auto v = get("eps_beta")) t.eps_beta = parse_number<double>("eps_beta", *v);
  if (auto v = get("finetune_steps")) t.finetune_steps = parse_number<std::size_t>("finetune_steps", *v);
  if (auto v = get("seed")) t.seed = parse_number<std::uint64_t>("seed", *v);
  if (auto v = get("init_coding_log_std")) t.init_coding_log_std = parse_number<double>("init_coding_log_std", *v);
  if (auto v = get("init_meanvar_log_std")) t.init_meanvar_log_std = parse_number<double>("init_meanvar_log_std", *v);
  if (auto v = get("budget_slack_nats")) t.budget_slack_nats = parse_number<double>("budget_slack_nats", *v);
  if (auto v = get("encode_threads")) t.encode_threads = parse_number<unsigned>("encode_threads", *v);
  if (auto v = get("lambert")) {
    if (*v == "refined") {
      t.lambert_mode = LambertMode::kRefined;
    } else if (*v == "pade") {
      t.lambert_mode = LambertMode::kPade;
    } else {
      throw ConfigError("config key 'lambert': expected refined or pade, got '" + *v + "'");
    }
  }
  if (auto v = get("output_dir")) cfg.output_dir = path(*v);
  if (auto v = get("repro_seeds")) cfg.repro_seeds = detail::parse_list<std::uint64_t>("repro_seeds", *v);
  if (auto v = get("repro_block_sizes")) {
    cfg.repro_block_sizes = detail::parse_list<std::size_t>("repro_block_sizes", *v);
  }

  if (cfg.downsample == 0) throw ConfigError("config key 'downsample' must be positive");
  t.validate();
  try {
    cfg.model().validate();
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config key 'layers': ") + ex.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), file.parent_path());
}

/// Loads the train and test splits the config describes.
inline SplitDataset load_datasets(const RunConfig& cfg) {
  if (cfg.dataset == "synthetic") {
    return gen_synthetic(cfg.synthetic_points, cfg.synthetic_classes, cfg.synthetic_dim,
                         cfg.train.seed, cfg.synthetic_noise);
  }
  SplitDataset out;
  out.train = make_image_dataset(read_idx(cfg.train_images), read_idx(cfg.train_labels),
                                 cfg.downsample, cfg.train_limit, Split::kTrain);
  out.test = make_image_dataset(read_idx(cfg.test_images), read_idx(cfg.test_labels),
                                cfg.downsample, cfg.test_limit, Split::kTest);
  return out;
}

}  // namespace mrcl
