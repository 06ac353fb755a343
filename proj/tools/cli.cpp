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

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mrcl/mrcl.hpp"

namespace mrcl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kCheckpointVersion = 1;
constexpr std::size_t kOriginalBitsPerParam = 32;

// A non-usage failure that should map to the data/format exit code.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto* p = reinterpret_cast<const std::uint8_t*>(text.data());
  write_bytes_atomic(path, std::span<const std::uint8_t>(p, text.size()));
}

std::string preprocessing(const RunConfig& cfg) {
  if (cfg.dataset == "synthetic") return "synthetic gaussian blobs clipped to [0,1]";
  return "idx pixels scaled by 1/255 to [0,1]; mean-pool downsample x" + std::to_string(cfg.downsample);
}

CsvMeta base_meta(const RunConfig& cfg) {
  return {{"config_hash", cfg.hash()},
          {"seed", std::to_string(cfg.train.seed)},
          {"parameterization", to_string(cfg.train.parameterization)},
          {"preprocessing", preprocessing(cfg)}};
}

// ---- posterior checkpoints -------------------------------------------------

json arch_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({l.in_features, l.out_features, static_cast<int>(l.kind)});
  }
  return layers;
}

ModelSpec arch_from_json(const json& j) {
  ModelSpec spec;
  for (const auto& l : j) {
    const int kind = l.at(2).get<int>();
    if (kind != 0 && kind != 1) throw FormatError("checkpoint: unknown layer kind");
    spec.layers.push_back(
        {l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>(), static_cast<LayerKind>(kind)});
  }
  spec.validate();
  return spec;
}

struct Checkpoint {
  ModelSpec arch;
  std::size_t block_size = 0;
  unsigned budget_bits = 0;
  Posterior posterior;
  CodingParams coding;
};

std::string checkpoint_json(const Checkpoint& ck, const RunConfig& cfg) {
  const Posterior& p = ck.posterior;
  json j;
  j["kind"] = "mrcl-posterior";
  j["version"] = kCheckpointVersion;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.train.seed;
  j["parameterization"] = to_string(p.parameterization);
  j["arch"] = arch_to_json(ck.arch);
  j["block_size"] = ck.block_size;
  j["budget_bits"] = ck.budget_bits;
  j["means"] = p.means;
  j["log_stds"] = p.log_stds;
  j["betas"] = p.betas;
  j["taus"] = p.taus;
  j["quota_logits"] = p.quota_logits;
  j["coding"] = {{"nu", ck.coding.nu}, {"log_rho", ck.coding.log_rho}};
  return j.dump(1) + "\n";
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  try {
    const json j = json::parse(in);
    if (j.at("kind") != "mrcl-posterior") throw FormatError("not a posterior checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
    Checkpoint ck;
    ck.arch = arch_from_json(j.at("arch"));
    ck.block_size = j.at("block_size").get<std::size_t>();
    ck.budget_bits = j.at("budget_bits").get<unsigned>();
    Posterior& p = ck.posterior;
    p.parameterization = parse_parameterization(j.at("parameterization").get<std::string>());
    j.at("means").get_to(p.means);
    j.at("log_stds").get_to(p.log_stds);
    j.at("betas").get_to(p.betas);
    j.at("taus").get_to(p.taus);
    j.at("quota_logits").get_to(p.quota_logits);
    j.at("coding").at("nu").get_to(ck.coding.nu);
    j.at("coding").at("log_rho").get_to(ck.coding.log_rho);
    const std::size_t d = ck.arch.param_count();
    const bool mv = p.parameterization == Parameterization::kMeanVar;
    if ((mv && (p.means.size() != d || p.log_stds.size() != d)) ||
        (!mv && (p.taus.size() != d || p.quota_logits.size() != d))) {
      throw FormatError("parameter vectors do not match the architecture");
    }
    ck.coding.expand(ck.arch);
    return ck;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  }
}

void check_matches(const Checkpoint& ck, const RunConfig& cfg) {
  if (!(ck.arch == cfg.model())) throw ConfigError("checkpoint architecture differs from config 'layers'");
  if (ck.posterior.parameterization != cfg.train.parameterization) {
    throw ConfigError("checkpoint parameterization differs from config 'parameterization'");
  }
  if (ck.block_size != cfg.train.block_size || ck.budget_bits != cfg.train.budget_bits_per_block) {
    throw ConfigError("checkpoint block_size/budget_bits differ from config");
  }
}

// ---- raw weights ------------------------------------------------------------

std::vector<std::uint8_t> weights_to_bytes(std::span<const double> w) {
  std::vector<std::uint8_t> out;
  out.reserve(w.size() * 8);
  for (double v : w) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

std::vector<double> weights_from_bytes(std::span<const std::uint8_t> bytes, std::size_t expected) {
  if (bytes.size() != expected * 8) {
    throw FormatError("weights file holds " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected * 8));
  }
  std::vector<double> w(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t{bytes[i * 8 + b]} << (8 * b);
    w[i] = std::bit_cast<double>(bits);
  }
  return w;
}

// ---- commands ---------------------------------------------------------------

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig load(const Common& c) {
  RunConfig cfg = load_run_config(c.config);
  if (c.seed_set) cfg.train.seed = c.seed;
  return cfg;
}

int cmd_train(const Common& c, const std::string& ck_out, const std::string& trace_out,
              std::ostream& out) {
  const RunConfig cfg = load(c);
  const SplitDataset data = load_datasets(cfg);
  const ModelSpec spec = cfg.model();
  const TrainResult res = train(spec, data.train, cfg.train);
  const fs::path ck_path = ck_out.empty() ? cfg.output_dir / "checkpoint.json" : fs::path(ck_out);
  const fs::path trace_path = trace_out.empty() ? cfg.output_dir / "trace.csv" : fs::path(trace_out);

  write_text_atomic(ck_path, checkpoint_json({spec, cfg.train.block_size, cfg.train.budget_bits_per_block,
                                              res.posterior, res.coding},
                                             cfg));
  CsvMeta meta = base_meta(cfg);
  meta.emplace_back("anneal_rule", kAnnealRule);
  std::ostringstream csv;
  write_trace_csv(csv, res.trace, meta);
  write_text_atomic(trace_path, csv.str());
  out << "checkpoint " << ck_path.string() << "\ntrace " << trace_path.string() << '\n';
  return kExitOk;
}

int cmd_compress(const Common& c, const std::string& ck_in, const std::string& model_out,
                 const std::string& post_out, std::ostream& out) {
  const RunConfig cfg = load(c);
  const Checkpoint ck = read_checkpoint(ck_in);
  check_matches(ck, cfg);
  const SplitDataset data = load_datasets(cfg);
  const CompressionResult res = compress_model(ck.arch, ck.posterior, ck.coding, data.train, cfg.train);
  const fs::path model_path = model_out.empty() ? cfg.output_dir / "model.mrcl" : fs::path(model_out);
  write_compressed_model(model_path, res.model);
  if (!post_out.empty()) {
    write_text_atomic(post_out, checkpoint_json({ck.arch, ck.block_size, ck.budget_bits, res.posterior,
                                                 res.model.coding},
                                                cfg));
  }
  const EvalResult ev = evaluate(ck.arch, res.weights, data.test);
  out << "model " << model_path.string() << "\nblocks " << res.model.indices.size()
      << "\nratio " << format_double(compression_ratio(ck.arch.param_count(), kOriginalBitsPerParam, res.model))
      << "\ntest_error " << format_double(ev.error) << '\n';
  return kExitOk;
}

int cmd_decompress(const std::string& model_in, const std::string& weights_out, std::ostream& out) {
  const CompressedModel cm = read_compressed_model(model_in);
  const auto w = decompress_model(cm);
  write_bytes_atomic(weights_out, weights_to_bytes(w));
  out << "weights " << weights_out << "\nparams " << w.size() << '\n';
  return kExitOk;
}

int cmd_evaluate(const Common& c, const std::string& model_in, const std::string& weights_in,
                 const std::string& split, std::ostream& out) {
  const RunConfig cfg = load(c);
  const SplitDataset data = load_datasets(cfg);
  ModelSpec spec = cfg.model();
  std::vector<double> w;
  if (!model_in.empty()) {
    const CompressedModel cm = read_compressed_model(model_in);
    spec = cm.arch;
    w = decompress_model(cm);
  } else {
    w = weights_from_bytes(read_bytes(weights_in), spec.param_count());
  }
  if (spec.input_dim() != data.test.dim()) throw ConfigError("model input dim differs from dataset dim");
  const EvalResult ev = evaluate(spec, w, split == "train" ? data.train : data.test);
  out << "accuracy " << format_double(ev.accuracy) << "\nerror " << format_double(ev.error) << '\n';
  return kExitOk;
}

int cmd_prune_sweep(const Common& c, const std::string& model_in, const std::string& post_in,
                    const std::vector<std::string>& strategy_names, const std::string& csv_out,
                    std::ostream& out) {
  const RunConfig cfg = load(c);
  const SplitDataset data = load_datasets(cfg);
  const CompressedModel cm = read_compressed_model(model_in);
  const auto w = decompress_model(cm);
  std::vector<PruneStrategy> strategies;
  for (const auto& s : strategy_names) strategies.push_back({parse_prune_kind(s), cfg.train.seed});
  DiagonalGaussian q;
  const bool have_post = !post_in.empty();
  if (have_post) {
    const Checkpoint ck = read_checkpoint(post_in);
    if (!(ck.arch == cm.arch)) throw ConfigError("posterior architecture differs from the model");
    const BlockSpec blocks = BlockSpec::partition(ck.arch.param_count(), ck.block_size);
    q = posterior_marginals(ck.arch, ck.posterior, ck.coding, blocks, bits_to_nats(ck.budget_bits),
                            cfg.train.lambert_mode);
  }
  for (const auto& s : strategies) {
    if (s.kind == PruneKind::kKLDivergence && !have_post) {
      throw ConfigError("kl_divergence pruning needs --posterior");
    }
  }
  const auto curves = prune_sweep(w, have_post ? &q : nullptr, strategies, default_fractions(),
                                  cm.arch, data.test);
  std::ostringstream csv;
  write_sweep_csv(csv, curves, base_meta(cfg));
  const fs::path path = csv_out.empty() ? cfg.output_dir / "prune_sweep.csv" : fs::path(csv_out);
  write_text_atomic(path, csv.str());
  out << "sweep " << path.string() << '\n';
  return kExitOk;
}

int cmd_histograms(const Common& c, const std::string& ck_in, const std::string& csv_out,
                   std::ostream& out) {
  const RunConfig cfg = load(c);
  const Checkpoint ck = read_checkpoint(ck_in);
  check_matches(ck, cfg);
  const auto rows = export_histograms(ck.arch, ck.posterior, ck.coding, cfg.train);
  std::ostringstream csv;
  write_histogram_csv(csv, rows, base_meta(cfg));
  const fs::path path = csv_out.empty() ? cfg.output_dir / "histograms.csv" : fs::path(csv_out);
  write_text_atomic(path, csv.str());
  out << "histograms " << path.string() << '\n';
  return kExitOk;
}

struct ReproRun {
  std::size_t block_size = 0;
  std::uint64_t seed = 0;
  double error = 0.0;
  double ratio = 0.0;
  fs::path model_path;
};

int cmd_repro(const Common& c, const std::string& out_dir, unsigned jobs, std::ostream& out) {
  RunConfig cfg = load(c);
  if (c.seed_set) {
    for (std::size_t i = 0; i < cfg.repro_seeds.size(); ++i) cfg.repro_seeds[i] = c.seed + i;
  }
  const fs::path dir = out_dir.empty() ? cfg.output_dir / "repro" : fs::path(out_dir);
  fs::create_directories(dir);
  const ModelSpec spec = cfg.model();

  std::vector<ReproRun> runs;
  for (std::size_t bs : cfg.repro_block_sizes) {
    for (std::uint64_t s : cfg.repro_seeds) {
      runs.push_back({bs, s, 0.0, 0.0,
                      dir / ("model_bs" + std::to_string(bs) + "_seed" + std::to_string(s) + ".mrcl")});
    }
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(runs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        ReproRun& r = runs[i];
        RunConfig rc = cfg;
        rc.train.seed = r.seed;
        rc.train.block_size = r.block_size;
        const SplitDataset data = load_datasets(rc);
        const TrainResult tr = train(spec, data.train, rc.train);
        const CompressionResult cr = compress_model(spec, tr.posterior, tr.coding, data.train, rc.train);
        write_compressed_model(r.model_path, cr.model);
        r.error = evaluate(spec, decompress_model(cr.model), data.test).error;
        r.ratio = compression_ratio(spec.param_count(), kOriginalBitsPerParam, cr.model);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const unsigned n = std::clamp<unsigned>(jobs, 1, static_cast<unsigned>(runs.size()));
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<SummaryRow> rows;
  const std::size_t n_seeds = cfg.repro_seeds.size();
  for (std::size_t b = 0; b < cfg.repro_block_sizes.size(); ++b) {
    SummaryRow row;
    row.block_size = cfg.repro_block_sizes[b];
    row.iters = cfg.train.max_iters;
    row.ratio = runs[b * n_seeds].ratio;
    double sum = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) sum += runs[b * n_seeds + s].error;
    row.error_mean = sum / static_cast<double>(n_seeds);
    if (n_seeds > 1) {
      double ss = 0.0;
      for (std::size_t s = 0; s < n_seeds; ++s) {
        const double d = runs[b * n_seeds + s].error - row.error_mean;
        ss += d * d;
      }
      row.error_stderr = std::sqrt(ss / static_cast<double>(n_seeds - 1) / static_cast<double>(n_seeds));
    }
    rows.push_back(row);
  }
  CsvMeta meta = base_meta(cfg);
  meta.erase(meta.begin() + 1);  // per-run seeds are listed instead
  std::string seeds;
  for (std::uint64_t s : cfg.repro_seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
  meta.emplace_back("seeds", seeds);
  meta.emplace_back("error_stderr", "sample standard deviation over seeds / sqrt(seed count)");
  std::ostringstream csv;
  write_summary_csv(csv, rows, meta);
  write_text_atomic(dir / "summary.csv", csv.str());
  out << "summary " << (dir / "summary.csv").string() << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational weight compression with minimal random coding", "mrcl"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "overrides the config seed")
        ->each([&](const std::string&) { common.seed_set = true; });
  };

  std::string checkpoint, trace, model, post_out, weights, split = "test", csv_out, out_dir;
  std::vector<std::string> strategies{"random_uniform", "absolute_value", "kl_divergence"};
  unsigned jobs = 1;

  auto* train_cmd = app.add_subcommand("train", "train a variational posterior");
  add_common(train_cmd);
  train_cmd->add_option("--checkpoint", checkpoint, "posterior checkpoint to write");
  train_cmd->add_option("--trace", trace, "trace CSV to write");

  auto* compress_cmd = app.add_subcommand("compress", "compress a trained posterior");
  add_common(compress_cmd);
  compress_cmd->add_option("--checkpoint", checkpoint, "trained posterior")->required();
  compress_cmd->add_option("--out", model, "compressed model to write");
  compress_cmd->add_option("--posterior-out", post_out, "posterior after blockwise fine-tuning");

  auto* decompress_cmd = app.add_subcommand("decompress", "decode a compressed model to raw f64 weights");
  decompress_cmd->add_option("--model", model, "compressed model")->required();
  decompress_cmd->add_option("--out", weights, "little-endian f64 weights to write")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "classification accuracy of a model");
  add_common(evaluate_cmd);
  auto* model_opt = evaluate_cmd->add_option("--model", model, "compressed model");
  auto* weights_opt = evaluate_cmd->add_option("--weights", weights, "raw f64 weights (config architecture)");
  model_opt->excludes(weights_opt);
  evaluate_cmd->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

  auto* prune_cmd = app.add_subcommand("prune-sweep", "accuracy while pruning the decoded weights");
  add_common(prune_cmd);
  prune_cmd->add_option("--model", model, "compressed model")->required();
  prune_cmd->add_option("--posterior", checkpoint, "posterior checkpoint for kl_divergence scores");
  prune_cmd->add_option("--strategies", strategies, "random_uniform, absolute_value, kl_divergence");
  prune_cmd->add_option("--out", csv_out, "sweep CSV to write");

  auto* hist_cmd = app.add_subcommand("histograms", "per-layer posterior mean / log std CSV");
  add_common(hist_cmd);
  hist_cmd->add_option("--checkpoint", checkpoint, "posterior checkpoint")->required();
  hist_cmd->add_option("--out", csv_out, "histogram CSV to write");

  auto* repro_cmd = app.add_subcommand("repro", "seed x block-size sweep with a summary CSV");
  add_common(repro_cmd);
  repro_cmd->add_option("--out-dir", out_dir, "output directory");
  repro_cmd->add_option("--jobs", jobs, "runs executed concurrently")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(common, checkpoint, trace, out);
    if (*compress_cmd) return cmd_compress(common, checkpoint, model, post_out, out);
    if (*decompress_cmd) return cmd_decompress(model, weights, out);
    if (*evaluate_cmd) {
      if (model.empty() && weights.empty()) throw ConfigError("evaluate needs --model or --weights");
      return cmd_evaluate(common, model, weights, split, out);
    }
    if (*prune_cmd) return cmd_prune_sweep(common, model, checkpoint, strategies, csv_out, out);
    if (*hist_cmd) return cmd_histograms(common, checkpoint, csv_out, out);
    if (*repro_cmd) return cmd_repro(common, out_dir, jobs, out);
  } catch (const ConfigError& e) {
    err << "mrcl: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "mrcl: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "mrcl: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mrcl"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mrcl::cli
