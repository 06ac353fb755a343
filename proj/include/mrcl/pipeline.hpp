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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrcl/autodiff.hpp"
#include "mrcl/codec.hpp"
#include "mrcl/dataset.hpp"
#include "mrcl/errors.hpp"
#include "mrcl/gaussian.hpp"
#include "mrcl/mlp.hpp"
#include "mrcl/optim.hpp"
#include "mrcl/random.hpp"

// Variational training under the Mean-Var and Mean-KL parameterisations and
// the blockwise compress-then-finetune schedule.

namespace mrcl {

enum class Parameterization { kMeanVar, kMeanKL };

inline std::string to_string(Parameterization p) {
  return p == Parameterization::kMeanVar ? "mean-var" : "mean-kl";
}

inline Parameterization parse_parameterization(const std::string& s) {
  if (s == "mean-var" || s == "meanvar" || s == "MeanVar") return Parameterization::kMeanVar;
  if (s == "mean-kl" || s == "meankl" || s == "MeanKL") return Parameterization::kMeanKL;
  throw ConfigError("unknown parameterization '" + s + "' (expected mean-var or mean-kl)");
}

struct TrainConfig {
  unsigned budget_bits_per_block = 20;
  std::size_t block_size = 20;
  double learning_rate = 1e-3;
  std::size_t batch_size = 200;
  std::size_t max_iters = 1000;
  double eps_beta0 = 1e-8;
  double eps_beta = 5e-5;
  std::size_t finetune_steps = 100;
  std::uint64_t seed = 0;
  Parameterization parameterization = Parameterization::kMeanKL;

  double init_coding_log_std = -2.0;
  double init_meanvar_log_std = -10.0;
  // Mean-Var blocks are encoded only once their KL is within this of budget.
  double budget_slack_nats = 0.1;
  LambertMode lambert_mode = LambertMode::kRefined;
  unsigned encode_threads = 1;

  double kappa_block() const { return bits_to_nats(budget_bits_per_block); }

  void validate() const {
    if (budget_bits_per_block < 1 || budget_bits_per_block > kMaxBudgetBits) {
      throw ConfigError("budget_bits must be in [1, " + std::to_string(kMaxBudgetBits) + "]");
    }
    if (block_size == 0) throw ConfigError("block_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(eps_beta0 > 0.0) || !(eps_beta > 0.0)) throw ConfigError("eps_beta0/eps_beta must be positive");
    if (!(budget_slack_nats >= 0.0)) throw ConfigError("budget_slack_nats must be non-negative");
  }
};

inline const char* kAnnealRule =
    "per block: beta <- beta*(1+eps_beta) if kl_block > budget else beta/(1+eps_beta); "
    "beta starts at eps_beta0";

/// Multiplicative KL annealing step for one block.
inline double anneal_beta(double beta, double kl_block, double budget, const TrainConfig& cfg) {
  if (!(beta > 0.0)) throw std::invalid_argument("anneal_beta: beta must be positive");
  return kl_block > budget ? beta * (1.0 + cfg.eps_beta) : beta / (1.0 + cfg.eps_beta);
}

// Layerwise Gaussian coding distribution; every weight of a layer shares
// (nu, log rho).
struct CodingParams {
  std::vector<double> nu;
  std::vector<double> log_rho;

  /// Per-parameter coding marginals.
  DiagonalGaussian expand(const ModelSpec& spec) const {
    if (nu.size() != spec.layers.size() || log_rho.size() != spec.layers.size()) {
      throw std::invalid_argument("CodingParams: layer count mismatch");
    }
    DiagonalGaussian out;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
      out.means.insert(out.means.end(), spec.layers[l].param_count(), nu[l]);
      out.log_stds.insert(out.log_stds.end(), spec.layers[l].param_count(), log_rho[l]);
    }
    return out;
  }

  bool operator==(const CodingParams&) const = default;
};

struct Posterior {
  Parameterization parameterization = Parameterization::kMeanKL;
  // Mean-Var
  std::vector<double> means;
  std::vector<double> log_stds;
  std::vector<double> betas;  // one per block
  // Mean-KL
  std::vector<double> taus;
  std::vector<double> quota_logits;

  bool operator==(const Posterior&) const = default;
};

struct TraceRecord {
  std::size_t iter = 0;
  double cross_entropy = 0.0;  // minibatch mean under the sampled weights
  double kl_nats = 0.0;        // sum over all blocks
  double beta_or_kappa = 0.0;  // Mean-Var: mean beta of trainable blocks; Mean-KL: sum of budgets
  double max_block_excess = 0.0;  // max_b (kl_b - kappa_block)
  double min_block_excess = 0.0;  // min_b (kl_b - kappa_block)
};

struct TrainTrace {
  Parameterization parameterization = Parameterization::kMeanKL;
  std::vector<TraceRecord> records;
};

struct TrainResult {
  Posterior posterior;
  CodingParams coding;
  TrainTrace trace;
};

inline std::vector<double> default_weight_init(const ModelSpec& spec, std::uint64_t seed) {
  SplitMixRng rng(hash_combine(seed, 0x1A17));
  std::vector<double> w;
  w.reserve(spec.param_count());
  for (const auto& l : spec.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_features));
    for (std::size_t i = 0; i < l.param_count(); ++i) w.push_back(rng.uniform(-bound, bound));
  }
  return w;
}

inline CodingParams initial_coding(const ModelSpec& spec, const TrainConfig& cfg) {
  return {std::vector<double>(spec.layers.size(), 0.0),
          std::vector<double>(spec.layers.size(), cfg.init_coding_log_std)};
}

/// Initial variational state. Mean-KL taus invert the default weight init
/// under uniform quotas.
inline Posterior initial_posterior(const ModelSpec& spec, const TrainConfig& cfg,
                                   const CodingParams& coding) {
  const auto init = default_weight_init(spec, cfg.seed);
  const BlockSpec blocks = BlockSpec::partition(spec.param_count(), cfg.block_size);
  Posterior post;
  post.parameterization = cfg.parameterization;
  if (cfg.parameterization == Parameterization::kMeanVar) {
    post.means = init;
    post.log_stds.assign(init.size(), cfg.init_meanvar_log_std);
    post.betas.assign(blocks.count(), cfg.eps_beta0);
  } else {
    const DiagonalGaussian p = coding.expand(spec);
    post.quota_logits.assign(init.size(), 0.0);
    post.taus.resize(init.size());
    for (const Segment& b : blocks.blocks()) {
      const double kappa_w = cfg.kappa_block() / static_cast<double>(b.length);
      for (std::size_t i = b.start; i < b.end(); ++i) post.taus[i] = tau_from_mean(init[i], kappa_w, p[i]);
    }
  }
  return post;
}

/// Per-parameter posterior marginals (mean, log std).
inline DiagonalGaussian posterior_marginals(const ModelSpec& spec, const Posterior& post,
                                            const CodingParams& coding, const BlockSpec& blocks,
                                            double kappa_block,
                                            LambertMode mode = LambertMode::kRefined) {
  if (post.parameterization == Parameterization::kMeanVar) {
    return {post.means, post.log_stds};
  }
  const DiagonalGaussian p = coding.expand(spec);
  DiagonalGaussian out{std::vector<double>(p.size()), std::vector<double>(p.size())};
  for (const Segment& b : blocks.blocks()) {
    const auto first = static_cast<std::ptrdiff_t>(b.start);
    const auto last = static_cast<std::ptrdiff_t>(b.end());
    MeanKLBlockParams params{{post.taus.begin() + first, post.taus.begin() + last},
                             {post.quota_logits.begin() + first, post.quota_logits.begin() + last},
                             kappa_block};
    MeanVarBlockParams mv;
    try {
      mv = meankl_to_meanvar(params, p.slice(b.start, b.length), mode);
    } catch (const ConstraintError& e) {
      throw ConstraintError(std::string("parameter ") + std::to_string(b.start + e.index()) + ": " +
                                e.what(),
                            b.start + e.index());
    }
    std::copy(mv.means.begin(), mv.means.end(), out.means.begin() + first);
    std::copy(mv.log_stds.begin(), mv.log_stds.end(), out.log_stds.begin() + first);
  }
  return out;
}

/// KL of every block of q from the coding distribution.
inline std::vector<double> block_kls(const DiagonalGaussian& q, const DiagonalGaussian& p,
                                     const BlockSpec& blocks) {
  std::vector<double> out;
  out.reserve(blocks.count());
  for (const Segment& b : blocks.blocks()) {
    out.push_back(block_kl(q.slice(b.start, b.length), p.slice(b.start, b.length)));
  }
  return out;
}

// Holds the training graph and optimiser state for one run. Blocks can be
// fixed to a decoded sample, after which they are constants of the network
// and their variational parameters stop moving.
class VariationalTrainer {
 public:
  VariationalTrainer(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg,
                     Posterior posterior, CodingParams coding)
      : spec_(spec),
        data_(data),
        cfg_(cfg),
        blocks_(BlockSpec::partition(spec.param_count(), cfg.block_size)),
        post_(std::move(posterior)),
        coding_(std::move(coding)),
        adam_(Adam::Options{cfg.learning_rate}),
        batch_rng_(hash_combine(cfg.seed, 0xBA7C)),
        noise_seed_(hash_combine(cfg.seed, 0x0153)) {
    cfg_.validate();
    spec_.validate();
    data_.validate();
    if (data_.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (data_.dim() != spec_.input_dim()) {
      throw std::invalid_argument("train: data dim " + std::to_string(data_.dim()) +
                                  " does not match model input " + std::to_string(spec_.input_dim()));
    }
    if (post_.parameterization != cfg_.parameterization) {
      throw std::invalid_argument("train: posterior parameterization differs from config");
    }
    batch_ = std::min(cfg_.batch_size, data_.size());
    const std::size_t d = spec_.param_count();
    fixed_values_.assign(d, 0.0);
    free_mask_.assign(d, 1.0);
    frozen_.assign(d, 0);
    block_fixed_.assign(blocks_.count(), 0);
    build_graph();
    bindings_["x"] = ad::Tensor({batch_, spec_.input_dim()});
    bindings_["labels"] = ad::Tensor({batch_});
    bindings_["noise"] = ad::Tensor({d});
    bindings_["log_rho"] = ad::Tensor::vector(coding_.log_rho);
    bindings_["nu"] = ad::Tensor::vector(coding_.expand(spec_).means);
    sync_masks();
    if (post_.parameterization == Parameterization::kMeanVar) {
      if (post_.betas.size() != blocks_.count()) post_.betas.assign(blocks_.count(), cfg_.eps_beta0);
      bindings_["mu"] = ad::Tensor::vector(post_.means);
      bindings_["log_sigma"] = ad::Tensor::vector(post_.log_stds);
      bindings_["beta"] = ad::Tensor::vector(post_.betas);
    } else {
      bindings_["tau"] = ad::Tensor::vector(post_.taus);
      bindings_["quota_logits"] = ad::Tensor::vector(post_.quota_logits);
      bindings_["kappa"] = ad::Tensor::vector(std::vector<double>(blocks_.count(), cfg_.kappa_block()));
    }
  }

  VariationalTrainer(const VariationalTrainer&) = delete;
  VariationalTrainer& operator=(const VariationalTrainer&) = delete;

  const BlockSpec& blocks() const { return blocks_; }
  const CodingParams& coding() const { return coding_; }
  std::size_t steps_taken() const { return step_; }

  Posterior posterior() const {
    Posterior p = post_;
    if (p.parameterization == Parameterization::kMeanVar) {
      p.means = bindings_.at("mu").data();
      p.log_stds = bindings_.at("log_sigma").data();
      p.betas = bindings_.at("beta").data();
    } else {
      p.taus = bindings_.at("tau").data();
      p.quota_logits = bindings_.at("quota_logits").data();
    }
    return p;
  }

  /// Freezes the coding distribution (done once compression starts).
  void freeze_coding() { coding_frozen_ = true; }

  bool block_fixed(std::size_t b) const { return block_fixed_.at(b) != 0; }

  void fix_block(std::size_t b, std::span<const double> values) {
    const Segment& s = blocks_[b];
    if (values.size() != s.length) throw std::invalid_argument("fix_block: wrong block length");
    for (std::size_t i = 0; i < s.length; ++i) {
      fixed_values_[s.start + i] = values[i];
      free_mask_[s.start + i] = 0.0;
      frozen_[s.start + i] = 1;
    }
    block_fixed_[b] = 1;
    sync_masks();
  }

  /// Network weights with every fixed block substituted and every free
  /// parameter at its posterior mean.
  std::vector<double> point_weights() const {
    const DiagonalGaussian q = marginals();
    std::vector<double> w(q.means);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (frozen_[i]) w[i] = fixed_values_[i];
    }
    return w;
  }

  const std::vector<double>& fixed_values() const { return fixed_values_; }

  DiagonalGaussian marginals() const {
    return posterior_marginals(spec_, posterior(), coding_, blocks_, cfg_.kappa_block(),
                               cfg_.lambert_mode);
  }

  std::vector<double> current_block_kls() const {
    return block_kls(marginals(), coding_.expand(spec_), blocks_);
  }

  /// One optimiser step on the objective; returns the trace record of the
  /// state the step started from.
  TraceRecord step() {
    fill_batch();
    fill_noise();
    graph_.forward(bindings_, loss_);
    const double ce = graph_.value(ce_).item();

    const std::vector<double> kls = current_block_kls();
    const double kappa = cfg_.kappa_block();
    TraceRecord rec;
    rec.iter = step_;
    rec.cross_entropy = ce;
    rec.kl_nats = std::accumulate(kls.begin(), kls.end(), 0.0);
    rec.max_block_excess = -std::numeric_limits<double>::infinity();
    rec.min_block_excess = std::numeric_limits<double>::infinity();
    for (double kl : kls) {
      rec.max_block_excess = std::max(rec.max_block_excess, kl - kappa);
      rec.min_block_excess = std::min(rec.min_block_excess, kl - kappa);
    }

    const ad::Gradients grads = graph_.backward(loss_);
    if (post_.parameterization == Parameterization::kMeanVar) {
      ad::Tensor& beta = bindings_.at("beta");
      double beta_sum = 0.0;
      std::size_t active = 0;
      for (std::size_t b = 0; b < blocks_.count(); ++b) {
        if (block_fixed_[b]) continue;
        beta_sum += beta[b];
        ++active;
      }
      rec.beta_or_kappa = active ? beta_sum / static_cast<double>(active) : 0.0;
      update("mu", grads);
      update("log_sigma", grads);
      for (std::size_t b = 0; b < blocks_.count(); ++b) {
        if (!block_fixed_[b]) beta[b] = anneal_beta(beta[b], kls[b], kappa, cfg_);
      }
    } else {
      rec.beta_or_kappa = kappa * static_cast<double>(blocks_.count());
      update("tau", grads);
      update("quota_logits", grads);
    }
    if (!coding_frozen_) {
      adam_.step("log_rho", bindings_.at("log_rho").values(), grads.at("log_rho").values());
      coding_.log_rho = bindings_.at("log_rho").data();
    }
    ++step_;
    return rec;
  }

  /// Worst relative error between backprop and central differences of the
  /// objective on the next minibatch and noise draw. Does not take a step.
  double gradient_check(double h) {
    fill_batch();
    fill_noise();
    return ad::finite_diff_check(graph_, loss_, bindings_, h);
  }

 private:
  void build_graph() {
    const std::size_t d = spec_.param_count();
    const auto layers = spec_.layer_segments();
    auto x = graph_.input("x", {std::min(cfg_.batch_size, data_.size()), spec_.input_dim()});
    auto labels = graph_.input("labels", {std::min(cfg_.batch_size, data_.size())});
    auto noise = graph_.input("noise", {d});
    auto fixed = graph_.input("fixed", {d});
    auto free_mask = graph_.input("free_mask", {d});
    auto nu = graph_.input("nu", {d});
    auto log_rho = graph_.input("log_rho", {spec_.layers.size()}, /*trainable=*/true);
    auto log_rho_w = ad::segment_broadcast(log_rho, layers);

    ad::Var mu;
    ad::Var log_sigma;
    if (cfg_.parameterization == Parameterization::kMeanVar) {
      mu = graph_.input("mu", {d}, true);
      log_sigma = graph_.input("log_sigma", {d}, true);
    } else {
      auto tau = graph_.input("tau", {d}, true);
      auto g = graph_.input("quota_logits", {d}, true);
      auto kappa = graph_.input("kappa", {blocks_.count()});
      auto kappa_w = ad::segment_softmax(g, blocks_.blocks()) *
                     ad::segment_broadcast(kappa, blocks_.blocks());
      auto z = ad::sqrt(2.0 * kappa_w) * ad::tanh(tau);
      mu = nu + ad::exp(log_rho_w) * z;
      auto a = ad::square(z) - 2.0 * kappa_w - 1.0;
      auto w = ad::lambert_w(-ad::exp(a), cfg_.lambert_mode);
      log_sigma = log_rho_w + 0.5 * (a - w);
    }
    auto sample = ad::reparam_sample(mu, ad::exp(log_sigma), noise);
    auto weights = fixed + free_mask * sample;
    auto logits = mlp_apply(spec_, weights, x);
    ce_ = ad::cross_entropy(logits, labels);
    auto distortion = static_cast<double>(data_.size()) * ce_;

    if (cfg_.parameterization == Parameterization::kMeanVar) {
      auto beta = graph_.input("beta", {blocks_.count()});
      // Elementwise KL(q || p); fixed coordinates are masked out.
      auto d_log = log_sigma - log_rho_w;
      auto zq = (mu - nu) * ad::exp(-log_rho_w);
      auto kl = ad::exp(2.0 * d_log) * 0.5 - d_log + 0.5 * ad::square(zq) - 0.5;
      auto block_kl_v = ad::segment_sum(free_mask * kl, blocks_.blocks());
      loss_ = distortion + ad::sum(beta * block_kl_v);
    } else {
      loss_ = distortion;
    }
  }

  void sync_masks() {
    bindings_["fixed"] = ad::Tensor::vector(fixed_values_);
    bindings_["free_mask"] = ad::Tensor::vector(free_mask_);
  }

  void update(const std::string& name, const ad::Gradients& grads) {
    adam_.step(name, bindings_.at(name).values(), grads.at(name).values(), frozen_);
  }

  void fill_batch() {
    if (order_.empty() || cursor_ + batch_ > order_.size()) {
      order_.resize(data_.size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      batch_rng_.shuffle(order_);
      cursor_ = 0;
    }
    ad::Tensor& x = bindings_.at("x");
    ad::Tensor& y = bindings_.at("labels");
    const std::size_t dim = spec_.input_dim();
    for (std::size_t i = 0; i < batch_; ++i) {
      const std::size_t row = order_[cursor_ + i];
      const auto src = data_.inputs.values().subspan(row * dim, dim);
      std::copy(src.begin(), src.end(), x.values().begin() + static_cast<std::ptrdiff_t>(i * dim));
      y[i] = static_cast<double>(data_.labels[row]);
    }
    cursor_ += batch_;
  }

  void fill_noise() {
    ad::Tensor& eps = bindings_.at("noise");
    const std::uint64_t key = hash_combine(noise_seed_, step_);
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = keyed_normal(hash_combine(key, i));
  }

  ModelSpec spec_;
  const Dataset& data_;
  TrainConfig cfg_;
  BlockSpec blocks_;
  Posterior post_;
  CodingParams coding_;
  Adam adam_;
  SplitMixRng batch_rng_;
  std::uint64_t noise_seed_;
  std::size_t batch_ = 0;

  ad::Graph graph_;
  ad::Bindings bindings_;
  ad::Var ce_;
  ad::Var loss_;

  std::vector<double> fixed_values_;
  std::vector<double> free_mask_;
  std::vector<std::uint8_t> frozen_;
  std::vector<std::uint8_t> block_fixed_;
  bool coding_frozen_ = false;

  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t step_ = 0;
};

/// Variational training for cfg.max_iters steps from the seeded initialisation.
inline TrainResult train(const ModelSpec& spec, const Dataset& data, const TrainConfig& cfg) {
  CodingParams coding = initial_coding(spec, cfg);
  Posterior post = initial_posterior(spec, cfg, coding);
  VariationalTrainer trainer(spec, data, cfg, std::move(post), std::move(coding));
  TrainResult result;
  result.trace.parameterization = cfg.parameterization;
  result.trace.records.reserve(cfg.max_iters);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) result.trace.records.push_back(trainer.step());
  result.posterior = trainer.posterior();
  result.coding = trainer.coding();
  return result;
}

inline constexpr std::uint16_t kFormatVersion = 1;

struct CompressedModel {
  std::uint16_t format_version = kFormatVersion;
  ModelSpec arch;
  CodingParams coding;
  std::uint32_t block_size = 0;
  std::uint32_t budget_bits = 0;
  std::uint64_t global_seed = 0;
  std::uint64_t selection_seed = 0;
  std::vector<EncodedBlock> indices;

  bool operator==(const CompressedModel&) const = default;
};

/// Selection seed used for block `b`.
inline std::uint64_t block_selection_seed(std::uint64_t selection_seed, std::size_t b) {
  return hash_combine(selection_seed, b);
}

struct CompressionResult {
  CompressedModel model;
  Posterior posterior;           // variational state after the last block was fixed
  DiagonalGaussian marginals;    // per-parameter (mean, log std) at that point
  std::vector<double> weights;   // the decoded weight sample
  std::size_t finetune_steps = 0;
  std::size_t anneal_steps = 0;  // extra Mean-Var steps spent at the budget gate
};

/// Blockwise compression: encode block b, fix its decoded sample, fine-tune
/// the remaining blocks, repeat.
inline CompressionResult compress_model(const ModelSpec& spec, const Posterior& posterior,
                                        const CodingParams& coding, const Dataset& data,
                                        const TrainConfig& cfg) {
  VariationalTrainer trainer(spec, data, cfg, posterior, coding);
  trainer.freeze_coding();
  const BlockSpec& blocks = trainer.blocks();
  const DiagonalGaussian p = trainer.coding().expand(spec);
  const double budget = cfg.kappa_block();

  CompressionResult result;
  CompressedModel& cm = result.model;
  cm.arch = spec;
  cm.coding = trainer.coding();
  cm.block_size = static_cast<std::uint32_t>(cfg.block_size);
  cm.budget_bits = cfg.budget_bits_per_block;
  cm.global_seed = hash_combine(cfg.seed, 0xC0DE);
  cm.selection_seed = hash_combine(cfg.seed, 0x5E1E);

  for (std::size_t b = 0; b < blocks.count(); ++b) {
    const Segment& s = blocks[b];
    if (cfg.parameterization == Parameterization::kMeanVar) {
      std::size_t extra = 0;
      while (trainer.current_block_kls()[b] > budget + cfg.budget_slack_nats) {
        if (extra >= cfg.max_iters) {
          throw std::runtime_error("compress_model: block " + std::to_string(b) + " KL " +
                                   std::to_string(trainer.current_block_kls()[b]) +
                                   " nats still over budget " + std::to_string(budget) +
                                   " after " + std::to_string(extra) + " extra annealing steps");
        }
        trainer.step();
        ++extra;
      }
      result.anneal_steps += extra;
    }
    const DiagonalGaussian q_b = trainer.marginals().slice(s.start, s.length);
    const DiagonalGaussian p_b = p.slice(s.start, s.length);
    const StreamKey key{cm.global_seed, b};
    const EncodedBlock enc =
        encode_block(q_b, p_b, cm.budget_bits, key, block_selection_seed(cm.selection_seed, b),
                     {cfg.encode_threads});
    cm.indices.push_back(enc);
    trainer.fix_block(b, decode_block(p_b, enc, key));
    if (b + 1 < blocks.count()) {
      for (std::size_t i = 0; i < cfg.finetune_steps; ++i) trainer.step();
      result.finetune_steps += cfg.finetune_steps;
    }
  }
  result.posterior = trainer.posterior();
  result.marginals = trainer.marginals();
  result.weights = trainer.fixed_values();
  return result;
}

/// Regenerates every block from the shared seeds and the transmitted indices.
inline std::vector<double> decompress_model(const CompressedModel& cm) {
  if (cm.format_version != kFormatVersion) {
    throw FormatError("compressed model version " + std::to_string(cm.format_version) +
                      " is not supported");
  }
  cm.arch.validate();
  const BlockSpec blocks = BlockSpec::partition(cm.arch.param_count(), cm.block_size);
  if (cm.indices.size() != blocks.count()) {
    throw FormatError("compressed model has " + std::to_string(cm.indices.size()) +
                      " indices for " + std::to_string(blocks.count()) + " blocks");
  }
  const DiagonalGaussian p = cm.coding.expand(cm.arch);
  std::vector<double> weights(cm.arch.param_count());
  for (std::size_t b = 0; b < blocks.count(); ++b) {
    const Segment& s = blocks[b];
    const auto w = decode_block(p.slice(s.start, s.length), cm.indices[b], {cm.global_seed, b});
    std::copy(w.begin(), w.end(), weights.begin() + static_cast<std::ptrdiff_t>(s.start));
  }
  return weights;
}

struct EvalResult {
  double accuracy = 0.0;
  double error = 1.0;
};

inline EvalResult evaluate(const ModelSpec& spec, std::span<const double> weights,
                           const Dataset& data) {
  if (data.size() == 0) return {0.0, 1.0};
  const auto pred = predict_classes(spec, weights, data.inputs.values());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i] ? 1 : 0;
  const double acc = static_cast<double>(correct) / static_cast<double>(data.size());
  return {acc, 1.0 - acc};
}

struct HistogramRow {
  std::size_t layer = 0;
  double mean = 0.0;
  double log_std = 0.0;
};

/// One (layer, mean, log std) row per parameter, Mean-KL converted first.
inline std::vector<HistogramRow> export_histograms(const ModelSpec& spec, const Posterior& post,
                                                   const CodingParams& coding,
                                                   const TrainConfig& cfg) {
  const BlockSpec blocks = BlockSpec::partition(spec.param_count(), cfg.block_size);
  const DiagonalGaussian q =
      posterior_marginals(spec, post, coding, blocks, cfg.kappa_block(), cfg.lambert_mode);
  const auto layer = spec.layer_of_param();
  std::vector<HistogramRow> rows(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) rows[i] = {layer[i], q.means[i], q.log_stds[i]};
  return rows;
}

}  // namespace mrcl
