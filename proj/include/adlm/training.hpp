// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adlm/domains.hpp"
#include "adlm/tokenizer.hpp"

namespace adlm {

enum class Regime { scratch, full_finetune, adapter_finetune };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view text);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

struct TrainConfig {
  Regime regime = Regime::adapter_finetune;
  double lr = 0.03;  // constant rate of the adapter regime
  std::size_t warmup_steps = 1000;
  double noam_factor = 1.0;
  std::size_t token_budget = 8192;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  AdamConfig adam;
  std::optional<double> clip_norm;  // global gradient-norm clipping, off by default
  std::string domain;               // required by the adapter regime

  void validate() const;
};

/// Names of the parameters a regime may update.
class FreezeMask {
 public:
  FreezeMask() = default;
  explicit FreezeMask(std::set<std::string> trainable) : trainable_(std::move(trainable)) {}

  // scratch / full_finetune: every base parameter. adapter_finetune: the
  // domain's trainables (adapters + its norm set + its softmax head).
  static FreezeMask for_regime(const DomainRegistry<float>& registry, Regime regime, std::string_view domain);

  bool trainable(const std::string& name) const { return trainable_.count(name) != 0; }
  const std::set<std::string>& names() const { return trainable_; }

 private:
  std::set<std::string> trainable_;
};

// Mean over non-PAD targets of -log softmax(logits)[target]. logits: [T, N_w].
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const TokenId> targets);

// factor * h^-0.5 * min(step^-0.5, step * warmup^-1.5); step >= 1.
double noam_lr(std::size_t step, std::size_t hidden, std::size_t warmup = 1000, double factor = 1.0);

class LrSchedule {
 public:
  static LrSchedule constant(double lr);
  static LrSchedule noam(std::size_t hidden, std::size_t warmup, double factor = 1.0);

  double at(std::size_t step) const;
  bool is_constant() const { return constant_; }

 private:
  bool constant_ = true;
  double lr_ = 0.0;
  std::size_t hidden_ = 1;
  std::size_t warmup_ = 1;
  double factor_ = 1.0;
};

LrSchedule constant_lr(double lr);

/// Bias-corrected Adam over named float parameters.
class Adam {
 public:
  struct Moments {
    std::vector<float> first;
    std::vector<float> second;
  };

  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Updates every masked parameter from its gradient; frozen parameters are
  // never touched. Throws ContractError if a masked parameter has no gradient.
  void step(std::span<const NamedTensor<float>> params, const FreezeMask& mask, double lr);

  std::size_t step_count() const { return steps_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  AdamConfig cfg_;
  std::size_t steps_ = 0;
  std::map<std::string, Moments> moments_;
};

struct TrainStep {
  std::size_t step;
  double lr;
  double loss;
};

struct TrainReport {
  std::vector<TrainStep> steps;

  // Header "step\tlr\tloss", then every `every`-th step plus the last.
  void write_tsv(std::ostream& os, std::size_t every = 1) const;
};

/// Runs `tc.steps` optimizer steps over seeded passes of the corpus.
/// Noam schedule for scratch/full fine-tuning, constant rate for adapters.
/// Throws NumericError naming the step on a non-finite loss.
TrainReport train(DomainRegistry<float>& registry, const Corpus& corpus, const TrainConfig& tc);

}  // namespace adlm
