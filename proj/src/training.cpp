// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <ostream>

#include "adlm/errors.hpp"

namespace adlm {

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::scratch:
      return "scratch";
    case Regime::full_finetune:
      return "full_finetune";
    case Regime::adapter_finetune:
      return "adapter_finetune";
  }
  return "unknown";
}

Regime parse_regime(std::string_view text) {
  if (text == "scratch") return Regime::scratch;
  if (text == "full_finetune") return Regime::full_finetune;
  if (text == "adapter_finetune") return Regime::adapter_finetune;
  throw ContractError("unknown training regime '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ContractError("TrainConfig: lr must be positive");
  if (warmup_steps == 0) throw ContractError("TrainConfig: warmup_steps must be positive");
  if (token_budget == 0) throw ContractError("TrainConfig: token_budget must be positive");
  if (regime == Regime::adapter_finetune && domain.empty()) {
    throw ContractError("TrainConfig: the adapter regime needs an active domain");
  }
  if (clip_norm && !(*clip_norm > 0.0)) throw ContractError("TrainConfig: clip_norm must be positive");
}

FreezeMask FreezeMask::for_regime(const DomainRegistry<float>& registry, Regime regime, std::string_view domain) {
  std::set<std::string> names;
  if (regime == Regime::adapter_finetune) {
    for (const auto& nt : registry.domain_trainables(domain)) names.insert(nt.name);
  } else {
    for (const auto& nt : registry.base_named()) names.insert(nt.name);
  }
  return FreezeMask(std::move(names));
}

template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const TokenId> targets) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy_loss: logits must be [T, N_w], got " + shape_str(logits.shape()));
  const std::size_t rows = logits.dim(0);
  const std::size_t nw = logits.dim(1);
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy_loss: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " logit rows");
  }
  auto probs = std::make_shared<std::vector<T>>(logits.numel());
  auto kept = std::make_shared<std::vector<TokenId>>(targets.begin(), targets.end());
  const T* x = logits.data().data();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = x + r * nw;
    T* p = probs->data() + r * nw;
    const T mx = *std::max_element(row, row + nw);
    T z = T(0);
    for (std::size_t j = 0; j < nw; ++j) {
      p[j] = std::exp(row[j] - mx);
      z += p[j];
    }
    for (std::size_t j = 0; j < nw; ++j) p[j] /= z;
    const TokenId t = targets[r];
    if (t == kPadId) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= nw) {
      throw IndexError("cross_entropy_loss: target " + std::to_string(t) + " outside [0, " + std::to_string(nw) + ")");
    }
    total += static_cast<double>(mx + std::log(z) - row[static_cast<std::size_t>(t)]);
    ++count;
  }
  if (count == 0) throw ContractError("cross_entropy_loss: every target is PAD");
  const T inv_count = T(1) / T(count);
  return Tensor<T>::make_result(
      Shape{1}, std::vector<T>{static_cast<T>(total / static_cast<double>(count))}, {logits},
      [probs, kept, rows, nw, inv_count](detail::Node<T>& o) {
        detail::Node<T>& parent = *o.parents[0];
        if (!parent.requires_grad) return;
        auto& g = parent.ensure_grad();
        const T up = o.grad[0] * inv_count;
        for (std::size_t r = 0; r < rows; ++r) {
          const TokenId t = (*kept)[r];
          if (t == kPadId) continue;
          const T* p = probs->data() + r * nw;
          T* d = g.data() + r * nw;
          for (std::size_t j = 0; j < nw; ++j) d[j] += up * p[j];
          d[static_cast<std::size_t>(t)] -= up;
        }
      });
}

template Tensor<float> cross_entropy_loss(const Tensor<float>&, std::span<const TokenId>);
template Tensor<double> cross_entropy_loss(const Tensor<double>&, std::span<const TokenId>);

double noam_lr(std::size_t step, std::size_t hidden, std::size_t warmup, double factor) {
  if (step == 0) throw ContractError("noam_lr: step must be >= 1");
  const double s = static_cast<double>(step);
  return factor * std::pow(static_cast<double>(hidden), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(static_cast<double>(warmup), -1.5));
}

LrSchedule LrSchedule::constant(double lr) {
  if (!(lr > 0.0)) throw ContractError("constant_lr: lr must be positive");
  LrSchedule s;
  s.constant_ = true;
  s.lr_ = lr;
  return s;
}

LrSchedule LrSchedule::noam(std::size_t hidden, std::size_t warmup, double factor) {
  LrSchedule s;
  s.constant_ = false;
  s.hidden_ = hidden;
  s.warmup_ = warmup;
  s.factor_ = factor;
  return s;
}

double LrSchedule::at(std::size_t step) const {
  return constant_ ? lr_ : noam_lr(step, hidden_, warmup_, factor_);
}

LrSchedule constant_lr(double lr) { return LrSchedule::constant(lr); }

void Adam::step(std::span<const NamedTensor<float>> params, const FreezeMask& mask, double lr) {
  for (const auto& p : params) {
    if (mask.trainable(p.name) && !p.tensor.has_grad()) {
      throw ContractError("adam_step: trainable parameter '" + p.name + "' has no gradient");
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  for (const auto& p : params) {
    if (!mask.trainable(p.name)) continue;
    Tensor<float> tensor = p.tensor;
    auto data = tensor.mutable_data();
    auto grad = tensor.grad();
    Moments& m = moments_[p.name];
    if (m.first.size() != data.size()) {
      m.first.assign(data.size(), 0.0f);
      m.second.assign(data.size(), 0.0f);
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      const double m1 = cfg_.beta1 * m.first[i] + (1.0 - cfg_.beta1) * g;
      const double m2 = cfg_.beta2 * m.second[i] + (1.0 - cfg_.beta2) * g * g;
      m.first[i] = static_cast<float>(m1);
      m.second[i] = static_cast<float>(m2);
      const double update = lr * (m1 / c1) / (std::sqrt(m2 / c2) + cfg_.eps);
      data[i] = static_cast<float>(data[i] - update);
    }
  }
}

void TrainReport::write_tsv(std::ostream& os, std::size_t every) const {
  if (every == 0) every = 1;
  os << "step\tlr\tloss\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const TrainStep& s = steps[i];
    if (s.step % every == 0 || i + 1 == steps.size()) os << s.step << '\t' << s.lr << '\t' << s.loss << '\n';
  }
}

namespace {

// Sets requires_grad from the mask for the lifetime of a run.
class GradScope {
 public:
  GradScope(const std::vector<NamedTensor<float>>& params, const FreezeMask& mask) : params_(params) {
    for (auto& p : params_) {
      saved_.push_back(p.tensor.requires_grad());
      p.tensor.set_requires_grad(mask.trainable(p.name));
      p.tensor.zero_grad();
    }
  }
  ~GradScope() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params_[i].tensor.zero_grad();
      params_[i].tensor.set_requires_grad(saved_[i]);
    }
  }
  GradScope(const GradScope&) = delete;
  GradScope& operator=(const GradScope&) = delete;

 private:
  std::vector<NamedTensor<float>> params_;
  std::vector<bool> saved_;
};

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ULL + epoch;
}

void clip_gradients(const std::vector<NamedTensor<float>>& params, const FreezeMask& mask, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!mask.trainable(p.name) || !p.tensor.has_grad()) continue;
    for (float g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const float factor = static_cast<float>(max_norm / norm);
  for (const auto& p : params) {
    if (!mask.trainable(p.name) || !p.tensor.has_grad()) continue;
    auto& g = p.tensor.node().grad;
    for (float& v : g) v *= factor;
  }
}

}  // namespace

TrainReport train(DomainRegistry<float>& registry, const Corpus& corpus, const TrainConfig& tc) {
  tc.validate();
  if (corpus.empty()) throw DataError("train: empty corpus");
  const LMConfig& cfg = registry.config();
  corpus.validate(cfg.vocab_size);

  const std::string path_name =
      tc.regime == Regime::adapter_finetune ? tc.domain : std::string(kBaseDomain);
  const ForwardPath<float> path = registry.select(path_name);
  const FreezeMask mask = FreezeMask::for_regime(registry, tc.regime, tc.domain);
  const std::vector<NamedTensor<float>> params = registry.named_parameters();
  const LrSchedule schedule = tc.regime == Regime::adapter_finetune
                                  ? LrSchedule::constant(tc.lr)
                                  : LrSchedule::noam(cfg.hidden, tc.warmup_steps, tc.noam_factor);

  TrainReport report;
  if (tc.steps == 0) return report;

  GradScope scope(params, mask);
  Adam adam(tc.adam);
  std::size_t step = 0;
  for (std::size_t epoch = 0; step < tc.steps; ++epoch) {
    BatchIterator batches(corpus, tc.token_budget, epoch_seed(tc.seed, epoch));
    while (step < tc.steps) {
      std::optional<Batch> batch = batches.next();
      if (!batch) break;
      ++step;
      const std::size_t len = batch->seq_len - 1;
      std::vector<TokenId> inputs(batch->batch_size * len);
      std::vector<TokenId> targets(batch->batch_size * len);
      for (std::size_t b = 0; b < batch->batch_size; ++b) {
        for (std::size_t t = 0; t < len; ++t) {
          inputs[b * len + t] = batch->ids[b * batch->seq_len + t];
          targets[b * len + t] = batch->ids[b * batch->seq_len + t + 1];
        }
      }
      Tensor<float> logits = lm_forward_batch(path, cfg, inputs, batch->batch_size);
      Tensor<float> loss = cross_entropy_loss(logits, targets);
      const double value = loss.item();
      if (!std::isfinite(value)) throw NumericError("train: non-finite loss at step " + std::to_string(step));
      loss.backward();
      if (tc.clip_norm) clip_gradients(params, mask, *tc.clip_norm);
      const double lr = schedule.at(step);
      adam.step(params, mask, lr);
      for (const auto& p : params) {
        Tensor<float> t = p.tensor;
        t.zero_grad();
      }
      report.steps.push_back({step, lr, value});
    }
  }
  return report;
}

}  // namespace adlm
