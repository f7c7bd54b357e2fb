// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/adaptation.hpp"

#include <filesystem>
#include <map>
#include <ostream>

#include "adlm/checkpoint.hpp"
#include "adlm/errors.hpp"

namespace adlm {

void write_iteration_reports(std::ostream& os, std::span<const IterationReport> reports) {
  const auto old = os.precision(9);
  os << "iter\twer_before\twer_after\tkept\tckpt_path\n";
  for (const auto& r : reports) {
    os << r.iteration << '\t' << r.wer_before << '\t' << r.wer_after << '\t' << (r.kept ? 1 : 0) << '\t'
       << r.checkpoint_path << '\n';
  }
  os.precision(old);
}

std::vector<std::string> error_sentences(std::span<const Hypothesis> hypotheses, std::span<const Utterance> references) {
  std::map<std::string, const Hypothesis*> by_id;
  for (const auto& h : hypotheses) {
    if (!by_id.emplace(h.id, &h).second) throw DataError("extract_error_sentences: duplicate hypothesis id " + h.id);
  }
  if (by_id.size() != references.size()) {
    throw DataError("extract_error_sentences: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                    std::to_string(references.size()) + " references");
  }
  std::vector<std::string> out;
  for (const auto& u : references) {
    const auto it = by_id.find(u.id);
    if (it == by_id.end()) throw DataError("extract_error_sentences: no hypothesis for " + u.id);
    if (split_words(u.text) != split_words(it->second->text)) out.push_back(u.text);
  }
  return out;
}

Corpus extract_error_sentences(std::span<const Hypothesis> hypotheses, std::span<const Utterance> references,
                               const Vocabulary& vocab) {
  const std::vector<std::string> lines = error_sentences(hypotheses, references);
  return Corpus::from_lines(vocab, lines, "errors");
}

CorpusDecode decode_with_domain(const DomainRegistry<float>& registry, const IterationSetup& setup,
                                std::span<const Utterance> set) {
  const TransformerLm lm(registry.select(setup.domain), registry.config());
  return decode_corpus(set, *setup.vocab, setup.scorer, lm, setup.fusion, setup.workers);
}

namespace {

void check_setup(const DomainRegistry<float>& registry, const IterationSetup& setup) {
  if (!setup.vocab) throw ContractError("iteration: no vocabulary");
  if (!setup.scorer) throw ContractError("iteration: no scorer factory");
  if (!registry.has_domain(setup.domain)) throw ContractError("iteration: unknown domain '" + setup.domain + "'");
  if (setup.dev.empty()) throw DataError("iteration: empty dev set");
}

// `mined` and `measured` describe the state before the iteration.
IterationReport iterate_once(DomainRegistry<float>& registry, const IterationSetup& setup, std::size_t iteration,
                             const CorpusDecode& mined, double wer_before, CorpusDecode* mined_after,
                             double* wer_after_out) {
  IterationReport report;
  report.iteration = iteration;
  report.wer_before = wer_before;
  const Corpus errors = extract_error_sentences(mined.hypotheses, setup.dev, *setup.vocab);
  report.train_size = errors.utterances.size();
  if (errors.empty()) {
    report.wer_after = wer_before;
    report.kept = false;
    if (mined_after) *mined_after = mined;
    if (wer_after_out) *wer_after_out = wer_before;
    return report;
  }
  TrainConfig tc = setup.train;
  tc.regime = Regime::adapter_finetune;
  tc.domain = setup.domain;
  tc.seed = setup.train.seed + iteration;
  train(registry, errors, tc);

  CorpusDecode dev_after = decode_with_domain(registry, setup, setup.dev);
  report.wer_after = setup.eval.empty() ? dev_after.report.wer : decode_with_domain(registry, setup, setup.eval).report.wer;
  report.kept = report.wer_after < report.wer_before;
  if (!setup.checkpoint_dir.empty()) {
    std::filesystem::create_directories(setup.checkpoint_dir);
    report.checkpoint_path =
        (std::filesystem::path(setup.checkpoint_dir) / ("iter" + std::to_string(iteration) + ".ckpt")).string();
    save_checkpoint(report.checkpoint_path, registry, setup.vocab);
  }
  if (mined_after) *mined_after = std::move(dev_after);
  if (wer_after_out) *wer_after_out = report.wer_after;
  return report;
}

}  // namespace

IterationReport run_iteration(DomainRegistry<float>& registry, const IterationSetup& setup, std::size_t iteration) {
  check_setup(registry, setup);
  const CorpusDecode mined = decode_with_domain(registry, setup, setup.dev);
  const double before = setup.eval.empty() ? mined.report.wer : decode_with_domain(registry, setup, setup.eval).report.wer;
  return iterate_once(registry, setup, iteration, mined, before, nullptr, nullptr);
}

LoopResult iterate_until_wer_rises(IterationRunner& runner, std::size_t max_iters) {
  if (max_iters == 0) throw ContractError("iterate_until_wer_rises: max_iters must be >= 1");
  LoopResult result;
  result.best_wer = runner.initial_wer();
  result.best_iteration = 0;
  runner.keep(0);
  for (std::size_t i = 1; i <= max_iters; ++i) {
    IterationReport r = runner.run(i);
    r.iteration = i;
    r.kept = r.wer_after < result.best_wer;
    if (r.kept) {
      result.best_wer = r.wer_after;
      result.best_iteration = i;
      result.best_checkpoint = r.checkpoint_path;
      runner.keep(i);
    }
    result.reports.push_back(r);
    if (r.wer_after > result.best_wer) break;
    if (r.train_size == 0) break;
  }
  runner.restore_best();
  return result;
}

RegistryRunner::RegistryRunner(DomainRegistry<float>& registry, IterationSetup setup)
    : registry_(&registry), setup_(std::move(setup)) {
  check_setup(*registry_, setup_);
}

double RegistryRunner::initial_wer() {
  mined_ = decode_with_domain(*registry_, setup_, setup_.dev);
  current_wer_ = setup_.eval.empty() ? mined_.report.wer : decode_with_domain(*registry_, setup_, setup_.eval).report.wer;
  return current_wer_;
}

IterationReport RegistryRunner::run(std::size_t iteration) {
  if (mined_.hypotheses.empty()) initial_wer();
  CorpusDecode next;
  double wer_after = 0.0;
  IterationReport r = iterate_once(*registry_, setup_, iteration, mined_, current_wer_, &next, &wer_after);
  mined_ = std::move(next);
  current_wer_ = wer_after;
  return r;
}

void RegistryRunner::keep(std::size_t /*iteration*/) {
  best_.clear();
  for (const auto& nt : registry_->domain_trainables(setup_.domain)) {
    const auto d = nt.tensor.data();
    best_.emplace_back(d.begin(), d.end());
  }
  best_mined_ = mined_;
  best_wer_ = current_wer_;
}

void RegistryRunner::restore_best() {
  if (best_.empty()) return;
  const auto params = registry_->domain_trainables(setup_.domain);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<float> t = params[i].tensor;
    auto d = t.mutable_data();
    std::copy(best_[i].begin(), best_[i].end(), d.begin());
  }
  mined_ = best_mined_;
  current_wer_ = best_wer_;
}

}  // namespace adlm
