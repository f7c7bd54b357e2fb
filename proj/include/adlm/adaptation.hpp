// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adlm/decoder.hpp"
#include "adlm/domains.hpp"
#include "adlm/tokenizer.hpp"
#include "adlm/training.hpp"

namespace adlm {

struct IterationReport {
  std::size_t iteration = 0;
  std::size_t train_size = 0;  // error sentences trained on
  double wer_before = 0.0;
  double wer_after = 0.0;
  bool kept = false;
  std::string checkpoint_path;
};

// Header "iter\twer_before\twer_after\tkept\tckpt_path".
void write_iteration_reports(std::ostream& os, std::span<const IterationReport> reports);

// Reference transcripts of every utterance whose hypothesis word sequence
// differs from its reference, in reference order. Throws DataError when the
// id sets differ.
std::vector<std::string> error_sentences(std::span<const Hypothesis> hypotheses, std::span<const Utterance> references);
Corpus extract_error_sentences(std::span<const Hypothesis> hypotheses, std::span<const Utterance> references,
                               const Vocabulary& vocab);

/// Everything one decode / mine / fine-tune round needs.
struct IterationSetup {
  std::string domain;
  const Vocabulary* vocab = nullptr;
  std::vector<Utterance> dev;          // error-mining set
  std::vector<Utterance> eval;         // WER set; empty means dev
  ScorerFactory scorer;
  FusionConfig fusion;
  TrainConfig train;                   // forced to the adapter regime on `domain`
  std::size_t workers = 1;
  std::string checkpoint_dir;          // empty: no checkpoints written
};

// Decodes `set` on the domain path of the registry.
CorpusDecode decode_with_domain(const DomainRegistry<float>& registry, const IterationSetup& setup,
                                std::span<const Utterance> set);

/// One round: decode the dev set, mine error sentences, adapter fine-tune the
/// domain on them, decode again. The registry keeps the fine-tuned weights.
/// With no errors nothing is trained and kept is false.
IterationReport run_iteration(DomainRegistry<float>& registry, const IterationSetup& setup, std::size_t iteration);

/// Source of iterations for the WER-based stopping loop.
class IterationRunner {
 public:
  virtual ~IterationRunner() = default;
  // Dev WER of the model before any iteration.
  virtual double initial_wer() = 0;
  // Runs iteration `iteration` (1-based) from the current state.
  virtual IterationReport run(std::size_t iteration) = 0;
  // Records the current state as the best one, tagged with its iteration.
  virtual void keep(std::size_t iteration) = 0;
  // Reinstates the last kept state.
  virtual void restore_best() = 0;
};

struct LoopResult {
  std::vector<IterationReport> reports;
  std::size_t best_iteration = 0;  // 0 is the model before the loop
  double best_wer = 0.0;
  std::string best_checkpoint;
};

/// Runs iterations until one ends with a dev WER above the best seen, no
/// error sentences remain, or max_iters is reached; then restores the best
/// state. An iteration is kept iff it strictly lowers the best WER.
LoopResult iterate_until_wer_rises(IterationRunner& runner, std::size_t max_iters);

/// Runner over a live registry: warm-started adapter fine-tuning with error
/// sentences re-mined every iteration. keep() snapshots the domain trainables.
class RegistryRunner : public IterationRunner {
 public:
  RegistryRunner(DomainRegistry<float>& registry, IterationSetup setup);

  double initial_wer() override;
  IterationReport run(std::size_t iteration) override;
  void keep(std::size_t iteration) override;
  void restore_best() override;

 private:
  DomainRegistry<float>* registry_;
  IterationSetup setup_;
  std::vector<std::vector<float>> best_;
  // Dev decode of the current state, reused for the next iteration's mining.
  CorpusDecode mined_;
  double current_wer_ = 0.0;
  CorpusDecode best_mined_;
  double best_wer_ = 0.0;
};

}  // namespace adlm
