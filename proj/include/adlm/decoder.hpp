// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adlm/lm.hpp"
#include "adlm/tokenizer.hpp"

namespace adlm {

/// Stand-in for the end-to-end decoder: per-token log-probabilities of the
/// next symbol given the emitted prefix (BOS excluded). Rows log-normalize;
/// impossible tokens are -inf.
class AcousticScorer {
 public:
  virtual ~AcousticScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<float> log_probs(std::span<const TokenId> prefix) const = 0;
};

// confusers[t] lists the tokens token t can be misheard as (empty: never confused).
struct ConfusionSets {
  std::vector<std::vector<TokenId>> confusers;
};

// `per_token` distinct random non-reserved confusers for each target token;
// an empty target list means every non-reserved token.
ConfusionSets make_confusion_sets(std::size_t vocab_size, std::size_t per_token, std::uint64_t seed,
                                  std::span<const TokenId> targets = {});

// Every piece id occurring in the encodings of the given words.
std::vector<TokenId> tokens_of_words(const Vocabulary& vocab, std::span<const std::string> words);

/// Deterministic noisy channel around a reference token sequence.
///
/// Position t expects reference[t] (EOS past the end). A position whose
/// expected token has confusers is confused with probability confusion_rate,
/// drawn from (seed, t). Unconfused: the expected token has weight 1 and each
/// confuser 0.1. Confused: one confuser has weight 1, the expected token 0.5
/// and the other confusers 0.1. Every other token except PAD/BOS has a floor
/// weight of 1e-4. Weights are normalized into log-probabilities.
class SyntheticChannel : public AcousticScorer {
 public:
  static constexpr double kFloorWeight = 1e-4;
  static constexpr double kConfuserWeight = 0.1;
  static constexpr double kConfusedReferenceWeight = 0.5;

  SyntheticChannel(std::vector<TokenId> reference, std::size_t vocab_size, double confusion_rate, std::uint64_t seed,
                   std::shared_ptr<const ConfusionSets> confusions);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::vector<float> log_probs(std::span<const TokenId> prefix) const override;

  bool confused_at(std::size_t position) const;
  const std::vector<TokenId>& reference() const { return reference_; }

 private:
  std::vector<TokenId> reference_;
  std::size_t vocab_size_;
  double confusion_rate_;
  std::uint64_t seed_;
  std::shared_ptr<const ConfusionSets> confusions_;
};

/// Incremental language-model state positioned after some prefix.
class LmCursor {
 public:
  virtual ~LmCursor() = default;
  virtual std::span<const float> log_probs() const = 0;
  virtual std::shared_ptr<const LmCursor> advance(TokenId token) const = 0;
};

class PrefixLm {
 public:
  virtual ~PrefixLm() = default;
  // Cursor after BOS.
  virtual std::shared_ptr<const LmCursor> start() const = 0;
};

/// Transformer LM over one decoding path, cached keys/values per cursor.
class TransformerLm : public PrefixLm {
 public:
  TransformerLm(ForwardPath<float> path, LMConfig cfg) : path_(std::move(path)), cfg_(cfg) {}
  std::shared_ptr<const LmCursor> start() const override;

 private:
  ForwardPath<float> path_;
  LMConfig cfg_;
};

struct FusionConfig {
  std::size_t beam_size = 4;
  double length_penalty_alpha = 1.2;
  std::size_t max_len = 80;
  double lm_weight = 0.3;

  void validate() const;
};

// acoustic + lm_weight * lm, elementwise.
std::vector<float> fused_score(std::span<const float> acoustic, std::span<const float> lm, double lm_weight);

// ((5 + length) / 6)^alpha
double length_penalty(std::size_t length, double alpha);

struct BeamHypothesis {
  std::vector<TokenId> tokens;  // emitted tokens, EOS last when finished
  double score = 0.0;           // sum of fused log-scores
  std::shared_ptr<const LmCursor> lm;
  bool finished = false;
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  double score = 0.0;      // length-penalized
  double raw_score = 0.0;  // fused sum
  bool finished = false;
};

/// Shallow-fusion beam search.
///
/// Every step expands each live hypothesis over the vocabulary. All EOS
/// expansions enter the finished pool; the best beam_size non-EOS expansions
/// stay live. The search ends at max_len, when nothing is live, or once no
/// live hypothesis can still beat the best finished one under the length
/// penalty. Returns the best finished hypothesis by score / penalty, or the
/// best live one if none finished. Ties go to the lexicographically smaller
/// token sequence.
DecodeResult beam_search_decode(const AcousticScorer& scorer, const PrefixLm& lm, const FusionConfig& fc);

std::vector<std::string> split_words(std::string_view text);

// Levenshtein distance with unit costs.
std::size_t edit_distance(std::span<const std::string> reference, std::span<const std::string> hypothesis);
// edit_distance / |reference|. Throws DataError on an empty reference.
double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

struct Utterance {
  std::string id;
  std::string text;
};

struct Hypothesis {
  std::string id;
  std::string text;
  double score = 0.0;
};

// "utt_id<TAB>reference text" per line.
std::vector<Utterance> read_test_set(std::istream& is);
std::vector<Utterance> load_test_set(const std::string& path);
void write_test_set(std::ostream& os, std::span<const Utterance> utterances);

// "utt_id<TAB>hypothesis<TAB>score" per line.
void write_hypotheses(std::ostream& os, std::span<const Hypothesis> hypotheses);
std::vector<Hypothesis> read_hypotheses(std::istream& is);
std::vector<Hypothesis> load_hypotheses(const std::string& path);

struct WerReport {
  double wer = 0.0;
  std::size_t ref_words = 0;
  std::size_t edits = 0;

  // "WER=<float> N_ref_words=<int> edits=<int>"
  std::string to_string() const;
};

// Total edits / total reference words. References and hypotheses are matched by id.
WerReport corpus_wer(std::span<const Utterance> references, std::span<const Hypothesis> hypotheses);

using ScorerFactory = std::function<std::unique_ptr<AcousticScorer>(const Utterance&)>;

struct ChannelSpec {
  double confusion_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t confusers_per_token = 2;
  std::vector<TokenId> targets;  // confusable tokens; empty = all
};

// One SyntheticChannel per utterance, seeded by (spec.seed, utterance id).
ScorerFactory synthetic_channel_factory(const Vocabulary& vocab, const ChannelSpec& spec);

struct CorpusDecode {
  std::vector<Hypothesis> hypotheses;  // input order
  WerReport report;
};

// Decodes every utterance; `workers` > 1 decodes on that many threads.
CorpusDecode decode_corpus(std::span<const Utterance> test_set, const Vocabulary& vocab, const ScorerFactory& factory,
                           const PrefixLm& lm, const FusionConfig& fc, std::size_t workers = 1);

}  // namespace adlm
