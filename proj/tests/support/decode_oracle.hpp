// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force decoding and edit-distance oracles.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "adlm/decoder.hpp"

namespace adlm::testing {

inline std::uint64_t prefix_hash(std::uint64_t seed, std::span<const TokenId> prefix) {
  std::uint64_t h = seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
  for (TokenId t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 0x100000001B3ULL + 0x7F4A7C15ULL;
  return h;
}

// Random log-normalized row, a pure function of (seed, prefix). With
// mask_reserved, PAD and BOS are impossible.
inline std::vector<float> random_row(std::uint64_t seed, std::span<const TokenId> prefix, std::size_t vocab,
                                     double spread, double impossible_rate, bool mask_reserved) {
  std::mt19937_64 rng(prefix_hash(seed, prefix));
  std::normal_distribution<double> normal(0.0, spread);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> logits(vocab);
  std::size_t finite = 0;
  const std::size_t first = mask_reserved ? static_cast<std::size_t>(kEosId) : 0;
  for (std::size_t i = 0; i < vocab; ++i) {
    const bool dead = i < first || unit(rng) < impossible_rate;
    logits[i] = dead ? -std::numeric_limits<double>::infinity() : normal(rng);
    finite += std::isfinite(logits[i]);
  }
  if (finite == 0) logits[first + rng() % (vocab - first)] = 0.0;
  double mx = -std::numeric_limits<double>::infinity();
  for (double l : logits) mx = std::max(mx, l);
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  std::vector<float> out(vocab);
  for (std::size_t i = 0; i < vocab; ++i) out[i] = static_cast<float>(logits[i] - mx - std::log(z));
  return out;
}

// `vocab` includes PAD and BOS, so vocab - 2 symbols (EOS among them) are emittable.
class RandomScorer : public AcousticScorer {
 public:
  RandomScorer(std::size_t vocab, std::uint64_t seed, double spread = 2.0, double impossible_rate = 0.0)
      : vocab_(vocab), seed_(seed), spread_(spread), impossible_(impossible_rate) {}
  std::size_t vocab_size() const override { return vocab_; }
  std::vector<float> log_probs(std::span<const TokenId> prefix) const override {
    return random_row(seed_, prefix, vocab_, spread_, impossible_, true);
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
  double spread_;
  double impossible_;
};

// LM whose next-token distribution is a random function of the whole prefix.
class RandomLm : public PrefixLm {
 public:
  RandomLm(std::size_t vocab, std::uint64_t seed) : vocab_(vocab), seed_(seed) {}

  std::shared_ptr<const LmCursor> start() const override { return std::make_shared<Cursor>(this, std::vector<TokenId>{}); }

  std::vector<float> row(std::span<const TokenId> prefix) const { return random_row(seed_ ^ 0xABCDEFULL, prefix, vocab_, 1.5, 0.0, false); }

 private:
  class Cursor : public LmCursor {
   public:
    Cursor(const RandomLm* lm, std::vector<TokenId> prefix) : lm_(lm), prefix_(std::move(prefix)), row_(lm->row(prefix_)) {}
    std::span<const float> log_probs() const override { return row_; }
    std::shared_ptr<const LmCursor> advance(TokenId token) const override {
      auto p = prefix_;
      p.push_back(token);
      return std::make_shared<Cursor>(lm_, std::move(p));
    }

   private:
    const RandomLm* lm_;
    std::vector<TokenId> prefix_;
    std::vector<float> row_;
  };

  std::size_t vocab_;
  std::uint64_t seed_;
};

struct OracleResult {
  std::vector<TokenId> tokens;
  double score = -std::numeric_limits<double>::infinity();
  bool finished = false;
};

// Scores every sequence of at most max_len tokens that ends in EOS, or of
// exactly max_len tokens without EOS, from scratch, and returns the best
// by penalized score (ties: lexicographically smaller tokens).
inline OracleResult exhaustive_decode(const AcousticScorer& scorer, const RandomLm& lm, const FusionConfig& fc) {
  const std::size_t v = scorer.vocab_size();
  OracleResult best_finished;
  OracleResult best_open;
  std::vector<TokenId> seq;
  auto step_score = [&](const std::vector<TokenId>& prefix, TokenId tok) {
    const auto ac = scorer.log_probs(prefix);
    if (fc.lm_weight == 0.0) return static_cast<double>(ac[static_cast<std::size_t>(tok)]);
    const auto l = lm.row(prefix);
    return static_cast<double>(ac[static_cast<std::size_t>(tok)] +
                               static_cast<float>(fc.lm_weight) * l[static_cast<std::size_t>(tok)]);
  };
  auto consider = [](OracleResult& best, const std::vector<TokenId>& tokens, double score, bool finished) {
    if (score > best.score || (score == best.score && std::lexicographical_compare(tokens.begin(), tokens.end(),
                                                                                  best.tokens.begin(), best.tokens.end()))) {
      best = {tokens, score, finished};
    }
  };
  auto rec = [&](auto&& self, double raw) -> void {
    for (std::size_t tok = 0; tok < v; ++tok) {
      const double s = step_score(seq, static_cast<TokenId>(tok));
      if (!std::isfinite(s)) continue;
      seq.push_back(static_cast<TokenId>(tok));
      const double total = raw + s;
      if (static_cast<TokenId>(tok) == kEosId) {
        consider(best_finished, seq, total / length_penalty(seq.size(), fc.length_penalty_alpha), true);
      } else if (seq.size() == fc.max_len) {
        consider(best_open, seq, total / length_penalty(seq.size(), fc.length_penalty_alpha), false);
      } else {
        self(self, total);
      }
      seq.pop_back();
    }
  };
  rec(rec, 0.0);
  return best_finished.finished ? best_finished : best_open;
}

// Full (|ref|+1) x (|hyp|+1) Levenshtein matrix.
inline std::size_t matrix_edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  std::vector<std::vector<std::size_t>> d(ref.size() + 1, std::vector<std::size_t>(hyp.size() + 1));
  for (std::size_t i = 0; i <= ref.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= hyp.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  return d[ref.size()][hyp.size()];
}

}  // namespace adlm::testing
