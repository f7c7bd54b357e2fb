// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adlm/ops.hpp"

namespace adlm {

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr std::size_t kNumReserved = 4;

/// Byte-pair-encoding vocabulary over UTF-8 code points.
///
/// Ids 0..3 are PAD, BOS, EOS and UNK; the single-character alphabet follows
/// in byte order, then one token per merge in the order the merges were
/// learned. Whitespace is an ordinary symbol, so decoding is concatenation.
class Vocabulary {
 public:
  using Merge = std::pair<TokenId, TokenId>;

  // Greedy BPE: merge the most frequent adjacent pair (ties: smaller
  // (left, right) strings first) until target_size tokens exist or no pair
  // occurs at least twice.
  static Vocabulary build(std::span<const std::string> lines, std::size_t target_size);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<Merge>& merges() const { return merges_; }
  std::size_t alphabet_size() const { return tokens_.size() - kNumReserved - merges_.size(); }

  // BOS + pieces + EOS.
  std::vector<TokenId> encode(std::string_view text) const;
  // Pieces only.
  std::vector<TokenId> encode_pieces(std::string_view text) const;
  // Concatenates token strings, skipping PAD, BOS and EOS.
  std::string decode(std::span<const TokenId> ids) const;

  // Text form: N_w, one token per line, "#MERGES", then "left right" id pairs.
  void write(std::ostream& os) const;
  static Vocabulary read(std::istream& is);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  void index();

  std::vector<std::string> tokens_;
  std::vector<Merge> merges_;
  // Derived lookups.
  std::vector<std::pair<std::string, TokenId>> char_ids_;  // sorted by string
  std::vector<std::pair<Merge, std::size_t>> merge_rank_;  // sorted by merge
};

// Splits UTF-8 into code points; invalid bytes become single-byte symbols.
std::vector<std::string> split_code_points(std::string_view text);

std::vector<std::string> read_lines(const std::string& path);

/// Tokenized utterances, each BOS-prefixed and EOS-suffixed.
struct Corpus {
  std::vector<std::vector<TokenId>> utterances;
  std::string source;
  std::string domain;

  static Corpus from_lines(const Vocabulary& vocab, std::span<const std::string> lines,
                           std::string source = {}, std::string domain = {});
  // Blank lines are skipped.
  static Corpus load(const Vocabulary& vocab, const std::string& path, std::string domain = {});

  std::size_t token_count() const;
  void validate(std::size_t vocab_size) const;
  bool empty() const { return utterances.empty(); }
};

/// Right-padded [batch_size, seq_len] block of utterances.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<TokenId> ids;
  std::vector<std::size_t> utterance_index;

  std::size_t padded_tokens() const { return batch_size * seq_len; }
  std::size_t real_tokens() const;
};

/// Shuffles a corpus with a seed and packs it into batches whose padded
/// size stays within a token budget.
class BatchIterator {
 public:
  BatchIterator(const Corpus& corpus, std::size_t token_budget, std::uint64_t seed);

  std::optional<Batch> next();
  std::size_t batch_count() const { return spans_.size(); }

 private:
  const Corpus* corpus_;
  std::vector<std::size_t> order_;
  std::vector<std::pair<std::size_t, std::size_t>> spans_;  // [begin, end) into order_
  std::size_t cursor_ = 0;
};

// Deterministic Fisher-Yates over a splitmix64 stream, identical on every platform.
void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed);

}  // namespace adlm
