// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "adlm/errors.hpp"

namespace adlm {

namespace {

const char* const kReservedTokens[kNumReserved] = {"<pad>", "<s>", "</s>", "<unk>"};

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

// Replaces every non-overlapping (left, right) occurrence, scanning left to right.
bool apply_merge(std::vector<TokenId>& seq, Vocabulary::Merge merge, TokenId result) {
  bool changed = false;
  std::size_t w = 0;
  for (std::size_t r = 0; r < seq.size(); ++r) {
    if (r + 1 < seq.size() && seq[r] == merge.first && seq[r + 1] == merge.second) {
      seq[w++] = result;
      ++r;
      changed = true;
    } else {
      seq[w++] = seq[r];
    }
  }
  seq.resize(w);
  return changed;
}

}  // namespace

std::vector<std::string> split_code_points(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t len = utf8_length(static_cast<unsigned char>(text[i]));
    bool valid = i + len <= text.size();
    for (std::size_t j = 1; valid && j < len; ++j) {
      valid = (static_cast<unsigned char>(text[i + j]) & 0xC0) == 0x80;
    }
    if (!valid) len = 1;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Vocabulary Vocabulary::build(std::span<const std::string> lines, std::size_t target_size) {
  std::map<std::string, std::size_t> line_counts;
  std::set<std::string> alphabet;
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    ++line_counts[line];
    for (auto& cp : split_code_points(line)) alphabet.insert(std::move(cp));
  }
  if (line_counts.empty()) throw DataError("build_vocab: empty input");
  if (target_size < alphabet.size() + kNumReserved) {
    throw ContractError("build_vocab: target size " + std::to_string(target_size) +
                        " is below alphabet size " + std::to_string(alphabet.size()) + " + " +
                        std::to_string(kNumReserved) + " reserved tokens");
  }

  Vocabulary v;
  for (const char* r : kReservedTokens) v.tokens_.emplace_back(r);
  for (const std::string& c : alphabet) v.tokens_.push_back(c);
  v.index();

  struct Word {
    std::vector<TokenId> ids;
    std::size_t count;
  };
  std::vector<Word> words;
  words.reserve(line_counts.size());
  for (const auto& [line, count] : line_counts) words.push_back({v.encode_pieces(line), count});

  while (v.tokens_.size() < target_size) {
    std::map<Merge, std::size_t> pair_counts;
    for (const Word& w : words) {
      for (std::size_t i = 0; i + 1 < w.ids.size(); ++i) pair_counts[{w.ids[i], w.ids[i + 1]}] += w.count;
    }
    const Merge* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
        continue;
      }
      if (count == best_count) {
        const auto key = [&v](const Merge& m) {
          return std::tie(v.tokens_[static_cast<std::size_t>(m.first)],
                          v.tokens_[static_cast<std::size_t>(m.second)]);
        };
        if (key(pair) < key(*best)) best = &pair;
      }
    }
    if (best == nullptr || best_count < 2) break;
    const Merge merge = *best;
    const auto result = static_cast<TokenId>(v.tokens_.size());
    v.tokens_.push_back(v.token(merge.first) + v.token(merge.second));
    v.merges_.push_back(merge);
    for (Word& w : words) apply_merge(w.ids, merge, result);
  }
  v.index();
  return v;
}

void Vocabulary::index() {
  char_ids_.clear();
  merge_rank_.clear();
  const std::size_t alphabet_end = tokens_.size() - merges_.size();
  for (std::size_t id = kNumReserved; id < alphabet_end; ++id) {
    char_ids_.emplace_back(tokens_[id], static_cast<TokenId>(id));
  }
  std::sort(char_ids_.begin(), char_ids_.end());
  for (std::size_t r = 0; r < merges_.size(); ++r) merge_rank_.emplace_back(merges_[r], r);
  std::sort(merge_rank_.begin(), merge_rank_.end());
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode_pieces(std::string_view text) const {
  std::vector<TokenId> seq;
  for (const std::string& cp : split_code_points(text)) {
    auto it = std::lower_bound(char_ids_.begin(), char_ids_.end(), cp,
                               [](const auto& entry, const std::string& key) { return entry.first < key; });
    seq.push_back(it != char_ids_.end() && it->first == cp ? it->second : kUnkId);
  }
  const std::size_t first_merge_id = tokens_.size() - merges_.size();
  while (seq.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
      const Merge pair{seq[i], seq[i + 1]};
      auto it = std::lower_bound(merge_rank_.begin(), merge_rank_.end(), pair,
                                 [](const auto& entry, const Merge& key) { return entry.first < key; });
      if (it != merge_rank_.end() && it->first == pair) best_rank = std::min(best_rank, it->second);
    }
    if (best_rank == merges_.size()) break;
    apply_merge(seq, merges_[best_rank], static_cast<TokenId>(first_merge_id + best_rank));
  }
  return seq;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> out{kBosId};
  for (TokenId id : encode_pieces(text)) out.push_back(id);
  out.push_back(kEosId);
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    out += token(id);
  }
  return out;
}

void Vocabulary::write(std::ostream& os) const {
  os << tokens_.size() << '\n';
  for (const std::string& t : tokens_) os << t << '\n';
  os << "#MERGES\n";
  for (const Merge& m : merges_) os << m.first << ' ' << m.second << '\n';
}

Vocabulary Vocabulary::read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("vocabulary: missing size line");
  std::size_t n = 0;
  try {
    n = std::stoul(line);
  } catch (const std::exception&) {
    throw DataError("vocabulary: bad size line '" + line + "'");
  }
  if (n < kNumReserved) throw DataError("vocabulary: size " + std::to_string(n) + " below reserved count");
  Vocabulary v;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw DataError("vocabulary: expected " + std::to_string(n) + " tokens");
    v.tokens_.push_back(line);
  }
  for (std::size_t i = 0; i < kNumReserved; ++i) {
    if (v.tokens_[i] != kReservedTokens[i]) throw DataError("vocabulary: reserved token mismatch at id " + std::to_string(i));
  }
  if (!std::getline(is, line) || line != "#MERGES") throw DataError("vocabulary: missing #MERGES marker");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    long a = -1, b = -1;
    if (!(ls >> a >> b)) throw DataError("vocabulary: bad merge line '" + line + "'");
    v.merges_.emplace_back(static_cast<TokenId>(a), static_cast<TokenId>(b));
  }
  if (v.merges_.size() > n - kNumReserved) throw DataError("vocabulary: more merges than tokens");
  const std::size_t first_merge_id = n - v.merges_.size();
  for (std::size_t r = 0; r < v.merges_.size(); ++r) {
    const auto [a, b] = v.merges_[r];
    const auto limit = static_cast<TokenId>(first_merge_id + r);
    if (a < static_cast<TokenId>(kNumReserved) || b < static_cast<TokenId>(kNumReserved) || a >= limit || b >= limit) {
      throw DataError("vocabulary: merge " + std::to_string(r) + " references an invalid token");
    }
    if (v.tokens_[first_merge_id + r] != v.tokens_[static_cast<std::size_t>(a)] + v.tokens_[static_cast<std::size_t>(b)]) {
      throw DataError("vocabulary: merge " + std::to_string(r) + " does not match its token string");
    }
  }
  v.index();
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write vocabulary to " + path);
  write(os);
  if (!os) throw IoError("failed writing vocabulary to " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open vocabulary " + path);
  return read(is);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

Corpus Corpus::from_lines(const Vocabulary& vocab, std::span<const std::string> lines, std::string source,
                          std::string domain) {
  Corpus c;
  c.source = std::move(source);
  c.domain = std::move(domain);
  for (const std::string& line : lines) {
    if (line.empty()) continue;
    c.utterances.push_back(vocab.encode(line));
  }
  return c;
}

Corpus Corpus::load(const Vocabulary& vocab, const std::string& path, std::string domain) {
  const auto lines = read_lines(path);
  return from_lines(vocab, lines, path, std::move(domain));
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.size();
  return n;
}

void Corpus::validate(std::size_t vocab_size) const {
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const auto& u = utterances[i];
    if (u.size() < 2) throw DataError("corpus utterance " + std::to_string(i) + " shorter than 2 tokens");
    for (TokenId id : u) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
        throw DataError("corpus utterance " + std::to_string(i) + " has id " + std::to_string(id) +
                        " outside vocabulary of size " + std::to_string(vocab_size));
      }
    }
  }
}

std::size_t Batch::real_tokens() const {
  std::size_t n = 0;
  for (TokenId id : ids) n += id != kPadId;
  return n;
}

void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed) {
  std::uint64_t state = seed;
  auto next = [&state]() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(next() % i);
    std::swap(items[i - 1], items[j]);
  }
}

BatchIterator::BatchIterator(const Corpus& corpus, std::size_t token_budget, std::uint64_t seed)
    : corpus_(&corpus) {
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    if (corpus.utterances[i].size() > token_budget) {
      throw DataError("utterance " + std::to_string(i) + " of " +
                      (corpus.source.empty() ? std::string("corpus") : corpus.source) + " has " +
                      std::to_string(corpus.utterances[i].size()) + " tokens, above the batch budget of " +
                      std::to_string(token_budget));
    }
  }
  order_.resize(corpus.utterances.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  seeded_shuffle(order_, seed);

  std::size_t begin = 0;
  std::size_t longest = 0;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const std::size_t len = corpus.utterances[order_[i]].size();
    const std::size_t grown = std::max(longest, len);
    if (i > begin && (i - begin + 1) * grown > token_budget) {
      spans_.emplace_back(begin, i);
      begin = i;
      longest = len;
    } else {
      longest = grown;
    }
  }
  if (begin < order_.size()) spans_.emplace_back(begin, order_.size());
}

std::optional<Batch> BatchIterator::next() {
  if (cursor_ >= spans_.size()) return std::nullopt;
  const auto [begin, end] = spans_[cursor_++];
  Batch b;
  b.batch_size = end - begin;
  for (std::size_t i = begin; i < end; ++i) {
    b.seq_len = std::max(b.seq_len, corpus_->utterances[order_[i]].size());
  }
  b.ids.assign(b.batch_size * b.seq_len, kPadId);
  for (std::size_t i = begin; i < end; ++i) {
    const auto& u = corpus_->utterances[order_[i]];
    std::copy(u.begin(), u.end(), b.ids.begin() + static_cast<std::ptrdiff_t>((i - begin) * b.seq_len));
    b.utterance_index.push_back(order_[i]);
  }
  return b;
}

}  // namespace adlm
