// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "adlm/errors.hpp"

namespace adlm {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr float kNegInf = -std::numeric_limits<float>::infinity();

bool reserved_unemittable(std::size_t id) { return id == static_cast<std::size_t>(kPadId) || id == static_cast<std::size_t>(kBosId); }

}  // namespace

ConfusionSets make_confusion_sets(std::size_t vocab_size, std::size_t per_token, std::uint64_t seed,
                                  std::span<const TokenId> targets) {
  if (vocab_size <= kNumReserved + 1) throw ContractError("make_confusion_sets: vocabulary too small");
  ConfusionSets sets;
  sets.confusers.assign(vocab_size, {});
  std::vector<TokenId> chosen;
  if (targets.empty()) {
    for (std::size_t t = kNumReserved; t < vocab_size; ++t) chosen.push_back(static_cast<TokenId>(t));
  } else {
    std::set<TokenId> uniq(targets.begin(), targets.end());
    for (TokenId t : uniq) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
        throw IndexError("make_confusion_sets: target " + std::to_string(t) + " outside the vocabulary");
      }
      if (static_cast<std::size_t>(t) >= kNumReserved) chosen.push_back(t);
    }
  }
  const std::size_t pool = vocab_size - kNumReserved - 1;
  const std::size_t k = std::min(per_token, pool);
  for (TokenId t : chosen) {
    std::vector<TokenId>& out = sets.confusers[static_cast<std::size_t>(t)];
    std::uint64_t state = mix(seed, static_cast<std::uint64_t>(t));
    while (out.size() < k) {
      state = splitmix(state);
      const auto c = static_cast<TokenId>(kNumReserved + state % (vocab_size - kNumReserved));
      if (c == t || std::find(out.begin(), out.end(), c) != out.end()) continue;
      out.push_back(c);
    }
  }
  return sets;
}

std::vector<TokenId> tokens_of_words(const Vocabulary& vocab, std::span<const std::string> words) {
  std::set<TokenId> ids;
  for (const auto& w : words) {
    for (TokenId id : vocab.encode_pieces(w)) ids.insert(id);
  }
  return {ids.begin(), ids.end()};
}

SyntheticChannel::SyntheticChannel(std::vector<TokenId> reference, std::size_t vocab_size, double confusion_rate,
                                   std::uint64_t seed, std::shared_ptr<const ConfusionSets> confusions)
    : reference_(std::move(reference)),
      vocab_size_(vocab_size),
      confusion_rate_(confusion_rate),
      seed_(seed),
      confusions_(std::move(confusions)) {
  if (!(confusion_rate_ >= 0.0 && confusion_rate_ < 1.0)) {
    throw ContractError("SyntheticChannel: confusion_rate must lie in [0, 1)");
  }
  if (vocab_size_ <= kNumReserved) throw ContractError("SyntheticChannel: vocabulary too small");
  if (confusions_ && confusions_->confusers.size() != vocab_size_) {
    throw DimensionError("SyntheticChannel: confusion sets sized for " +
                         std::to_string(confusions_->confusers.size()) + " tokens, vocabulary has " +
                         std::to_string(vocab_size_));
  }
  for (TokenId t : reference_) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
      throw IndexError("SyntheticChannel: reference token " + std::to_string(t) + " outside the vocabulary");
    }
  }
}

bool SyntheticChannel::confused_at(std::size_t position) const {
  if (!confusions_ || confusion_rate_ <= 0.0 || position >= reference_.size()) return false;
  const auto& set = confusions_->confusers[static_cast<std::size_t>(reference_[position])];
  if (set.empty()) return false;
  return unit_interval(mix(seed_, 2 * position)) < confusion_rate_;
}

std::vector<float> SyntheticChannel::log_probs(std::span<const TokenId> prefix) const {
  const std::size_t t = prefix.size();
  const TokenId expected = t < reference_.size() ? reference_[t] : kEosId;
  std::vector<double> w(vocab_size_, kFloorWeight);
  w[static_cast<std::size_t>(kPadId)] = 0.0;
  w[static_cast<std::size_t>(kBosId)] = 0.0;
  static const std::vector<TokenId> kNone;
  const std::vector<TokenId>& set =
      confusions_ && t < reference_.size() ? confusions_->confusers[static_cast<std::size_t>(expected)] : kNone;
  if (confused_at(t)) {
    const std::size_t pick = mix(seed_, 2 * t + 1) % set.size();
    for (TokenId c : set) w[static_cast<std::size_t>(c)] = kConfuserWeight;
    w[static_cast<std::size_t>(set[pick])] = 1.0;
    w[static_cast<std::size_t>(expected)] = kConfusedReferenceWeight;
  } else {
    for (TokenId c : set) w[static_cast<std::size_t>(c)] = kConfuserWeight;
    w[static_cast<std::size_t>(expected)] = 1.0;
  }
  double z = 0.0;
  for (double v : w) z += v;
  std::vector<float> out(vocab_size_);
  for (std::size_t i = 0; i < vocab_size_; ++i) {
    out[i] = w[i] > 0.0 && !reserved_unemittable(i) ? static_cast<float>(std::log(w[i] / z)) : kNegInf;
  }
  return out;
}

namespace {

class TransformerCursor : public LmCursor {
 public:
  TransformerCursor(const ForwardPath<float>* path, const LMConfig* cfg, std::vector<float> logp, LMState<float> state)
      : path_(path), cfg_(cfg), logp_(std::move(logp)), state_(std::move(state)) {}

  std::span<const float> log_probs() const override { return logp_; }

  std::shared_ptr<const LmCursor> advance(TokenId token) const override {
    auto [logp, state] = next_token_logprobs(*path_, *cfg_, state_, token);
    return std::make_shared<TransformerCursor>(path_, cfg_, std::move(logp), std::move(state));
  }

 private:
  const ForwardPath<float>* path_;
  const LMConfig* cfg_;
  std::vector<float> logp_;
  LMState<float> state_;
};

}  // namespace

std::shared_ptr<const LmCursor> TransformerLm::start() const {
  auto [logp, state] = next_token_logprobs(path_, cfg_, initial_state<float>(cfg_), kBosId);
  return std::make_shared<TransformerCursor>(&path_, &cfg_, std::move(logp), std::move(state));
}

void FusionConfig::validate() const {
  if (beam_size == 0) throw ContractError("FusionConfig: beam_size must be positive");
  if (max_len == 0) throw ContractError("FusionConfig: max_len must be positive");
  if (!(lm_weight >= 0.0) || !std::isfinite(lm_weight)) throw ContractError("FusionConfig: lm_weight must be >= 0");
  if (!(length_penalty_alpha >= 0.0) || !std::isfinite(length_penalty_alpha)) {
    throw ContractError("FusionConfig: length_penalty_alpha must be >= 0");
  }
}

std::vector<float> fused_score(std::span<const float> acoustic, std::span<const float> lm, double lm_weight) {
  if (acoustic.size() != lm.size()) {
    throw DimensionError("fused_score: acoustic has " + std::to_string(acoustic.size()) + " scores, lm has " +
                         std::to_string(lm.size()));
  }
  std::vector<float> out(acoustic.size());
  const auto lw = static_cast<float>(lm_weight);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lm_weight == 0.0 ? acoustic[i] : acoustic[i] + lw * lm[i];
  }
  return out;
}

double length_penalty(std::size_t length, double alpha) {
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

namespace {

struct Candidate {
  std::size_t parent;
  TokenId token;
  double score;
};

// Higher score first, then lexicographically smaller tokens.
bool better(double sa, const std::vector<TokenId>& ta, double sb, const std::vector<TokenId>& tb) {
  if (sa != sb) return sa > sb;
  return std::lexicographical_compare(ta.begin(), ta.end(), tb.begin(), tb.end());
}

bool better_candidate(const Candidate& a, const Candidate& b, const std::vector<BeamHypothesis>& live) {
  if (a.score != b.score) return a.score > b.score;
  const auto& pa = live[a.parent].tokens;
  const auto& pb = live[b.parent].tokens;
  if (a.parent != b.parent) {
    const auto [ia, ib] = std::mismatch(pa.begin(), pa.end(), pb.begin(), pb.end());
    if (ia != pa.end()) return *ia < *ib;
  }
  return a.token < b.token;
}

}  // namespace

DecodeResult beam_search_decode(const AcousticScorer& scorer, const PrefixLm& lm, const FusionConfig& fc) {
  fc.validate();
  const std::size_t nw = scorer.vocab_size();
  const bool fuse = fc.lm_weight != 0.0;

  std::vector<BeamHypothesis> live(1);
  if (fuse) live[0].lm = lm.start();
  std::vector<BeamHypothesis> finished;
  double best_finished = -std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  const double lp_max = length_penalty(fc.max_len, fc.length_penalty_alpha);

  for (std::size_t step = 1; step <= fc.max_len && !live.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < live.size(); ++h) {
      std::vector<float> scores = scorer.log_probs(live[h].tokens);
      if (scores.size() != nw) throw DimensionError("beam_search_decode: scorer returned a row of the wrong size");
      if (fuse) {
        const auto lp = live[h].lm->log_probs();
        if (lp.size() != nw) throw DimensionError("beam_search_decode: LM vocabulary differs from the scorer's");
        scores = fused_score(scores, lp, fc.lm_weight);
      }
      for (std::size_t tok = 0; tok < nw; ++tok) {
        const float s = scores[tok];
        if (!std::isfinite(s)) continue;
        const double total = live[h].score + static_cast<double>(s);
        if (static_cast<TokenId>(tok) == kEosId) {
          BeamHypothesis f;
          f.tokens = live[h].tokens;
          f.tokens.push_back(kEosId);
          f.score = total;
          f.finished = true;
          const double pen = total / length_penalty(f.tokens.size(), fc.length_penalty_alpha);
          if (finished.empty() || better(pen, f.tokens, best_finished, finished[best_index].tokens)) {
            best_finished = pen;
            best_index = finished.size();
          }
          finished.push_back(std::move(f));
        } else {
          candidates.push_back({h, static_cast<TokenId>(tok), total});
        }
      }
    }
    const std::size_t keep = std::min(fc.beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [&live](const Candidate& a, const Candidate& b) { return better_candidate(a, b, live); });
    std::vector<BeamHypothesis> next;
    next.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      BeamHypothesis h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.score = c.score;
      if (fuse && step < fc.max_len) h.lm = live[c.parent].lm->advance(c.token);
      next.push_back(std::move(h));
    }
    live = std::move(next);
    if (!finished.empty() && !live.empty()) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.score);
      if (best_finished > best_live / lp_max) break;
    }
  }

  DecodeResult result;
  if (!finished.empty()) {
    const BeamHypothesis& f = finished[best_index];
    result.tokens = f.tokens;
    result.raw_score = f.score;
    result.score = best_finished;
    result.finished = true;
    return result;
  }
  if (live.empty()) return result;
  std::size_t best = 0;
  for (std::size_t i = 1; i < live.size(); ++i) {
    if (better(live[i].score, live[i].tokens, live[best].score, live[best].tokens)) best = i;
  }
  result.tokens = live[best].tokens;
  result.raw_score = live[best].score;
  result.score = live[best].score / length_penalty(live[best].tokens.size(), fc.length_penalty_alpha);
  return result;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream is{std::string(text)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::size_t edit_distance(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  const std::size_t m = hypothesis.size();
  std::vector<std::size_t> row(m + 1);
  for (std::size_t j = 0; j <= m; ++j) row[j] = j;
  for (std::size_t i = 1; i <= reference.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[m];
}

double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw DataError("wer: empty reference");
  return static_cast<double>(edit_distance(reference, hypothesis)) / static_cast<double>(reference.size());
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::vector<Utterance> read_test_set(std::istream& is) {
  std::vector<Utterance> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw DataError("test set line " + std::to_string(lineno) + ": expected 'utt_id<TAB>text'");
    }
    Utterance u{line.substr(0, tab), line.substr(tab + 1)};
    if (!seen.insert(u.id).second) throw DataError("test set line " + std::to_string(lineno) + ": duplicate id " + u.id);
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<Utterance> load_test_set(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_test_set(in);
}

void write_test_set(std::ostream& os, std::span<const Utterance> utterances) {
  for (const auto& u : utterances) os << u.id << '\t' << u.text << '\n';
}

void write_hypotheses(std::ostream& os, std::span<const Hypothesis> hypotheses) {
  const auto old = os.precision(9);
  for (const auto& h : hypotheses) os << h.id << '\t' << h.text << '\t' << h.score << '\n';
  os.precision(old);
}

std::vector<Hypothesis> read_hypotheses(std::istream& is) {
  std::vector<Hypothesis> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = strip_cr(std::move(line));
    if (line.empty()) continue;
    const auto first = line.find('\t');
    const auto last = line.rfind('\t');
    if (first == std::string::npos || first == last) {
      throw DataError("hypothesis line " + std::to_string(lineno) + ": expected 'utt_id<TAB>text<TAB>score'");
    }
    Hypothesis h;
    h.id = line.substr(0, first);
    h.text = line.substr(first + 1, last - first - 1);
    try {
      h.score = std::stod(line.substr(last + 1));
    } catch (const std::exception&) {
      throw DataError("hypothesis line " + std::to_string(lineno) + ": bad score");
    }
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<Hypothesis> load_hypotheses(const std::string& path) {
  std::ifstream in = open_input(path);
  return read_hypotheses(in);
}

std::string WerReport::to_string() const {
  std::ostringstream os;
  os << "WER=" << wer << " N_ref_words=" << ref_words << " edits=" << edits;
  return os.str();
}

WerReport corpus_wer(std::span<const Utterance> references, std::span<const Hypothesis> hypotheses) {
  std::map<std::string, const Hypothesis*> by_id;
  for (const auto& h : hypotheses) {
    if (!by_id.emplace(h.id, &h).second) throw DataError("corpus_wer: duplicate hypothesis id " + h.id);
  }
  if (by_id.size() != references.size()) {
    throw DataError("corpus_wer: " + std::to_string(references.size()) + " references but " +
                    std::to_string(by_id.size()) + " hypotheses");
  }
  WerReport r;
  for (const auto& u : references) {
    const auto it = by_id.find(u.id);
    if (it == by_id.end()) throw DataError("corpus_wer: no hypothesis for " + u.id);
    const auto ref = split_words(u.text);
    if (ref.empty()) throw DataError("corpus_wer: empty reference for " + u.id);
    const auto hyp = split_words(it->second->text);
    r.edits += edit_distance(ref, hyp);
    r.ref_words += ref.size();
  }
  if (r.ref_words == 0) throw DataError("corpus_wer: no reference words");
  r.wer = static_cast<double>(r.edits) / static_cast<double>(r.ref_words);
  return r;
}

ScorerFactory synthetic_channel_factory(const Vocabulary& vocab, const ChannelSpec& spec) {
  auto sets = std::make_shared<const ConfusionSets>(
      make_confusion_sets(vocab.size(), spec.confusers_per_token, spec.seed, spec.targets));
  const Vocabulary* v = &vocab;
  const double rate = spec.confusion_rate;
  const std::uint64_t seed = spec.seed;
  return [sets, v, rate, seed](const Utterance& u) -> std::unique_ptr<AcousticScorer> {
    return std::make_unique<SyntheticChannel>(v->encode_pieces(u.text), v->size(), rate, mix(seed, fnv1a(u.id)),
                                              sets);
  };
}

CorpusDecode decode_corpus(std::span<const Utterance> test_set, const Vocabulary& vocab, const ScorerFactory& factory,
                           const PrefixLm& lm, const FusionConfig& fc, std::size_t workers) {
  fc.validate();
  if (test_set.empty()) throw DataError("decode_corpus: empty test set");
  CorpusDecode out;
  out.hypotheses.resize(test_set.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < test_set.size(); i += stride) {
      const auto scorer = factory(test_set[i]);
      const DecodeResult r = beam_search_decode(*scorer, lm, fc);
      out.hypotheses[i] = {test_set[i].id, vocab.decode(r.tokens), r.score};
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, test_set.size());
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  out.report = corpus_wer(test_set, out.hypotheses);
  return out;
}

}  // namespace adlm
