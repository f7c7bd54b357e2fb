// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "adlm/adaptation.hpp"
#include "adlm/checkpoint.hpp"
#include "adlm/decoder.hpp"
#include "adlm/errors.hpp"
#include "adlm/model_size.hpp"
#include "adlm/training.hpp"

namespace adlm::cli {

namespace {

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ContractError(std::string("missing required flag ") + flag);
}

LoadedCheckpoint load_with_vocab(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  if (!ck.header.vocab) throw DataError("checkpoint '" + path + "' carries no vocabulary");
  return ck;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

TrainConfig train_config(const RunConfig& rc, Regime regime) {
  TrainConfig tc;
  tc.regime = regime;
  tc.lr = rc.lr;
  tc.warmup_steps = rc.warmup;
  tc.noam_factor = rc.noam_factor;
  tc.token_budget = rc.token_budget;
  tc.steps = rc.steps;
  tc.seed = rc.seed;
  if (rc.clip_norm > 0.0) tc.clip_norm = rc.clip_norm;
  if (regime == Regime::adapter_finetune) tc.domain = rc.domain;
  return tc;
}

FusionConfig fusion_config(const RunConfig& rc) {
  FusionConfig fc;
  fc.beam_size = rc.beam;
  fc.length_penalty_alpha = rc.len_penalty;
  fc.max_len = rc.max_len;
  fc.lm_weight = rc.lm_weight;
  return fc;
}

ChannelSpec channel_spec(const RunConfig& rc, const Vocabulary& vocab) {
  ChannelSpec spec;
  spec.confusion_rate = rc.confusion_rate;
  spec.seed = rc.seed;
  spec.confusers_per_token = rc.confusers;
  if (!rc.target_words.empty()) {
    const std::vector<std::string> words = read_lines(rc.target_words);
    spec.targets = tokens_of_words(vocab, words);
    if (spec.targets.empty()) throw DataError("no target tokens in '" + rc.target_words + "'");
  }
  return spec;
}

void write_train_report(const TrainReport& report, const std::string& out) {
  std::ofstream tsv = open_output(out + ".train.tsv");
  report.write_tsv(tsv);
  if (!report.steps.empty()) {
    std::cout << "steps=" << report.steps.size() << " final_loss=" << report.steps.back().loss << '\n';
  }
}

int build_vocab(const RunConfig& rc) {
  require(rc.in, "--in");
  require(rc.out, "--out");
  const Vocabulary v = Vocabulary::build(read_lines(rc.in), rc.vocab_size);
  v.save(rc.out);
  std::cout << "tokens=" << v.size() << " merges=" << v.merges().size() << '\n';
  return kOk;
}

int train_base(const RunConfig& rc) {
  require(rc.vocab, "--vocab");
  require(rc.corpus, "--corpus");
  require(rc.out, "--out");
  const Vocabulary vocab = Vocabulary::load(rc.vocab);
  LMConfig cfg;
  cfg.num_layers = rc.layers;
  cfg.hidden = rc.hidden;
  cfg.ffn = rc.ffn;
  cfg.num_heads = rc.heads;
  cfg.adapter_dim = rc.adapter_dim;
  cfg.max_len = rc.max_positions;
  cfg.vocab_size = vocab.size();
  cfg.validate();
  DomainRegistry<float> registry(cfg, LMParameters<float>::initialize(cfg, rc.seed));
  const Corpus corpus = Corpus::load(vocab, rc.corpus);
  const TrainReport report = train(registry, corpus, train_config(rc, Regime::scratch));
  save_checkpoint(rc.out, registry, &vocab);
  write_train_report(report, rc.out);
  return kOk;
}

int finetune_full(const RunConfig& rc) {
  require(rc.ckpt, "--ckpt");
  require(rc.corpus, "--corpus");
  require(rc.out, "--out");
  LoadedCheckpoint ck = load_with_vocab(rc.ckpt);
  const Corpus corpus = Corpus::load(*ck.header.vocab, rc.corpus);
  const TrainReport report = train(ck.registry, corpus, train_config(rc, Regime::full_finetune));
  save_checkpoint(rc.out, ck.registry, &*ck.header.vocab);
  write_train_report(report, rc.out);
  return kOk;
}

int add_domain(const RunConfig& rc) {
  require(rc.ckpt, "--ckpt");
  require(rc.name, "--name");
  require(rc.out, "--out");
  LoadedCheckpoint ck = load_with_vocab(rc.ckpt);
  const std::size_t id = ck.registry.add_domain(rc.name, rc.init_variance, rc.seed);
  save_checkpoint(rc.out, ck.registry, &*ck.header.vocab);
  std::cout << "domain=" << rc.name << " id=" << id << " params=" << ck.registry.bank(id).scalar_count() << '\n';
  return kOk;
}

int finetune_adapter(const RunConfig& rc) {
  require(rc.ckpt, "--ckpt");
  require(rc.corpus, "--corpus");
  require(rc.out, "--out");
  LoadedCheckpoint ck = load_with_vocab(rc.ckpt);
  const Corpus corpus = Corpus::load(*ck.header.vocab, rc.corpus, rc.domain);
  const TrainReport report = train(ck.registry, corpus, train_config(rc, Regime::adapter_finetune));
  ck.registry.set_active(rc.domain);
  save_checkpoint(rc.out, ck.registry, &*ck.header.vocab);
  write_train_report(report, rc.out);
  return kOk;
}

int decode(const RunConfig& rc) {
  require(rc.ckpt, "--ckpt");
  require(rc.testset, "--testset");
  require(rc.out, "--out");
  const LoadedCheckpoint ck = load_with_vocab(rc.ckpt);
  const Vocabulary& vocab = *ck.header.vocab;
  const std::vector<Utterance> test = load_test_set(rc.testset);
  const TransformerLm lm(ck.registry.select(rc.domain), ck.registry.config());
  const CorpusDecode result =
      decode_corpus(test, vocab, synthetic_channel_factory(vocab, channel_spec(rc, vocab)), lm, fusion_config(rc),
                    rc.workers);
  std::ofstream out = open_output(rc.out);
  write_hypotheses(out, result.hypotheses);
  std::cout << result.report.to_string() << '\n';
  return kOk;
}

int eval_wer(const RunConfig& rc) {
  require(rc.ref, "--ref");
  require(rc.hyp, "--hyp");
  std::cout << corpus_wer(load_test_set(rc.ref), load_hypotheses(rc.hyp)).to_string() << '\n';
  return kOk;
}

int iterate(const RunConfig& rc) {
  require(rc.ckpt, "--ckpt");
  require(rc.testset, "--testset");
  require(rc.out_dir, "--out-dir");
  LoadedCheckpoint ck = load_with_vocab(rc.ckpt);
  const Vocabulary& vocab = *ck.header.vocab;
  IterationSetup setup;
  setup.domain = rc.domain;
  setup.vocab = &vocab;
  setup.dev = load_test_set(rc.testset);
  if (!rc.eval_set.empty()) setup.eval = load_test_set(rc.eval_set);
  setup.scorer = synthetic_channel_factory(vocab, channel_spec(rc, vocab));
  setup.fusion = fusion_config(rc);
  setup.train = train_config(rc, Regime::adapter_finetune);
  setup.workers = rc.workers;
  setup.checkpoint_dir = rc.out_dir;
  std::filesystem::create_directories(rc.out_dir);
  RegistryRunner runner(ck.registry, setup);
  const LoopResult result = iterate_until_wer_rises(runner, rc.max_iters);
  const std::string best = (std::filesystem::path(rc.out_dir) / "best.ckpt").string();
  ck.registry.set_active(rc.domain);
  save_checkpoint(best, ck.registry, &vocab);
  std::ofstream tsv = open_output((std::filesystem::path(rc.out_dir) / "iterations.tsv").string());
  write_iteration_reports(tsv, result.reports);
  write_iteration_reports(std::cout, result.reports);
  std::cout << "best_iteration=" << result.best_iteration << " best_wer=" << result.best_wer << " ckpt=" << best
            << '\n';
  return kOk;
}

int model_size(const RunConfig& rc) {
  LMConfig cfg;
  std::size_t n = rc.domains;
  if (!rc.ckpt.empty()) {
    const LoadedCheckpoint ck = load_checkpoint(rc.ckpt);
    cfg = ck.header.config;
    n = ck.registry.domain_count();
  } else {
    cfg.num_layers = rc.layers;
    cfg.hidden = rc.hidden;
    cfg.ffn = rc.ffn;
    cfg.num_heads = rc.heads;
    cfg.adapter_dim = rc.adapter_dim;
    cfg.vocab_size = rc.model_vocab;
    cfg.max_len = rc.max_positions;
  }
  std::cout << report_model_size(cfg, n).to_string();
  return kOk;
}

int perplexity_cmd(const RunConfig& rc) {
  require(rc.ckpt, "--ckpt");
  require(rc.corpus, "--corpus");
  const LoadedCheckpoint ck = load_with_vocab(rc.ckpt);
  const Corpus corpus = Corpus::load(*ck.header.vocab, rc.corpus);
  const double ppl = perplexity(ck.registry.select(rc.domain), ck.registry.config(), corpus);
  if (!std::isfinite(ppl)) throw NumericError("perplexity is not finite");
  std::cout << "perplexity=" << ppl << '\n';
  return kOk;
}

}  // namespace

int run_command(const std::string& subcommand, const RunConfig& rc) {
  if (subcommand == "build-vocab") return build_vocab(rc);
  if (subcommand == "train-base") return train_base(rc);
  if (subcommand == "finetune-full") return finetune_full(rc);
  if (subcommand == "add-domain") return add_domain(rc);
  if (subcommand == "finetune-adapter") return finetune_adapter(rc);
  if (subcommand == "decode") return decode(rc);
  if (subcommand == "eval-wer") return eval_wer(rc);
  if (subcommand == "iterate") return iterate(rc);
  if (subcommand == "model-size") return model_size(rc);
  if (subcommand == "perplexity") return perplexity_cmd(rc);
  throw ContractError("unknown subcommand '" + subcommand + "'");
}

}  // namespace adlm::cli
