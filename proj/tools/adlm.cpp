// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

// adlm: vocabulary, training, domain adapters, fused decoding and WER tools.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "adlm/checkpoint.hpp"
#include "adlm/errors.hpp"
#include "run_config.hpp"

namespace {

using adlm::cli::RunConfig;

void arch_flags(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--layers", rc.layers, "Transformer layers")->capture_default_str();
  sub->add_option("--hidden", rc.hidden, "Hidden size")->capture_default_str();
  sub->add_option("--ffn", rc.ffn, "Feed-forward inner size")->capture_default_str();
  sub->add_option("--heads", rc.heads, "Attention heads")->capture_default_str();
  sub->add_option("--adapter-dim", rc.adapter_dim, "Adapter bottleneck size")->capture_default_str();
  sub->add_option("--positions", rc.max_positions, "Longest sequence the model accepts")->capture_default_str();
}

void train_flags(CLI::App* sub, RunConfig& rc, bool noam) {
  sub->add_option("--steps", rc.steps, "Optimizer steps")->capture_default_str();
  sub->add_option("--token-budget", rc.token_budget, "Padded tokens per batch")->capture_default_str();
  sub->add_option("--clip-norm", rc.clip_norm, "Global gradient-norm clip, 0 for none")->capture_default_str();
  sub->add_option("--seed", rc.seed, "Seed")->capture_default_str();
  if (noam) {
    sub->add_option("--warmup", rc.warmup, "Warmup steps")->capture_default_str();
    sub->add_option("--noam-factor", rc.noam_factor, "Learning-rate scale")->capture_default_str();
  } else {
    sub->add_option("--lr", rc.lr, "Constant learning rate")->capture_default_str();
  }
}

void fusion_flags(CLI::App* sub, RunConfig& rc) {
  sub->add_option("--domain", rc.domain, "Domain path, or base")->capture_default_str();
  sub->add_option("--beam", rc.beam, "Beam size")->capture_default_str();
  sub->add_option("--len-penalty", rc.len_penalty, "Length penalty exponent")->capture_default_str();
  sub->add_option("--max-len", rc.max_len, "Longest hypothesis in tokens")->capture_default_str();
  sub->add_option("--lm-weight", rc.lm_weight, "Shallow-fusion weight")->capture_default_str();
  sub->add_option("--confusion-rate", rc.confusion_rate, "Synthetic channel confusion rate")->capture_default_str();
  sub->add_option("--confusers", rc.confusers, "Confusers per confusable token")->capture_default_str();
  sub->add_option("--target-words", rc.target_words, "Words whose tokens the channel confuses (default all)");
  sub->add_option("--seed", rc.seed, "Channel seed")->capture_default_str();
  sub->add_option("--workers", rc.workers, "Decoding threads")->capture_default_str();
}

std::string run_config_path(const std::string& sub, const RunConfig& rc) {
  if (sub == "iterate" && !rc.out_dir.empty()) return (std::filesystem::path(rc.out_dir) / "run.ini").string();
  if (!rc.out.empty()) return rc.out + ".run.ini";
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adlm: multi-domain Transformer LM with adapters"};
  app.set_config("--config", "", "Re-run from a saved run.ini");
  app.require_subcommand(1);
  RunConfig rc;
  std::string save_config;
  app.add_option("--save-config", save_config, "Also write the resolved run configuration here");

  auto* vocab = app.add_subcommand("build-vocab", "Learn a BPE vocabulary");
  vocab->add_option("--in", rc.in, "Training text, one utterance per line")->required();
  vocab->add_option("--size", rc.vocab_size, "Target vocabulary size")->capture_default_str();
  vocab->add_option("--out", rc.out, "Vocabulary file")->required();

  auto* base = app.add_subcommand("train-base", "Train a base LM from scratch");
  base->add_option("--vocab", rc.vocab)->required();
  base->add_option("--corpus", rc.corpus)->required();
  arch_flags(base, rc);
  train_flags(base, rc, true);
  base->add_option("--out", rc.out, "Checkpoint")->required();

  auto* full = app.add_subcommand("finetune-full", "Fine-tune every base parameter");
  full->add_option("--ckpt", rc.ckpt)->required();
  full->add_option("--corpus", rc.corpus)->required();
  train_flags(full, rc, true);
  full->add_option("--out", rc.out)->required();

  auto* add = app.add_subcommand("add-domain", "Register a domain bank");
  add->add_option("--ckpt", rc.ckpt)->required();
  add->add_option("--name", rc.name)->required();
  add->add_option("--init-variance", rc.init_variance, "Adapter init variance")->capture_default_str();
  add->add_option("--seed", rc.seed)->capture_default_str();
  add->add_option("--out", rc.out)->required();

  auto* adapt = app.add_subcommand("finetune-adapter", "Fine-tune one domain bank, base frozen");
  adapt->add_option("--ckpt", rc.ckpt)->required();
  adapt->add_option("--domain", rc.domain)->required();
  adapt->add_option("--corpus", rc.corpus)->required();
  train_flags(adapt, rc, false);
  adapt->add_option("--out", rc.out)->required();

  auto* dec = app.add_subcommand("decode", "Beam search with shallow fusion over the synthetic channel");
  dec->add_option("--ckpt", rc.ckpt)->required();
  dec->add_option("--testset", rc.testset, "utt_id<TAB>reference")->required();
  fusion_flags(dec, rc);
  dec->add_option("--out", rc.out, "Hypotheses TSV")->required();

  auto* ev = app.add_subcommand("eval-wer", "Corpus WER of a hypotheses file");
  ev->add_option("--ref", rc.ref)->required();
  ev->add_option("--hyp", rc.hyp)->required();

  auto* iter = app.add_subcommand("iterate", "Decode, mine errors, fine-tune, repeat while WER improves");
  iter->add_option("--ckpt", rc.ckpt)->required();
  iter->add_option("--testset", rc.testset, "Dev set used for error mining")->required();
  iter->add_option("--eval-set", rc.eval_set, "Separate WER set (default: the dev set)");
  iter->add_option("--max-iters", rc.max_iters)->capture_default_str();
  fusion_flags(iter, rc);
  iter->add_option("--steps", rc.steps, "Adapter steps per iteration")->capture_default_str();
  iter->add_option("--lr", rc.lr)->capture_default_str();
  iter->add_option("--token-budget", rc.token_budget)->capture_default_str();
  iter->add_option("--out-dir", rc.out_dir)->required();

  auto* size = app.add_subcommand("model-size", "Parameter and MiB accounting");
  size->add_option("--ckpt", rc.ckpt, "Read the configuration and domain count from a checkpoint");
  arch_flags(size, rc);
  size->add_option("--vocab-size", rc.model_vocab)->capture_default_str();
  size->add_option("--domains", rc.domains)->capture_default_str();

  auto* ppl = app.add_subcommand("perplexity", "Perplexity of a corpus on one path");
  ppl->add_option("--ckpt", rc.ckpt)->required();
  ppl->add_option("--domain", rc.domain)->capture_default_str();
  ppl->add_option("--corpus", rc.corpus)->required();

  for (auto* sub : app.get_subcommands({})) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : adlm::cli::kUsage;
  }

  CLI::App* selected = app.get_subcommands().front();
  const std::string sub = selected->get_name();
  try {
    const std::string cfg_text = "[" + sub + "]\n" + selected->config_to_str(true, false);
    for (const std::string& path : {run_config_path(sub, rc), save_config}) {
      if (path.empty()) continue;
      if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) {
        std::filesystem::create_directories(dir);
      }
      std::ofstream(path) << cfg_text;
    }
    return adlm::cli::run_command(sub, rc);
  } catch (const adlm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return adlm::cli::kNumeric;
  } catch (const adlm::ContractError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return adlm::cli::kUsage;
  } catch (const adlm::DimensionError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return adlm::cli::kUsage;
  } catch (const adlm::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return adlm::cli::kData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return adlm::cli::kData;
  }
}
