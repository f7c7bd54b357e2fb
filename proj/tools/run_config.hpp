// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace adlm::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

/// Every flag of every subcommand, defaults applied.
struct RunConfig {
  // paths
  std::string in;
  std::string out;
  std::string vocab;
  std::string corpus;
  std::string ckpt;
  std::string testset;
  std::string eval_set;
  std::string ref;
  std::string hyp;
  std::string out_dir;
  std::string target_words;

  // vocabulary
  std::size_t vocab_size = 512;

  // architecture
  std::size_t layers = 3;
  std::size_t hidden = 512;
  std::size_t ffn = 4096;
  std::size_t heads = 8;
  std::size_t adapter_dim = 64;
  std::size_t max_positions = 256;
  std::size_t model_vocab = 4096;  // formula mode of model-size
  std::size_t domains = 0;         // formula mode of model-size

  // training
  std::size_t steps = 0;
  std::size_t warmup = 1000;
  double noam_factor = 1.0;
  double lr = 0.03;
  std::size_t token_budget = 8192;
  double clip_norm = 0.0;  // 0: off
  std::uint64_t seed = 0;

  // domains
  std::string name;
  std::string domain = "base";
  double init_variance = 1e-3;

  // decoding
  std::size_t beam = 4;
  double len_penalty = 1.2;
  std::size_t max_len = 80;
  double lm_weight = 0.3;
  double confusion_rate = 0.0;
  std::size_t confusers = 2;
  std::size_t workers = 1;

  // iterative adaptation
  std::size_t max_iters = 4;
};

// Runs one subcommand. Errors propagate as adlm exceptions.
int run_command(const std::string& subcommand, const RunConfig& rc);

}  // namespace adlm::cli
