// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

namespace adlm {

/// Architecture hyperparameters. Defaults are the general-domain LM sizes
/// (3 layers, h=512, f=4096, f_A=64, 8 heads, 4096 word pieces).
struct LMConfig {
  std::size_t num_layers = 3;
  std::size_t hidden = 512;
  std::size_t ffn = 4096;
  std::size_t num_heads = 8;
  std::size_t vocab_size = 4096;
  std::size_t adapter_dim = 64;
  std::size_t max_len = 256;

  std::size_t head_dim() const { return hidden / num_heads; }
  // Throws ContractError unless every field is positive and hidden % num_heads == 0.
  void validate() const;

  friend bool operator==(const LMConfig&, const LMConfig&) = default;
};

std::string to_string(const LMConfig& cfg);

}  // namespace adlm
