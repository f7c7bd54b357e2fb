// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "adlm/config.hpp"

namespace adlm {

inline constexpr double kBytesPerMiB = 1024.0 * 1024.0;

// 4 bytes per scalar.
double params_to_mib(std::size_t scalars);

// Embedding, every layer, final norm and softmax head.
std::size_t base_param_count(const LMConfig& cfg);

struct DomainSizeRow {
  std::size_t index = 0;  // 1-based registration order
  std::size_t params = 0;
  double mib = 0.0;
  double growth_percent = 0.0;  // relative to the base model
};

struct ModelSizeReport {
  LMConfig config;
  std::size_t base_params = 0;
  double base_mib = 0.0;
  std::vector<DomainSizeRow> domains;
  std::size_t total_params = 0;
  double total_mib = 0.0;

  // Tab-separated table with a header row.
  std::string to_string() const;
};

ModelSizeReport report_model_size(const LMConfig& cfg, std::size_t n_domains);

}  // namespace adlm
