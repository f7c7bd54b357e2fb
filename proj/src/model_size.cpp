// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/model_size.hpp"

#include <iomanip>
#include <sstream>

#include "adlm/domains.hpp"

namespace adlm {

double params_to_mib(std::size_t scalars) { return 4.0 * static_cast<double>(scalars) / kBytesPerMiB; }

std::size_t base_param_count(const LMConfig& cfg) {
  const std::size_t h = cfg.hidden;
  const std::size_t f = cfg.ffn;
  const std::size_t nw = cfg.vocab_size;
  const std::size_t layer = 4 * h * h + (h * f + f + f * h + h) + 4 * h;
  return nw * h + cfg.num_layers * layer + 2 * h + (h * nw + nw);
}

ModelSizeReport report_model_size(const LMConfig& cfg, std::size_t n_domains) {
  cfg.validate();
  ModelSizeReport r;
  r.config = cfg;
  r.base_params = base_param_count(cfg);
  r.base_mib = params_to_mib(r.base_params);
  r.total_params = r.base_params;
  for (std::size_t i = 1; i <= n_domains; ++i) {
    DomainSizeRow row;
    row.index = i;
    row.params = i == 1 ? param_count_first_domain(cfg) : param_count_subsequent_domain(cfg);
    row.mib = params_to_mib(row.params);
    row.growth_percent = 100.0 * static_cast<double>(row.params) / static_cast<double>(r.base_params);
    r.total_params += row.params;
    r.domains.push_back(row);
  }
  r.total_mib = params_to_mib(r.total_params);
  return r;
}

std::string ModelSizeReport::to_string() const {
  std::ostringstream os;
  os << std::fixed;
  os << "part\tparams\tMiB\tgrowth_percent\n";
  os << "base\t" << base_params << '\t' << std::setprecision(3) << base_mib << "\t0.00\n";
  for (const auto& d : domains) {
    os << "domain_" << d.index << '\t' << d.params << '\t' << std::setprecision(3) << d.mib << '\t'
       << std::setprecision(2) << d.growth_percent << '\n';
  }
  os << "total\t" << total_params << '\t' << std::setprecision(3) << total_mib << '\t' << std::setprecision(2)
     << 100.0 * static_cast<double>(total_params - base_params) / static_cast<double>(base_params) << '\n';
  return os.str();
}

}  // namespace adlm
