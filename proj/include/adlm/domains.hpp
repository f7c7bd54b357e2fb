// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adlm/adapter.hpp"
#include "adlm/lm.hpp"

namespace adlm {

inline constexpr std::string_view kBaseDomain = "base";

// Trainable scalars a first domain adds: 2 N_L (2 f_A h + f_A + h).
std::size_t param_count_first_domain(const LMConfig& cfg);
// Every later domain: 2 N_L (2 f_A h + f_A + 3h) + (2h + h N_w + N_w).
std::size_t param_count_subsequent_domain(const LMConfig& cfg);

template <typename T>
struct AdapterPair {
  AdapterParams<T> attn;  // after the attention output projection
  AdapterParams<T> ffn;   // after the second FFN projection
};

/// One domain's switchable parameters.
///
/// The first registered domain owns only its adapters and decodes with the
/// registry's shared norm/softmax set. Every later domain also owns private
/// copies of all 2 N_L + 1 layer norms and the softmax head.
template <typename T>
struct DomainBank {
  std::size_t id = 0;
  std::string name;
  std::vector<AdapterPair<T>> adapters;
  std::optional<NormSet<T>> norms;
  std::optional<SoftmaxHead<T>> head;

  std::size_t scalar_count() const;
  // Under "domain/<name>/".
  std::vector<NamedTensor<T>> named() const;
};

/// Base model plus per-domain banks, with switchable decoding paths.
///
/// Base parameters are only read by domain paths. The shared norm/softmax set
/// used by the first domain is a copy of the base set taken when that domain
/// is registered, so "base" keeps decoding with the pre-adaptation weights.
template <typename T>
class DomainRegistry {
 public:
  DomainRegistry(LMConfig cfg, LMParameters<T> base);

  const LMConfig& config() const { return cfg_; }
  LMParameters<T>& base() { return base_; }
  const LMParameters<T>& base() const { return base_; }

  // Returns the new domain id (1 for the first domain). Throws ContractError on
  // a duplicate or reserved name.
  std::size_t add_domain(const std::string& name, double init_variance, std::uint64_t seed);

  std::size_t domain_count() const { return banks_.size(); }
  bool has_domain(std::string_view name) const;
  std::vector<std::string> domain_names() const;
  const DomainBank<T>& bank(std::string_view name) const;
  const DomainBank<T>& bank(std::size_t id) const;

  const std::optional<NormSet<T>>& shared_norms() const { return shared_norms_; }
  const std::optional<SoftmaxHead<T>>& shared_head() const { return shared_head_; }

  // "base" or a registered domain name. Throws ContractError for unknown names.
  ForwardPath<T> select(std::string_view name) const;
  void set_active(std::string_view name);
  const std::string& active() const { return active_; }
  ForwardPath<T> active_path() const { return select(active_); }

  std::vector<NamedTensor<T>> base_named() const { return base_.named(); }
  // Base, then "shared/...", then every bank in registration order.
  std::vector<NamedTensor<T>> named_parameters() const;
  // Adapters, plus the shared set for the first domain or the private set otherwise.
  std::vector<NamedTensor<T>> domain_trainables(std::string_view name) const;

 private:
  const DomainBank<T>& find(std::string_view name) const;

  LMConfig cfg_;
  LMParameters<T> base_;
  std::optional<NormSet<T>> shared_norms_;
  std::optional<SoftmaxHead<T>> shared_head_;
  std::vector<DomainBank<T>> banks_;
  std::string active_{kBaseDomain};
};

extern template struct DomainBank<float>;
extern template struct DomainBank<double>;
extern template class DomainRegistry<float>;
extern template class DomainRegistry<double>;

}  // namespace adlm
