// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/domains.hpp"

#include "adlm/errors.hpp"

namespace adlm {

std::size_t param_count_first_domain(const LMConfig& cfg) {
  const std::size_t h = cfg.hidden;
  const std::size_t fa = cfg.adapter_dim;
  return 2 * cfg.num_layers * (2 * fa * h + fa + h);
}

std::size_t param_count_subsequent_domain(const LMConfig& cfg) {
  const std::size_t h = cfg.hidden;
  const std::size_t fa = cfg.adapter_dim;
  const std::size_t nw = cfg.vocab_size;
  return 2 * cfg.num_layers * (2 * fa * h + fa + 3 * h) + (2 * h + h * nw + nw);
}

namespace {

template <typename T>
void push_adapter(std::vector<NamedTensor<T>>& out, const std::string& prefix, const AdapterParams<T>& a) {
  out.push_back({prefix + "/w_down", a.w_down});
  out.push_back({prefix + "/b_down", a.b_down});
  out.push_back({prefix + "/w_up", a.w_up});
  out.push_back({prefix + "/b_up", a.b_up});
}

template <typename T>
void push_head(std::vector<NamedTensor<T>>& out, const std::string& prefix, const SoftmaxHead<T>& head) {
  out.push_back({prefix + "softmax/weight", head.weight});
  out.push_back({prefix + "softmax/bias", head.bias});
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

template <typename T>
std::size_t DomainBank<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& nt : named()) n += nt.tensor.numel();
  return n;
}

template <typename T>
std::vector<NamedTensor<T>> DomainBank<T>::named() const {
  const std::string prefix = "domain/" + name + "/";
  std::vector<NamedTensor<T>> out;
  for (std::size_t l = 0; l < adapters.size(); ++l) {
    const std::string lp = prefix + "layers/" + std::to_string(l);
    push_adapter(out, lp + "/adapter_attn", adapters[l].attn);
    push_adapter(out, lp + "/adapter_ffn", adapters[l].ffn);
  }
  if (norms) norms->append_named(prefix, out);
  if (head) push_head(out, prefix, *head);
  return out;
}

template <typename T>
DomainRegistry<T>::DomainRegistry(LMConfig cfg, LMParameters<T> base) : cfg_(cfg), base_(std::move(base)) {
  cfg_.validate();
  if (base_.layers.size() != cfg_.num_layers || base_.embedding.dim(0) != cfg_.vocab_size ||
      base_.embedding.dim(1) != cfg_.hidden) {
    throw DimensionError("DomainRegistry: base parameters do not match " + to_string(cfg_));
  }
}

template <typename T>
std::size_t DomainRegistry<T>::add_domain(const std::string& name, double init_variance, std::uint64_t seed) {
  if (name.empty() || name == kBaseDomain || name.find_first_of("/,=\n") != std::string::npos) {
    throw ContractError("add_domain: invalid domain name '" + name + "'");
  }
  if (has_domain(name)) throw ContractError("add_domain: domain '" + name + "' already registered");
  DomainBank<T> bank;
  bank.id = banks_.size() + 1;
  bank.name = name;
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    bank.adapters.push_back({init_adapter<T>(cfg_, init_variance, mix_seed(seed, 2 * l)),
                             init_adapter<T>(cfg_, init_variance, mix_seed(seed, 2 * l + 1))});
  }
  if (banks_.empty()) {
    shared_norms_ = base_.norms().clone();
    shared_head_ = base_.head.clone();
  } else {
    bank.norms = shared_norms_->clone();
    bank.head = shared_head_->clone();
  }
  banks_.push_back(std::move(bank));
  return banks_.back().id;
}

template <typename T>
bool DomainRegistry<T>::has_domain(std::string_view name) const {
  for (const auto& b : banks_) {
    if (b.name == name) return true;
  }
  return false;
}

template <typename T>
std::vector<std::string> DomainRegistry<T>::domain_names() const {
  std::vector<std::string> out;
  for (const auto& b : banks_) out.push_back(b.name);
  return out;
}

template <typename T>
const DomainBank<T>& DomainRegistry<T>::find(std::string_view name) const {
  for (const auto& b : banks_) {
    if (b.name == name) return b;
  }
  throw ContractError("unknown domain '" + std::string(name) + "'");
}

template <typename T>
const DomainBank<T>& DomainRegistry<T>::bank(std::string_view name) const {
  return find(name);
}

template <typename T>
const DomainBank<T>& DomainRegistry<T>::bank(std::size_t id) const {
  if (id == 0 || id > banks_.size()) throw ContractError("unknown domain id " + std::to_string(id));
  return banks_[id - 1];
}

template <typename T>
ForwardPath<T> DomainRegistry<T>::select(std::string_view name) const {
  ForwardPath<T> path = base_path(base_);
  if (name == kBaseDomain) return path;
  const DomainBank<T>& b = find(name);
  const NormSet<T>& norms = b.norms ? *b.norms : *shared_norms_;
  for (std::size_t l = 0; l < path.layers.size(); ++l) {
    path.layers[l].ln_attn = norms.ln_attn[l];
    path.layers[l].ln_ffn = norms.ln_ffn[l];
    path.layers[l].adapter_attn = b.adapters[l].attn;
    path.layers[l].adapter_ffn = b.adapters[l].ffn;
  }
  path.final_ln = norms.final_ln;
  path.head = b.head ? *b.head : *shared_head_;
  return path;
}

template <typename T>
void DomainRegistry<T>::set_active(std::string_view name) {
  if (name != kBaseDomain) find(name);
  active_ = std::string(name);
}

template <typename T>
std::vector<NamedTensor<T>> DomainRegistry<T>::named_parameters() const {
  std::vector<NamedTensor<T>> out = base_.named();
  if (shared_norms_) shared_norms_->append_named("shared/", out);
  if (shared_head_) push_head(out, "shared/", *shared_head_);
  for (const auto& b : banks_) {
    for (auto& nt : b.named()) out.push_back(std::move(nt));
  }
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> DomainRegistry<T>::domain_trainables(std::string_view name) const {
  const DomainBank<T>& b = find(name);
  std::vector<NamedTensor<T>> out = b.named();
  if (!b.norms) {
    shared_norms_->append_named("shared/", out);
    push_head(out, "shared/", *shared_head_);
  }
  return out;
}

template struct DomainBank<float>;
template struct DomainBank<double>;
template class DomainRegistry<float>;
template class DomainRegistry<double>;

}  // namespace adlm
