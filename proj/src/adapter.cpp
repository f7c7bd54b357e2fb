// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/adapter.hpp"

#include <cmath>
#include <random>

#include "adlm/errors.hpp"
#include "adlm/ops.hpp"

namespace adlm {

template <typename T>
std::size_t AdapterParams<T>::scalar_count() const {
  return w_down.numel() + b_down.numel() + w_up.numel() + b_up.numel();
}

template <typename T>
AdapterParams<T> AdapterParams<T>::clone() const {
  return {w_down.clone(), b_down.clone(), w_up.clone(), b_up.clone()};
}

template <typename T>
Tensor<T> adapter_forward(const AdapterParams<T>& adapter, const Tensor<T>& x) {
  const std::size_t h = adapter.w_down.dim(0);
  if (x.shape().back() != h || adapter.w_up.dim(1) != h) {
    throw DimensionError("adapter: input " + shape_str(x.shape()) + " does not match adapter width " +
                         std::to_string(h));
  }
  Tensor<T> down = relu(add_bias(matmul(x, adapter.w_down), adapter.b_down));
  return add(x, add_bias(matmul(down, adapter.w_up), adapter.b_up));
}

template <typename T>
AdapterParams<T> init_adapter(const LMConfig& cfg, double variance, std::uint64_t seed) {
  if (!(variance >= 0.0)) throw ContractError("init_adapter: variance must be >= 0, got " + std::to_string(variance));
  const std::size_t h = cfg.hidden;
  const std::size_t fa = cfg.adapter_dim;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  auto draw = [&](Shape shape) {
    std::vector<T> v(shape_numel(shape), T(0));
    if (variance > 0.0) {
      for (T& x : v) x = static_cast<T>(normal(rng));
    }
    return Tensor<T>(std::move(shape), std::move(v), true);
  };
  AdapterParams<T> a;
  a.w_down = draw({h, fa});
  a.b_down = draw({fa});
  a.w_up = draw({fa, h});
  a.b_up = draw({h});
  return a;
}

template struct AdapterParams<float>;
template struct AdapterParams<double>;
template Tensor<float> adapter_forward(const AdapterParams<float>&, const Tensor<float>&);
template Tensor<double> adapter_forward(const AdapterParams<double>&, const Tensor<double>&);
template AdapterParams<float> init_adapter<float>(const LMConfig&, double, std::uint64_t);
template AdapterParams<double> init_adapter<double>(const LMConfig&, double, std::uint64_t);

}  // namespace adlm
