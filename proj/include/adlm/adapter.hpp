// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "adlm/config.hpp"
#include "adlm/tensor.hpp"

namespace adlm {

/// Bottleneck adapter: down-projection [h, f_A], ReLU, up-projection [f_A, h].
template <typename T>
struct AdapterParams {
  Tensor<T> w_down;
  Tensor<T> b_down;
  Tensor<T> w_up;
  Tensor<T> b_up;

  std::size_t hidden() const { return w_down.dim(0); }
  std::size_t scalar_count() const;
  AdapterParams clone() const;
};

// x + ReLU(x W_down + b_down) W_up + b_up
template <typename T>
Tensor<T> adapter_forward(const AdapterParams<T>& adapter, const Tensor<T>& x);

// Every weight and bias drawn from N(0, variance); variance 0 gives exact zeros.
template <typename T>
AdapterParams<T> init_adapter(const LMConfig& cfg, double variance, std::uint64_t seed);

extern template struct AdapterParams<float>;
extern template struct AdapterParams<double>;

}  // namespace adlm
