// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference oracle for reverse-mode gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "adlm/ops.hpp"
#include "adlm/tensor.hpp"

namespace adlm::testing {

using LossFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0, bool grad = true) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor<double>(std::move(shape), std::move(v), grad);
}

// Largest relative error between backward() and central differences over
// every element of every input that requires grad.
inline double max_gradient_error(const LossFn& loss, std::vector<Tensor<double>> inputs, double step = 1e-5) {
  for (auto& t : inputs) {
    if (t.requires_grad()) t.zero_grad();
  }
  Tensor<double> out = loss(inputs);
  out.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    if (!t.requires_grad()) {
      analytic.emplace_back();
      continue;
    }
    if (t.has_grad()) {
      const auto g = t.grad();
      analytic.emplace_back(g.begin(), g.end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }
  double worst = 0.0;
  NoGradGuard guard;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto data = inputs[i].mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + step;
      const double plus = loss(inputs).item();
      data[j] = saved - step;
      const double minus = loss(inputs).item();
      data[j] = saved;
      worst = std::max(worst, relative_error(analytic[i][j], (plus - minus) / (2.0 * step)));
    }
  }
  return worst;
}

// Fixed random projection of a tensor to a scalar, so every output element
// contributes a distinct weight to the loss.
inline Tensor<double> weighted_sum(const Tensor<double>& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> w(x.numel());
  for (double& v : w) v = dist(rng);
  return sum(mul(x, Tensor<double>(x.shape(), std::move(w))));
}

}  // namespace adlm::testing
