// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "adlm/tensor.hpp"

namespace adlm {

using TokenId = std::int32_t;

// a: [..., m, k] (leading dims flattened into rows), b: [k, n] -> [..., m, n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise, identical shapes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// x: [..., n], bias: [n]; bias added to every row.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Sum of all elements -> shape [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Max-subtracted softmax over the last axis. NaN inputs propagate.
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x);

template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x);

inline constexpr double kLayerNormEps = 1e-6;

// Per-row (x - mean) / sqrt(var + eps) * gain + bias, biased variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = T(kLayerNormEps));

// table: [V, h] -> [len(ids), h]. Gradient scatter-adds into table rows.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const TokenId> ids);

/// Scaled dot-product self-attention with a causal mask.
///
/// q, k, v are [batch * seq, h] with rows grouped by sequence. Head i uses
/// columns [i*d, (i+1)*d) where d = h / num_heads; scores are scaled by
/// 1/sqrt(d) and position t attends to positions <= t of its own sequence.
/// Returns the concatenated head outputs, [batch * seq, h].
template <typename T>
Tensor<T> causal_self_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                std::size_t num_heads, std::size_t batch);

// Attention weights of causal_self_attention, [batch, num_heads, seq, seq].
// Not differentiable.
template <typename T>
Tensor<T> causal_attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t num_heads,
                                   std::size_t batch);

}  // namespace adlm
