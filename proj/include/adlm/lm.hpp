// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adlm/adapter.hpp"
#include "adlm/config.hpp"
#include "adlm/ops.hpp"
#include "adlm/tensor.hpp"
#include "adlm/tokenizer.hpp"

namespace adlm {

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;

  static LayerNormParams identity(std::size_t hidden);
  LayerNormParams clone() const { return {gain.clone(), bias.clone()}; }
};

// Fused [h, h] projections; head i owns columns [i*d, (i+1)*d).
template <typename T>
struct AttentionParams {
  Tensor<T> wq;
  Tensor<T> wk;
  Tensor<T> wv;
  Tensor<T> wo;
};

template <typename T>
struct FfnParams {
  Tensor<T> w1;  // [h, f]
  Tensor<T> b1;  // [f]
  Tensor<T> w2;  // [f, h]
  Tensor<T> b2;  // [h]
};

template <typename T>
struct SoftmaxHead {
  Tensor<T> weight;  // [h, N_w]
  Tensor<T> bias;    // [N_w]

  SoftmaxHead clone() const { return {weight.clone(), bias.clone()}; }
};

template <typename T>
struct LayerParams {
  AttentionParams<T> attn;
  FfnParams<T> ffn;
  LayerNormParams<T> ln_attn;
  LayerNormParams<T> ln_ffn;
};

// The per-layer and final layer norms, i.e. 2*N_L + 1 (gain, bias) pairs.
template <typename T>
struct NormSet {
  std::vector<LayerNormParams<T>> ln_attn;
  std::vector<LayerNormParams<T>> ln_ffn;
  LayerNormParams<T> final_ln;

  NormSet clone() const;
  void append_named(const std::string& prefix, std::vector<NamedTensor<T>>& out) const;
};

/// Base (adapter-free) model weights.
template <typename T>
struct LMParameters {
  Tensor<T> embedding;  // [N_w, h]
  std::vector<LayerParams<T>> layers;
  LayerNormParams<T> final_ln;
  SoftmaxHead<T> head;

  // Weights ~ N(0, 1/fan_in), embedding ~ N(0, 1), biases 0, norms identity.
  static LMParameters initialize(const LMConfig& cfg, std::uint64_t seed);
  static LMParameters zeros(const LMConfig& cfg);

  LMParameters clone() const;
  NormSet<T> norms() const;
  // Canonical order: embedding, layers/<l>/..., final_ln/..., softmax/...
  std::vector<NamedTensor<T>> named(const std::string& prefix = {}) const;
  std::size_t scalar_count() const;
};

template <typename T>
struct LayerPath {
  AttentionParams<T> attn;
  FfnParams<T> ffn;
  LayerNormParams<T> ln_attn;
  LayerNormParams<T> ln_ffn;
  std::optional<AdapterParams<T>> adapter_attn;
  std::optional<AdapterParams<T>> adapter_ffn;
};

/// Resolved set of tensor handles one forward pass reads. Cheap to copy;
/// refers to (does not own a copy of) the parameter storage.
template <typename T>
struct ForwardPath {
  Tensor<T> embedding;
  std::vector<LayerPath<T>> layers;
  LayerNormParams<T> final_ln;
  SoftmaxHead<T> head;
};

template <typename T>
ForwardPath<T> base_path(const LMParameters<T>& params);

// Sinusoidal: even dims sin(pos / 10000^(2i/h)), odd dims cos of the same angle.
template <typename T>
Tensor<T> positional_encoding(std::size_t pos, std::size_t hidden);

// ids holds `batch` sequences of equal length back to back; positions restart
// at 0 for every sequence. Returns [ids.size(), h].
template <typename T>
Tensor<T> embed_input(const Tensor<T>& embedding, std::span<const TokenId> ids, std::size_t batch = 1);

template <typename T>
Tensor<T> multi_head_attention(const AttentionParams<T>& p, const Tensor<T>& x, std::size_t num_heads,
                               std::size_t batch = 1);

template <typename T>
Tensor<T> position_ffn(const FfnParams<T>& p, const Tensor<T>& x);

// Pre-softmax logits [T, N_w] for one sequence.
template <typename T>
Tensor<T> lm_forward(const ForwardPath<T>& path, const LMConfig& cfg, std::span<const TokenId> ids);

// `batch` right-padded sequences laid out back to back -> [batch * seq, N_w].
template <typename T>
Tensor<T> lm_forward_batch(const ForwardPath<T>& path, const LMConfig& cfg, std::span<const TokenId> ids,
                           std::size_t batch);

/// Key/value cache for incremental decoding.
template <typename T>
struct LMState {
  std::vector<std::vector<T>> keys;    // per layer, position-major [pos, h]
  std::vector<std::vector<T>> values;  // per layer
  std::size_t position = 0;
};

template <typename T>
LMState<T> initial_state(const LMConfig& cfg);

// Feeds one token; returns log-softmax over the next token and the advanced state.
template <typename T>
std::pair<std::vector<T>, LMState<T>> next_token_logprobs(const ForwardPath<T>& path, const LMConfig& cfg,
                                                          const LMState<T>& state, TokenId new_id);

// exp(mean next-token NLL over every non-BOS token of the corpus).
template <typename T>
double perplexity(const ForwardPath<T>& path, const LMConfig& cfg, const Corpus& corpus);

}  // namespace adlm
