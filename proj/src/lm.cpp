// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "adlm/errors.hpp"

namespace adlm {

void LMConfig::validate() const {
  if (num_layers == 0 || hidden == 0 || ffn == 0 || num_heads == 0 || vocab_size == 0 || adapter_dim == 0 ||
      max_len == 0) {
    throw ContractError("LMConfig: every field must be positive (" + to_string(*this) + ")");
  }
  if (hidden % num_heads != 0) {
    throw ContractError("LMConfig: hidden " + std::to_string(hidden) + " is not divisible by " +
                        std::to_string(num_heads) + " heads");
  }
}

std::string to_string(const LMConfig& cfg) {
  std::ostringstream os;
  os << "layers=" << cfg.num_layers << " hidden=" << cfg.hidden << " ffn=" << cfg.ffn
     << " heads=" << cfg.num_heads << " vocab=" << cfg.vocab_size << " adapter_dim=" << cfg.adapter_dim
     << " max_len=" << cfg.max_len;
  return os.str();
}

template <typename T>
LayerNormParams<T> LayerNormParams<T>::identity(std::size_t hidden) {
  return {Tensor<T>::full({hidden}, T(1), true), Tensor<T>::zeros({hidden}, true)};
}

template <typename T>
NormSet<T> NormSet<T>::clone() const {
  NormSet out;
  for (const auto& ln : ln_attn) out.ln_attn.push_back(ln.clone());
  for (const auto& ln : ln_ffn) out.ln_ffn.push_back(ln.clone());
  out.final_ln = final_ln.clone();
  return out;
}

namespace {

template <typename T>
void push_ln(std::vector<NamedTensor<T>>& out, const std::string& prefix, const LayerNormParams<T>& ln) {
  out.push_back({prefix + "/gain", ln.gain});
  out.push_back({prefix + "/bias", ln.bias});
}

std::string layer_prefix(const std::string& prefix, std::size_t l) {
  return prefix + "layers/" + std::to_string(l);
}

}  // namespace

template <typename T>
void NormSet<T>::append_named(const std::string& prefix, std::vector<NamedTensor<T>>& out) const {
  for (std::size_t l = 0; l < ln_attn.size(); ++l) {
    push_ln(out, layer_prefix(prefix, l) + "/ln_attn", ln_attn[l]);
    push_ln(out, layer_prefix(prefix, l) + "/ln_ffn", ln_ffn[l]);
  }
  push_ln(out, prefix + "final_ln", final_ln);
}

template <typename T>
LMParameters<T> LMParameters<T>::initialize(const LMConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  auto normal = [&rng](Shape shape, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<T> v(shape_numel(shape));
    for (T& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>(std::move(shape), std::move(v), true);
  };
  const std::size_t h = cfg.hidden;
  const double h_scale = 1.0 / std::sqrt(static_cast<double>(h));
  const double f_scale = 1.0 / std::sqrt(static_cast<double>(cfg.ffn));
  LMParameters p;
  p.embedding = normal({cfg.vocab_size, h}, 1.0);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerParams<T> layer;
    layer.attn.wq = normal({h, h}, h_scale);
    layer.attn.wk = normal({h, h}, h_scale);
    layer.attn.wv = normal({h, h}, h_scale);
    layer.attn.wo = normal({h, h}, h_scale);
    layer.ffn.w1 = normal({h, cfg.ffn}, h_scale);
    layer.ffn.b1 = Tensor<T>::zeros({cfg.ffn}, true);
    layer.ffn.w2 = normal({cfg.ffn, h}, f_scale);
    layer.ffn.b2 = Tensor<T>::zeros({h}, true);
    layer.ln_attn = LayerNormParams<T>::identity(h);
    layer.ln_ffn = LayerNormParams<T>::identity(h);
    p.layers.push_back(std::move(layer));
  }
  p.final_ln = LayerNormParams<T>::identity(h);
  p.head.weight = normal({h, cfg.vocab_size}, h_scale);
  p.head.bias = Tensor<T>::zeros({cfg.vocab_size}, true);
  return p;
}

template <typename T>
LMParameters<T> LMParameters<T>::zeros(const LMConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.hidden;
  auto z = [](Shape s) { return Tensor<T>::zeros(std::move(s), true); };
  LMParameters p;
  p.embedding = z({cfg.vocab_size, h});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerParams<T> layer{{z({h, h}), z({h, h}), z({h, h}), z({h, h})},
                         {z({h, cfg.ffn}), z({cfg.ffn}), z({cfg.ffn, h}), z({h})},
                         LayerNormParams<T>::identity(h),
                         LayerNormParams<T>::identity(h)};
    p.layers.push_back(std::move(layer));
  }
  p.final_ln = LayerNormParams<T>::identity(h);
  p.head = {z({h, cfg.vocab_size}), z({cfg.vocab_size})};
  return p;
}

template <typename T>
LMParameters<T> LMParameters<T>::clone() const {
  LMParameters p;
  p.embedding = embedding.clone();
  for (const auto& l : layers) {
    p.layers.push_back({{l.attn.wq.clone(), l.attn.wk.clone(), l.attn.wv.clone(), l.attn.wo.clone()},
                        {l.ffn.w1.clone(), l.ffn.b1.clone(), l.ffn.w2.clone(), l.ffn.b2.clone()},
                        l.ln_attn.clone(),
                        l.ln_ffn.clone()});
  }
  p.final_ln = final_ln.clone();
  p.head = head.clone();
  return p;
}

template <typename T>
NormSet<T> LMParameters<T>::norms() const {
  NormSet<T> n;
  for (const auto& l : layers) {
    n.ln_attn.push_back(l.ln_attn);
    n.ln_ffn.push_back(l.ln_ffn);
  }
  n.final_ln = final_ln;
  return n;
}

template <typename T>
std::vector<NamedTensor<T>> LMParameters<T>::named(const std::string& prefix) const {
  std::vector<NamedTensor<T>> out;
  out.push_back({prefix + "embedding", embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string lp = layer_prefix(prefix, l);
    const auto& layer = layers[l];
    out.push_back({lp + "/attn/wq", layer.attn.wq});
    out.push_back({lp + "/attn/wk", layer.attn.wk});
    out.push_back({lp + "/attn/wv", layer.attn.wv});
    out.push_back({lp + "/attn/wo", layer.attn.wo});
    out.push_back({lp + "/ffn/w1", layer.ffn.w1});
    out.push_back({lp + "/ffn/b1", layer.ffn.b1});
    out.push_back({lp + "/ffn/w2", layer.ffn.w2});
    out.push_back({lp + "/ffn/b2", layer.ffn.b2});
    push_ln(out, lp + "/ln_attn", layer.ln_attn);
    push_ln(out, lp + "/ln_ffn", layer.ln_ffn);
  }
  push_ln(out, prefix + "final_ln", final_ln);
  out.push_back({prefix + "softmax/weight", head.weight});
  out.push_back({prefix + "softmax/bias", head.bias});
  return out;
}

template <typename T>
std::size_t LMParameters<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& nt : named()) n += nt.tensor.numel();
  return n;
}

template <typename T>
ForwardPath<T> base_path(const LMParameters<T>& params) {
  ForwardPath<T> path;
  path.embedding = params.embedding;
  for (const auto& l : params.layers) {
    path.layers.push_back({l.attn, l.ffn, l.ln_attn, l.ln_ffn, std::nullopt, std::nullopt});
  }
  path.final_ln = params.final_ln;
  path.head = params.head;
  return path;
}

template <typename T>
Tensor<T> positional_encoding(std::size_t pos, std::size_t hidden) {
  std::vector<T> v(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    const std::size_t pair = j / 2;
    const double angle = static_cast<double>(pos) /
                         std::pow(10000.0, 2.0 * static_cast<double>(pair) / static_cast<double>(hidden));
    v[j] = static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
  }
  return Tensor<T>({hidden}, std::move(v));
}

template <typename T>
Tensor<T> embed_input(const Tensor<T>& embedding, std::span<const TokenId> ids, std::size_t batch) {
  if (batch == 0 || ids.size() % batch != 0) {
    throw DimensionError("embed_input: " + std::to_string(ids.size()) + " ids do not split into " +
                         std::to_string(batch) + " sequences");
  }
  const std::size_t seq = ids.size() / batch;
  const std::size_t h = embedding.dim(1);
  std::vector<T> pe(ids.size() * h);
  for (std::size_t t = 0; t < seq; ++t) {
    const Tensor<T> row = positional_encoding<T>(t, h);
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy(row.data().begin(), row.data().end(), pe.begin() + static_cast<std::ptrdiff_t>((b * seq + t) * h));
    }
  }
  return add(gather_rows(embedding, ids), Tensor<T>({ids.size(), h}, std::move(pe)));
}

template <typename T>
Tensor<T> multi_head_attention(const AttentionParams<T>& p, const Tensor<T>& x, std::size_t num_heads,
                               std::size_t batch) {
  Tensor<T> q = matmul(x, p.wq);
  Tensor<T> k = matmul(x, p.wk);
  Tensor<T> v = matmul(x, p.wv);
  return matmul(causal_self_attention(q, k, v, num_heads, batch), p.wo);
}

template <typename T>
Tensor<T> position_ffn(const FfnParams<T>& p, const Tensor<T>& x) {
  return add_bias(matmul(relu(add_bias(matmul(x, p.w1), p.b1)), p.w2), p.b2);
}

template <typename T>
Tensor<T> lm_forward_batch(const ForwardPath<T>& path, const LMConfig& cfg, std::span<const TokenId> ids,
                           std::size_t batch) {
  if (ids.empty()) throw ContractError("lm_forward: empty input");
  if (batch == 0 || ids.size() % batch != 0) {
    throw DimensionError("lm_forward: " + std::to_string(ids.size()) + " ids do not split into " +
                         std::to_string(batch) + " sequences");
  }
  const std::size_t seq = ids.size() / batch;
  if (seq > cfg.max_len) {
    throw ContractError("lm_forward: sequence length " + std::to_string(seq) + " exceeds max_len " +
                        std::to_string(cfg.max_len));
  }
  Tensor<T> x = embed_input(path.embedding, ids, batch);
  for (const LayerPath<T>& layer : path.layers) {
    Tensor<T> m = multi_head_attention(layer.attn, layer_norm(x, layer.ln_attn.gain, layer.ln_attn.bias),
                                       cfg.num_heads, batch);
    if (layer.adapter_attn) m = adapter_forward(*layer.adapter_attn, m);
    x = add(x, m);
    Tensor<T> f = position_ffn(layer.ffn, layer_norm(x, layer.ln_ffn.gain, layer.ln_ffn.bias));
    if (layer.adapter_ffn) f = adapter_forward(*layer.adapter_ffn, f);
    x = add(x, f);
  }
  x = layer_norm(x, path.final_ln.gain, path.final_ln.bias);
  return add_bias(matmul(x, path.head.weight), path.head.bias);
}

template <typename T>
Tensor<T> lm_forward(const ForwardPath<T>& path, const LMConfig& cfg, std::span<const TokenId> ids) {
  return lm_forward_batch(path, cfg, ids, 1);
}

template <typename T>
LMState<T> initial_state(const LMConfig& cfg) {
  LMState<T> s;
  s.keys.resize(cfg.num_layers);
  s.values.resize(cfg.num_layers);
  return s;
}

template <typename T>
std::pair<std::vector<T>, LMState<T>> next_token_logprobs(const ForwardPath<T>& path, const LMConfig& cfg,
                                                          const LMState<T>& state, TokenId new_id) {
  if (state.position >= cfg.max_len) {
    throw ContractError("next_token_logprobs: position " + std::to_string(state.position) + " reached max_len " +
                        std::to_string(cfg.max_len));
  }
  NoGradGuard no_grad;
  const std::size_t h = cfg.hidden;
  const std::size_t heads = cfg.num_heads;
  const std::size_t d = cfg.head_dim();
  const std::size_t pos = state.position;
  LMState<T> next = state;
  next.keys.resize(path.layers.size());
  next.values.resize(path.layers.size());

  const TokenId id_arr[1] = {new_id};
  const Tensor<T> pe = positional_encoding<T>(pos, h);
  Tensor<T> x = add(gather_rows(path.embedding, std::span<const TokenId>(id_arr)), Tensor<T>({1, h}, {pe.data().begin(), pe.data().end()}));
  const T inv_scale = T(1) / std::sqrt(T(d));
  for (std::size_t l = 0; l < path.layers.size(); ++l) {
    const LayerPath<T>& layer = path.layers[l];
    Tensor<T> a = layer_norm(x, layer.ln_attn.gain, layer.ln_attn.bias);
    Tensor<T> q = matmul(a, layer.attn.wq);
    Tensor<T> k = matmul(a, layer.attn.wk);
    Tensor<T> v = matmul(a, layer.attn.wv);
    auto& kc = next.keys[l];
    auto& vc = next.values[l];
    kc.insert(kc.end(), k.data().begin(), k.data().end());
    vc.insert(vc.end(), v.data().begin(), v.data().end());
    const std::size_t len = pos + 1;
    std::vector<T> attended(h, T(0));
    std::vector<T> scores(len);
    const T* qd = q.data().data();
    for (std::size_t hd = 0; hd < heads; ++hd) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < len; ++j) {
        T s = T(0);
        for (std::size_t c = 0; c < d; ++c) s += qd[hd * d + c] * kc[j * h + hd * d + c];
        scores[j] = s * inv_scale;
        mx = std::max(mx, scores[j]);
      }
      T z = T(0);
      for (std::size_t j = 0; j < len; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        z += scores[j];
      }
      for (std::size_t j = 0; j < len; ++j) {
        const T p = scores[j] / z;
        for (std::size_t c = 0; c < d; ++c) attended[hd * d + c] += p * vc[j * h + hd * d + c];
      }
    }
    Tensor<T> m = matmul(Tensor<T>({1, h}, std::move(attended)), layer.attn.wo);
    if (layer.adapter_attn) m = adapter_forward(*layer.adapter_attn, m);
    x = add(x, m);
    Tensor<T> f = position_ffn(layer.ffn, layer_norm(x, layer.ln_ffn.gain, layer.ln_ffn.bias));
    if (layer.adapter_ffn) f = adapter_forward(*layer.adapter_ffn, f);
    x = add(x, f);
  }
  x = layer_norm(x, path.final_ln.gain, path.final_ln.bias);
  Tensor<T> logp = log_softmax_lastdim(add_bias(matmul(x, path.head.weight), path.head.bias));
  next.position = pos + 1;
  return {std::vector<T>(logp.data().begin(), logp.data().end()), std::move(next)};
}

template <typename T>
double perplexity(const ForwardPath<T>& path, const LMConfig& cfg, const Corpus& corpus) {
  if (corpus.empty()) throw ContractError("perplexity: empty corpus");
  NoGradGuard no_grad;
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& u : corpus.utterances) {
    if (u.size() < 2) continue;
    const std::span<const TokenId> inputs(u.data(), u.size() - 1);
    const Tensor<T> logp = log_softmax_lastdim(lm_forward(path, cfg, inputs));
    const std::size_t nw = logp.dim(1);
    for (std::size_t t = 0; t + 1 < u.size(); ++t) {
      nll -= static_cast<double>(logp.data()[t * nw + static_cast<std::size_t>(u[t + 1])]);
      ++count;
    }
  }
  if (count == 0) throw ContractError("perplexity: corpus has no predictable tokens");
  return std::exp(nll / static_cast<double>(count));
}

#define ADLM_INSTANTIATE_LM(T)                                                                                \
  template struct LayerNormParams<T>;                                                                         \
  template struct NormSet<T>;                                                                                 \
  template struct LMParameters<T>;                                                                            \
  template ForwardPath<T> base_path(const LMParameters<T>&);                                                  \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                                        \
  template Tensor<T> embed_input(const Tensor<T>&, std::span<const TokenId>, std::size_t);                   \
  template Tensor<T> multi_head_attention(const AttentionParams<T>&, const Tensor<T>&, std::size_t,          \
                                          std::size_t);                                                       \
  template Tensor<T> position_ffn(const FfnParams<T>&, const Tensor<T>&);                                     \
  template Tensor<T> lm_forward(const ForwardPath<T>&, const LMConfig&, std::span<const TokenId>);           \
  template Tensor<T> lm_forward_batch(const ForwardPath<T>&, const LMConfig&, std::span<const TokenId>,      \
                                      std::size_t);                                                           \
  template LMState<T> initial_state<T>(const LMConfig&);                                                      \
  template std::pair<std::vector<T>, LMState<T>> next_token_logprobs(const ForwardPath<T>&, const LMConfig&, \
                                                                     const LMState<T>&, TokenId);            \
  template double perplexity(const ForwardPath<T>&, const LMConfig&, const Corpus&);

ADLM_INSTANTIATE_LM(float)
ADLM_INSTANTIATE_LM(double)

#undef ADLM_INSTANTIATE_LM

}  // namespace adlm
