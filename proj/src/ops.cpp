// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "adlm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "adlm/errors.hpp"

namespace adlm {

namespace {

template <typename T>
using NodeT = detail::Node<T>;

// Gradient buffer of parent i, or nullptr when that parent is not tracked.
template <typename T>
std::vector<T>* parent_grad(NodeT<T>& out, std::size_t i) {
  NodeT<T>& p = *out.parents[i];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

// out[m, n] += a[m, k] * b[k, n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() != 2 || as.back() != bs[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
  }
  const std::size_t k = as.back();
  const std::size_t n = bs[1];
  const std::size_t m = a.numel() / k;
  std::vector<T> out(m * n, T(0));
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  Shape os = as;
  os.back() = n;
  return Tensor<T>::make_result(std::move(os), std::move(out), {a, b}, [m, k, n](NodeT<T>& o) {
    const T* g = o.grad.data();
    const T* av = o.parents[0]->value.data();
    const T* bv = o.parents[1]->value.data();
    if (auto* ga = parent_grad(o, 0)) {
      // da = dout * b^T
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        T* darow = ga->data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = bv + p * n;
          T acc = T(0);
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          darow[p] += acc;
        }
      }
    }
    if (auto* gb = parent_grad(o, 1)) {
      // db = a^T * dout
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        const T* arow = av + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const T ap = arow[p];
          if (ap == T(0)) continue;
          T* dbrow = gb->data() + p * n;
          for (std::size_t j = 0; j < n; ++j) dbrow[j] += ap * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](NodeT<T>& o) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (auto* gp = parent_grad(o, p)) {
        for (std::size_t i = 0; i < o.grad.size(); ++i) (*gp)[i] += o.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](NodeT<T>& o) {
    const auto& av = o.parents[0]->value;
    const auto& bv = o.parents[1]->value;
    if (auto* ga = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) (*ga)[i] += o.grad[i] * bv[i];
    }
    if (auto* gb = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) (*gb)[i] += o.grad[i] * av[i];
    }
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  const std::size_t n = last_dim(x.shape());
  if (bias.rank() != 1 || bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  auto bd = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bd[i % n];
  return Tensor<T>::make_result(x.shape(), std::move(out), {x, bias}, [n](NodeT<T>& o) {
    if (auto* gx = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) (*gx)[i] += o.grad[i];
    }
    if (auto* gb = parent_grad(o, 1)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) (*gb)[i % n] += o.grad[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v *= factor;
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [factor](NodeT<T>& o) {
    if (auto* gx = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) (*gx)[i] += o.grad[i] * factor;
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v = v > T(0) ? v : T(0);
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [](NodeT<T>& o) {
    if (auto* gx = parent_grad(o, 0)) {
      const auto& xv = o.parents[0]->value;
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (xv[i] > T(0)) (*gx)[i] += o.grad[i];
      }
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  return Tensor<T>::make_result(Shape{1}, std::vector<T>{acc}, {x}, [](NodeT<T>& o) {
    if (auto* gx = parent_grad(o, 0)) {
      for (T& g : *gx) g += o.grad[0];
    }
  });
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  const std::size_t n = last_dim(x.shape());
  const std::size_t rows = x.numel() / n;
  auto xd = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xd.data() + r * n;
    T* y = out.data() + r * n;
    T mx = *std::max_element(in, in + n);
    T z = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(in[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  auto saved = std::make_shared<std::vector<T>>(out);
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [saved, n, rows](NodeT<T>& o) {
    if (auto* gx = parent_grad(o, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = saved->data() + r * n;
        const T* g = o.grad.data() + r * n;
        T dot = T(0);
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        T* d = gx->data() + r * n;
        for (std::size_t j = 0; j < n; ++j) d[j] += y[j] * (g[j] - dot);
      }
    }
  });
}

template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x) {
  const std::size_t n = last_dim(x.shape());
  const std::size_t rows = x.numel() / n;
  auto xd = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xd.data() + r * n;
    T* y = out.data() + r * n;
    T mx = *std::max_element(in, in + n);
    T z = T(0);
    for (std::size_t j = 0; j < n; ++j) z += std::exp(in[j] - mx);
    const T lse = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) y[j] = in[j] - lse;
  }
  auto saved = std::make_shared<std::vector<T>>(out);
  return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [saved, n, rows](NodeT<T>& o) {
    if (auto* gx = parent_grad(o, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = saved->data() + r * n;
        const T* g = o.grad.data() + r * n;
        T gsum = T(0);
        for (std::size_t j = 0; j < n; ++j) gsum += g[j];
        T* d = gx->data() + r * n;
        for (std::size_t j = 0; j < n; ++j) d[j] += g[j] - std::exp(y[j]) * gsum;
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  const std::size_t n = last_dim(x.shape());
  if (gain.numel() != n || bias.numel() != n) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / n;
  auto xd = x.data();
  auto gd = gain.data();
  auto bd = bias.data();
  std::vector<T> out(x.numel());
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto rstd = std::make_shared<std::vector<T>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xd.data() + r * n;
    T mean = T(0);
    for (std::size_t j = 0; j < n; ++j) mean += in[j];
    mean /= T(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < n; ++j) {
      const T xh = (in[j] - mean) * rs;
      (*xhat)[r * n + j] = xh;
      out[r * n + j] = xh * gd[j] + bd[j];
    }
  }
  return Tensor<T>::make_result(
      x.shape(), std::move(out), {x, gain, bias}, [xhat, rstd, n, rows](NodeT<T>& o) {
        const auto& gv = o.parents[1]->value;
        auto* gx = parent_grad(o, 0);
        auto* gg = parent_grad(o, 1);
        auto* gb = parent_grad(o, 2);
        std::vector<T> dxh(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = o.grad.data() + r * n;
          const T* xh = xhat->data() + r * n;
          T mean_d = T(0);
          T mean_dx = T(0);
          for (std::size_t j = 0; j < n; ++j) {
            if (gg) (*gg)[j] += g[j] * xh[j];
            if (gb) (*gb)[j] += g[j];
            dxh[j] = g[j] * gv[j];
            mean_d += dxh[j];
            mean_dx += dxh[j] * xh[j];
          }
          if (!gx) continue;
          mean_d /= T(n);
          mean_dx /= T(n);
          T* d = gx->data() + r * n;
          const T rs = (*rstd)[r];
          for (std::size_t j = 0; j < n; ++j) d[j] += rs * (dxh[j] - mean_d - xh[j] * mean_dx);
        }
      });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const TokenId> ids) {
  if (table.rank() != 2) throw DimensionError("gather_rows: table must be 2-D, got " + shape_str(table.shape()));
  if (ids.empty()) throw DimensionError("gather_rows: empty id list");
  const std::size_t vocab = table.dim(0);
  const std::size_t h = table.dim(1);
  auto td = table.data();
  std::vector<T> out(ids.size() * h);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("gather_rows: id " + std::to_string(ids[i]) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * h, h, out.data() + i * h);
  }
  auto saved = std::make_shared<std::vector<TokenId>>(ids.begin(), ids.end());
  return Tensor<T>::make_result(Shape{ids.size(), h}, std::move(out), {table}, [saved, h](NodeT<T>& o) {
    if (auto* gt = parent_grad(o, 0)) {
      for (std::size_t i = 0; i < saved->size(); ++i) {
        T* row = gt->data() + static_cast<std::size_t>((*saved)[i]) * h;
        const T* g = o.grad.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) row[j] += g[j];
      }
    }
  });
}

namespace {

struct AttentionDims {
  std::size_t batch, seq, hidden, heads, head_dim;
};

template <typename T>
AttentionDims attention_dims(const Tensor<T>& q, const Tensor<T>& k, std::size_t num_heads,
                             std::size_t batch) {
  if (q.rank() != 2 || q.shape() != k.shape()) {
    throw DimensionError("attention: q " + shape_str(q.shape()) + " and k " + shape_str(k.shape()) +
                         " must be equal 2-D shapes");
  }
  const std::size_t rows = q.dim(0);
  const std::size_t h = q.dim(1);
  if (batch == 0 || rows % batch != 0) {
    throw DimensionError("attention: " + std::to_string(rows) + " rows not divisible into batch " +
                         std::to_string(batch));
  }
  if (num_heads == 0 || h % num_heads != 0) {
    throw DimensionError("attention: hidden " + std::to_string(h) + " not divisible by " +
                         std::to_string(num_heads) + " heads");
  }
  return {batch, rows / batch, h, num_heads, h / num_heads};
}

// probs[b, head, i, j] for j <= i; entries above the diagonal are exactly 0.
template <typename T>
std::vector<T> attention_probs(const T* q, const T* k, const AttentionDims& d) {
  const T inv_scale = T(1) / std::sqrt(T(d.head_dim));
  std::vector<T> probs(d.batch * d.heads * d.seq * d.seq, T(0));
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t hd = 0; hd < d.heads; ++hd) {
      T* pb = probs.data() + (b * d.heads + hd) * d.seq * d.seq;
      for (std::size_t i = 0; i < d.seq; ++i) {
        const T* qi = q + (b * d.seq + i) * d.hidden + hd * d.head_dim;
        T* prow = pb + i * d.seq;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          const T* kj = k + (b * d.seq + j) * d.hidden + hd * d.head_dim;
          T s = T(0);
          for (std::size_t c = 0; c < d.head_dim; ++c) s += qi[c] * kj[c];
          prow[j] = s * inv_scale;
          mx = std::max(mx, prow[j]);
        }
        T z = T(0);
        for (std::size_t j = 0; j <= i; ++j) {
          prow[j] = std::exp(prow[j] - mx);
          z += prow[j];
        }
        for (std::size_t j = 0; j <= i; ++j) prow[j] /= z;
      }
    }
  }
  return probs;
}

}  // namespace

template <typename T>
Tensor<T> causal_attention_weights(const Tensor<T>& q, const Tensor<T>& k, std::size_t num_heads,
                                   std::size_t batch) {
  const AttentionDims d = attention_dims(q, k, num_heads, batch);
  return Tensor<T>(Shape{d.batch, d.heads, d.seq, d.seq}, attention_probs(q.data().data(), k.data().data(), d));
}

template <typename T>
Tensor<T> causal_self_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                std::size_t num_heads, std::size_t batch) {
  const AttentionDims d = attention_dims(q, k, num_heads, batch);
  require_same_shape(q, v, "attention");
  auto probs = std::make_shared<std::vector<T>>(attention_probs(q.data().data(), k.data().data(), d));
  const T* vd = v.data().data();
  std::vector<T> out(q.numel(), T(0));
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t hd = 0; hd < d.heads; ++hd) {
      const T* pb = probs->data() + (b * d.heads + hd) * d.seq * d.seq;
      for (std::size_t i = 0; i < d.seq; ++i) {
        T* oi = out.data() + (b * d.seq + i) * d.hidden + hd * d.head_dim;
        for (std::size_t j = 0; j <= i; ++j) {
          const T p = pb[i * d.seq + j];
          const T* vj = vd + (b * d.seq + j) * d.hidden + hd * d.head_dim;
          for (std::size_t c = 0; c < d.head_dim; ++c) oi[c] += p * vj[c];
        }
      }
    }
  }
  return Tensor<T>::make_result(q.shape(), std::move(out), {q, k, v}, [probs, d](NodeT<T>& o) {
    const T inv_scale = T(1) / std::sqrt(T(d.head_dim));
    const T* qv = o.parents[0]->value.data();
    const T* kv = o.parents[1]->value.data();
    const T* vv = o.parents[2]->value.data();
    auto* gq = parent_grad(o, 0);
    auto* gk = parent_grad(o, 1);
    auto* gv = parent_grad(o, 2);
    std::vector<T> dp(d.seq);
    for (std::size_t b = 0; b < d.batch; ++b) {
      for (std::size_t hd = 0; hd < d.heads; ++hd) {
        const T* pb = probs->data() + (b * d.heads + hd) * d.seq * d.seq;
        for (std::size_t i = 0; i < d.seq; ++i) {
          const std::size_t ri = (b * d.seq + i) * d.hidden + hd * d.head_dim;
          const T* go = o.grad.data() + ri;
          const T* prow = pb + i * d.seq;
          // dP = dO V^T, dV = P^T dO
          T rowdot = T(0);
          for (std::size_t j = 0; j <= i; ++j) {
            const std::size_t rj = (b * d.seq + j) * d.hidden + hd * d.head_dim;
            T acc = T(0);
            for (std::size_t c = 0; c < d.head_dim; ++c) acc += go[c] * vv[rj + c];
            dp[j] = acc;
            rowdot += acc * prow[j];
            if (gv) {
              for (std::size_t c = 0; c < d.head_dim; ++c) (*gv)[rj + c] += prow[j] * go[c];
            }
          }
          // dS = P (dP - rowdot); dQ = dS K s; dK = dS^T Q s
          for (std::size_t j = 0; j <= i; ++j) {
            const T ds = prow[j] * (dp[j] - rowdot) * inv_scale;
            if (ds == T(0)) continue;
            const std::size_t rj = (b * d.seq + j) * d.hidden + hd * d.head_dim;
            if (gq) {
              for (std::size_t c = 0; c < d.head_dim; ++c) (*gq)[ri + c] += ds * kv[rj + c];
            }
            if (gk) {
              for (std::size_t c = 0; c < d.head_dim; ++c) (*gk)[rj + c] += ds * qv[ri + c];
            }
          }
        }
      }
    }
  });
}

#define ADLM_INSTANTIATE_OPS(T)                                                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                       \
  template Tensor<T> sum(const Tensor<T>&);                                                        \
  template Tensor<T> softmax_lastdim(const Tensor<T>&);                                            \
  template Tensor<T> log_softmax_lastdim(const Tensor<T>&);                                        \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);          \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const TokenId>);                      \
  template Tensor<T> causal_self_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                           std::size_t, std::size_t);                              \
  template Tensor<T> causal_attention_weights(const Tensor<T>&, const Tensor<T>&, std::size_t,     \
                                              std::size_t);

ADLM_INSTANTIATE_OPS(float)
ADLM_INSTANTIATE_OPS(double)

#undef ADLM_INSTANTIATE_OPS

}  // namespace adlm
