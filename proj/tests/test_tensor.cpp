// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adlm/adapter.hpp"
#include "adlm/errors.hpp"
#include "adlm/ops.hpp"
#include "adlm/tensor.hpp"
#include "adlm/training.hpp"
#include "gradcheck.hpp"

namespace adlm {
namespace {

using testing::max_gradient_error;
using testing::random_tensor;
using testing::weighted_sum;

constexpr double kTol = 1e-4;
constexpr int kSeeds = 10;

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor<float>({2, 0}, {}), DimensionError);
  EXPECT_THROW(Tensor<float>({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(matmul(Tensor<float>::zeros({2, 3}), Tensor<float>::zeros({2, 3})), DimensionError);
  EXPECT_THROW(add(Tensor<float>::zeros({2}), Tensor<float>::zeros({3})), DimensionError);
}

TEST(Tensor, BackwardTwiceIsAContractError) {
  auto x = Tensor<double>::full({3}, 2.0, true);
  auto y = sum(mul(x, x));
  y.backward();
  EXPECT_THROW(y.backward(), ContractError);
  ASSERT_TRUE(x.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(Tensor, NonScalarBackwardRejected) {
  auto x = Tensor<double>::full({3}, 1.0, true);
  EXPECT_THROW(scale(x, 2.0).backward(), ContractError);
}

TEST(Tensor, NoGradGuardStopsRecording) {
  auto x = Tensor<float>::full({2}, 1.0f, true);
  NoGradGuard guard;
  auto y = sum(x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(y.backward(), ContractError);
}

TEST(Tensor, GradientsAccumulateAcrossUses) {
  auto x = Tensor<double>({2}, {1.0, -3.0}, true);
  auto y = sum(add(mul(x, x), scale(x, 3.0)));
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 + 3.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -6.0 + 3.0);
}

TEST(Tensor, SetRequiresGradOnlyOnLeaves) {
  auto x = Tensor<double>::full({2}, 1.0, true);
  auto y = scale(x, 2.0);
  EXPECT_THROW(y.set_requires_grad(false), ContractError);
}

TEST(Ops, SoftmaxRowsSumToOneAndNanPropagates) {
  auto x = Tensor<float>({2, 3}, {1000.f, 1001.f, 1002.f, -5.f, 0.f, 5.f});
  auto p = softmax_lastdim(x);
  for (int r = 0; r < 2; ++r) {
    EXPECT_NEAR(p[3 * r] + p[3 * r + 1] + p[3 * r + 2], 1.0f, 1e-6f);
  }
  auto n = softmax_lastdim(Tensor<float>({1, 2}, {std::nanf(""), 0.f}));
  EXPECT_TRUE(std::isnan(n[0]));
}

TEST(Ops, GatherRowsRejectsOutOfRangeIds) {
  const std::vector<TokenId> ids{0, 4};
  EXPECT_THROW(gather_rows(Tensor<float>::zeros({4, 2}), std::span<const TokenId>(ids)), IndexError);
}

TEST(Gradients, Matmul) {
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(s);
    auto a = random_tensor({2, 3, 4}, rng);
    auto b = random_tensor({4, 5}, rng);
    const double err = max_gradient_error(
        [s](const auto& in) { return weighted_sum(matmul(in[0], in[1]), s); }, {a, b});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Gradients, ElementwiseAndBias) {
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(100 + s);
    auto a = random_tensor({3, 4}, rng);
    auto b = random_tensor({3, 4}, rng);
    auto bias = random_tensor({4}, rng);
    const double err = max_gradient_error(
        [s](const auto& in) {
          return weighted_sum(add_bias(add(mul(in[0], in[1]), scale(in[0], 0.7)), in[2]), s);
        },
        {a, b, bias});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Gradients, Relu) {
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(200 + s);
    auto a = random_tensor({5, 3}, rng);
    // Keep every input away from the kink.
    for (double& v : a.mutable_data()) v = v >= 0 ? v + 0.1 : v - 0.1;
    const double err = max_gradient_error([s](const auto& in) { return weighted_sum(relu(in[0]), s); }, {a});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Gradients, SoftmaxAndLogSoftmax) {
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(300 + s);
    auto a = random_tensor({3, 6}, rng, 2.0);
    EXPECT_LE(max_gradient_error([s](const auto& in) { return weighted_sum(softmax_lastdim(in[0]), s); }, {a}), kTol);
    EXPECT_LE(max_gradient_error([s](const auto& in) { return weighted_sum(log_softmax_lastdim(in[0]), s); }, {a}),
              kTol);
  }
}

TEST(Gradients, LayerNorm) {
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(400 + s);
    auto x = random_tensor({4, 6}, rng);
    auto g = random_tensor({6}, rng);
    auto b = random_tensor({6}, rng);
    const double err = max_gradient_error(
        [s](const auto& in) { return weighted_sum(layer_norm(in[0], in[1], in[2]), s); }, {x, g, b});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Gradients, GatherRowsWithRepeats) {
  const std::vector<TokenId> ids{2, 0, 2, 3, 2};
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(500 + s);
    auto table = random_tensor({5, 3}, rng);
    const double err = max_gradient_error(
        [s, &ids](const auto& in) { return weighted_sum(gather_rows(in[0], std::span<const TokenId>(ids)), s); },
        {table});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Gradients, CausalSelfAttention) {
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(600 + s);
    const std::size_t batch = 2;
    const std::size_t seq = 3;
    auto q = random_tensor({batch * seq, 4}, rng);
    auto k = random_tensor({batch * seq, 4}, rng);
    auto v = random_tensor({batch * seq, 4}, rng);
    const double err = max_gradient_error(
        [s](const auto& in) { return weighted_sum(causal_self_attention(in[0], in[1], in[2], 2, 2), s); },
        {q, k, v});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Gradients, Adapter) {
  LMConfig cfg;
  cfg.hidden = 6;
  cfg.adapter_dim = 3;
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(700 + s);
    auto x = random_tensor({4, 6}, rng);
    auto a = init_adapter<double>(cfg, 0.5, 700 + s);
    const double err = max_gradient_error(
        [s](const auto& in) {
          return weighted_sum(adapter_forward(AdapterParams<double>{in[1], in[2], in[3], in[4]}, in[0]), s);
        },
        {x, a.w_down, a.b_down, a.w_up, a.b_up});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Gradients, CrossEntropyIgnoresPad) {
  const std::vector<TokenId> targets{4, kPadId, 1, 6};
  for (int s = 0; s < kSeeds; ++s) {
    std::mt19937_64 rng(800 + s);
    auto logits = random_tensor({4, 7}, rng);
    const double err = max_gradient_error(
        [&targets](const auto& in) { return cross_entropy_loss(in[0], std::span<const TokenId>(targets)); }, {logits});
    EXPECT_LE(err, kTol) << "seed " << s;
  }
}

TEST(Ops, CrossEntropyMatchesLogSoftmax) {
  std::mt19937_64 rng(9);
  auto logits = random_tensor({3, 5}, rng, 1.0, false);
  const std::vector<TokenId> targets{1, 4, 0};
  const double loss = cross_entropy_loss(logits, std::span<const TokenId>(targets)).item();
  auto lp = log_softmax_lastdim(logits);
  EXPECT_NEAR(loss, -(lp[0 * 5 + 1] + lp[1 * 5 + 4]) / 2.0, 1e-12);
}

}  // namespace
}  // namespace adlm
