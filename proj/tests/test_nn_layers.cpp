#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "stockbot/nn/layers.hpp"
#include "support/gradcheck.hpp"

using namespace stockbot;
using namespace stockbot::nn;
using stockbot::testing::check_gradients;
using stockbot::testing::random_tensor;
using stockbot::testing::weighted_sum;

namespace {

constexpr double kTol = 1e-4;

LstmLayerParams lstm_leaves(Tape& tape, const Tensor& W, const Tensor& U, const Tensor& b) {
  return {tape.leaf(W), tape.leaf(U), tape.leaf(b)};
}

template <class MakeInputs>
double fd_trials(MakeInputs make_inputs, const stockbot::testing::LossBuilder& build, std::uint64_t seed) {
  return stockbot::testing::fd_trials(make_inputs, build, seed, 100, 40);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------

TEST(LstmCell, ZeroParametersAreAFixedPoint) {
  Tape tape;
  auto p = lstm_leaves(tape, Tensor({3, 16}), Tensor({4, 16}), Tensor({16}));
  std::mt19937_64 rng(1);
  auto [h, c] = lstm_cell(p, tape.leaf(random_tensor({3}, rng)), tape.leaf(Tensor({4})), tape.leaf(Tensor({4})));
  for (double v : h.value().data()) EXPECT_EQ(v, 0.0);
  for (double v : c.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmCell, SaturatedForgetGateCarriesCell) {
  Tape tape;
  Tensor b({16});
  for (std::size_t j = 0; j < 4; ++j) b[j] = 50.0;  // forget block
  auto p = lstm_leaves(tape, Tensor({3, 16}), Tensor({4, 16}), b);
  std::mt19937_64 rng(2);
  Tensor c_prev = random_tensor({4}, rng);
  auto st = lstm_cell(p, tape.leaf(random_tensor({3}, rng)), tape.leaf(random_tensor({4}, rng)), tape.leaf(c_prev));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(st.c.value()[j], c_prev[j], 1e-15);
}

// Plain-double evaluation of the six gate equations with separate W_g, U_g, b_g.
TEST(LstmCell, MatchesGateEquations) {
  std::mt19937_64 rng(3);
  const std::size_t din = 2, d = 3;
  Tensor W = random_tensor({din, 4 * d}, rng), U = random_tensor({d, 4 * d}, rng), b = random_tensor({4 * d}, rng);
  Tensor x = random_tensor({din}, rng), h0 = random_tensor({d}, rng), c0 = random_tensor({d}, rng);
  auto gate = [&](std::size_t g, std::size_t j) {
    double s = b[g * d + j];
    for (std::size_t i = 0; i < din; ++i) s += W.at(i, g * d + j) * x[i];
    for (std::size_t i = 0; i < d; ++i) s += U.at(i, g * d + j) * h0[i];
    return s;
  };
  Tape tape;
  auto st = lstm_cell(lstm_leaves(tape, W, U, b), tape.leaf(x), tape.leaf(h0), tape.leaf(c0));
  for (std::size_t j = 0; j < d; ++j) {
    const double f = sigmoid(gate(0, j)), i = sigmoid(gate(1, j)), o = sigmoid(gate(2, j));
    const double cand = std::tanh(gate(3, j));
    const double c = f * c0[j] + i * cand;
    EXPECT_NEAR(st.c.value()[j], c, 1e-14);
    EXPECT_NEAR(st.h.value()[j], o * std::tanh(c), 1e-14);
  }
}

TEST(LstmCell, ShapeMismatch) {
  Tape tape;
  auto p = lstm_leaves(tape, Tensor({3, 16}), Tensor({4, 16}), Tensor({16}));
  EXPECT_THROW(lstm_cell(p, tape.leaf(Tensor({2})), tape.leaf(Tensor({4})), tape.leaf(Tensor({4}))), Error);
}

TEST(LstmCell, GradientOfHiddenNormMatchesFiniteDifferences) {
  const double worst = fd_trials(
      [](std::mt19937_64& r) {
        return std::vector<Tensor>{random_tensor({4, 16}, r), random_tensor({4, 16}, r), random_tensor({16}, r),
                                   random_tensor({4}, r), random_tensor({4}, r), random_tensor({4}, r)};
      },
      [](Tape&, const std::vector<Var>& v) {
        auto st = lstm_cell({v[0], v[1], v[2]}, v[3], v[4], v[5]);
        return ad::sum_all(ad::mul(st.h, st.h));
      },
      4);
  EXPECT_LT(worst, kTol);
}

// ---------------------------------------------------------------------------

TEST(LstmStack, ZeroLayerGivesZeroSequence) {
  Tape tape;
  std::mt19937_64 rng(5);
  auto out = lstm_stack({lstm_leaves(tape, Tensor({1, 12}), Tensor({3, 12}), Tensor({12}))},
                        tape.leaf(random_tensor({2, 5, 1}, rng)));
  EXPECT_EQ(out.shape(), (Shape{2, 5, 3}));
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmStack, EmptyStackIsConfigError) {
  Tape tape;
  try {
    lstm_stack({}, tape.leaf(Tensor({1, 3, 1})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(LstmStack, TwoLayersEqualComposedSingleLayers) {
  std::mt19937_64 rng(6);
  Tensor W0 = random_tensor({1, 16}, rng), U0 = random_tensor({4, 16}, rng), b0 = random_tensor({16}, rng);
  Tensor W1 = random_tensor({4, 16}, rng), U1 = random_tensor({4, 16}, rng), b1 = random_tensor({16}, rng);
  Tensor X = random_tensor({3, 7, 1}, rng);
  Tape tape;
  auto l0 = lstm_leaves(tape, W0, U0, b0);
  auto l1 = lstm_leaves(tape, W1, U1, b1);
  auto both = lstm_stack({l0, l1}, tape.leaf(X));
  auto composed = lstm_stack({l1}, lstm_stack({l0}, tape.leaf(X)));
  EXPECT_EQ(both.value(), composed.value());
}

TEST(LstmStack, StepsAgreeWithCell) {
  std::mt19937_64 rng(7);
  Tensor W = random_tensor({2, 12}, rng), U = random_tensor({3, 12}, rng), b = random_tensor({12}, rng);
  Tensor X = random_tensor({1, 4, 2}, rng);
  Tape tape;
  auto p = lstm_leaves(tape, W, U, b);
  auto seq = lstm_stack({p}, tape.leaf(X)).value();
  LstmState st{tape.leaf(Tensor({3})), tape.leaf(Tensor({3}))};
  for (std::size_t t = 0; t < 4; ++t) {
    Tensor xt({2});
    xt[0] = X[t * 2];
    xt[1] = X[t * 2 + 1];
    st = lstm_cell(p, tape.leaf(xt), st.h, st.c);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(seq[t * 3 + j], st.h.value()[j], 1e-14);
  }
}

TEST(LstmStack, OutputIsCausal) {
  std::mt19937_64 rng(8);
  std::vector<Tensor> params;
  for (int l = 0; l < 2; ++l) {
    params.push_back(random_tensor({l == 0 ? 1u : 5u, 20}, rng));
    params.push_back(random_tensor({5, 20}, rng));
    params.push_back(random_tensor({20}, rng));
  }
  for (int trial = 0; trial < 20; ++trial) {
    Tensor X = random_tensor({1, 9, 1}, rng);
    const std::size_t cut = rng() % 9;
    Tensor Y = X;
    for (std::size_t t = cut + 1; t < 9; ++t) Y[t] += 5.0 * (static_cast<double>(rng() % 100) / 50.0 - 1.0);
    Tape tape;
    std::vector<LstmLayerParams> layers{lstm_leaves(tape, params[0], params[1], params[2]),
                                        lstm_leaves(tape, params[3], params[4], params[5])};
    auto a = lstm_stack(layers, tape.leaf(X)).value();
    auto b = lstm_stack(layers, tape.leaf(Y)).value();
    for (std::size_t t = 0; t <= cut; ++t) {
      for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(a[t * 5 + j], b[t * 5 + j]);
    }
  }
}

// ---------------------------------------------------------------------------

TEST(Bahdanau, IdenticalStatesGiveUniformWeights) {
  std::mt19937_64 rng(9);
  Tensor H({1, 5, 3});
  Tensor h = random_tensor({3}, rng);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t j = 0; j < 3; ++j) H[t * 3 + j] = h[j];
  }
  Tape tape;
  BahdanauParams p{tape.leaf(random_tensor({3, 3}, rng)), tape.leaf(random_tensor({3, 3}, rng)), tape.leaf(random_tensor({3}, rng))};
  auto res = bahdanau_attend(p, tape.leaf(H));
  for (double a : res.weights.value().data()) EXPECT_NEAR(a, 0.2, 1e-15);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(res.context.value()[j], h[j], 1e-15);
}

TEST(Bahdanau, SingleStepReturnsThatState) {
  std::mt19937_64 rng(10);
  Tensor H = random_tensor({1, 1, 3}, rng);
  Tape tape;
  BahdanauParams p{tape.leaf(random_tensor({3, 3}, rng)), tape.leaf(random_tensor({3, 3}, rng)), tape.leaf(random_tensor({3}, rng))};
  auto res = bahdanau_attend(p, tape.leaf(H));
  EXPECT_EQ(res.weights.value()[0], 1.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(res.context.value()[j], H[j]);
}

TEST(Bahdanau, WeightsNormalisedAndContextInHull) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor H = random_tensor({1, 5, 3}, rng, -3, 3);
    Tape tape;
    BahdanauParams p{tape.leaf(random_tensor({3, 3}, rng)), tape.leaf(random_tensor({3, 3}, rng)),
                     tape.leaf(random_tensor({3}, rng, -3, 3))};
    auto res = bahdanau_attend(p, tape.leaf(H));
    double s = 0;
    for (double a : res.weights.value().data()) {
      EXPECT_GE(a, 0.0);
      s += a;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (std::size_t j = 0; j < 3; ++j) {
      double lo = 1e9, hi = -1e9;
      for (std::size_t t = 0; t < 5; ++t) {
        lo = std::min(lo, H[t * 3 + j]);
        hi = std::max(hi, H[t * 3 + j]);
      }
      EXPECT_GE(res.context.value()[j], lo - 1e-12);
      EXPECT_LE(res.context.value()[j], hi + 1e-12);
    }
  }
}

TEST(Bahdanau, GradientMatchesFiniteDifferences) {
  const double worst = fd_trials(
      [](std::mt19937_64& r) {
        return std::vector<Tensor>{random_tensor({2, 4, 3}, r), random_tensor({3, 3}, r), random_tensor({3, 3}, r),
                                   random_tensor({3}, r)};
      },
      [](Tape& t, const std::vector<Var>& v) {
        auto res = bahdanau_attend({v[1], v[2], v[3]}, v[0]);
        return ad::add(weighted_sum(t, res.context, 1), weighted_sum(t, res.weights, 2));
      },
      12);
  EXPECT_LT(worst, kTol);
}

// ---------------------------------------------------------------------------

namespace {

MultiHeadParams mha_leaves(Tape& tape, std::mt19937_64& rng, std::size_t d, std::size_t heads, bool project = true) {
  MultiHeadParams p{tape.leaf(random_tensor({d, d}, rng)), tape.leaf(random_tensor({d, d}, rng)),
                    tape.leaf(random_tensor({d, d}, rng)), std::nullopt, heads};
  if (project) p.Wo = tape.leaf(random_tensor({d, d}, rng));
  return p;
}

}  // namespace

TEST(MultiHead, SingleStepIsValueProjection) {
  std::mt19937_64 rng(13);
  Tape tape;
  auto p = mha_leaves(tape, rng, 4, 2);
  Tensor H = random_tensor({1, 1, 4}, rng);
  auto res = multi_head_self_attention(p, tape.leaf(H));
  for (const auto& w : res.weights) EXPECT_EQ(w.value()[0], 1.0);
  auto expected = ad::matmul(ad::matmul(tape.leaf(H), p.Wv), *p.Wo).value();
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(res.output.value()[j], expected[j], 1e-15);
}

TEST(MultiHead, HeadCountMustDivideWidth) {
  std::mt19937_64 rng(14);
  Tape tape;
  auto p = mha_leaves(tape, rng, 6, 4);
  try {
    multi_head_self_attention(p, tape.leaf(Tensor({1, 3, 6})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

TEST(MultiHead, PermutationEquivariant) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    auto p = mha_leaves(tape, rng, 4, 2);
    Tensor H = random_tensor({1, 5, 4}, rng);
    std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    Tensor Hp({1, 5, 4});
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t j = 0; j < 4; ++j) Hp[t * 4 + j] = H[perm[t] * 4 + j];
    }
    auto y = multi_head_self_attention(p, tape.leaf(H)).output.value();
    auto yp = multi_head_self_attention(p, tape.leaf(Hp)).output.value();
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(yp[t * 4 + j], y[perm[t] * 4 + j], 1e-12);
    }
  }
}

TEST(MultiHead, RowsAreNormalised) {
  std::mt19937_64 rng(16);
  Tape tape;
  auto p = mha_leaves(tape, rng, 8, 4);
  auto res = multi_head_self_attention(p, tape.leaf(random_tensor({3, 6, 8}, rng, -2, 2)));
  for (const auto& w : res.weights) {
    const Tensor& a = w.value();
    for (std::size_t r = 0; r < 3 * 6; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 6; ++c) {
        EXPECT_GE(a[r * 6 + c], 0.0);
        s += a[r * 6 + c];
      }
      EXPECT_NEAR(s, 1.0, 1e-10);
    }
  }
}

// The fused projections must equal running each head with its own
// [d, d_k] matrices.
TEST(MultiHead, FusedEqualsPerHeadDefinition) {
  std::mt19937_64 rng(17);
  const std::size_t d = 6, heads = 3, dk = 2, T = 4;
  Tape tape;
  auto p = mha_leaves(tape, rng, d, heads);
  Tensor H = random_tensor({1, T, d}, rng);
  auto fused = multi_head_self_attention(p, tape.leaf(H)).output.value();

  std::vector<double> cat(T * d);
  for (std::size_t h = 0; h < heads; ++h) {
    auto proj = [&](const Tensor& Wf) {
      std::vector<double> out(T * dk);
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < dk; ++c) {
          double s = 0;
          for (std::size_t i = 0; i < d; ++i) s += H[t * d + i] * Wf.at(i, h * dk + c);
          out[t * dk + c] = s;
        }
      }
      return out;
    };
    auto q = proj(p.Wq.value()), k = proj(p.Wk.value()), v = proj(p.Wv.value());
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> sc(T);
      double mx = -1e300;
      for (std::size_t u = 0; u < T; ++u) {
        double s = 0;
        for (std::size_t c = 0; c < dk; ++c) s += q[t * dk + c] * k[u * dk + c];
        sc[u] = s / std::sqrt(static_cast<double>(dk));
        mx = std::max(mx, sc[u]);
      }
      double z = 0;
      for (auto& s : sc) z += (s = std::exp(s - mx));
      for (std::size_t c = 0; c < dk; ++c) {
        double acc = 0;
        for (std::size_t u = 0; u < T; ++u) acc += sc[u] / z * v[u * dk + c];
        cat[t * d + h * dk + c] = acc;
      }
    }
  }
  const Tensor& Wo = p.Wo->value();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < d; ++i) s += cat[t * d + i] * Wo.at(i, j);
      EXPECT_NEAR(fused[t * d + j], s, 1e-12);
    }
  }
}

TEST(MultiHead, GradientMatchesFiniteDifferences) {
  for (bool project : {true, false}) {
    const double worst = fd_trials(
        [](std::mt19937_64& r) {
          return std::vector<Tensor>{random_tensor({2, 4, 4}, r), random_tensor({4, 4}, r), random_tensor({4, 4}, r),
                                     random_tensor({4, 4}, r), random_tensor({4, 4}, r)};
        },
        [project](Tape& t, const std::vector<Var>& v) {
          MultiHeadParams p{v[1], v[2], v[3], std::nullopt, 2};
          if (project) p.Wo = v[4];
          return weighted_sum(t, multi_head_self_attention(p, v[0]).output, 3);
        },
        18);
    EXPECT_LT(worst, kTol);
  }
}

// ---------------------------------------------------------------------------

TEST(CausalConv, UnitKernelIsAffinePlusRelu) {
  std::mt19937_64 rng(19);
  Tape tape;
  Tensor W = random_tensor({1, 2, 3}, rng), b = random_tensor({3}, rng), X = random_tensor({1, 4, 2}, rng);
  auto y = causal_conv1d({tape.leaf(W), tape.leaf(b)}, tape.leaf(X)).value();
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t o = 0; o < 3; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < 2; ++i) s += X[t * 2 + i] * W[i * 3 + o];
      EXPECT_NEAR(y[t * 3 + o], std::max(0.0, s), 1e-15);
    }
  }
}

TEST(CausalConv, ImpulseResponseSpansKernel) {
  // Positive weights and zero bias so every reached output is nonzero.
  std::mt19937_64 rng(20);
  const std::size_t K = 3, T = 10;
  Tape tape;
  Tensor W = random_tensor({K, 1, 2}, rng, 0.1, 1.0);
  Tensor X({1, T, 1});
  X[3] = 1.0;
  auto y = causal_conv1d({tape.leaf(W), tape.leaf(Tensor({2}))}, tape.leaf(X)).value();
  for (std::size_t t = 0; t < T; ++t) {
    const bool reached = t >= 3 && t <= 3 + K - 1;
    for (std::size_t o = 0; o < 2; ++o) EXPECT_EQ(y[t * 2 + o] != 0.0, reached) << "t=" << t;
  }
}

TEST(CausalConv, FutureInputsDoNotLeak) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    CausalConvParams p{tape.leaf(random_tensor({3, 2, 4}, rng)), tape.leaf(random_tensor({4}, rng))};
    Tensor X = random_tensor({1, 8, 2}, rng);
    Tensor Y = X;
    Y[7 * 2] += 3.0;
    Y[7 * 2 + 1] -= 2.0;
    auto a = causal_conv1d(p, tape.leaf(X)).value();
    auto b = causal_conv1d(p, tape.leaf(Y)).value();
    for (std::size_t i = 0; i < 7 * 4; ++i) EXPECT_EQ(a[i], b[i]);
  }
}

TEST(CausalConv, GradientMatchesFiniteDifferences) {
  const double worst = fd_trials(
      [](std::mt19937_64& r) {
        return std::vector<Tensor>{random_tensor({2, 6, 2}, r), random_tensor({3, 2, 4}, r), random_tensor({4}, r)};
      },
      [](Tape& t, const std::vector<Var>& v) { return weighted_sum(t, causal_conv1d({v[1], v[2]}, v[0]), 4); }, 22);
  EXPECT_LT(worst, kTol);
}

// ---------------------------------------------------------------------------

TEST(Dropout, IdentityCases) {
  Rng rng(1);
  Tape tape;
  std::mt19937_64 r(23);
  auto x = tape.leaf(random_tensor({4, 4}, r));
  EXPECT_EQ(dropout(x, 0.0, Mode::train, rng).value(), x.value());
  EXPECT_EQ(dropout(x, 0.0, Mode::eval, rng).value(), x.value());
  EXPECT_EQ(dropout(x, 0.9, Mode::eval, rng).value(), x.value());
}

TEST(Dropout, RateOutOfRange) {
  Rng rng(1);
  Tape tape;
  auto x = tape.leaf(Tensor({2}));
  for (double rate : {-0.1, 1.0, 1.5}) {
    try {
      dropout(x, rate, Mode::train, rng);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config);
    }
  }
}

TEST(Dropout, PreservesMeanInExpectation) {
  Rng rng(2024);
  Tape tape;
  std::mt19937_64 r(24);
  Tensor x = random_tensor({100000}, r, 0.5, 1.5);
  auto y = dropout(tape.leaf(x), 0.1, Mode::train, rng).value();
  double mx = 0, my = 0;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
    zeros += y[i] == 0.0;
  }
  EXPECT_NEAR(my / mx, 1.0, 0.01);
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.1, 0.01);
}

// ---------------------------------------------------------------------------

TEST(EncoderBlock, GradientMatchesFiniteDifferences) {
  const double worst = fd_trials(
      [](std::mt19937_64& r) {
        return std::vector<Tensor>{random_tensor({2, 3, 4}, r), random_tensor({4, 4}, r), random_tensor({4, 4}, r),
                                   random_tensor({4, 4}, r),    random_tensor({4, 4}, r), random_tensor({4}, r, 0.5, 1.5),
                                   random_tensor({4}, r),       random_tensor({4, 6}, r), random_tensor({6}, r),
                                   random_tensor({6, 4}, r),    random_tensor({4}, r),    random_tensor({4}, r, 0.5, 1.5),
                                   random_tensor({4}, r)};
      },
      [](Tape& t, const std::vector<Var>& v) {
        EncoderBlockParams p{{v[1], v[2], v[3], v[4], 2}, v[5], v[6], v[7], v[8], v[9], v[10], v[11], v[12]};
        return weighted_sum(t, encoder_block(p, v[0]), 5);
      },
      25);
  EXPECT_LT(worst, kTol);
}
