#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stockbot/models/checkpoint.hpp"
#include "stockbot/models/model.hpp"
#include "support/model_gradcheck.hpp"

using namespace stockbot;
using namespace stockbot::models;
using stockbot::testing::random_tensor;
using stockbot::testing::tiny_spec;

namespace {

// Closed-form parameter counts per architecture.
std::size_t expected_count(const ModelSpec& s) {
  const std::size_t d = s.hidden, h = s.forward_look, ff = s.ff_dim, K = s.kernel_size, k = s.past_history;
  std::size_t stack = 0;
  for (std::size_t l = 0; l < s.lstm_layers; ++l) {
    const std::size_t din = l == 0 ? 1 : d;
    stack += 4 * (din * d + d * d + d);
  }
  const std::size_t head = d * h + h;
  const std::size_t encoder = d + d + s.encoder_layers * (4 * d * d + 2 * d + d * ff + ff + ff * d + d + 2 * d);
  switch (s.kind) {
    case ModelKind::lstm: return stack + head;
    case ModelKind::attention_lstm: return stack + 2 * d * d + d + head;
    case ModelKind::multihead_attention_lstm: return stack + 4 * d * d + head;
    case ModelKind::tcn: return K * d + d + K * d * d + d + head;
    case ModelKind::informer: return encoder + head;
    case ModelKind::transformer: return encoder + k * d + head;
    case ModelKind::tft: return stack + 3 * d * d + 2 * d + d * d + d + head;
  }
  return 0;
}

ModelSpec default_spec(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  return s;
}

}  // namespace

TEST(Build, LstmDefaultParameterCount) {
  const ModelSpec s = default_spec(ModelKind::lstm);
  const std::size_t d = 64;
  EXPECT_EQ(parameter_count(build(s)), 4 * (1 * d + d * d + d) + 4 * (d * d + d * d + d) + d * 1 + 1);
}

TEST(Build, ParameterCountsMatchClosedForm) {
  for (auto kind : kAllKinds) {
    for (std::size_t h : {1u, 10u}) {
      ModelSpec s = default_spec(kind);
      s.forward_look = h;
      EXPECT_EQ(parameter_count(build(s)), expected_count(s)) << kind_name(kind) << " h=" << h;
      ModelSpec t = tiny_spec(kind, h);
      EXPECT_EQ(parameter_count(build(t)), expected_count(t)) << kind_name(kind) << " tiny";
    }
  }
}

TEST(Build, SameSeedIsBitwiseIdentical) {
  for (auto kind : kAllKinds) {
    ModelSpec s = tiny_spec(kind, 1, 42);
    EXPECT_EQ(build(s).params, build(s).params) << kind_name(kind);
    ModelSpec other = s;
    other.seed = 43;
    EXPECT_NE(build(s).params, build(other).params);
  }
}

TEST(Build, TftHeadDimension) {
  ModelSpec s = default_spec(ModelKind::tft);
  EXPECT_EQ(s.head_dim(), 16u);
  const auto state = build(s);
  EXPECT_EQ(state.params.at("tft.mha.Wq").shape(), (Shape{64, 64}));
}

TEST(Build, ForgetBiasStartsAtOne) {
  const auto state = build(tiny_spec(ModelKind::lstm, 1));
  const Tensor& b = state.params.at("lstm0.b");
  for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(b[j], j < 8 ? 1.0 : 0.0);
}

TEST(Build, InvalidSpecsAreConfigErrors) {
  auto expect_config = [](ModelSpec s) {
    try {
      build(s);
      FAIL() << "expected config error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config);
    }
  };
  ModelSpec s = default_spec(ModelKind::informer);
  s.heads = 5;
  expect_config(s);
  s = default_spec(ModelKind::lstm);
  s.past_history = 1;
  expect_config(s);
  s.past_history = 10;
  s.forward_look = 0;
  expect_config(s);
  EXPECT_THROW(parse_kind("Autoformer"), Error);
}

TEST(Forward, OutputShapeForEveryKind) {
  std::mt19937_64 rng(1);
  for (auto kind : kAllKinds) {
    for (std::size_t h : {1u, 3u}) {
      const auto state = build(tiny_spec(kind, h));
      const Tensor y = forward(state, random_tensor({6, 1}, rng));
      EXPECT_EQ(y.shape(), Shape{h}) << kind_name(kind);
      for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Forward, WrongWindowLength) {
  const auto state = build(tiny_spec(ModelKind::tcn, 1));
  try {
    forward(state, Tensor(Shape{5, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension);
  }
}

TEST(Forward, EvalModeIsPure) {
  std::mt19937_64 rng(2);
  for (auto kind : kAllKinds) {
    ModelSpec s = tiny_spec(kind, 2);
    s.dropout = 0.5;
    const auto state = build(s);
    const Tensor x = random_tensor({6}, rng);
    EXPECT_EQ(forward(state, x), forward(state, x));
  }
}

TEST(Forward, TrainModeAppliesDropoutToRecurrentKinds) {
  std::mt19937_64 r(3);
  ModelSpec s = tiny_spec(ModelKind::lstm, 1);
  s.dropout = 0.5;
  const auto state = build(s);
  const Tensor x = random_tensor({6}, r);
  nn::Rng rng(9);
  EXPECT_NE(forward(state, x, Mode::train, &rng), forward(state, x));
}

TEST(Forward, BatchMatchesSingleWindows) {
  std::mt19937_64 rng(4);
  for (auto kind : kAllKinds) {
    const auto state = build(tiny_spec(kind, 2));
    const Tensor xs = random_tensor({3, 6}, rng);
    const Tensor batch = predict_batch(state, xs.data(), 3);
    for (std::size_t b = 0; b < 3; ++b) {
      Tensor x(Shape{6}, std::vector<double>(xs.data().begin() + b * 6, xs.data().begin() + (b + 1) * 6));
      const Tensor y = forward(state, x);
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(batch[b * 2 + j], y[j], 1e-12) << kind_name(kind);
    }
  }
}

// With the gate driven shut, the TFT output reduces to pooling the LSTM
// states straight into the head.
TEST(Architecture, TftGateClosureRemovesAttentionPath) {
  std::mt19937_64 rng(5);
  ModelState state = build(tiny_spec(ModelKind::tft, 3, 8));
  state.params["tft.gate.W"] = Tensor(Shape{8, 8}, 0.0);
  state.params["tft.gate.b"] = Tensor(Shape{8}, -50.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = random_tensor({6}, rng, -2, 2);
    const Tensor y = forward(state, x);

    Tape tape;
    BoundParams p(tape, state, false);
    std::vector<nn::LstmLayerParams> layers{{p["lstm0.W"], p["lstm0.U"], p["lstm0.b"]},
                                            {p["lstm1.W"], p["lstm1.U"], p["lstm1.b"]}};
    Var H2 = nn::lstm_stack(layers, tape.constant(x.reshaped(Shape{1, 6, 1})));
    Var direct = nn::linear(ad::mean(H2, 1), p["head.W"], p["head.b"]);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(y[j], direct.value()[j]);
  }
}

TEST(Architecture, TransformerWithZeroPositionsEqualsInformer) {
  std::mt19937_64 rng(6);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ModelSpec ts = tiny_spec(ModelKind::transformer, 2, seed);
    ModelSpec is = tiny_spec(ModelKind::informer, 2, seed);
    ModelState transformer = build(ts);
    const ModelState informer = build(is);
    const Tensor x = random_tensor({6}, rng);
    EXPECT_NE(forward(transformer, x), forward(informer, x));
    transformer.params["pos.P"] = Tensor(Shape{6, 8}, 0.0);
    EXPECT_EQ(forward(transformer, x), forward(informer, x));
  }
}

TEST(Gradients, EveryKindMatchesFiniteDifferences) {
  for (auto kind : kAllKinds) {
    for (std::size_t h : {1u, 3u}) {
      const double worst = stockbot::testing::model_gradient_error(tiny_spec(kind, h), 10, 100 + h);
      EXPECT_LT(worst, 1e-4) << kind_name(kind) << " h=" << h;
    }
  }
}

TEST(Checkpoint, RoundTripIsLossless) {
  for (auto kind : kAllKinds) {
    ModelState state = build(tiny_spec(kind, 3, 17));
    state.step_count = 1234;
    const ModelState back = deserialize_checkpoint(serialize_checkpoint(state));
    EXPECT_EQ(back.spec, state.spec);
    EXPECT_EQ(back.params, state.params);
    EXPECT_EQ(back.step_count, 1234u);
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string good = serialize_checkpoint(build(tiny_spec(ModelKind::lstm, 1)));
  EXPECT_THROW(deserialize_checkpoint("garbage"), Error);
  EXPECT_THROW(deserialize_checkpoint(good.substr(0, good.size() - 3)), Error);
  EXPECT_THROW(deserialize_checkpoint(good + "x"), Error);
  try {
    load_checkpoint("/nonexistent/ckpt.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input_not_found);
  }
}
