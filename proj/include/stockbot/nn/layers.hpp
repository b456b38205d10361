#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "stockbot/autodiff/ops.hpp"
#include "stockbot/nn/rng.hpp"

namespace stockbot::nn {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Dropout

/// Inverted dropout. Eval mode and rate 0 are the identity (no node recorded).
inline Var dropout(Var x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw Error(ErrorKind::config, "nn-layers", "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return x;
  Tensor mask(x.shape());
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  return ad::mul(x, x.tape->constant(std::move(mask)));
}

/// Dropout settings threaded through a forward pass.
struct DropoutCtx {
  double rate = 0.0;
  Mode mode = Mode::eval;
  Rng* rng = nullptr;

  Var operator()(Var x) const {
    if (mode == Mode::eval || rate == 0.0 || rng == nullptr) return x;
    return dropout(x, rate, mode, *rng);
  }
};

inline Var linear(Var x, Var w, Var b) { return ad::add_bias(ad::matmul(x, w), b); }

// ---------------------------------------------------------------------------
// LSTM

/// Gate blocks of the fused LSTM matrices, in column order.
enum class Gate : std::size_t { forget = 0, input = 1, output = 2, candidate = 3 };

/// One LSTM layer. W: [d_in, 4d], U: [d, 4d], b: [4d]; column block g holds
/// the W_g / U_g / b_g of the gate equations.
struct LstmLayerParams {
  Var W;
  Var U;
  Var b;

  std::size_t input_dim() const { return W.dim(0); }
  std::size_t hidden_dim() const { return U.dim(0); }

  void validate() const {
    const std::size_t d = hidden_dim();
    if (W.rank() != 2 || U.shape() != Shape{d, 4 * d} || W.dim(1) != 4 * d || b.value().shape() != Shape{4 * d}) {
      throw Error(ErrorKind::dimension, "nn-layers",
                  "inconsistent LSTM parameter shapes W" + ad::shape_str(W.shape()) + " U" + ad::shape_str(U.shape()) +
                      " b" + ad::shape_str(b.shape()));
    }
  }
};

struct LstmState {
  Var h;
  Var c;
};

namespace detail {

// `xw` is the precomputed input projection x_t W for this step.
inline LstmState lstm_step(const LstmLayerParams& p, Var xw, Var h_prev, Var c_prev) {
  const std::size_t d = p.hidden_dim();
  const std::size_t last = xw.rank() - 1;
  Var pre = ad::add_bias(ad::add(xw, ad::matmul(h_prev, p.U)), p.b);
  auto block = [&](Gate g) {
    const auto i = static_cast<std::size_t>(g);
    return ad::slice(pre, last, i * d, (i + 1) * d);
  };
  Var f = ad::sigmoid(block(Gate::forget));
  Var in = ad::sigmoid(block(Gate::input));
  Var o = ad::sigmoid(block(Gate::output));
  Var cand = ad::tanh(block(Gate::candidate));
  Var c = ad::add(ad::mul(f, c_prev), ad::mul(in, cand));
  Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

}  // namespace detail

/// f = σ(W_f x + U_f h + b_f), i, o likewise, c̃ = tanh(...),
/// c = f ⊙ c_prev + i ⊙ c̃, h = o ⊙ tanh(c). Leading batch axes are allowed.
inline LstmState lstm_cell(const LstmLayerParams& p, Var x_t, Var h_prev, Var c_prev) {
  p.validate();
  const std::size_t d = p.hidden_dim();
  if (x_t.value().shape().back() != p.input_dim() || h_prev.shape().back() != d || c_prev.shape() != h_prev.shape()) {
    throw Error(ErrorKind::dimension, "nn-layers",
                "lstm_cell input " + ad::shape_str(x_t.shape()) + " / state " + ad::shape_str(h_prev.shape()) +
                    " does not match layer [" + std::to_string(p.input_dim()) + "->" + std::to_string(d) + "]");
  }
  return detail::lstm_step(p, ad::matmul(x_t, p.W), h_prev, c_prev);
}

/// Runs a stack of LSTM layers over X[B, T, d_in] from zero state and returns
/// the top layer's hidden sequence [B, T, d]. Dropout (if any) is applied to
/// each layer's output sequence.
inline Var lstm_stack(const std::vector<LstmLayerParams>& layers, Var X, const DropoutCtx& drop = {}) {
  if (layers.empty()) throw Error(ErrorKind::config, "nn-layers", "lstm_stack needs at least one layer");
  if (X.rank() != 3) throw Error(ErrorKind::dimension, "nn-layers", "lstm_stack expects [B, T, d_in], got " + ad::shape_str(X.shape()));
  Tape& tape = *X.tape;
  const std::size_t B = X.dim(0), T = X.dim(1);
  Var seq = X;
  for (const auto& layer : layers) {
    layer.validate();
    if (seq.dim(2) != layer.input_dim()) {
      throw Error(ErrorKind::dimension, "nn-layers", "lstm layer expects input width " + std::to_string(layer.input_dim()));
    }
    const std::size_t d = layer.hidden_dim();
    Var xw = ad::matmul(seq, layer.W);  // [B, T, 4d]
    LstmState st{tape.constant(Tensor(Shape{B, d})), tape.constant(Tensor(Shape{B, d}))};
    std::vector<Var> hs;
    hs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      st = detail::lstm_step(layer, ad::select(xw, 1, t), st.h, st.c);
      hs.push_back(st.h);
    }
    seq = drop(ad::stack(hs, 1));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// Bahdanau attention

/// W1, W2: [d, d_a]; v: [d_a].
struct BahdanauParams {
  Var W1;
  Var W2;
  Var v;
};

struct Attended {
  Var context;  // [B, d]
  Var weights;  // [B, T]
};

/// q = mean_t h_t; e_t = vᵀ tanh(W1 h_t + W2 q); α = softmax(e); c = Σ α_t h_t.
inline Attended bahdanau_attend(const BahdanauParams& p, Var H) {
  if (H.rank() != 3) throw Error(ErrorKind::dimension, "nn-layers", "bahdanau_attend expects [B, T, d]");
  const std::size_t B = H.dim(0), T = H.dim(1), d = H.dim(2);
  const std::size_t da = p.v.dim(0);
  if (p.W1.shape() != Shape{d, da} || p.W2.shape() != Shape{d, da}) {
    throw Error(ErrorKind::dimension, "nn-layers", "bahdanau projection shapes do not match hidden width");
  }
  Var q = ad::mean(H, 1);                                         // [B, d]
  Var keys = ad::matmul(H, p.W1);                                 // [B, T, da]
  Var query = ad::expand(ad::matmul(q, p.W2), 1, T);              // [B, T, da]
  Var scores = ad::matmul(ad::tanh(ad::add(keys, query)), ad::reshape(p.v, {da, 1}));  // [B, T, 1]
  Var alpha = ad::softmax(ad::reshape(scores, {B, T}), 1);
  Var context = ad::reshape(ad::bmm(ad::reshape(alpha, {B, 1, T}), H), {B, d});
  return {context, alpha};
}

// ---------------------------------------------------------------------------
// Multi-head self-attention

/// Wq, Wk, Wv: [d, d] holding the per-head [d, d_k] matrices as consecutive
/// column blocks. Wo: [d, d] output projection, absent when the caller
/// normalises the concatenated heads directly.
struct MultiHeadParams {
  Var Wq;
  Var Wk;
  Var Wv;
  std::optional<Var> Wo;
  std::size_t heads = 1;
};

struct SelfAttended {
  Var output;                // [B, T, d]
  std::vector<Var> weights;  // per head [B, T, T], rows sum to one
};

/// softmax(Q_h K_hᵀ / sqrt(d_k)) V_h per head, concatenated, then projected by
/// Wo when present. No causal mask.
inline SelfAttended multi_head_self_attention(const MultiHeadParams& p, Var H) {
  if (H.rank() != 3) throw Error(ErrorKind::dimension, "nn-layers", "multi_head_self_attention expects [B, T, d]");
  const std::size_t d = H.dim(2);
  if (p.heads == 0 || d % p.heads != 0) {
    throw Error(ErrorKind::config, "nn-layers",
                "head count " + std::to_string(p.heads) + " does not divide width " + std::to_string(d));
  }
  const std::size_t dk = d / p.heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  Var Q = ad::matmul(H, p.Wq);
  Var K = ad::matmul(H, p.Wk);
  Var V = ad::matmul(H, p.Wv);
  SelfAttended out{H, {}};
  std::vector<Var> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    Var qh = ad::slice(Q, 2, h * dk, (h + 1) * dk);
    Var kh = ad::slice(K, 2, h * dk, (h + 1) * dk);
    Var vh = ad::slice(V, 2, h * dk, (h + 1) * dk);
    Var a = ad::softmax(ad::scale(ad::bmm(qh, kh, true), inv_sqrt_dk), 2);
    out.weights.push_back(a);
    heads.push_back(ad::bmm(a, vh));
  }
  Var cat = p.heads == 1 ? heads.front() : ad::concat(heads, 2);
  out.output = p.Wo ? ad::matmul(cat, *p.Wo) : cat;
  return out;
}

// ---------------------------------------------------------------------------
// Causal convolution

/// W: [K, d_in, d_out] (tap k multiplies x_{t-k}); b: [d_out].
struct CausalConvParams {
  Var W;
  Var b;

  std::size_t kernel_size() const { return W.dim(0); }
};

/// H_t = ReLU(Σ_k W_k x_{t-k} + b) with x_{t-k} = 0 before the window start.
inline Var causal_conv1d(const CausalConvParams& p, Var X) {
  if (p.W.rank() != 3 || X.rank() != 3 || X.dim(2) != p.W.dim(1)) {
    throw Error(ErrorKind::dimension, "nn-layers",
                "causal_conv1d input " + ad::shape_str(X.shape()) + " vs kernel " + ad::shape_str(p.W.shape()));
  }
  const std::size_t K = p.kernel_size();
  Var acc = ad::matmul(X, ad::select(p.W, 0, 0));
  for (std::size_t k = 1; k < K && k < X.dim(1); ++k) {
    acc = ad::add(acc, ad::matmul(ad::shift(X, 1, k), ad::select(p.W, 0, k)));
  }
  return ad::relu(ad::add_bias(acc, p.b));
}

// ---------------------------------------------------------------------------
// Encoder block

struct EncoderBlockParams {
  MultiHeadParams attn;
  Var ln1_gain, ln1_bias;
  Var ff_W1, ff_b1, ff_W2, ff_b2;
  Var ln2_gain, ln2_bias;
};

/// H̃ = LN(H + MHA(H)); out = LN(H̃ + FFN(H̃)), FFN = GELU(H̃ W1 + b1) W2 + b2.
inline Var encoder_block(const EncoderBlockParams& p, Var H, const DropoutCtx& drop = {}) {
  Var mid = ad::layernorm(ad::add(H, multi_head_self_attention(p.attn, H).output), p.ln1_gain, p.ln1_bias);
  Var ff = linear(ad::gelu(linear(mid, p.ff_W1, p.ff_b1)), p.ff_W2, p.ff_b2);
  return ad::layernorm(ad::add(mid, drop(ff)), p.ln2_gain, p.ln2_bias);
}

}  // namespace stockbot::nn
