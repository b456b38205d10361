#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stockbot/models/model_spec.hpp"
#include "stockbot/nn/layers.hpp"

namespace stockbot::models {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using nn::Mode;

using ParamMap = std::map<std::string, Tensor>;

/// Learned parameters of one architecture. Names and shapes are a pure
/// function of the spec.
struct ModelState {
  ModelSpec spec;
  ParamMap params;
  std::uint64_t step_count = 0;
};

inline std::size_t parameter_count(const ModelState& state) {
  std::size_t n = 0;
  for (const auto& [name, t] : state.params) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------
// Construction

namespace detail {

inline std::string lstm_name(std::size_t layer, const char* field) { return "lstm" + std::to_string(layer) + "." + field; }
inline std::string enc_name(std::size_t layer, const char* field) { return "enc" + std::to_string(layer) + "." + field; }

inline void add_lstm_stack(ParamMap& p, const ModelSpec& s, nn::Rng& rng) {
  const std::size_t d = s.hidden;
  for (std::size_t l = 0; l < s.lstm_layers; ++l) {
    const std::size_t din = l == 0 ? 1 : d;
    p[lstm_name(l, "W")] = nn::glorot_blocks(din, 4 * d, 4, rng);
    p[lstm_name(l, "U")] = nn::glorot_blocks(d, 4 * d, 4, rng);
    Tensor b(Shape{4 * d});
    for (std::size_t j = 0; j < d; ++j) b[static_cast<std::size_t>(nn::Gate::forget) * d + j] = 1.0;
    p[lstm_name(l, "b")] = b;
  }
}

inline void add_mha(ParamMap& p, const std::string& prefix, const ModelSpec& s, bool project, nn::Rng& rng) {
  const std::size_t d = s.hidden;
  p[prefix + "Wq"] = nn::glorot_blocks(d, d, s.heads, rng);
  p[prefix + "Wk"] = nn::glorot_blocks(d, d, s.heads, rng);
  p[prefix + "Wv"] = nn::glorot_blocks(d, d, s.heads, rng);
  if (project) p[prefix + "Wo"] = nn::glorot(d, d, rng);
}

inline void add_layernorm(ParamMap& p, const std::string& prefix, std::size_t d) {
  p[prefix + "gain"] = Tensor(Shape{d}, 1.0);
  p[prefix + "bias"] = Tensor(Shape{d}, 0.0);
}

inline void add_head(ParamMap& p, const ModelSpec& s, nn::Rng& rng) {
  p["head.W"] = nn::glorot(s.hidden, s.forward_look, rng);
  p["head.b"] = Tensor(Shape{s.forward_look});
}

}  // namespace detail

/// Draws a fresh parameter set. Deterministic in (spec, rng state); the
/// Transformer's positional table is drawn last so it shares every other
/// parameter with an Informer of the same seed.
inline ModelState build(const ModelSpec& spec, nn::Rng& rng) {
  spec.validate();
  ModelState state{spec, {}, 0};
  ParamMap& p = state.params;
  const std::size_t d = spec.hidden;
  switch (spec.kind) {
    case ModelKind::lstm:
      detail::add_lstm_stack(p, spec, rng);
      break;
    case ModelKind::attention_lstm:
      detail::add_lstm_stack(p, spec, rng);
      p["attn.W1"] = nn::glorot(d, d, rng);
      p["attn.W2"] = nn::glorot(d, d, rng);
      p["attn.v"] = nn::glorot(d, 1, rng).reshaped(Shape{d});
      break;
    case ModelKind::multihead_attention_lstm:
      detail::add_lstm_stack(p, spec, rng);
      detail::add_mha(p, "mha.", spec, true, rng);
      break;
    case ModelKind::tcn:
      for (std::size_t l = 0; l < 2; ++l) {
        const std::size_t din = l == 0 ? 1 : d;
        const std::string prefix = "conv" + std::to_string(l + 1) + ".";
        Tensor W(Shape{spec.kernel_size, din, d});
        for (std::size_t k = 0; k < spec.kernel_size; ++k) nn::glorot_fill(W, k * din, (k + 1) * din, 0, d, din, d, rng);
        p[prefix + "W"] = W;
        p[prefix + "b"] = Tensor(Shape{d});
      }
      break;
    case ModelKind::informer:
    case ModelKind::transformer:
      p["embed.W"] = nn::glorot(1, d, rng);
      p["embed.b"] = Tensor(Shape{d});
      for (std::size_t l = 0; l < spec.encoder_layers; ++l) {
        detail::add_mha(p, detail::enc_name(l, "mha."), spec, true, rng);
        detail::add_layernorm(p, detail::enc_name(l, "ln1."), d);
        p[detail::enc_name(l, "ff.W1")] = nn::glorot(d, spec.ff_dim, rng);
        p[detail::enc_name(l, "ff.b1")] = Tensor(Shape{spec.ff_dim});
        p[detail::enc_name(l, "ff.W2")] = nn::glorot(spec.ff_dim, d, rng);
        p[detail::enc_name(l, "ff.b2")] = Tensor(Shape{d});
        detail::add_layernorm(p, detail::enc_name(l, "ln2."), d);
      }
      break;
    case ModelKind::tft:
      detail::add_lstm_stack(p, spec, rng);
      detail::add_mha(p, "tft.mha.", spec, false, rng);
      detail::add_layernorm(p, "tft.ln.", d);
      p["tft.gate.W"] = nn::glorot(d, d, rng);
      p["tft.gate.b"] = Tensor(Shape{d});
      break;
  }
  detail::add_head(p, spec, rng);
  if (spec.kind == ModelKind::transformer) p["pos.P"] = nn::glorot(spec.past_history, d, rng);
  return state;
}

inline ModelState build(const ModelSpec& spec) {
  nn::Rng rng(spec.seed);
  return build(spec, rng);
}

// ---------------------------------------------------------------------------
// Forward pass

/// Parameters of a state recorded as leaves on one tape.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ModelState& state, bool requires_grad) {
    for (const auto& [name, t] : state.params) vars_.emplace(name, tape.leaf(t, requires_grad));
  }

  explicit BoundParams(std::map<std::string, Var> vars) : vars_(std::move(vars)) {}

  Var operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw Error(ErrorKind::config, "model-zoo", "missing parameter '" + name + "'");
    return it->second;
  }

  const std::map<std::string, Var>& all() const { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

namespace detail {

inline std::vector<nn::LstmLayerParams> lstm_layers(const ModelSpec& s, const BoundParams& p) {
  std::vector<nn::LstmLayerParams> layers;
  for (std::size_t l = 0; l < s.lstm_layers; ++l) {
    layers.push_back({p[lstm_name(l, "W")], p[lstm_name(l, "U")], p[lstm_name(l, "b")]});
  }
  return layers;
}

inline nn::MultiHeadParams mha(const ModelSpec& s, const BoundParams& p, const std::string& prefix, bool project) {
  nn::MultiHeadParams m{p[prefix + "Wq"], p[prefix + "Wk"], p[prefix + "Wv"], std::nullopt, s.heads};
  if (project) m.Wo = p[prefix + "Wo"];
  return m;
}

inline Var head(const BoundParams& p, Var pooled) { return nn::linear(pooled, p["head.W"], p["head.b"]); }

}  // namespace detail

/// Batched forward: X[B, k, 1] (z-scored) -> [B, h].
inline Var forward_batch(const ModelSpec& spec, const BoundParams& p, Var X, const nn::DropoutCtx& drop = {}) {
  if (X.rank() != 3 || X.dim(1) != spec.past_history || X.dim(2) != 1) {
    throw Error(ErrorKind::dimension, "model-zoo",
                "expected input [B x " + std::to_string(spec.past_history) + " x 1], got " + ad::shape_str(X.shape()));
  }
  const std::size_t B = X.dim(0), T = X.dim(1);
  switch (spec.kind) {
    case ModelKind::lstm: {
      Var H = nn::lstm_stack(detail::lstm_layers(spec, p), X, drop);
      return detail::head(p, ad::select(H, 1, T - 1));
    }
    case ModelKind::attention_lstm: {
      Var H = nn::lstm_stack(detail::lstm_layers(spec, p), X, drop);
      auto att = nn::bahdanau_attend({p["attn.W1"], p["attn.W2"], p["attn.v"]}, H);
      return detail::head(p, att.context);
    }
    case ModelKind::multihead_attention_lstm: {
      Var H = nn::lstm_stack(detail::lstm_layers(spec, p), X, drop);
      Var A = nn::multi_head_self_attention(detail::mha(spec, p, "mha.", true), H).output;
      return detail::head(p, ad::mean(A, 1));
    }
    case ModelKind::tcn: {
      Var H1 = nn::causal_conv1d({p["conv1.W"], p["conv1.b"]}, X);
      Var H2 = nn::causal_conv1d({p["conv2.W"], p["conv2.b"]}, H1);
      return detail::head(p, ad::mean(H2, 1));
    }
    case ModelKind::informer:
    case ModelKind::transformer: {
      Var H = nn::linear(X, p["embed.W"], p["embed.b"]);
      if (spec.kind == ModelKind::transformer) H = ad::add(H, ad::expand(p["pos.P"], 0, B));
      for (std::size_t l = 0; l < spec.encoder_layers; ++l) {
        using detail::enc_name;
        nn::EncoderBlockParams blk{detail::mha(spec, p, enc_name(l, "mha."), true),
                                   p[enc_name(l, "ln1.gain")],
                                   p[enc_name(l, "ln1.bias")],
                                   p[enc_name(l, "ff.W1")],
                                   p[enc_name(l, "ff.b1")],
                                   p[enc_name(l, "ff.W2")],
                                   p[enc_name(l, "ff.b2")],
                                   p[enc_name(l, "ln2.gain")],
                                   p[enc_name(l, "ln2.bias")]};
        H = nn::encoder_block(blk, H, drop);
      }
      return detail::head(p, ad::mean(H, 1));
    }
    case ModelKind::tft: {
      Var H2 = nn::lstm_stack(detail::lstm_layers(spec, p), X, drop);
      Var cat = nn::multi_head_self_attention(detail::mha(spec, p, "tft.mha.", false), H2).output;
      Var A = ad::layernorm(cat, p["tft.ln.gain"], p["tft.ln.bias"]);
      Var G = ad::sigmoid(nn::linear(A, p["tft.gate.W"], p["tft.gate.b"]));
      Var H = ad::add(H2, ad::mul(G, A));
      return detail::head(p, ad::mean(H, 1));
    }
  }
  throw Error(ErrorKind::config, "model-zoo", "unhandled model kind");
}

/// Predicts [B, h] for B windows of length k given as a flat row-major span.
inline Tensor predict_batch(const ModelState& state, std::span<const double> windows, std::size_t count) {
  const std::size_t k = state.spec.past_history;
  if (windows.size() != count * k) {
    throw Error(ErrorKind::dimension, "model-zoo",
                "expected " + std::to_string(count) + " windows of length " + std::to_string(k));
  }
  // Chunked so the tape's working set stays small.
  constexpr std::size_t kChunk = 128;
  const std::size_t h = state.spec.forward_look;
  std::vector<double> out;
  out.reserve(count * h);
  for (std::size_t lo = 0; lo < count; lo += kChunk) {
    const std::size_t n = std::min(kChunk, count - lo);
    const auto src = windows.subspan(lo * k, n * k);
    Tape tape;
    BoundParams p(tape, state, false);
    Var X = tape.constant(Tensor(Shape{n, k, 1}, std::vector<double>(src.begin(), src.end())));
    const Tensor& y = forward_batch(state.spec, p, X).value();
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return Tensor(Shape{count, h}, std::move(out));
}

/// Single-window forward: X of shape [k, 1] or [k] -> [h].
inline Tensor forward(const ModelState& state, const Tensor& X, Mode mode = Mode::eval, nn::Rng* rng = nullptr) {
  const std::size_t k = state.spec.past_history;
  if (X.size() != k || X.rank() > 2 || (X.rank() == 2 && X.dim(1) != 1)) {
    throw Error(ErrorKind::dimension, "model-zoo",
                "window shape " + ad::shape_str(X.shape()) + " does not match past_history " + std::to_string(k));
  }
  Tape tape;
  BoundParams p(tape, state, false);
  nn::DropoutCtx drop{state.spec.dropout, mode, rng};
  Var out = forward_batch(state.spec, p, tape.constant(X.reshaped(Shape{1, k, 1})), drop);
  return out.value().reshaped(Shape{state.spec.forward_look});
}

}  // namespace stockbot::models
