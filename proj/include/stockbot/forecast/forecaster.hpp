#pragma once

// Test-period rollouts in the two deployment modes. All values are in
// normalized (z-score) units.

#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stockbot/models/model.hpp"

namespace stockbot::forecast {

using ad::Shape;
using ad::Tensor;

inline constexpr const char* kModule = "forecaster";

enum class Mode { autoregressive, teacher_forcing };

inline std::string_view mode_name(Mode m) {
  return m == Mode::autoregressive ? "autoregressive" : "teacher_forcing";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "autoregressive" || s == "auto") return Mode::autoregressive;
  if (s == "teacher_forcing" || s == "tf") return Mode::teacher_forcing;
  throw Error(ErrorKind::config, kModule, "unknown forecast mode '" + std::string(s) + "'");
}

/// Anything mapping a length-k window to a block of h predictions.
template <class P>
concept Predictor = requires(const P& p, std::span<const double> w) {
  { p(w) } -> std::convertible_to<std::vector<double>>;
};

/// Adapts a trained model (eval mode) to the Predictor interface.
struct ModelPredictor {
  const models::ModelState* state;

  std::vector<double> operator()(std::span<const double> window) const {
    const Tensor y = models::forward(*state, Tensor(Shape{window.size()}, {window.begin(), window.end()}));
    return {y.data().begin(), y.data().end()};
  }
};

inline double rmse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw Error(ErrorKind::dimension, kModule,
                "rmse needs equal non-empty inputs (" + std::to_string(pred.size()) + " vs " +
                    std::to_string(target.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

struct ForecastRun {
  Mode mode = Mode::teacher_forcing;
  std::size_t h = 1;
  std::size_t start = 0;             // series index of predictions[0]
  std::vector<double> predictions;   // normalized, aligned to start, start+1, ...
  std::vector<double> targets;       // normalized truth at the same indices
  std::size_t emissions = 0;         // number of predicted blocks
  bool diverged = false;
  std::optional<std::size_t> diverged_at;  // series index of first non-finite prediction
  double rmse = 0.0;                 // over the finite prefix; NaN if empty

  std::size_t index(std::size_t i) const { return start + i; }
  /// True when prediction i opens a new emitted block.
  bool block_start(std::size_t i) const { return i % h == 0; }
};

namespace detail {

inline void check_bounds(std::size_t size, std::size_t start, std::size_t k, std::size_t h) {
  if (k < 1 || h < 1) throw Error(ErrorKind::config, kModule, "k and h must be positive");
  if (start < k) throw Error(ErrorKind::insufficient_data, kModule, "test start precedes a full history window");
  if (start >= size) throw Error(ErrorKind::insufficient_data, kModule, "test start lies beyond the series end");
}

template <Predictor P>
std::vector<double> predict_block(const P& predict, std::span<const double> window, std::size_t h) {
  std::vector<double> block = predict(window);
  if (block.size() != h) {
    throw Error(ErrorKind::dimension, kModule,
                "predictor returned " + std::to_string(block.size()) + " values, expected " + std::to_string(h));
  }
  return block;
}

/// Appends `block` (truncated to `room`) and reports whether a non-finite
/// value was met; the non-finite tail is dropped.
inline bool append_finite(std::vector<double>& out, const std::vector<double>& block, std::size_t room) {
  for (std::size_t i = 0; i < std::min(room, block.size()); ++i) {
    if (!std::isfinite(block[i])) return false;
    out.push_back(block[i]);
  }
  return true;
}

inline ForecastRun finish(ForecastRun run, std::span<const double> z, bool finite) {
  run.diverged = !finite;
  if (!finite) run.diverged_at = run.start + run.predictions.size();
  run.targets.assign(z.begin() + run.start, z.begin() + run.start + run.predictions.size());
  run.rmse = run.predictions.empty() ? std::nan("") : rmse(run.predictions, run.targets);
  return run;
}

}  // namespace detail

/// Every h-th test index gets the true window z[t-k, t) and emits a block of
/// h predictions; the tail block is truncated at the series end.
template <Predictor P>
ForecastRun rollout_teacher_forcing(const P& predict, std::span<const double> z, std::size_t start, std::size_t k,
                                    std::size_t h) {
  detail::check_bounds(z.size(), start, k, h);
  ForecastRun run{Mode::teacher_forcing, h, start};
  bool finite = true;
  for (std::size_t t = start; t < z.size() && finite; t += h) {
    const auto block = detail::predict_block(predict, z.subspan(t - k, k), h);
    ++run.emissions;
    finite = detail::append_finite(run.predictions, block, z.size() - t);
  }
  return detail::finish(std::move(run), z, finite);
}

/// Predictions from the true history z[start-k, start) alone; each emitted
/// block is fed back into the window. `steps` values are produced.
template <Predictor P>
std::vector<double> autoregressive_path(const P& predict, std::span<const double> history, std::size_t steps,
                                        std::size_t h, bool* finite = nullptr) {
  std::vector<double> window(history.begin(), history.end());
  const std::size_t k = window.size();
  std::vector<double> out;
  bool ok = true;
  while (out.size() < steps && ok) {
    const auto block = detail::predict_block(predict, window, h);
    ok = detail::append_finite(out, block, steps - out.size());
    window.insert(window.end(), block.begin(), block.end());
    window.erase(window.begin(), window.end() - static_cast<std::ptrdiff_t>(k));
  }
  if (finite) *finite = ok;
  return out;
}

template <Predictor P>
ForecastRun rollout_autoregressive(const P& predict, std::span<const double> z, std::size_t start, std::size_t k,
                                   std::size_t h) {
  detail::check_bounds(z.size(), start, k, h);
  ForecastRun run{Mode::autoregressive, h, start};
  bool finite = true;
  run.predictions = autoregressive_path(predict, z.subspan(start - k, k), z.size() - start, h, &finite);
  run.emissions = (run.predictions.size() + (finite ? h - 1 : h)) / h;
  return detail::finish(std::move(run), z, finite);
}

template <Predictor P>
ForecastRun rollout(Mode mode, const P& predict, std::span<const double> z, std::size_t start, std::size_t k,
                    std::size_t h) {
  return mode == Mode::autoregressive ? rollout_autoregressive(predict, z, start, k, h)
                                      : rollout_teacher_forcing(predict, z, start, k, h);
}

}  // namespace stockbot::forecast
