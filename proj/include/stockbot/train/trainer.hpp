#pragma once

// Mini-batch Adam on MSE with a chronological validation tail and early
// stopping. Fully determined by (seed, dataset, config).

#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stockbot/data/pipeline.hpp"
#include "stockbot/models/model.hpp"

namespace stockbot::train {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

inline constexpr const char* kModule = "trainer";

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch = 64;
  std::size_t max_epochs = 500;
  std::size_t patience = 20;
  double min_delta = 1e-6;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  bool record_wall_time = false;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::config, kModule, m); };
    if (!(lr > 0.0)) fail("lr must be positive");
    if (batch < 1) fail("batch must be at least 1");
    if (max_epochs < 1) fail("max_epochs must be at least 1");
    if (patience < 1) fail("patience must be at least 1");
    if (!(val_fraction > 0.0 && val_fraction < 0.5)) fail("val_fraction must lie in (0, 0.5)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0)) fail("invalid Adam constants");
  }
};

// ---------------------------------------------------------------------------
// Loss and optimizer

/// Mean squared error over all elements.
inline Var mse_loss(Var pred, Var target) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorKind::dimension, kModule,
                "mse_loss shape mismatch " + ad::shape_str(pred.shape()) + " vs " + ad::shape_str(target.shape()));
  }
  Var diff = ad::sub(pred, target);
  return ad::mean_all(ad::mul(diff, diff));
}

inline double mse(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw Error(ErrorKind::dimension, kModule, "mse needs equal, non-empty inputs");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

struct AdamState {
  models::ParamMap m, v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update. Throws on any non-finite gradient before
/// touching the parameters.
inline void adam_step(models::ParamMap& params, const models::ParamMap& grads, AdamState& st,
                      const TrainConfig& cfg) {
  for (const auto& [name, g] : grads) {
    for (double x : g.data()) {
      if (!std::isfinite(x)) throw Error(ErrorKind::non_finite, kModule, "non-finite gradient in '" + name + "'");
    }
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    if (g.shape() != p.shape()) throw Error(ErrorKind::dimension, kModule, "gradient shape mismatch for " + name);
    auto& m = st.m.try_emplace(name, p.shape(), 0.0).first->second;
    auto& v = st.v.try_emplace(name, p.shape(), 0.0).first->second;
    auto pd = p.data();
    auto md = m.data();
    auto vd = v.data();
    const auto gd = g.data();
    for (std::size_t i = 0; i < pd.size(); ++i) {
      md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gd[i];
      vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
      pd[i] -= cfg.lr * (md[i] / c1) / (std::sqrt(vd[i] / c2) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Fitting

struct EpochRecord {
  std::size_t epoch = 0;
  double train_mse = 0.0;  // mean batch loss (train mode)
  double val_mse = 0.0;    // eval mode
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double best_val_mse = std::numeric_limits<double>::infinity();
  double initial_train_mse = 0.0;  // eval mode, before the first step
  double final_train_mse = 0.0;    // eval mode, returned weights
  std::size_t train_windows = 0, val_windows = 0;
  std::optional<double> wall_seconds;
};

struct FitResult {
  models::ModelState state;
  TrainReport report;
};

/// Eval-mode MSE of `state` on windows [begin, end) of `ds`.
inline double evaluate(const models::ModelState& state, const data::WindowedDataset& ds, std::size_t begin,
                       std::size_t end) {
  const std::size_t n = end - begin;
  const Tensor pred = models::predict_batch(state, std::span(ds.inputs).subspan(begin * ds.k, n * ds.k), n);
  return mse(pred.data(), std::span(ds.targets).subspan(begin * ds.h, n * ds.h));
}

inline std::size_t validation_count(std::size_t windows, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(windows))));
}

using EpochCallback = std::function<void(const EpochRecord&)>;

inline FitResult fit(models::ModelState state, const data::WindowedDataset& ds, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {}) {
  cfg.validate();
  state.spec.validate();
  if (ds.tag != data::SplitTag::train) throw Error(ErrorKind::contract, kModule, "fit requires a training dataset");
  if (ds.k != state.spec.past_history || ds.h != state.spec.forward_look) {
    throw Error(ErrorKind::spec_mismatch, kModule, "dataset k/h do not match the model spec");
  }
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n_val = validation_count(ds.count, cfg.val_fraction);
  const std::size_t n_train = ds.count > n_val ? ds.count - n_val : 0;
  if ((n_train + cfg.batch - 1) / cfg.batch < 2) {
    throw Error(ErrorKind::insufficient_data, kModule,
                std::to_string(n_train) + " training windows after the validation carve-out give fewer than 2 batches");
  }

  TrainReport rep;
  rep.train_windows = n_train;
  rep.val_windows = n_val;
  rep.initial_train_mse = evaluate(state, ds, 0, n_train);

  const std::size_t k = ds.k, h = ds.h;
  nn::Rng master(cfg.seed);
  AdamState adam;
  models::ModelState best = state;
  std::size_t stale = 0;
  std::vector<std::size_t> order(n_train);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    nn::Rng epoch_rng = master.split(epoch);
    nn::Rng drop_rng = epoch_rng.split(1);
    std::iota(order.begin(), order.end(), 0);
    epoch_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_train; start += cfg.batch) {
      const std::size_t B = std::min(cfg.batch, n_train - start);
      std::vector<double> xs, ys;
      xs.reserve(B * k);
      ys.reserve(B * h);
      for (std::size_t b = 0; b < B; ++b) {
        const auto in = ds.input(order[start + b]);
        const auto tg = ds.target(order[start + b]);
        xs.insert(xs.end(), in.begin(), in.end());
        ys.insert(ys.end(), tg.begin(), tg.end());
      }
      Tape tape;
      models::BoundParams p(tape, state, true);
      Var X = tape.constant(Tensor(Shape{B, k, 1}, std::move(xs)));
      Var Y = tape.constant(Tensor(Shape{B, h}, std::move(ys)));
      const nn::DropoutCtx drop{state.spec.dropout, nn::Mode::train, &drop_rng};
      Var loss = mse_loss(models::forward_batch(state.spec, p, X, drop), Y);
      if (!std::isfinite(loss.value().item())) {
        throw Error(ErrorKind::non_finite, kModule, "non-finite loss in epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      models::ParamMap grads;
      for (const auto& [name, v] : p.all()) grads.emplace(name, tape.grad(v));
      adam_step(state.params, grads, adam, cfg);
      ++state.step_count;
      loss_sum += loss.value().item() * static_cast<double>(B);
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(n_train), evaluate(state, ds, n_train, ds.count)};
    rep.epochs.push_back(rec);
    rep.stopped_epoch = epoch;
    if (on_epoch) on_epoch(rec);
    if (rec.val_mse < rep.best_val_mse - cfg.min_delta) {
      rep.best_val_mse = rec.val_mse;
      rep.best_epoch = epoch;
      best = state;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  rep.final_train_mse = evaluate(best, ds, 0, n_train);
  if (cfg.record_wall_time) {
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  }
  return {std::move(best), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Report serialization

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch", c.batch},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"min_delta", c.min_delta},
          {"val_fraction", c.val_fraction},
          {"seed", c.seed},
          {"adam", {{"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}}}};
}

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json j{{"stopped_epoch", r.stopped_epoch},
                   {"best_epoch", r.best_epoch},
                   {"best_val_mse", r.best_val_mse},
                   {"initial_train_mse", r.initial_train_mse},
                   {"final_train_mse", r.final_train_mse},
                   {"train_windows", r.train_windows},
                   {"val_windows", r.val_windows}};
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : r.epochs) j["epochs"].push_back({{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}});
  if (r.wall_seconds) j["wall_seconds"] = *r.wall_seconds;
  return j;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

/// `epoch,train_mse,val_mse` with a header row, LF line endings.
inline std::string loss_curve_csv(const TrainReport& r) {
  std::string out = "epoch,train_mse,val_mse\n";
  for (const auto& e : r.epochs) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_mse) + "," + format_double(e.val_mse) + "\n";
  }
  return out;
}

}  // namespace stockbot::train
