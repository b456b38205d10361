#pragma once

// The four CLI commands as library functions. Each writes its artifacts
// into the run directory and returns a JSON summary for stdout.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stockbot/app/config.hpp"
#include "stockbot/app/io.hpp"
#include "stockbot/app/svg.hpp"
#include "stockbot/bot/engine.hpp"
#include "stockbot/data/pipeline.hpp"
#include "stockbot/forecast/forecaster.hpp"
#include "stockbot/models/checkpoint.hpp"
#include "stockbot/train/trainer.hpp"

namespace stockbot::app {

namespace fs = std::filesystem;

/// Price series restricted to the configured date span.
inline data::PriceSeries load_series(const RunConfig& cfg) {
  auto raw = data::ingest_csv(cfg.csv);
  auto s = data::filter_dates(raw, cfg.date_from, cfg.date_to);
  s.ticker = cfg.effective_ticker();
  const std::size_t need = cfg.model.past_history + cfg.model.forward_look + 2;
  if (s.size() < need) {
    throw Error(ErrorKind::insufficient_data, data::kModule,
                std::to_string(s.size()) + " rows in " + cfg.date_from + ".." + cfg.date_to + ", need at least " +
                    std::to_string(need));
  }
  return s;
}

inline nlohmann::json data_summary(const data::PriceSeries& s, const data::Prepared& p) {
  return {{"ticker", s.ticker},
          {"rows", s.size()},
          {"first_date", s.dates.front()},
          {"last_date", s.dates.back()},
          {"train_rows", p.split.train_size()},
          {"test_rows", p.split.test_size()},
          {"test_start_date", s.dates[p.split.boundary]},
          {"norm", {{"mean", p.stats.mean}, {"std", p.stats.std}}}};
}

// ---------------------------------------------------------------------------
// train

inline nlohmann::json cmd_train(const RunConfig& cfg) {
  validate(cfg);
  const auto series = load_series(cfg);
  const auto prep = data::prepare(series.close, cfg.model.past_history, cfg.model.forward_look, cfg.split);
  const fs::path dir = output_dir(cfg);

  auto fitted = train::fit(models::build(cfg.model), prep.train, cfg.train);
  const std::size_t n_val = fitted.report.val_windows;
  const double reeval = train::evaluate(fitted.state, prep.train, prep.train.count - n_val, prep.train.count);

  models::save_checkpoint(fitted.state, (fs::create_directories(dir), dir / "checkpoint.bin"));
  nlohmann::json report{{"config", to_json(cfg)},
                        {"data", data_summary(series, prep)},
                        {"parameters", models::parameter_count(fitted.state)},
                        {"training", train::to_json(fitted.report)},
                        {"checkpoint_val_mse", reeval}};
  write_json(dir / "train_report.json", report);
  write_file(dir / "loss_curve.csv", train::loss_curve_csv(fitted.report));
  return {{"command", "train"},
          {"out", dir.string()},
          {"best_epoch", fitted.report.best_epoch},
          {"stopped_epoch", fitted.report.stopped_epoch},
          {"best_val_mse", fitted.report.best_val_mse}};
}

// ---------------------------------------------------------------------------
// forecast

inline void check_spec(const models::ModelSpec& ckpt, const models::ModelSpec& want) {
  auto mismatch = [](const std::string& what, const std::string& a, const std::string& b) {
    throw Error(ErrorKind::spec_mismatch, "cli-app", "checkpoint " + what + " " + a + " differs from config " + b);
  };
  if (ckpt.kind != want.kind) mismatch("model", std::string(kind_name(ckpt.kind)), std::string(kind_name(want.kind)));
  if (ckpt.past_history != want.past_history) {
    mismatch("past_history", std::to_string(ckpt.past_history), std::to_string(want.past_history));
  }
  if (ckpt.forward_look != want.forward_look) {
    mismatch("forward_look", std::to_string(ckpt.forward_look), std::to_string(want.forward_look));
  }
}

inline nlohmann::json cmd_forecast(const RunConfig& cfg, const std::string& checkpoint = "") {
  validate(cfg);
  const fs::path dir = output_dir(cfg);
  const auto state = models::load_checkpoint(checkpoint.empty() ? dir / "checkpoint.bin" : fs::path(checkpoint));
  check_spec(state.spec, cfg.model);
  const auto series = load_series(cfg);
  const std::size_t k = state.spec.past_history, h = state.spec.forward_look;
  const auto prep = data::prepare(series.close, k, h, cfg.split);
  const std::size_t start = prep.split.boundary;

  nlohmann::json runs = nlohmann::json::object();
  for (auto mode : cfg.modes) {
    const auto run = forecast::rollout(mode, forecast::ModelPredictor{&state}, prep.z, start, k, h);
    std::vector<ForecastRow> rows;
    for (std::size_t i = 0; i < run.predictions.size(); ++i) {
      const std::size_t idx = run.index(i);
      rows.push_back({series.dates[idx], series.close[idx], prep.stats.invert(run.predictions[i]),
                      std::string(forecast::mode_name(mode)), i / h});
    }
    const std::string name = std::string(forecast::mode_name(mode));
    write_file(dir / ("forecast_" + name + ".csv"), forecast_csv(rows));
    runs[name] = {{"rmse", json_number(run.rmse)},
                  {"diverged", run.diverged},
                  {"diverged_at", run.diverged_at ? nlohmann::json(series.dates[*run.diverged_at]) : nlohmann::json()},
                  {"predictions", run.predictions.size()},
                  {"emissions", run.emissions}};
  }
  nlohmann::json summary{{"ticker", series.ticker},
                         {"model", kind_name(state.spec.kind)},
                         {"past_history", k},
                         {"forward_look", h},
                         {"seed", state.spec.seed},
                         {"units", "normalized"},
                         {"test_start_date", series.dates[start]},
                         {"test_points", series.size() - start},
                         {"norm", {{"mean", prep.stats.mean}, {"std", prep.stats.std}}},
                         {"runs", runs}};
  write_json(dir / "forecast_summary.json", summary);
  return {{"command", "forecast"}, {"out", dir.string()}, {"runs", runs}};
}

// ---------------------------------------------------------------------------
// backtest

inline nlohmann::json cmd_backtest(const RunConfig& cfg, const std::string& forecast_path = "") {
  if (cfg.csv.empty()) throw Error(ErrorKind::config, "cli-app", "backtest needs the true price CSV (--csv)");
  const fs::path dir = output_dir(cfg);
  const fs::path fpath = forecast_path.empty() ? dir / "forecast_autoregressive.csv" : fs::path(forecast_path);
  const auto rows = read_forecast_csv(fpath);
  const auto truth = data::ingest_csv(cfg.csv);
  std::map<std::string, double> by_date;
  for (std::size_t i = 0; i < truth.size(); ++i) by_date.emplace(truth.dates[i], truth.close[i]);

  std::vector<std::string> dates;
  std::vector<double> predicted, prices;
  for (const auto& r : rows) {
    auto it = by_date.find(r.date);
    if (it == by_date.end()) throw Error(ErrorKind::data, "cli-app", "forecast date " + r.date + " not in " + cfg.csv);
    dates.push_back(r.date);
    predicted.push_back(r.predicted_price);
    prices.push_back(it->second);
  }
  const auto trace = bot::decide(predicted);
  const auto led = bot::backtest(prices, trace.decisions);
  const auto bh = bot::baseline_buy_and_hold(prices);

  const std::string mode = rows.empty() ? "" : rows.front().mode;
  const std::string stem = mode.empty() ? "backtest" : "backtest_" + mode;
  write_file(dir / (stem + "_ledger.csv"), ledger_csv(led, dates));

  std::vector<double> bot_value, bh_value;
  for (const auto& r : led.rows) bot_value.push_back(r.value);
  for (const auto& r : bh.rows) bh_value.push_back(r.value);
  const std::string title = truth.ticker + (mode.empty() ? "" : " (" + mode + ")");
  write_file(dir / (stem + "_portfolio.svg"),
             svg::render(title,
                         {{"Price", {{"true", "#1f77b4", prices}, {"forecast", "#d62728", predicted}}},
                          {"Portfolio value (initial 1.0)",
                           {{"StockBot", "#2ca02c", bot_value}, {"buy and hold", "#7f7f7f", bh_value}}}},
                         dates.front(), dates.back()));

  // Default input is recorded by file name so runs under different output
  // roots produce identical summaries.
  nlohmann::json summary{{"forecast", forecast_path.empty() ? fpath.filename().string() : forecast_path},
                         {"mode", mode},
                         {"days", prices.size()},
                         {"first_date", dates.front()},
                         {"last_date", dates.back()},
                         {"initial_cash", led.initial_cash},
                         {"final_multiple", led.multiple()},
                         {"trades", led.trades},
                         {"buy_and_hold_multiple", bh.multiple()},
                         {"excess_multiple", led.multiple() - bh.multiple()}};
  write_json(dir / (stem + "_summary.json"), summary);
  return {{"command", "backtest"}, {"out", dir.string()}, {"summary", summary}};
}

// ---------------------------------------------------------------------------
// report

struct ReportCell {
  std::vector<double> rmse;  // one per seed with a finite value
  bool diverged = false;
  bool present = false;
};

struct ReportRow {
  ReportCell autoregressive, teacher_forcing;
  std::vector<std::uint64_t> seeds;
  std::map<std::uint64_t, double> auto_by_seed;
};

inline std::string cell_text(const ReportCell& c, const char* fmt) {
  if (!c.present) return "absent";
  std::string out = "n/a";
  if (!c.rmse.empty()) {
    double mean = 0.0;
    for (double r : c.rmse) mean += r;
    mean /= static_cast<double>(c.rmse.size());
    char buf[32];
    std::snprintf(buf, sizeof(buf), fmt, mean);
    out = buf;
  }
  return c.diverged ? out + " (diverged)" : out;
}

/// Scans `dir` recursively for forecast_summary.json files and writes
/// report.md and report.csv shaped like the model x mode RMSE tables.
inline nlohmann::json cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::input_not_found, "cli-app", "run directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "forecast_summary.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  // (ticker, h) -> model -> row
  std::map<std::pair<std::string, std::size_t>, std::map<models::ModelKind, ReportRow>> groups;
  for (const auto& f : files) {
    const auto j = read_json(f);
    const auto key = std::make_pair(j.at("ticker").get<std::string>(), j.at("forward_look").get<std::size_t>());
    auto& row = groups[key][models::parse_kind(j.at("model").get<std::string>())];
    const auto seed = j.at("seed").get<std::uint64_t>();
    row.seeds.push_back(seed);
    for (const auto& [mode, run] : j.at("runs").items()) {
      ReportCell& cell = forecast::parse_mode(mode) == forecast::Mode::autoregressive ? row.autoregressive
                                                                                      : row.teacher_forcing;
      cell.present = true;
      cell.diverged = cell.diverged || run.at("diverged").get<bool>();
      if (!run.at("rmse").is_null()) {
        cell.rmse.push_back(run.at("rmse").get<double>());
        if (&cell == &row.autoregressive) row.auto_by_seed[seed] = cell.rmse.back();
      }
    }
  }

  std::string md = "# Forecast RMSE report\n\n";
  md += "RMSE in normalized (z-score) units, mean over seeds. `absent`: no run found. ";
  md += "`(diverged)`: the rollout produced a non-finite value; the figure covers the finite prefix.\n";
  Table csv{{"ticker", "forward_look", "model", "auto_rmse", "auto_diverged", "tf_rmse", "tf_diverged", "seeds"}, {}};
  nlohmann::json echo = nlohmann::json::array();
  for (const auto& [key, rows] : groups) {
    md += "\n## " + key.first + ", forward_look = " + std::to_string(key.second) + "\n\n";
    md += "| Model | Auto. RMSE | TF RMSE | Seeds |\n|---|---|---|---|\n";
    for (auto kind : models::kAllKinds) {
      auto it = rows.find(kind);
      const ReportRow empty;
      const ReportRow& r = it == rows.end() ? empty : it->second;
      std::string seeds;
      for (auto s : r.seeds) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
      md += "| " + std::string(kind_name(kind)) + " | " + cell_text(r.autoregressive, "%.4f") + " | " +
            cell_text(r.teacher_forcing, "%.4f") + " | " + (seeds.empty() ? "-" : seeds) + " |\n";
      auto raw = [](const ReportCell& c) {
        if (!c.present) return std::string("absent");
        if (c.rmse.empty()) return std::string("nan");
        double mean = 0.0;
        for (double x : c.rmse) mean += x;
        return format_double(mean / static_cast<double>(c.rmse.size()));
      };
      auto flag = [](const ReportCell& c) { return c.present ? std::string(c.diverged ? "1" : "0") : std::string(); };
      csv.rows.push_back({key.first, std::to_string(key.second), std::string(kind_name(kind)), raw(r.autoregressive),
                          flag(r.autoregressive), raw(r.teacher_forcing), flag(r.teacher_forcing), seeds});
    }
    // Per-seed LSTM vs Transformer comparison of autoregressive RMSE.
    auto l = rows.find(models::ModelKind::lstm), t = rows.find(models::ModelKind::transformer);
    if (l != rows.end() && t != rows.end()) {
      std::vector<std::uint64_t> common;
      std::size_t wins = 0;
      for (const auto& [seed, v] : l->second.auto_by_seed) {
        auto o = t->second.auto_by_seed.find(seed);
        if (o == t->second.auto_by_seed.end()) continue;
        common.push_back(seed);
        if (v <= o->second) ++wins;
      }
      if (!common.empty()) {
        std::string seeds;
        for (auto s : common) seeds += (seeds.empty() ? "" : ", ") + std::to_string(s);
        md += "\nLSTM autoregressive RMSE <= Transformer in " + std::to_string(wins) + " of " +
              std::to_string(common.size()) + " seeds (seeds: " + seeds + ").\n";
        echo.push_back({{"ticker", key.first},
                        {"forward_look", key.second},
                        {"lstm_wins", wins},
                        {"seeds", common},
                        {"majority", 2 * wins > common.size()}});
      }
    }
  }
  if (groups.empty()) md += "\nNo forecast runs found.\n";
  write_file(dir / "report.md", md);
  write_file(dir / "report.csv", csv.str());
  return {{"command", "report"}, {"out", dir.string()}, {"runs", files.size()}, {"lstm_vs_transformer", echo}};
}

}  // namespace stockbot::app
