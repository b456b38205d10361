// stockbot: train / forecast / backtest / report.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stockbot/app/commands.hpp"

namespace {

using namespace stockbot;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input_not_found: return 2;
    case ErrorKind::config: return 3;
    case ErrorKind::format:
    case ErrorKind::data:
    case ErrorKind::insufficient_data:
    case ErrorKind::degenerate_series: return 4;
    case ErrorKind::spec_mismatch: return 5;
    case ErrorKind::non_finite: return 6;
    case ErrorKind::dimension:
    case ErrorKind::domain:
    case ErrorKind::contract: return 7;
  }
  return 1;
}

int report_error(const std::string& kind, const std::string& module, const std::string& message, int code) {
  nlohmann::json j{{"error", {{"kind", kind}, {"module", module}, {"message", message}, {"exit_code", code}}}};
  std::cerr << j.dump() << "\n";
  return code;
}

// Flags shared by the pipeline commands; unset flags leave the config alone.
struct Flags {
  std::string config, csv, model, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> past_history, forward_look, epochs;
  std::vector<std::string> modes;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON config file");
    cmd->add_option("--csv", csv, "price CSV with Date and Adj Close columns");
    cmd->add_option("--model", model, "LSTM, Transformer, AttentionLSTM, MultiHeadAttentionLSTM, Informer, TCN, TFT");
    cmd->add_option("--seed", seed, "seed for initialization, shuffling and dropout");
    cmd->add_option("--mode", modes, "autoregressive and/or teacher_forcing (repeatable)")->delimiter(',');
    cmd->add_option("--out", out, "run directory (relative paths resolve under $STOCKBOT_OUT_ROOT)");
    cmd->add_option("--past-history", past_history, "input window length k");
    cmd->add_option("--forward-look", forward_look, "forecast block length h");
    cmd->add_option("--epochs", epochs, "maximum training epochs");
  }

  app::RunConfig resolve() const {
    app::RunConfig cfg;
    if (!config.empty()) app::apply_json(cfg, app::load_json_file(config));
    nlohmann::json j = nlohmann::json::object();
    if (!csv.empty()) j["csv"] = csv;
    if (!model.empty()) j["model"] = model;
    if (seed) j["seed"] = *seed;
    if (!modes.empty()) j["modes"] = modes;
    if (!out.empty()) j["out"] = out;
    if (past_history) j["past_history"] = *past_history;
    if (forward_look) j["forward_look"] = *forward_look;
    if (epochs) j["epochs"] = *epochs;
    app::apply_json(cfg, j);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"StockBot: price forecasting and a curvature trading rule"};
  cli.require_subcommand(1);

  Flags train_flags, forecast_flags, backtest_flags;
  std::string checkpoint, forecast_csv, report_dir;

  auto* train = cli.add_subcommand("train", "fit a model and write a checkpoint");
  train_flags.add_to(train);
  auto* forecast = cli.add_subcommand("forecast", "roll a checkpoint over the test period");
  forecast_flags.add_to(forecast);
  forecast->add_option("--checkpoint", checkpoint, "checkpoint file (default <out>/checkpoint.bin)");
  auto* backtest = cli.add_subcommand("backtest", "trade on a forecast and simulate the portfolio");
  backtest_flags.add_to(backtest);
  backtest->add_option("--forecast", forecast_csv, "forecast CSV (default <out>/forecast_autoregressive.csv)");
  auto* report = cli.add_subcommand("report", "tabulate RMSE over all runs below a directory");
  report->add_option("dir", report_dir, "run directory to scan");
  std::string report_out;
  report->add_option("--out", report_out, "run directory to scan (same as the positional argument)");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config", "cli-app", e.what(), 3);
  }

  try {
    nlohmann::json result;
    if (*train) {
      result = app::cmd_train(train_flags.resolve());
    } else if (*forecast) {
      result = app::cmd_forecast(forecast_flags.resolve(), checkpoint);
    } else if (*backtest) {
      result = app::cmd_backtest(backtest_flags.resolve(), forecast_csv);
    } else if (*report) {
      std::string dir = !report_dir.empty() ? report_dir : report_out;
      if (dir.empty()) dir = "runs";
      result = app::cmd_report(app::resolve_out(dir));
    }
    std::cout << result.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    return report_error(std::string(to_string(e.kind())), e.module(), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error("internal", "cli-app", e.what(), 1);
  }
}
