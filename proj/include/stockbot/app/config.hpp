#pragma once

// Run configuration: defaults < JSON config file < command-line flags.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stockbot/forecast/forecaster.hpp"
#include "stockbot/models/model_spec.hpp"
#include "stockbot/train/trainer.hpp"

namespace stockbot::app {

inline constexpr const char* kModule = "cli-app";
inline constexpr const char* kOutRootEnv = "STOCKBOT_OUT_ROOT";

struct RunConfig {
  std::string csv;
  std::string ticker;  // empty: CSV file stem
  std::string date_from = "2010-01-01";
  std::string date_to = "2020-12-31";
  double split = 0.8;
  models::ModelSpec model;
  train::TrainConfig train;
  std::vector<forecast::Mode> modes{forecast::Mode::autoregressive, forecast::Mode::teacher_forcing};
  std::string out;  // empty: runs/<ticker>/<model>-h<h>

  std::string effective_ticker() const {
    return ticker.empty() ? std::filesystem::path(csv).stem().string() : ticker;
  }
};

/// Keys accepted in a config file. Anything else is rejected.
inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "csv",        "ticker",       "date_from",   "date_to",        "split",       "model",
      "past_history", "forward_look", "hidden",    "ff_dim",         "heads",       "encoder_layers",
      "lstm_layers", "kernel_size", "dropout",     "seed",           "lr",          "batch",
      "epochs",     "patience",     "min_delta",   "val_fraction",   "modes",       "out",
      "record_wall_time"};
  return keys;
}

namespace detail {

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::config, kModule, std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Overlays the keys present in `j` onto `cfg`.
inline void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::config, kModule, "config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!config_keys().contains(key)) throw Error(ErrorKind::config, kModule, "unknown config key '" + key + "'");
  }
  using detail::take;
  take(j, "csv", cfg.csv);
  take(j, "ticker", cfg.ticker);
  take(j, "date_from", cfg.date_from);
  take(j, "date_to", cfg.date_to);
  take(j, "split", cfg.split);
  if (j.contains("model")) {
    std::string name;
    take(j, "model", name);
    cfg.model.kind = models::parse_kind(name);
  }
  take(j, "past_history", cfg.model.past_history);
  take(j, "forward_look", cfg.model.forward_look);
  take(j, "hidden", cfg.model.hidden);
  take(j, "ff_dim", cfg.model.ff_dim);
  take(j, "heads", cfg.model.heads);
  take(j, "encoder_layers", cfg.model.encoder_layers);
  take(j, "lstm_layers", cfg.model.lstm_layers);
  take(j, "kernel_size", cfg.model.kernel_size);
  take(j, "dropout", cfg.model.dropout);
  take(j, "seed", cfg.model.seed);
  cfg.train.seed = cfg.model.seed;
  take(j, "lr", cfg.train.lr);
  take(j, "batch", cfg.train.batch);
  take(j, "epochs", cfg.train.max_epochs);
  take(j, "patience", cfg.train.patience);
  take(j, "min_delta", cfg.train.min_delta);
  take(j, "val_fraction", cfg.train.val_fraction);
  take(j, "record_wall_time", cfg.train.record_wall_time);
  if (j.contains("modes")) {
    std::vector<std::string> names;
    take(j, "modes", names);
    cfg.modes.clear();
    for (const auto& n : names) cfg.modes.push_back(forecast::parse_mode(n));
  }
  take(j, "out", cfg.out);
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::input_not_found, kModule, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, kModule, path.string() + ": " + e.what());
  }
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json modes = nlohmann::json::array();
  for (auto m : c.modes) modes.push_back(forecast::mode_name(m));
  return {{"csv", c.csv},
          {"ticker", c.effective_ticker()},
          {"date_from", c.date_from},
          {"date_to", c.date_to},
          {"split", c.split},
          {"model", models::kind_name(c.model.kind)},
          {"past_history", c.model.past_history},
          {"forward_look", c.model.forward_look},
          {"hidden", c.model.hidden},
          {"ff_dim", c.model.ff_dim},
          {"heads", c.model.heads},
          {"encoder_layers", c.model.encoder_layers},
          {"lstm_layers", c.model.lstm_layers},
          {"kernel_size", c.model.kernel_size},
          {"dropout", c.model.dropout},
          {"seed", c.model.seed},
          {"lr", c.train.lr},
          {"batch", c.train.batch},
          {"epochs", c.train.max_epochs},
          {"patience", c.train.patience},
          {"min_delta", c.train.min_delta},
          {"val_fraction", c.train.val_fraction},
          {"record_wall_time", c.train.record_wall_time},
          {"modes", modes},
          {"out", c.out}};
}

inline void validate(const RunConfig& c) {
  if (c.csv.empty()) throw Error(ErrorKind::config, kModule, "no price CSV given (--csv or config key 'csv')");
  if (!(c.split > 0.0 && c.split < 1.0)) throw Error(ErrorKind::config, kModule, "split must lie in (0, 1)");
  if (c.modes.empty()) throw Error(ErrorKind::config, kModule, "at least one forecast mode is required");
  c.model.validate();
  c.train.validate();
}

/// Output directory: `out` (default runs/<ticker>/<model>-h<h>), resolved
/// against $STOCKBOT_OUT_ROOT when relative and the variable is set.
inline std::filesystem::path resolve_out(const std::string& out) {
  std::filesystem::path p(out);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kOutRootEnv); root != nullptr && *root != '\0') return std::filesystem::path(root) / p;
  return p;
}

inline std::filesystem::path output_dir(const RunConfig& c) {
  if (!c.out.empty()) return resolve_out(c.out);
  return resolve_out((std::filesystem::path("runs") / c.effective_ticker() /
                      (std::string(models::kind_name(c.model.kind)) + "-h" + std::to_string(c.model.forward_look)))
                         .string());
}

}  // namespace stockbot::app
