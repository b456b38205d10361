#pragma once

// Artifact files: plain comma-separated tables (header row, LF endings, no
// quoting) and JSON documents. Every writer has a matching reader.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stockbot/bot/engine.hpp"
#include "stockbot/data/pipeline.hpp"
#include "stockbot/train/trainer.hpp"

namespace stockbot::app {

using train::format_double;

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::input_not_found, "cli-app", "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::input_not_found, "cli-app", "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// JSON documents are written with two-space indent, sorted keys and a
/// trailing newline.
inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "cli-app", path.string() + ": " + e.what());
  }
}

/// Finite doubles in shortest round-trip form; non-finite values are null.
inline nlohmann::json json_number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

// ---------------------------------------------------------------------------
// Generic table

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorKind::format, "cli-app", "table lacks column '" + name + "'");
  }
  bool has(const std::string& name) const { return std::find(header.begin(), header.end(), name) != header.end(); }

  std::string str() const {
    auto line = [](const std::vector<std::string>& cells) {
      std::string s;
      for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
      return s + "\n";
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
  }
};

inline Table parse_table(std::string_view text, const std::string& source) {
  Table t;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    for (auto f : data::detail::split_fields(line)) cells.emplace_back(f);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size()) {
        throw Error(ErrorKind::format, "cli-app",
                    source + " row " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(cells.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw Error(ErrorKind::format, "cli-app", source + " is empty");
  return t;
}

inline double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  if (!data::detail::parse_double(s, v)) throw Error(ErrorKind::format, "cli-app", "bad number '" + s + "' in " + what);
  return v;
}

// ---------------------------------------------------------------------------
// Forecast CSV: date,true_price,predicted_price,mode,emission

struct ForecastRow {
  std::string date;
  std::optional<double> true_price;
  double predicted_price = 0.0;
  std::string mode;
  std::size_t emission = 0;
};

inline std::string forecast_csv(const std::vector<ForecastRow>& rows) {
  Table t{{"date", "true_price", "predicted_price", "mode", "emission"}, {}};
  for (const auto& r : rows) {
    t.rows.push_back({r.date, r.true_price ? format_double(*r.true_price) : "", format_double(r.predicted_price),
                      r.mode, std::to_string(r.emission)});
  }
  return t.str();
}

/// Reads a forecast CSV, or a price CSV (Date, Adj Close) treated as a
/// forecast equal to the recorded prices.
inline std::vector<ForecastRow> read_forecast_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const Table t = parse_table(text, path.string());
  std::vector<ForecastRow> out;
  if (t.has("predicted_price")) {
    const auto cd = t.column("date"), ct = t.column("true_price"), cp = t.column("predicted_price");
    const auto cm = t.has("mode") ? std::optional(t.column("mode")) : std::nullopt;
    const auto ce = t.has("emission") ? std::optional(t.column("emission")) : std::nullopt;
    for (const auto& r : t.rows) {
      ForecastRow row;
      row.date = r[cd];
      if (!r[ct].empty()) row.true_price = parse_number(r[ct], path.string());
      row.predicted_price = parse_number(r[cp], path.string());
      if (cm) row.mode = r[*cm];
      if (ce) row.emission = static_cast<std::size_t>(parse_number(r[*ce], path.string()));
      out.push_back(std::move(row));
    }
    return out;
  }
  const auto series = data::parse_price_csv(text);
  for (std::size_t i = 0; i < series.size(); ++i) {
    out.push_back({series.dates[i], series.close[i], series.close[i], "", i});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ledger CSV: date,action,price,shares,cash,value

inline std::string ledger_csv(const bot::TradeLedger& led, const std::vector<std::string>& dates) {
  Table t{{"date", "action", "price", "shares", "cash", "value"}, {}};
  for (const auto& r : led.rows) {
    t.rows.push_back({dates.at(r.day), std::string(bot::action_name(r.executed)), format_double(r.price),
                      format_double(r.shares), format_double(r.cash), format_double(r.value)});
  }
  return t.str();
}

struct LedgerFileRow {
  std::string date;
  bot::Action action;
  double price, shares, cash, value;
};

inline std::vector<LedgerFileRow> read_ledger_csv(const std::filesystem::path& path) {
  const Table t = parse_table(read_file(path), path.string());
  const auto cd = t.column("date"), ca = t.column("action"), cp = t.column("price"), cs = t.column("shares"),
             cc = t.column("cash"), cv = t.column("value");
  std::vector<LedgerFileRow> out;
  for (const auto& r : t.rows) {
    out.push_back({r[cd], bot::parse_action(r[ca]), parse_number(r[cp], "ledger"), parse_number(r[cs], "ledger"),
                   parse_number(r[cc], "ledger"), parse_number(r[cv], "ledger")});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss curve CSV: epoch,train_mse,val_mse

inline std::vector<train::EpochRecord> read_loss_curve(const std::filesystem::path& path) {
  const Table t = parse_table(read_file(path), path.string());
  const auto ce = t.column("epoch"), ct = t.column("train_mse"), cv = t.column("val_mse");
  std::vector<train::EpochRecord> out;
  for (const auto& r : t.rows) {
    out.push_back({static_cast<std::size_t>(parse_number(r[ce], "loss curve")), parse_number(r[ct], "loss curve"),
                   parse_number(r[cv], "loss curve")});
  }
  return out;
}

}  // namespace stockbot::app
