#pragma once

// Price ingestion, train-only z-scoring, chronological split and sliding
// windows.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stockbot/error.hpp"

namespace stockbot::data {

inline constexpr const char* kModule = "data-pipeline";

struct PriceSeries {
  std::string ticker;
  std::vector<std::string> dates;  // ISO yyyy-mm-dd, strictly increasing
  std::vector<double> close;       // adjusted close, > 0

  std::size_t size() const { return close.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline bool valid_iso_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  int y = 0;
  unsigned m = 0, d = 0;
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return ec == std::errc() && p == s.data() + pos + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) return false;
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}.ok();
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace detail

/// Parses CSV text with a header row containing `Date` and `Adj Close`
/// (other columns ignored). Rows are returned sorted by date. `min_rows`
/// is normally k+h+2.
inline PriceSeries parse_price_csv(std::string_view text, std::size_t min_rows = 0, std::string ticker = "") {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::pair<std::string, double>> rows;
  std::size_t date_col = 0, price_col = 0, line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (!have_header) {
      auto find = [&](std::string_view name) {
        auto it = std::find(fields.begin(), fields.end(), name);
        if (it == fields.end()) {
          throw Error(ErrorKind::format, kModule, "CSV header lacks required column '" + std::string(name) + "'");
        }
        return static_cast<std::size_t>(it - fields.begin());
      };
      date_col = find("Date");
      price_col = find("Adj Close");
      have_header = true;
      continue;
    }
    const std::string row = "row " + std::to_string(line_no);
    if (fields.size() <= std::max(date_col, price_col)) {
      throw Error(ErrorKind::format, kModule, row + ": expected at least " +
                                                  std::to_string(std::max(date_col, price_col) + 1) + " fields");
    }
    const std::string_view date = fields[date_col];
    if (!detail::valid_iso_date(date)) {
      throw Error(ErrorKind::data, kModule, row + ": unparseable date '" + std::string(date) + "'");
    }
    double price = 0.0;
    if (!detail::parse_double(fields[price_col], price) || !std::isfinite(price)) {
      throw Error(ErrorKind::data, kModule, row + ": unparseable price '" + std::string(fields[price_col]) + "'");
    }
    if (price <= 0.0) throw Error(ErrorKind::data, kModule, row + ": price must be positive");
    rows.emplace_back(std::string(date), price);
  }
  if (!have_header) throw Error(ErrorKind::format, kModule, "CSV is empty (no header row)");

  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].first == rows[i - 1].first) {
      throw Error(ErrorKind::data, kModule, "duplicate date " + rows[i].first);
    }
  }
  if (rows.size() < min_rows) {
    throw Error(ErrorKind::insufficient_data, kModule,
                "series has " + std::to_string(rows.size()) + " rows, need at least " + std::to_string(min_rows));
  }
  PriceSeries s;
  s.ticker = std::move(ticker);
  for (auto& [d, p] : rows) {
    s.dates.push_back(std::move(d));
    s.close.push_back(p);
  }
  return s;
}

inline PriceSeries ingest_csv(const std::filesystem::path& path, std::size_t min_rows = 0) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::input_not_found, kModule, "cannot open CSV " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_price_csv(ss.str(), min_rows, path.stem().string());
}

/// Keeps rows whose date lies in [from, to] (ISO strings, inclusive; empty
/// bound = unbounded).
inline PriceSeries filter_dates(const PriceSeries& s, std::string_view from, std::string_view to) {
  PriceSeries out;
  out.ticker = s.ticker;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!from.empty() && s.dates[i] < from) continue;
    if (!to.empty() && s.dates[i] > to) continue;
    out.dates.push_back(s.dates[i]);
    out.close.push_back(s.close[i]);
  }
  return out;
}

/// Chronological split point: train = [0, boundary), test = [boundary, T).
struct SplitPoint {
  std::size_t boundary = 0;
  std::size_t total = 0;
  std::size_t train_size() const { return boundary; }
  std::size_t test_size() const { return total - boundary; }
};

inline SplitPoint split_train_test(std::size_t total, double ratio, std::size_t k, std::size_t h) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorKind::config, kModule, "split ratio must lie in (0, 1)");
  SplitPoint sp{static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total))), total};
  if (sp.train_size() < k + h || sp.test_size() < k + h) {
    throw Error(ErrorKind::insufficient_data, kModule,
                "split " + std::to_string(sp.train_size()) + "/" + std::to_string(sp.test_size()) +
                    " leaves a side shorter than k+h=" + std::to_string(k + h));
  }
  return sp;
}

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
  std::size_t begin = 0, end = 0;  // index range the stats were fitted on

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }

  std::vector<double> apply(std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [&](double x) { return apply(x); });
    return out;
  }
  std::vector<double> invert(std::span<const double> zs) const {
    std::vector<double> out(zs.size());
    std::transform(zs.begin(), zs.end(), out.begin(), [&](double z) { return invert(z); });
    return out;
  }
};

/// Population (divide-by-n) mean and std of the training slice.
inline NormStats fit_norm(std::span<const double> train, std::size_t begin = 0) {
  if (train.size() < 2) throw Error(ErrorKind::insufficient_data, kModule, "normalization needs at least 2 points");
  const double n = static_cast<double>(train.size());
  const double mean = std::accumulate(train.begin(), train.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : train) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd >= 1e-12)) throw Error(ErrorKind::degenerate_series, kModule, "training slice has (near) zero variance");
  return {mean, sd, begin, begin + train.size()};
}

enum class SplitTag { train, test };

/// N windows of k inputs and h targets, stored flat row-major.
struct WindowedDataset {
  std::size_t k = 0, h = 0, count = 0;
  SplitTag tag = SplitTag::train;
  std::size_t first_target = 0;  // series index of targets(0)[0]
  std::vector<double> inputs;    // count x k
  std::vector<double> targets;   // count x h

  std::span<const double> input(std::size_t j) const { return {inputs.data() + j * k, k}; }
  std::span<const double> target(std::size_t j) const { return {targets.data() + j * h, h}; }
};

inline WindowedDataset make_windows(std::span<const double> z, std::size_t k, std::size_t h,
                                    SplitTag tag = SplitTag::train) {
  if (k < 1 || h < 1) throw Error(ErrorKind::config, kModule, "k and h must be positive");
  if (z.size() < k + h) {
    throw Error(ErrorKind::insufficient_data, kModule,
                "slice of length " + std::to_string(z.size()) + " is shorter than k+h=" + std::to_string(k + h));
  }
  WindowedDataset ds;
  ds.k = k;
  ds.h = h;
  ds.tag = tag;
  ds.first_target = k;
  ds.count = z.size() - k - h + 1;
  ds.inputs.reserve(ds.count * k);
  ds.targets.reserve(ds.count * h);
  for (std::size_t j = 0; j < ds.count; ++j) {
    ds.inputs.insert(ds.inputs.end(), z.begin() + j, z.begin() + j + k);
    ds.targets.insert(ds.targets.end(), z.begin() + j + k, z.begin() + j + k + h);
  }
  return ds;
}

/// Test windows whose targets start at or after `boundary`; histories may
/// reach back across the boundary (warm-up convention).
inline WindowedDataset make_test_windows(std::span<const double> z, std::size_t boundary, std::size_t k,
                                         std::size_t h) {
  if (boundary < k) throw Error(ErrorKind::insufficient_data, kModule, "test start precedes a full history window");
  WindowedDataset ds = make_windows(z.subspan(boundary - k), k, h, SplitTag::test);
  ds.first_target = boundary;
  return ds;
}

/// Everything downstream needs from one series: stats fitted on the train
/// slice, the full normalized series and the training windows.
struct Prepared {
  SplitPoint split;
  NormStats stats;
  std::vector<double> z;  // whole series, normalized with train stats
  WindowedDataset train;
};

inline Prepared prepare(std::span<const double> close, std::size_t k, std::size_t h, double ratio = 0.8) {
  Prepared p;
  p.split = split_train_test(close.size(), ratio, k, h);
  p.stats = fit_norm(close.first(p.split.boundary));
  p.z = p.stats.apply(close);
  p.train = make_windows(std::span<const double>(p.z).first(p.split.boundary), k, h, SplitTag::train);
  return p;
}

}  // namespace stockbot::data
