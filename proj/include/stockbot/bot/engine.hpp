#pragma once

// Sign/curvature trading rule over a forecast trajectory and a single-asset
// all-in/all-out portfolio simulation.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stockbot/error.hpp"

namespace stockbot::bot {

inline constexpr const char* kModule = "stockbot-engine";

enum class Action { hold, buy, sell };

inline std::string_view action_name(Action a) {
  switch (a) {
    case Action::buy: return "buy";
    case Action::sell: return "sell";
    case Action::hold: return "hold";
  }
  return "?";
}

inline Action parse_action(std::string_view s) {
  if (s == "buy") return Action::buy;
  if (s == "sell") return Action::sell;
  if (s == "hold") return Action::hold;
  throw Error(ErrorKind::format, kModule, "unknown action '" + std::string(s) + "'");
}

struct DecisionTrace {
  std::vector<int> deltas;      // n-1 values: sign(c[i+1] - c[i])
  std::vector<int> curvatures;  // n values, one per day (see decide)
  std::vector<Action> decisions;
};

inline int sign(double x) { return (x > 0.0) - (x < 0.0); }

/// Day d has curvature delta[d] - delta[d-1]. The sequence is padded with a
/// falling step on both sides, so the first day counts as a trough when the
/// forecast opens rising and the last day as a peak when it closes rising.
/// Curvature +2 (trough) buys, -2 (peak) sells, anything else holds.
inline DecisionTrace decide(std::span<const double> c) {
  if (c.size() < 3) {
    throw Error(ErrorKind::insufficient_data, kModule, "decide needs at least 3 forecast prices");
  }
  const std::size_t n = c.size();
  DecisionTrace tr;
  tr.deltas.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) tr.deltas[i] = sign(c[i + 1] - c[i]);
  tr.curvatures.resize(n);
  tr.decisions.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    const int before = d == 0 ? -1 : tr.deltas[d - 1];
    const int after = d + 1 == n ? -1 : tr.deltas[d];
    const int curv = after - before;
    tr.curvatures[d] = curv;
    tr.decisions[d] = curv == 2 ? Action::buy : curv == -2 ? Action::sell : Action::hold;
  }
  return tr;
}

struct LedgerRow {
  std::size_t day = 0;
  Action requested = Action::hold;
  Action executed = Action::hold;  // infeasible requests become holds
  double price = 0.0;
  double shares = 0.0;
  double cash = 0.0;
  double value = 0.0;
};

struct TradeLedger {
  double initial_cash = 1.0;
  std::vector<LedgerRow> rows;
  std::size_t trades = 0;

  double final_value() const { return rows.empty() ? initial_cash : rows.back().value; }
  double multiple() const { return final_value() / initial_cash; }
};

/// All-in buys and all-out sells at each day's close; the last day is marked
/// to market.
inline TradeLedger backtest(std::span<const double> prices, std::span<const Action> decisions,
                            double initial_cash = 1.0) {
  if (prices.size() != decisions.size()) {
    throw Error(ErrorKind::dimension, kModule,
                "decisions (" + std::to_string(decisions.size()) + ") not aligned with prices (" +
                    std::to_string(prices.size()) + ")");
  }
  TradeLedger led;
  led.initial_cash = initial_cash;
  double cash = initial_cash, shares = 0.0;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    const double p = prices[i];
    if (!(p > 0.0)) throw Error(ErrorKind::domain, kModule, "backtest prices must be positive");
    Action done = Action::hold;
    if (decisions[i] == Action::buy && shares == 0.0 && cash > 0.0) {
      shares = cash / p;
      cash = 0.0;
      done = Action::buy;
    } else if (decisions[i] == Action::sell && shares > 0.0) {
      cash = shares * p;
      shares = 0.0;
      done = Action::sell;
    }
    if (done != Action::hold) ++led.trades;
    led.rows.push_back({i, decisions[i], done, p, shares, cash, cash + shares * p});
  }
  return led;
}

inline TradeLedger baseline_buy_and_hold(std::span<const double> prices, double initial_cash = 1.0) {
  std::vector<Action> d(prices.size(), Action::hold);
  if (!d.empty()) d.front() = Action::buy;
  return backtest(prices, d, initial_cash);
}

}  // namespace stockbot::bot
