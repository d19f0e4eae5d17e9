#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsalpha/core/error.hpp"
#include "newsalpha/core/io.hpp"
#include "newsalpha/extract/features.hpp"
#include "newsalpha/synth/market.hpp"
#include "newsalpha/tradenv/indicators.hpp"

namespace newsalpha {

enum class FeatureMask { baseline, llm_only, macro_only, full };

inline const char* to_string(FeatureMask m) {
  switch (m) {
    case FeatureMask::baseline: return "baseline";
    case FeatureMask::llm_only: return "llm_only";
    case FeatureMask::macro_only: return "macro_only";
    case FeatureMask::full: return "full";
  }
  return "?";
}

inline FeatureMask parse_feature_mask(std::string_view s) {
  if (s == "baseline") return FeatureMask::baseline;
  if (s == "llm_only") return FeatureMask::llm_only;
  if (s == "macro_only") return FeatureMask::macro_only;
  if (s == "full") return FeatureMask::full;
  throw ConfigError("unknown feature mask '" + std::string(s) + "'");
}

inline constexpr std::array<FeatureMask, 4> kAllMasks = {
    FeatureMask::baseline, FeatureMask::llm_only, FeatureMask::macro_only, FeatureMask::full};

inline bool uses_stock_features(FeatureMask m) {
  return m == FeatureMask::llm_only || m == FeatureMask::full;
}
inline bool uses_macro(FeatureMask m) {
  return m == FeatureMask::macro_only || m == FeatureMask::full;
}

// Masked groups are dropped, not zero-filled.
inline std::size_t observation_width(std::size_t n_tickers, FeatureMask mask) {
  std::size_t w = 1 + 2 * n_tickers + kIndicatorCount * n_tickers;
  if (uses_stock_features(mask)) w += StockFeatures::kDims * n_tickers;
  if (uses_macro(mask)) w += MacroFeatures::kDims;
  return w;
}

// One name per observation slot, in layout order:
//   cash_fraction | close:T | holding:T | ind:T (ticker-major) | stock:T (ticker-major) | macro
inline std::vector<std::string> observation_layout(const std::vector<std::string>& universe,
                                                   FeatureMask mask) {
  std::vector<std::string> names{"cash_fraction"};
  for (const auto& t : universe) names.push_back("close:" + t);
  for (const auto& t : universe) names.push_back("holding_fraction:" + t);
  for (const auto& t : universe) {
    for (const char* ind : kIndicatorNames) names.push_back(std::string(ind) + ":" + t);
  }
  if (uses_stock_features(mask)) {
    for (const auto& t : universe) {
      for (auto f : StockFeatures::kNames) names.push_back(std::string(f) + ":" + t);
    }
  }
  if (uses_macro(mask)) {
    for (auto f : MacroFeatures::kNames) names.emplace_back(f);
  }
  return names;
}

inline nlohmann::ordered_json day_range_to_json(const DayRange& r) {
  return {{"first", r.first.iso()}, {"last", r.last.iso()}};
}

inline DayRange day_range_from_json(const nlohmann::json& j) {
  return {Date::parse(j.at("first").get<std::string>()), Date::parse(j.at("last").get<std::string>())};
}

struct EnvConfig {
  std::vector<std::string> universe;
  double initial_cash = 100000.0;
  double cost_bp = 10.0;  // per side, on traded notional
  int trade_lot = 10;     // max shares per buy action
  FeatureMask feature_mask = FeatureMask::full;
  double reward_scale = 1e-3;
  DayRange episode;

  void validate() const {
    if (universe.empty()) throw ConfigError("env universe is empty");
    if (!(initial_cash > 0.0)) throw ConfigError("initial_cash must be positive");
    if (!(cost_bp >= 0.0)) throw ConfigError("cost_bp must be >= 0");
    if (trade_lot < 1) throw ConfigError("trade_lot must be >= 1");
    if (!std::isfinite(reward_scale)) throw ConfigError("reward_scale must be finite");
    if (episode.last < episode.first) throw ConfigError("episode range is reversed");
  }

  std::size_t width() const { return observation_width(universe.size(), feature_mask); }

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

inline nlohmann::ordered_json to_json(const EnvConfig& c) {
  nlohmann::ordered_json j;
  j["universe"] = c.universe;
  j["initial_cash"] = c.initial_cash;
  j["cost_bp"] = c.cost_bp;
  j["trade_lot"] = c.trade_lot;
  j["feature_mask"] = to_string(c.feature_mask);
  j["reward_scale"] = c.reward_scale;
  j["episode"] = day_range_to_json(c.episode);
  return j;
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig c;
  c.universe = j.at("universe").get<std::vector<std::string>>();
  c.initial_cash = j.value("initial_cash", c.initial_cash);
  c.cost_bp = j.value("cost_bp", c.cost_bp);
  c.trade_lot = j.value("trade_lot", c.trade_lot);
  c.feature_mask = parse_feature_mask(j.value("feature_mask", std::string("full")));
  c.reward_scale = j.value("reward_scale", c.reward_scale);
  c.episode = day_range_from_json(j.at("episode"));
  c.validate();
  return c;
}

struct PortfolioState {
  double cash = 0.0;
  std::vector<std::int64_t> holdings;  // shares, universe order
  double cumulative_costs = 0.0;

  double value(std::span<const double> prices) const {
    double v = cash;
    for (std::size_t i = 0; i < holdings.size(); ++i) v += double(holdings[i]) * prices[i];
    return v;
  }

  friend bool operator==(const PortfolioState&, const PortfolioState&) = default;
};

using ActionVector = std::vector<int>;  // per ticker: -1 liquidate, 0 hold, +1 buy

struct TradeReport {
  double turnover = 0.0;  // traded notional, both sides
  double costs = 0.0;
  std::size_t constrained_buys = 0;  // buys cut below trade_lot by cash
};

// Sells first (each -1 liquidates that ticker), then buys in universe order.
// A buy takes min(trade_lot, largest affordable quantity including cost).
inline PortfolioState apply_trades(PortfolioState p, const ActionVector& actions,
                                   std::span<const double> prices, double cost_bp, int trade_lot,
                                   TradeReport* report = nullptr) {
  if (actions.size() != p.holdings.size() || prices.size() != p.holdings.size()) {
    throw WidthMismatch("actions/prices/holdings lengths differ");
  }
  for (double px : prices) {
    if (!(px > 0.0)) throw PreconditionError("prices must be positive");
  }
  const double rate = cost_bp / 10000.0;
  TradeReport r;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] != -1 || p.holdings[i] == 0) continue;
    const double notional = double(p.holdings[i]) * prices[i];
    const double cost = notional * rate;
    p.cash += notional - cost;
    p.cumulative_costs += cost;
    p.holdings[i] = 0;
    r.turnover += notional;
    r.costs += cost;
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] != 1) continue;
    // The debit is computed exactly as checked, so total <= cash keeps cash >= 0.
    auto debit = [&](std::int64_t q) {
      const double notional = double(q) * prices[i];
      return notional + notional * rate;
    };
    auto q = std::min<std::int64_t>(trade_lot,
                                    std::int64_t(std::floor(p.cash / (prices[i] * (1.0 + rate)))));
    while (q > 0 && debit(q) > p.cash) --q;
    if (q < trade_lot) ++r.constrained_buys;
    if (q <= 0) continue;
    const double notional = double(q) * prices[i];
    const double cost = notional * rate;
    p.cash -= notional + cost;
    p.cumulative_costs += cost;
    p.holdings[i] += q;
    r.turnover += notional;
    r.costs += cost;
  }
  if (report) *report = r;
  return p;
}

struct EnvState {
  std::uint64_t seed = 0;
  std::size_t day = 0;        // market day index of the current close
  std::size_t first_day = 0;  // episode bounds, inclusive
  std::size_t last_day = 0;
  PortfolioState portfolio;
  double realized_pnl = 0.0;  // sum of market P&L over completed steps
  bool done = false;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepInfo {
  Date date;                 // close the step ends at
  double value = 0.0;        // V at that close
  double cash = 0.0;
  double turnover = 0.0;
  double costs = 0.0;
  double market_pnl = 0.0;   // holdings after trading times the price change
  double reward = 0.0;
  std::size_t constrained_buys = 0;
};

struct StepResult {
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

// Trades at day d's close, then marks to day d + 1's close. The episode
// spans [first_day, last_day] of the range and takes last_day - first_day steps.
class TradingEnv {
 public:
  TradingEnv(EnvConfig config, const MarketData& market, const FeaturePanel& panel)
      : config_(std::move(config)), market_(&market), panel_(&panel) {
    config_.validate();
    for (const auto& t : config_.universe) {
      const auto idx = market.ticker_index(t);
      if (!idx) throw UnknownTicker("'" + t + "' not in market");
      market_cols_.push_back(*idx);
    }
    const auto [first, last] = market.day_span(config_.episode);
    if (first == last) throw RangeError("episode needs at least two trading days");
    if (config_.episode.first < market.calendar[0] ||
        market.calendar[market.n_days() - 1] < config_.episode.last) {
      throw RangeError("episode " + config_.episode.first.iso() + ".." + config_.episode.last.iso() +
                       " outside market dates");
    }
    if (first < kWarmupDays) {
      throw WarmupError("episode starts at day " + std::to_string(first) + ", need " +
                        std::to_string(kWarmupDays) + " warm-up days");
    }
    first_ = first;
    last_ = last;
    indicators_ = compute_indicators(market);

    const FeatureMask mask = config_.feature_mask;
    if (uses_stock_features(mask) || uses_macro(mask)) {
      for (std::size_t d = first; d <= last; ++d) {
        const auto row = panel.date_index(market.calendar[d]);
        if (!row) throw RangeError("panel has no row for " + market.calendar[d].iso());
        panel_rows_.push_back(*row);
      }
      if (uses_stock_features(mask)) {
        for (const auto& t : config_.universe) {
          const auto col = panel.ticker_index(t);
          if (!col) throw UnknownTicker("'" + t + "' not in feature panel");
          panel_cols_.push_back(*col);
        }
      }
    }
  }

  const EnvConfig& config() const { return config_; }
  const EnvState& state() const { return state_; }
  std::size_t n_tickers() const { return config_.universe.size(); }
  std::size_t width() const { return config_.width(); }
  std::size_t n_steps() const { return last_ - first_; }

  const EnvState& reset(std::uint64_t seed) {
    state_ = EnvState{};
    state_.seed = seed;
    state_.day = first_;
    state_.first_day = first_;
    state_.last_day = last_;
    state_.portfolio.cash = config_.initial_cash;
    state_.portfolio.holdings.assign(n_tickers(), 0);
    started_ = true;
    return state_;
  }

  Date date() const { return market_->calendar[state_.day]; }

  double portfolio_value() const { return state_.portfolio.value(closes(state_.day)); }

  StepResult step(const ActionVector& actions) {
    if (!started_) throw PreconditionError("step before reset");
    if (state_.done) throw SteppedAfterDone("episode ended at " + date().iso());
    if (actions.size() != n_tickers()) {
      throw WidthMismatch("action vector length " + std::to_string(actions.size()) + ", universe " +
                          std::to_string(n_tickers()));
    }
    const std::size_t d = state_.day;
    const std::vector<double> today = closes(d);
    const double v_before = state_.portfolio.value(today);
    TradeReport trades;
    state_.portfolio = apply_trades(std::move(state_.portfolio), actions, today, config_.cost_bp,
                                    config_.trade_lot, &trades);
    const std::vector<double> tomorrow = closes(d + 1);
    double pnl = 0.0;
    for (std::size_t i = 0; i < n_tickers(); ++i) {
      pnl += double(state_.portfolio.holdings[i]) * (tomorrow[i] - today[i]);
    }
    state_.realized_pnl += pnl;
    state_.day = d + 1;
    state_.done = state_.day >= last_;
    const double v_after = state_.portfolio.value(tomorrow);

    StepResult r;
    r.reward = config_.reward_scale * (v_after - v_before);
    r.done = state_.done;
    r.info = {market_->calendar[d + 1], v_after, state_.portfolio.cash, trades.turnover,
              trades.costs, pnl, r.reward, trades.constrained_buys};
    return r;
  }

  // Raw (unnormalised) observation for the current day.
  std::vector<double> observation() const {
    std::vector<double> obs;
    obs.reserve(width());
    const std::size_t d = state_.day;
    const auto px = closes(d);
    const double v = state_.portfolio.value(px);
    obs.push_back(v > 0.0 ? state_.portfolio.cash / v : 0.0);
    for (double c : px) obs.push_back(c);
    for (std::size_t i = 0; i < n_tickers(); ++i) {
      obs.push_back(v > 0.0 ? double(state_.portfolio.holdings[i]) * px[i] / v : 0.0);
    }
    for (std::size_t col : market_cols_) {
      for (double x : indicators_.values[d][col]) obs.push_back(x);
    }
    const FeatureMask mask = config_.feature_mask;
    if (uses_stock_features(mask) || uses_macro(mask)) {
      const std::size_t row = panel_rows_[d - first_];
      if (uses_stock_features(mask)) {
        for (std::size_t col : panel_cols_) {
          for (double x : panel_->stock[row][col].values()) obs.push_back(x);
        }
      }
      if (uses_macro(mask)) {
        for (double x : panel_->macro[row].values()) obs.push_back(x);
      }
    }
    return obs;
  }

 private:
  std::vector<double> closes(std::size_t d) const {
    std::vector<double> out(market_cols_.size());
    for (std::size_t i = 0; i < market_cols_.size(); ++i) out[i] = market_->close(d, market_cols_[i]);
    return out;
  }

  EnvConfig config_;
  const MarketData* market_;
  const FeaturePanel* panel_;
  std::vector<std::size_t> market_cols_;
  std::vector<std::size_t> panel_rows_;  // by episode offset
  std::vector<std::size_t> panel_cols_;
  IndicatorPanel indicators_;
  std::size_t first_ = 0;
  std::size_t last_ = 0;
  EnvState state_;
  bool started_ = false;
};

inline std::string episode_trace_csv(const std::vector<StepInfo>& steps) {
  std::string out = "date,value,cash,turnover,costs,reward\n";
  for (const auto& s : steps) {
    out += s.date.iso() + "," + io::fmt_double(s.value) + "," + io::fmt_double(s.cash) + "," +
           io::fmt_double(s.turnover) + "," + io::fmt_double(s.costs) + "," +
           io::fmt_double(s.reward) + "\n";
  }
  return out;
}

}  // namespace newsalpha
