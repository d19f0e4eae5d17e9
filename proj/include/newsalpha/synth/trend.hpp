#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "newsalpha/core/rng.hpp"
#include "newsalpha/synth/market.hpp"

namespace newsalpha {

// Price paths whose drift flips sign on a fixed cycle (square wave with a
// random phase per ticker). Strong, persistent trends that a momentum-aware
// policy can learn to ride without price levels running away.
struct TrendMarketConfig {
  std::size_t n_tickers = 3;
  std::size_t n_days = 330;
  double drift = 0.006;         // |daily log drift|
  double vol = 0.008;           // daily log-return noise
  double period_days = 60.0;    // full up+down cycle
  double start_price = 100.0;
  Date start_date{2024, 1, 2};
  std::uint64_t seed = 7;

  void validate() const {
    if (n_tickers == 0 || n_days < 2) throw ConfigError("trend market needs tickers and >= 2 days");
    if (!(vol >= 0.0) || !(period_days > 0.0) || !(start_price > 0.0)) {
      throw ConfigError("trend market vol, period and start price must be positive");
    }
  }
};

inline MarketData generate_trend_market(const TrendMarketConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  MarketData m;
  m.calendar = TradingCalendar::weekdays(cfg.start_date, cfg.n_days);
  for (std::size_t t = 0; t < cfg.n_tickers; ++t) m.tickers.push_back("TR" + std::to_string(t));
  m.bars.assign(cfg.n_days, std::vector<Bar>(cfg.n_tickers));
  for (std::size_t t = 0; t < cfg.n_tickers; ++t) {
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double c = cfg.start_price;
    for (std::size_t d = 0; d < cfg.n_days; ++d) {
      m.bars[d][t] = {c, c, c, c, 1e6};
      const double up = std::sin(2.0 * std::numbers::pi * double(d) / cfg.period_days + phase) > 0.0;
      c *= std::exp((up ? cfg.drift : -cfg.drift) + rng.normal(0.0, cfg.vol));
    }
  }
  MacroFeatures calm;
  calm.vix = 15.0;
  m.macro.assign(cfg.n_days, calm);
  m.regime.assign(cfg.n_days, Regime::calm);
  return m;
}

}  // namespace newsalpha
