#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "newsalpha/synth/market.hpp"

namespace newsalpha {

inline constexpr std::size_t kIndicatorCount = 3;  // 1-day log return, MACD, RSI-14
inline constexpr std::size_t kWarmupDays = 30;
inline constexpr std::array<const char*, kIndicatorCount> kIndicatorNames = {"ret1", "macd", "rsi14"};

using IndicatorRow = std::array<double, kIndicatorCount>;

struct IndicatorPanel {
  std::vector<std::vector<IndicatorRow>> values;  // [day][ticker]
};

namespace detail {

// RSI from Wilder-smoothed average gain and loss. A flat window is neutral
// (50); a window with no down-moves is 100.
inline double rsi_from(double avg_gain, double avg_loss) {
  if (avg_loss == 0.0) return avg_gain == 0.0 ? 50.0 : 100.0;
  return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss);
}

}  // namespace detail

// Per ticker, from closes only:
//   ret1  = ln(c[d] / c[d-1])                 (0 on the first day)
//   macd  = EMA12(c) - EMA26(c)               (both seeded at c[0])
//   rsi14 = Wilder RSI over 14 changes; the first 14 days use the running mean
// Values exist for every day, but only days >= kWarmupDays are considered
// settled; environments refuse to start earlier.
inline IndicatorPanel compute_indicators(const MarketData& market) {
  const std::size_t n = market.n_days(), T = market.n_tickers();
  IndicatorPanel out;
  out.values.assign(n, std::vector<IndicatorRow>(T, IndicatorRow{0.0, 0.0, 50.0}));
  constexpr double a12 = 2.0 / 13.0, a26 = 2.0 / 27.0;
  constexpr int kRsiPeriod = 14;
  for (std::size_t t = 0; t < T; ++t) {
    double ema12 = market.close(0, t), ema26 = ema12;
    double avg_gain = 0.0, avg_loss = 0.0;
    for (std::size_t d = 1; d < n; ++d) {
      const double c = market.close(d, t), prev = market.close(d - 1, t);
      ema12 += a12 * (c - ema12);
      ema26 += a26 * (c - ema26);
      const double change = c - prev;
      const double gain = change > 0.0 ? change : 0.0;
      const double loss = change < 0.0 ? -change : 0.0;
      const double k = d <= std::size_t(kRsiPeriod) ? double(d) : double(kRsiPeriod);
      avg_gain += (gain - avg_gain) / k;
      avg_loss += (loss - avg_loss) / k;
      out.values[d][t] = {std::log(c / prev), ema12 - ema26, detail::rsi_from(avg_gain, avg_loss)};
    }
  }
  return out;
}

}  // namespace newsalpha
