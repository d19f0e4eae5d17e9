#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "newsalpha/core/error.hpp"

namespace newsalpha {

inline constexpr double kTradingDaysPerYear = 252.0;

inline double sample_mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

inline double sample_std(std::span<const double> xs) {
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / double(xs.size() - 1));
}

// Annualised with sqrt(252), zero risk-free rate.
inline double sharpe(std::span<const double> daily_returns) {
  if (daily_returns.size() < 2) throw PreconditionError("sharpe needs at least 2 returns");
  const bool constant = std::all_of(daily_returns.begin(), daily_returns.end(),
                                    [&](double r) { return r == daily_returns.front(); });
  const double sd = sample_std(daily_returns);
  if (constant || sd == 0.0) throw SharpeUndefined("zero return dispersion");
  return sample_mean(daily_returns) / sd * std::sqrt(kTradingDaysPerYear);
}

inline std::optional<double> try_sharpe(std::span<const double> daily_returns) {
  try {
    return sharpe(daily_returns);
  } catch (const SharpeUndefined&) {
    return std::nullopt;
  }
}

// Simple returns V[t]/V[t-1] - 1.
inline std::vector<double> daily_returns(std::span<const double> equity) {
  std::vector<double> out;
  for (std::size_t i = 1; i < equity.size(); ++i) out.push_back(equity[i] / equity[i - 1] - 1.0);
  return out;
}

inline double total_return_pct(std::span<const double> equity) {
  if (equity.empty()) throw PreconditionError("empty equity curve");
  return 100.0 * (equity.back() / equity.front() - 1.0);
}

// Largest peak-to-trough loss as a fraction of the running peak.
inline double max_drawdown(std::span<const double> equity) {
  if (equity.empty()) throw PreconditionError("empty equity curve");
  double peak = equity.front(), worst = 0.0;
  for (double v : equity) {
    if (!(v > 0.0)) throw PreconditionError("equity values must be positive");
    peak = std::max(peak, v);
    worst = std::max(worst, (peak - v) / peak);
  }
  return worst;
}

}  // namespace newsalpha
