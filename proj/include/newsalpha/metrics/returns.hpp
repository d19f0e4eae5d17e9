#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "newsalpha/core/error.hpp"
#include "newsalpha/extract/features.hpp"
#include "newsalpha/synth/market.hpp"

namespace newsalpha {

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

// Forward log-returns over (d, d + horizon] in trading days. Cells whose
// window runs past the sample are NaN.
struct ReturnPanel {
  int horizon_days = 1;
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  std::vector<std::vector<double>> values;  // [date][ticker]

  bool defined(std::size_t d, std::size_t t) const { return !std::isnan(values[d][t]); }
};

inline ReturnPanel forward_returns(const MarketData& market, int horizon_days) {
  if (horizon_days < 1) throw HorizonError("horizon must be >= 1");
  const std::size_t n = market.n_days();
  if (std::size_t(horizon_days) >= n) {
    throw HorizonError("horizon " + std::to_string(horizon_days) + " >= sample length " +
                       std::to_string(n));
  }
  ReturnPanel r;
  r.horizon_days = horizon_days;
  r.dates = market.calendar.days();
  r.tickers = market.tickers;
  r.values.assign(n, std::vector<double>(market.n_tickers(), kUndefined));
  for (std::size_t d = 0; d + std::size_t(horizon_days) < n; ++d) {
    for (std::size_t t = 0; t < market.n_tickers(); ++t) {
      r.values[d][t] = std::log(market.close(d + horizon_days, t) / market.close(d, t));
    }
  }
  return r;
}

// Maps feature-panel coordinates onto return-panel rows/columns by date and
// ticker name. Cells with no counterpart map to nullopt.
class PanelAlignment {
 public:
  PanelAlignment(const FeaturePanel& panel, const ReturnPanel& rets) {
    for (const Date& d : panel.dates) {
      auto it = std::lower_bound(rets.dates.begin(), rets.dates.end(), d);
      rows_.push_back(it != rets.dates.end() && *it == d
                          ? std::optional<std::size_t>(std::size_t(it - rets.dates.begin()))
                          : std::nullopt);
    }
    for (const std::string& t : panel.tickers) {
      std::optional<std::size_t> col;
      for (std::size_t j = 0; j < rets.tickers.size(); ++j) {
        if (rets.tickers[j] == t) col = j;
      }
      cols_.push_back(col);
    }
  }

  // Return for feature cell (d, t), or NaN.
  double value(const ReturnPanel& rets, std::size_t d, std::size_t t) const {
    if (!rows_[d] || !cols_[t]) return kUndefined;
    return rets.values[*rows_[d]][*cols_[t]];
  }

 private:
  std::vector<std::optional<std::size_t>> rows_;
  std::vector<std::optional<std::size_t>> cols_;
};

}  // namespace newsalpha
