#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "newsalpha/core/error.hpp"
#include "newsalpha/core/io.hpp"
#include "newsalpha/extract/features.hpp"
#include "newsalpha/metrics/returns.hpp"

namespace newsalpha {

// 1-based ranks with ties sharing the average of the positions they span.
inline std::vector<double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double avg = 0.5 * double(i + 1 + j);  // mean of positions i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateInput("zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// Spearman rank correlation: Pearson correlation of mid-ranks.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch("spearman: unequal lengths");
  if (xs.size() < 3) throw DegenerateInput("spearman: need at least 3 pairs");
  if (is_constant(xs) || is_constant(ys)) throw DegenerateInput("spearman: constant input");
  const auto rx = mid_ranks(xs);
  const auto ry = mid_ranks(ys);
  return pearson(rx, ry);
}

struct DatedIC {
  Date date;
  double ic = 0.0;
};

struct ICSeries {
  std::vector<DatedIC> points;
  std::size_t skipped_degenerate = 0;    // a side was constant
  std::size_t skipped_insufficient = 0;  // fewer than min_names valid pairs
};

// One cross-sectional IC per date with at least `min_names` valid pairs.
inline ICSeries daily_ic_series(std::string_view feature, const FeaturePanel& panel,
                                const ReturnPanel& rets, std::size_t min_names = 5) {
  ICSeries series;
  const PanelAlignment align(panel, rets);
  std::vector<double> xs, ys;
  for (std::size_t d = 0; d < panel.dates.size(); ++d) {
    xs.clear();
    ys.clear();
    for (std::size_t t = 0; t < panel.tickers.size(); ++t) {
      const double r = align.value(rets, d, t);
      const double f = panel.feature(feature, d, t);
      if (std::isnan(r) || !std::isfinite(f)) continue;
      xs.push_back(f);
      ys.push_back(r);
    }
    if (xs.size() < std::max<std::size_t>(min_names, 3)) {
      ++series.skipped_insufficient;
      continue;
    }
    if (is_constant(xs) || is_constant(ys)) {
      ++series.skipped_degenerate;
      continue;
    }
    series.points.push_back({panel.dates[d], spearman(xs, ys)});
  }
  if (series.points.empty()) {
    throw EmptySeries("no qualifying day for feature '" + std::string(feature) + "'");
  }
  return series;
}

inline double t_stat_from_ir(double ic_ir, std::size_t n_days) {
  return ic_ir * std::sqrt(double(n_days));
}

struct ICReport {
  std::vector<double> daily_ics;
  std::size_t n_days = 0;
  double ic_mean = 0.0;
  double ic_std = 0.0;  // sample (n - 1)
  double ic_ir = 0.0;
  double t_stat = 0.0;
  double pct_positive = 0.0;
};

inline ICReport ic_summary(std::span<const double> ics) {
  if (ics.size() < 2) throw DegenerateInput("ic_summary: need at least 2 daily ICs");
  ICReport r;
  r.daily_ics.assign(ics.begin(), ics.end());
  r.n_days = ics.size();
  const double n = double(r.n_days);
  r.ic_mean = std::accumulate(ics.begin(), ics.end(), 0.0) / n;
  double ss = 0.0;
  std::size_t pos = 0;
  for (double v : ics) {
    ss += (v - r.ic_mean) * (v - r.ic_mean);
    if (v > 0.0) ++pos;
  }
  r.ic_std = std::sqrt(ss / (n - 1.0));
  if (r.ic_std == 0.0) throw DegenerateInput("ic_summary: zero IC dispersion");
  r.ic_ir = r.ic_mean / r.ic_std;
  r.t_stat = t_stat_from_ir(r.ic_ir, r.n_days);
  r.pct_positive = double(pos) / n;
  return r;
}

inline ICReport ic_summary(const ICSeries& series) {
  std::vector<double> ics;
  ics.reserve(series.points.size());
  for (const auto& p : series.points) ics.push_back(p.ic);
  return ic_summary(ics);
}

struct DecayPoint {
  int horizon = 0;
  std::optional<ICReport> report;  // nullopt when every day was degenerate
};

inline std::vector<DecayPoint> ic_decay(std::string_view feature, const FeaturePanel& panel,
                                        const MarketData& market, std::span<const int> horizons,
                                        std::size_t min_names = 5) {
  if (!std::is_sorted(horizons.begin(), horizons.end())) {
    throw PreconditionError("ic_decay: horizons must be ascending");
  }
  std::vector<DecayPoint> out;
  for (int h : horizons) {
    const ReturnPanel rets = forward_returns(market, h);
    DecayPoint p{h, std::nullopt};
    try {
      p.report = ic_summary(daily_ic_series(feature, panel, rets, min_names));
    } catch (const EmptySeries&) {
    } catch (const DegenerateInput&) {
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline nlohmann::ordered_json to_json(const ICReport& r, bool with_daily = false) {
  nlohmann::ordered_json j;
  j["n_days"] = r.n_days;
  j["ic_mean"] = r.ic_mean;
  j["ic_std"] = r.ic_std;
  j["ic_ir"] = r.ic_ir;
  j["t_stat"] = r.t_stat;
  j["pct_positive"] = r.pct_positive;
  if (with_daily) j["daily_ics"] = r.daily_ics;
  return j;
}

inline std::string ic_series_csv(const ICSeries& s) {
  std::string out = "date,ic\n";
  for (const auto& p : s.points) out += p.date.iso() + "," + io::fmt_double(p.ic) + "\n";
  return out;
}

inline std::string decay_csv(const std::vector<DecayPoint>& decay) {
  std::string out = "horizon,ic_mean,ic_ir,t_stat,n\n";
  for (const auto& p : decay) {
    out += std::to_string(p.horizon) + ",";
    if (p.report) {
      out += io::fmt_double(p.report->ic_mean) + "," + io::fmt_double(p.report->ic_ir) + "," +
             io::fmt_double(p.report->t_stat) + "," + std::to_string(p.report->n_days) + "\n";
    } else {
      out += ",,,0\n";
    }
  }
  return out;
}

}  // namespace newsalpha
