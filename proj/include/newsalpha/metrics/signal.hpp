#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsalpha/metrics/ic.hpp"

namespace newsalpha {

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Fraction of nonzero-sentiment cells whose sign matches the forward return.
// Zero returns count as misses.
inline double hit_rate(const FeaturePanel& panel, const ReturnPanel& rets) {
  const PanelAlignment align(panel, rets);
  std::size_t hits = 0, total = 0;
  for (std::size_t d = 0; d < panel.dates.size(); ++d) {
    for (std::size_t t = 0; t < panel.tickers.size(); ++t) {
      const double s = panel.stock[d][t].sentiment;
      const double r = align.value(rets, d, t);
      if (s == 0.0 || std::isnan(r)) continue;
      ++total;
      if (r != 0.0 && sign_of(s) == sign_of(r)) ++hits;
    }
  }
  if (total == 0) throw NoSignal("hit_rate: no nonzero-sentiment cell with a return");
  return double(hits) / double(total);
}

// Bucket sizes for splitting n ranked names into five contiguous groups.
// The n % 5 leftover names go to the middle bucket first and the extreme
// buckets last: order 2, 1, 3, 0, 4.
inline std::array<std::size_t, 5> quintile_sizes(std::size_t n) {
  std::array<std::size_t, 5> sizes;
  sizes.fill(n / 5);
  constexpr std::array<std::size_t, 5> kOrder = {2, 1, 3, 0, 4};
  for (std::size_t i = 0; i < n % 5; ++i) ++sizes[kOrder[i]];
  return sizes;
}

// Mean over qualifying days of (mean return of the top-feature bucket minus
// mean return of the bottom bucket). A day qualifies with >= 5 valid names and
// a non-constant feature.
inline double quintile_spread(const FeaturePanel& panel, const ReturnPanel& rets,
                              std::string_view feature = "sentiment") {
  const PanelAlignment align(panel, rets);
  double total = 0.0;
  std::size_t days = 0;
  std::vector<std::pair<double, double>> cells;  // (feature, return), ticker order
  for (std::size_t d = 0; d < panel.dates.size(); ++d) {
    cells.clear();
    for (std::size_t t = 0; t < panel.tickers.size(); ++t) {
      const double r = align.value(rets, d, t);
      if (std::isnan(r)) continue;
      cells.emplace_back(panel.feature(feature, d, t), r);
    }
    if (cells.size() < 5) continue;
    const bool constant = std::all_of(cells.begin(), cells.end(),
                                      [&](const auto& c) { return c.first == cells[0].first; });
    if (constant) continue;
    std::stable_sort(cells.begin(), cells.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto sizes = quintile_sizes(cells.size());
    double bottom = 0.0, top = 0.0;
    for (std::size_t i = 0; i < sizes[0]; ++i) bottom += cells[i].second;
    for (std::size_t i = cells.size() - sizes[4]; i < cells.size(); ++i) top += cells[i].second;
    total += top / double(sizes[4]) - bottom / double(sizes[0]);
    ++days;
  }
  if (days == 0) throw NoSignal("quintile_spread: no qualifying day");
  return total / double(days);
}

// p_up = clamp(0.5 + 0.5 * sign(sentiment) * impact, 0, 1) on nonzero-sentiment
// cells; outcome = 1 if the forward return is positive.
inline double up_probability(const StockFeatures& f) {
  return std::clamp(0.5 + 0.5 * sign_of(f.sentiment) * f.impact, 0.0, 1.0);
}

inline double brier(const FeaturePanel& panel, const ReturnPanel& rets) {
  const PanelAlignment align(panel, rets);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t d = 0; d < panel.dates.size(); ++d) {
    for (std::size_t t = 0; t < panel.tickers.size(); ++t) {
      const StockFeatures& f = panel.stock[d][t];
      const double r = align.value(rets, d, t);
      if (f.sentiment == 0.0 || std::isnan(r)) continue;
      const double err = up_probability(f) - (r > 0.0 ? 1.0 : 0.0);
      total += err * err;
      ++n;
    }
  }
  if (n == 0) throw NoSignal("brier: no nonzero-sentiment cell with a return");
  return total / double(n);
}

inline double signal_coverage(const FeaturePanel& panel) {
  std::size_t nonzero = 0, total = 0;
  for (const auto& row : panel.stock) {
    for (const auto& cell : row) {
      ++total;
      if (!cell.is_zero()) ++nonzero;
    }
  }
  if (total == 0) throw PreconditionError("signal_coverage: empty panel");
  return double(nonzero) / double(total);
}

struct CompositeWeights {
  double ic_ir = 0.5;
  double hit = 0.3;
  double spread = 0.2;
  double brier = 0.0;
  double spread_scale = 0.02;  // spread normaliser before clamping to [-1, 1]

  CompositeWeights scaled(double k) const {
    return {ic_ir * k, hit * k, spread * k, brier * k, spread_scale};
  }
};

struct SignalMetrics {
  ICReport ic_report;
  double hit_rate = 0.0;
  double quintile_spread = 0.0;
  double brier = 0.25;
  double signal_coverage = 0.0;
  double composite = 0.0;
  std::vector<std::string> notes;  // metrics that fell back to neutral values

  double ic_ir() const { return ic_report.ic_ir; }
};

//   w_ic * ic_ir + w_hit * (2 * hit - 1) + w_spread * clamp(spread / scale, -1, 1)
//   - w_brier * brier
inline double composite(double ic_ir, double hit, double spread, double brier_score,
                        const CompositeWeights& w = {}) {
  return w.ic_ir * ic_ir + w.hit * (2.0 * hit - 1.0) +
         w.spread * std::clamp(spread / w.spread_scale, -1.0, 1.0) - w.brier * brier_score;
}

inline double composite(const SignalMetrics& m, const CompositeWeights& w = {}) {
  return composite(m.ic_report.ic_ir, m.hit_rate, m.quintile_spread, m.brier, w);
}

// Full suite at one horizon. Metrics that have no qualifying data fall back to
// neutral values (IC 0, hit 0, spread 0, Brier 0.25) with a note, so the
// gates fail rather than the evaluation aborting.
inline SignalMetrics compute_signal_metrics(const FeaturePanel& panel, const MarketData& market,
                                            int horizon = 5, std::string_view feature = "sentiment",
                                            const CompositeWeights& weights = {},
                                            std::size_t min_names = 5) {
  const ReturnPanel rets = forward_returns(market, horizon);
  SignalMetrics m;
  m.signal_coverage = signal_coverage(panel);
  try {
    m.ic_report = ic_summary(daily_ic_series(feature, panel, rets, min_names));
  } catch (const EmptySeries& e) {
    m.notes.push_back(e.what());
  } catch (const DegenerateInput& e) {
    m.notes.push_back(e.what());
  }
  try {
    m.hit_rate = hit_rate(panel, rets);
  } catch (const NoSignal& e) {
    m.notes.push_back(e.what());
  }
  try {
    m.quintile_spread = quintile_spread(panel, rets, feature);
  } catch (const NoSignal& e) {
    m.notes.push_back(e.what());
  }
  try {
    m.brier = brier(panel, rets);
  } catch (const NoSignal& e) {
    m.notes.push_back(e.what());
  }
  m.composite = composite(m, weights);
  return m;
}

inline nlohmann::ordered_json to_json(const CompositeWeights& w) {
  nlohmann::ordered_json j;
  j["ic_ir"] = w.ic_ir;
  j["hit"] = w.hit;
  j["spread"] = w.spread;
  j["brier"] = w.brier;
  j["spread_scale"] = w.spread_scale;
  return j;
}

inline CompositeWeights composite_weights_from_json(const nlohmann::json& j) {
  CompositeWeights w;
  w.ic_ir = j.value("ic_ir", w.ic_ir);
  w.hit = j.value("hit", w.hit);
  w.spread = j.value("spread", w.spread);
  w.brier = j.value("brier", w.brier);
  w.spread_scale = j.value("spread_scale", w.spread_scale);
  return w;
}

inline nlohmann::ordered_json to_json(const SignalMetrics& m) {
  nlohmann::ordered_json j;
  j["ic"] = to_json(m.ic_report);
  j["hit_rate"] = m.hit_rate;
  j["quintile_spread"] = m.quintile_spread;
  j["brier"] = m.brier;
  j["signal_coverage"] = m.signal_coverage;
  j["composite"] = m.composite;
  j["notes"] = m.notes;
  return j;
}

inline SignalMetrics signal_metrics_from_json(const nlohmann::json& j) {
  SignalMetrics m;
  const auto& ic = j.at("ic");
  m.ic_report.n_days = ic.at("n_days").get<std::size_t>();
  m.ic_report.ic_mean = ic.at("ic_mean").get<double>();
  m.ic_report.ic_std = ic.at("ic_std").get<double>();
  m.ic_report.ic_ir = ic.at("ic_ir").get<double>();
  m.ic_report.t_stat = ic.at("t_stat").get<double>();
  m.ic_report.pct_positive = ic.value("pct_positive", 0.0);
  m.hit_rate = j.at("hit_rate").get<double>();
  m.quintile_spread = j.at("quintile_spread").get<double>();
  m.brier = j.at("brier").get<double>();
  m.signal_coverage = j.at("signal_coverage").get<double>();
  m.composite = j.at("composite").get<double>();
  m.notes = j.value("notes", std::vector<std::string>{});
  return m;
}

}  // namespace newsalpha
