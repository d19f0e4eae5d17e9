#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "newsalpha/metrics/signal.hpp"
#include "newsalpha/synth/pipeline.hpp"

using namespace newsalpha;

namespace {

// Independent oracle: ranks by counting (mid-rank for ties), then textbook Pearson.
double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  const auto rx = rank(x), ry = rank(y);
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double num = 0, dx = 0, dy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (rx[i] - mx) * (ry[i] - my);
    dx += (rx[i] - mx) * (rx[i] - mx);
    dy += (ry[i] - my) * (ry[i] - my);
  }
  return num / std::sqrt(dx * dy);
}

// One-day market over `closes0 -> closes1`, with matching panel.
struct OneDay {
  MarketData market;
  FeaturePanel panel;
  ReturnPanel rets;
};

OneDay one_day(const std::vector<double>& feature, const std::vector<double>& ret) {
  OneDay o;
  const std::size_t n = feature.size();
  o.market.calendar = TradingCalendar::weekdays(Date(2025, 1, 2), 2);
  for (std::size_t t = 0; t < n; ++t) o.market.tickers.push_back("T" + std::to_string(t));
  o.market.bars.assign(2, std::vector<Bar>(n));
  for (std::size_t t = 0; t < n; ++t) {
    o.market.bars[0][t].close = 100.0;
    o.market.bars[1][t].close = 100.0 * std::exp(ret[t]);
  }
  o.market.macro.assign(2, {});
  o.market.regime.assign(2, Regime::calm);
  o.panel = FeaturePanel::zeros({o.market.calendar[0]}, o.market.tickers);
  for (std::size_t t = 0; t < n; ++t) o.panel.stock[0][t].sentiment = feature[t];
  o.rets = forward_returns(o.market, 1);
  return o;
}

}  // namespace

TEST(ForwardReturns, LogReturnAndHorizonBounds) {
  auto o = one_day({0.1, 0.2, 0.3}, {std::log(1.05), 0.0, 0.0});
  EXPECT_NEAR(o.rets.values[0][0], 0.04879016416943205, 1e-15);
  EXPECT_TRUE(std::isnan(o.rets.values[1][0]));
  EXPECT_EQ(o.rets.horizon_days, 1);
  EXPECT_THROW(forward_returns(o.market, 2), HorizonError);
  EXPECT_THROW(forward_returns(o.market, 0), HorizonError);
}

TEST(ForwardReturns, ConstantPricesGiveZeros) {
  auto o = one_day({1, 2, 3}, {0, 0, 0});
  for (double v : o.rets.values[0]) EXPECT_EQ(v, 0.0);
}

TEST(Spearman, Examples) {
  const std::vector<double> x = {0.1, 0.5, 0.3};
  EXPECT_DOUBLE_EQ(spearman(x, x), 1.0);
  EXPECT_NEAR(spearman(x, std::vector<double>{0.02, 0.01, 0.03}), -0.5, 1e-15);
  EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>{-0.1, -0.5, -0.3}), -1.0);
  EXPECT_THROW(spearman(x, std::vector<double>{1, 1, 1}), DegenerateInput);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DegenerateInput);
  EXPECT_THROW(spearman(x, std::vector<double>{1, 2}), LengthMismatch);
}

TEST(Spearman, MatchesOracleWithTies) {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 3 + rng.uniform_int(0, 7);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = double(rng.uniform_int(0, 4));
      y[i] = rng.bernoulli(0.5) ? double(rng.uniform_int(0, 3)) : rng.normal();
    }
    if (is_constant(x) || is_constant(y)) continue;
    EXPECT_NEAR(spearman(x, y), oracle_spearman(x, y), 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 1500);
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(8), y(8), fx(8), gy(8);
    for (int i = 0; i < 8; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
      fx[i] = std::exp(3.0 * x[i]);
      gy[i] = 1.0 / (1.0 + std::exp(y[i]));  // strictly decreasing
    }
    EXPECT_NEAR(spearman(fx, y), spearman(x, y), 1e-12);
    EXPECT_NEAR(spearman(x, gy), -spearman(x, y), 1e-12);
  }
}

TEST(IcSummary, HandComputedAndReportedRows) {
  const std::vector<double> ics = {0.1, 0.0, 0.2};
  const auto r = ic_summary(ics);
  EXPECT_NEAR(r.ic_mean, 0.1, 1e-15);
  EXPECT_NEAR(r.ic_std, 0.1, 1e-15);
  EXPECT_NEAR(r.ic_ir, 1.0, 1e-12);
  EXPECT_NEAR(r.t_stat, std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(r.pct_positive, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(t_stat_from_ir(0.093, 117), 1.00, 0.01);
  EXPECT_NEAR(t_stat_from_ir(0.233, 117), 2.52, 0.01);
  EXPECT_THROW(ic_summary(std::vector<double>{0.1, 0.1}), DegenerateInput);
  EXPECT_THROW(ic_summary(std::vector<double>{0.1}), DegenerateInput);
}

TEST(DailyIc, SingleDayPerfectFeature) {
  const std::vector<double> r = {0.01, -0.02, 0.03, 0.005, -0.01};
  auto o = one_day(r, r);
  const auto s = daily_ic_series("sentiment", o.panel, o.rets);
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_NEAR(s.points[0].ic, 1.0, 1e-12);
}

TEST(DailyIc, ZeroFeatureDaySkippedAndEmptySeriesThrows) {
  auto o = one_day({0, 0, 0, 0, 0}, {0.01, 0.02, 0.03, 0.04, 0.05});
  EXPECT_THROW(daily_ic_series("sentiment", o.panel, o.rets), EmptySeries);
}

TEST(DailyIc, MacroFeaturesAreAlwaysDegenerate) {
  SynthConfig c;
  c.n_tickers = 10;
  c.n_days = 60;
  const auto w = build_world(c);
  const auto panel = oracle_panel(w, 0.0, 1);
  const auto rets = forward_returns(w.market, 5);
  for (auto name : MacroFeatures::kNames) {
    EXPECT_THROW(daily_ic_series(name, panel, rets), EmptySeries) << name;
  }
  const std::vector<int> horizons = {1, 5};
  for (const auto& p : ic_decay("vix", panel, w.market, horizons)) EXPECT_FALSE(p.report);
}

TEST(IcDecay, RejectsUnsortedHorizons) {
  auto o = one_day({1, 2, 3}, {0.1, 0.2, 0.3});
  const std::vector<int> bad = {5, 1};
  EXPECT_THROW(ic_decay("sentiment", o.panel, o.market, bad), PreconditionError);
}

TEST(HitRate, SignTable) {
  auto o = one_day({0.5, -0.2, 0.0, 0.3}, {0.01, 0.02, -0.01, 0.04});
  EXPECT_NEAR(hit_rate(o.panel, o.rets), 2.0 / 3.0, 1e-15);
  auto perfect = one_day({0.5, -0.2, 0.3}, {0.01, -0.02, 0.04});
  EXPECT_DOUBLE_EQ(hit_rate(perfect.panel, perfect.rets), 1.0);
  auto zero_ret = one_day({0.5, -0.2}, {0.0, -0.02});
  EXPECT_DOUBLE_EQ(hit_rate(zero_ret.panel, zero_ret.rets), 0.5);
  auto none = one_day({0, 0}, {0.1, 0.2});
  EXPECT_THROW(hit_rate(none.panel, none.rets), NoSignal);
}

TEST(QuintileSpread, Examples) {
  auto o = one_day({5, 4, 3, 2, 1}, {0.05, 0.04, 0.03, 0.02, 0.01});
  EXPECT_NEAR(quintile_spread(o.panel, o.rets), 0.04, 1e-12);
  auto anti = one_day({1, 2, 3, 4, 5}, {0.05, 0.04, 0.03, 0.02, 0.01});
  EXPECT_LT(quintile_spread(anti.panel, anti.rets), 0.0);
  auto flat = one_day({1, 2, 3, 4, 5}, {0.02, 0.02, 0.02, 0.02, 0.02});
  EXPECT_NEAR(quintile_spread(flat.panel, flat.rets), 0.0, 1e-15);
  auto few = one_day({1, 2, 3, 4}, {0.01, 0.02, 0.03, 0.04});
  EXPECT_THROW(quintile_spread(few.panel, few.rets), NoSignal);
}

TEST(QuintileSpread, RemainderGoesToExtremeBucketsLast) {
  EXPECT_EQ(quintile_sizes(5), (std::array<std::size_t, 5>{1, 1, 1, 1, 1}));
  EXPECT_EQ(quintile_sizes(7), (std::array<std::size_t, 5>{1, 2, 2, 1, 1}));
  EXPECT_EQ(quintile_sizes(9), (std::array<std::size_t, 5>{2, 2, 2, 2, 1}));
  EXPECT_EQ(quintile_sizes(38), (std::array<std::size_t, 5>{7, 8, 8, 8, 7}));
}

TEST(QuintileSpread, ReturnFeatureIsMaximalOverPermutations) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5 + trial % 2;
    std::vector<double> r(n);
    for (double& v : r) v = rng.normal(0.0, 0.02);
    auto self = one_day(r, r);
    const double best = quintile_spread(self.panel, self.rets);
    EXPECT_GE(best, 0.0);
    std::vector<double> perm = r;
    std::sort(perm.begin(), perm.end());
    do {
      auto o = one_day(perm, r);
      EXPECT_LE(quintile_spread(o.panel, o.rets), best + 1e-15);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(Brier, MappingAndBounds) {
  StockFeatures f{0.8, 0.9, 0, 0, ""};
  EXPECT_NEAR(up_probability(f), 0.95, 1e-15);
  auto down = one_day({0.8}, {-0.01});
  down.panel.stock[0][0].impact = 0.9;
  EXPECT_NEAR(brier(down.panel, down.rets), 0.9025, 1e-12);
  auto perfect = one_day({0.5}, {0.01});
  perfect.panel.stock[0][0].impact = 1.0;
  EXPECT_DOUBLE_EQ(brier(perfect.panel, perfect.rets), 0.0);
  auto uninformed = one_day({0.5, -0.5, 0.2}, {0.01, 0.02, -0.03});
  EXPECT_DOUBLE_EQ(brier(uninformed.panel, uninformed.rets), 0.25);
}

TEST(Coverage, CountsNonzeroCells) {
  auto p = FeaturePanel::zeros({Date(2025, 1, 2), Date(2025, 1, 3)}, {"A", "B"});
  EXPECT_DOUBLE_EQ(signal_coverage(p), 0.0);
  p.stock[0][0].impact = 0.1;
  p.stock[0][1].sentiment = -0.1;
  p.stock[1][1].news_novelty = 0.5;
  EXPECT_DOUBLE_EQ(signal_coverage(p), 0.75);
  EXPECT_THROW(signal_coverage(FeaturePanel{}), PreconditionError);
}

TEST(Composite, DefaultWeights) {
  EXPECT_DOUBLE_EQ(composite(0.0, 0.5, 0.0, 0.3), 0.0);
  EXPECT_NEAR(composite(0.104, 0.714, 0.0022, 0.2), 0.2024, 1e-12);
  const CompositeWeights w;
  EXPECT_NEAR(composite(0.3, 0.6, 0.01, 0.2, w.scaled(2.0)), 2.0 * composite(0.3, 0.6, 0.01, 0.2, w),
              1e-15);
  EXPECT_DOUBLE_EQ(composite(0, 0.5, 1.0, 0), 0.2);  // spread clamp
}

TEST(SignalMetrics, PlantedSignalAndFallbacks) {
  SynthConfig c;
  c.n_tickers = 20;
  c.n_days = 120;
  const auto w = build_world(c);
  const auto m = compute_signal_metrics(oracle_panel(w, 0.0, 1), w.market, 5);
  EXPECT_TRUE(m.notes.empty());
  EXPECT_GT(m.ic_report.ic_mean, 0.0);
  EXPECT_GE(m.hit_rate, 0.0);
  EXPECT_LE(m.hit_rate, 1.0);
  EXPECT_GE(m.brier, 0.0);
  EXPECT_LE(m.brier, 1.0);
  EXPECT_DOUBLE_EQ(m.composite, composite(m));
  const auto back = signal_metrics_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.composite, m.composite);
  EXPECT_EQ(back.ic_report.ic_ir, m.ic_report.ic_ir);

  const auto empty = compute_signal_metrics(FeaturePanel::zeros(w.market.calendar.days(), w.market.tickers),
                                            w.market, 5);
  EXPECT_EQ(empty.signal_coverage, 0.0);
  EXPECT_EQ(empty.notes.size(), 4u);
  EXPECT_TRUE(std::isfinite(empty.composite));
}

TEST(MetricsCsv, DecayColumns) {
  SynthConfig c;
  c.n_tickers = 10;
  c.n_days = 80;
  const auto w = build_world(c);
  const std::vector<int> hs = {1, 5};
  const auto csv = decay_csv(ic_decay("sentiment", oracle_panel(w, 0.0, 1), w.market, hs));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "horizon,ic_mean,ic_ir,t_stat,n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
