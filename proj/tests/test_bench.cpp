#include <cmath>
#include <map>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "newsalpha/bench/bench.hpp"
#include "newsalpha/bench/scenarios.hpp"
#include "newsalpha/core/rng.hpp"
#include "support.hpp"

using namespace newsalpha;
using testing_support::hand_market;

namespace {

double boost_two_sided_p(double t, double df) {
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

MarketData drifting(std::size_t tickers, std::size_t days, std::uint64_t seed = 5) {
  std::vector<std::vector<double>> closes(tickers, std::vector<double>(days));
  Rng rng(seed);
  for (auto& path : closes) {
    double c = 100.0;
    for (double& x : path) {
      x = c;
      c *= std::exp(0.001 + rng.normal(0, 0.01));
    }
  }
  return hand_market(closes);
}

PPOConfig tiny_ppo() {
  PPOConfig c;
  c.total_timesteps = 200;
  c.rollout_horizon = 100;
  c.minibatch = 50;
  c.epochs_per_update = 1;
  c.checkpoint_every = 100;
  return c;
}

AblationSpec tiny_spec(const MarketData& m) {
  AblationSpec s;
  s.train = {m.calendar[30], m.calendar[89]};
  s.validation = {m.calendar[90], m.calendar[109]};
  s.test = {m.calendar[110], m.calendar[139]};
  s.env.universe = m.tickers;
  s.env.episode = s.train;
  return s;
}

// Zero network with the buy logit raised on every head: buys each day.
Checkpoint always_buy(std::size_t width, std::size_t tickers) {
  PolicyParams p(width, tickers);
  for (std::size_t t = 0; t < tickers; ++t) p.bpi()[Eigen::Index(3 * t + 2)] = 1.0;
  ObsNormalizer norm(width);
  norm.set_update_enabled(false);
  return {0, p, norm};
}

}  // namespace

TEST(Sharpe, AlternatingReturnsGiveZero) {
  std::vector<double> r;
  for (int i = 0; i < 10; ++i) r.push_back(i % 2 ? -0.01 : 0.01);
  EXPECT_NEAR(sharpe(r), 0.0, 1e-12);
}

TEST(Sharpe, MeanAndStdExample) {
  // Two values with mean 0.001 and sample std 0.01.
  const double h = 0.01 / std::sqrt(2.0);
  const std::vector<double> r{0.001 - h, 0.001 + h};
  EXPECT_NEAR(sample_std(r), 0.01, 1e-15);
  EXPECT_NEAR(sharpe(r), 0.1 * std::sqrt(252.0), 1e-9);
  EXPECT_NEAR(sharpe(r), 1.5875, 1e-4);
}

TEST(Sharpe, ConstantAndShortInputs) {
  EXPECT_THROW(sharpe(std::vector<double>(5, 0.002)), SharpeUndefined);
  EXPECT_THROW(sharpe(std::vector<double>{0.01}), PreconditionError);
  EXPECT_FALSE(try_sharpe(std::vector<double>(3, 0.0)).has_value());
}

TEST(Sharpe, PositiveScalingLeavesItUnchanged) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(30), scaled(30);
    const double k = 0.1 + 10.0 * rng.uniform();
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = rng.normal(0.0005, 0.01);
      scaled[i] = k * r[i];
    }
    EXPECT_NEAR(sharpe(scaled), sharpe(r), 1e-9 * std::max(1.0, std::abs(sharpe(r))));
  }
}

TEST(MaxDrawdown, Examples) {
  EXPECT_DOUBLE_EQ(max_drawdown(std::vector<double>{100, 120, 90, 110}), 0.25);
  EXPECT_EQ(max_drawdown(std::vector<double>{1, 2, 3, 4}), 0.0);
  EXPECT_EQ(max_drawdown(std::vector<double>{7}), 0.0);
  EXPECT_THROW(max_drawdown(std::vector<double>{}), PreconditionError);
}

TEST(MaxDrawdown, InvariantUnderScalingAndBounded) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v{100.0}, scaled;
    for (int i = 0; i < 40; ++i) v.push_back(v.back() * std::exp(rng.normal(0, 0.03)));
    const double k = 0.01 + 50.0 * rng.uniform();
    for (double x : v) scaled.push_back(k * x);
    const double dd = max_drawdown(v);
    EXPECT_GE(dd, 0.0);
    EXPECT_LE(dd, 1.0);
    EXPECT_NEAR(max_drawdown(scaled), dd, 1e-12);
  }
}

TEST(IncompleteBeta, MatchesBoostOnAGrid) {
  for (double df : {1.0, 2.0, 4.0, 9.0, 30.0}) {
    for (double t : {0.0, 0.3, 0.76, 1.5, 2.776, 4.0, 12.0}) {
      EXPECT_NEAR(student_t_two_sided_p(t, df), boost_two_sided_p(t, df), 1e-10) << t << " " << df;
    }
  }
}

TEST(PairedT, HandExample) {
  const std::vector<double> a{0.1, 0.3, 0.2, 0.0, 0.4}, b(5, 0.0);
  const auto r = paired_t(a, b);
  // mean 0.2, sample std sqrt(0.025), se = sqrt(0.025 / 5).
  EXPECT_NEAR(r.t_stat, 0.2 / std::sqrt(0.005), 1e-12);
  EXPECT_NEAR(r.t_stat, 2.828, 1e-3);
  EXPECT_EQ(r.df, 4);
  EXPECT_NEAR(r.mean_diff, 0.2, 1e-15);
  EXPECT_NEAR(r.p_value, boost_two_sided_p(r.t_stat, 4), 1e-10);
  EXPECT_NEAR(r.p_value, 0.047, 1e-3);
}

TEST(PairedT, CriticalValueIdentity) {
  EXPECT_NEAR(student_t_two_sided_p(2.776, 4), 0.05, 1e-3);
}

TEST(PairedT, SwappingNegatesTAndKeepsP) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a[i] = rng.normal(0.5, 1.0);
      b[i] = rng.normal(0.0, 1.0);
    }
    const auto ab = paired_t(a, b), ba = paired_t(b, a);
    EXPECT_NEAR(ab.t_stat, -ba.t_stat, 1e-12);
    EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12);
    EXPECT_GE(ab.p_value, 0.0);
    EXPECT_LE(ab.p_value, 1.0);
  }
}

TEST(PairedT, Errors) {
  const std::vector<double> a{1, 2, 3};
  EXPECT_THROW(paired_t(a, a), DegenerateDiffs);
  EXPECT_THROW(paired_t(a, std::vector<double>{1, 2}), LengthMismatch);
  EXPECT_THROW(paired_t(std::vector<double>{1}, std::vector<double>{2}), PreconditionError);
}

TEST(BuyAndHold, DoublingAndFlat) {
  std::vector<double> up(10), flat(10, 50.0);
  for (int d = 0; d < 10; ++d) up[std::size_t(d)] = 100.0 * (1.0 + d / 9.0);
  const auto m = hand_market({up, flat});
  const DayRange all{m.calendar[0], m.calendar[9]};
  const auto a = buy_and_hold(m, "T0", all);
  ASSERT_EQ(a.size(), 10u);
  EXPECT_NEAR(total_return_pct(equity_values(a)), 100.0, 1e-9);
  const auto b = buy_and_hold(m, "T1", {m.calendar[2], m.calendar[6]});
  EXPECT_EQ(b.size(), 5u);
  EXPECT_EQ(total_return_pct(equity_values(b)), 0.0);
  EXPECT_FALSE(try_sharpe(daily_returns(equity_values(b))).has_value());
  EXPECT_THROW(buy_and_hold(m, "NOPE", all), UnknownTicker);
}

TEST(RegimeSplit, ConstantCalmVixLeavesHighVolEmpty) {
  const auto m = drifting(1, 40);
  const auto curve = buy_and_hold(m, "T0", {m.calendar[0], m.calendar[39]});
  EXPECT_THROW(regime_split({{"baseline", 0, curve}}, vix_series(m), 20.0), EmptyRegime);
}

TEST(RegimeSplit, PartitionsEveryReturnOnce) {
  std::vector<double> closes(60), vix(60);
  Rng rng(2);
  double c = 100.0;
  for (std::size_t d = 0; d < 60; ++d) {
    closes[d] = c;
    c *= std::exp(rng.normal(0, 0.01));
    vix[d] = d % 7 < 3 ? 25.0 : (d % 5 == 0 ? 20.0 : 14.0);  // 20 counts as high
  }
  const auto m = hand_market({closes}, vix);
  const auto curve = buy_and_hold(m, "T0", {m.calendar[0], m.calendar[59]});
  const auto table = regime_split({{"baseline", 0, curve}, {"llm_only", 0, curve}}, vix_series(m));
  ASSERT_EQ(table.rows.size(), 4u);
  std::size_t high = 0;
  for (std::size_t d = 1; d < 60; ++d) high += vix[d] >= 20.0;
  EXPECT_EQ(table.rows[0].regime, "high_vol");
  EXPECT_EQ(table.rows[0].n_days, high);
  EXPECT_EQ(table.rows[0].n_days + table.rows[1].n_days, 59u);
  // Identical curves give a zero gap in both regimes.
  for (const auto& s : table.summaries) {
    if (s.config == "llm_only") {
      ASSERT_TRUE(s.delta_sharpe.has_value());
      EXPECT_EQ(*s.delta_sharpe, 0.0);
    }
  }
}

TEST(CostSweep, FiveRowsAndMonotoneFixedTrace) {
  const auto m = drifting(2, 90);
  const auto panel = FeaturePanel::zeros(m.calendar.days(), m.tickers);
  EnvConfig e;
  e.universe = m.tickers;
  e.feature_mask = FeatureMask::baseline;
  e.episode = {m.calendar[30], m.calendar[89]};
  e.initial_cash = 1e7;  // buys are never cash-constrained
  const auto ckpt = always_buy(e.width(), 2);
  const auto rows = cost_sweep({&ckpt, e}, m, panel, {0, 5, 10, 20, 50});
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LT(rows[i].trace_final_value, rows[i - 1].trace_final_value);
    EXPECT_EQ(rows[i].trace_constrained_buys, 0u);
  }
  EXPECT_EQ(rows[0].final_value, rows[0].trace_final_value);
  const std::string csv = cost_sweep_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_THROW(cost_sweep({&ckpt, e}, m, panel, {10, 5}), PreconditionError);
}

TEST(CostSweep, ZeroTradePolicyIsCostFree) {
  const auto m = drifting(2, 90);
  const auto panel = FeaturePanel::zeros(m.calendar.days(), m.tickers);
  EnvConfig e;
  e.universe = m.tickers;
  e.feature_mask = FeatureMask::baseline;
  e.episode = {m.calendar[30], m.calendar[89]};
  PolicyParams zero(e.width(), 2);  // argmax tie-break sells, and there is nothing to sell
  ObsNormalizer norm(e.width());
  norm.set_update_enabled(false);
  const Checkpoint ckpt{0, zero, norm};
  const auto buyer = always_buy(e.width(), 2);
  const PolicyUnderTest other{&buyer, e};
  const auto rows = cost_sweep({&ckpt, e}, m, panel, {0, 5, 10, 20, 50}, &other);
  for (const auto& r : rows) {
    EXPECT_EQ(r.sharpe, rows[0].sharpe);  // flat curve: undefined at every level
    EXPECT_EQ(r.final_value, e.initial_cash);
    EXPECT_EQ(r.trace_final_value, e.initial_cash);
    EXPECT_TRUE(r.other_sharpe.has_value());
    EXPECT_FALSE(r.delta_sharpe.has_value());
  }
  EXPECT_GT(*rows[0].other_sharpe, *rows[4].other_sharpe);
}

TEST(AblationSpec, ValidatesRangesAndRoundTrips) {
  const auto m = drifting(2, 140);
  auto s = tiny_spec(m);
  EXPECT_NO_THROW(s.validate());
  const auto back = ablation_spec_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
  auto overlap = s;
  overlap.validation.first = s.train.last;
  EXPECT_THROW(overlap.validate(), ConfigError);
  auto no_base = s;
  no_base.configs = {FeatureMask::full};
  EXPECT_THROW(no_base.validate(), ConfigError);
  auto reversed = s;
  std::swap(reversed.test.first, reversed.test.last);
  EXPECT_THROW(reversed.validate(), ConfigError);
}

TEST(Ablation, CountsCellsAndEvaluations) {
  const auto m = drifting(2, 140);
  const auto panel = FeaturePanel::zeros(m.calendar.days(), m.tickers);
  const auto r = run_ablation(tiny_spec(m), m, panel, tiny_ppo());
  EXPECT_EQ(r.policies.size(), 20u);
  EXPECT_EQ(r.runs.size(), 40u);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.summaries.size(), 8u);
  for (const auto& run : r.runs) {
    EXPECT_GE(run.max_drawdown_pct, 0.0);
    EXPECT_LE(run.max_drawdown_pct, 100.0);
  }
  const std::string csv = results_csv(r.runs);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "config,seed,range,sharpe,return_pct,maxdd_pct");
}

TEST(Ablation, DeterministicAcrossRunsAndJobCounts) {
  const auto m = drifting(2, 140);
  const auto panel = FeaturePanel::zeros(m.calendar.days(), m.tickers);
  auto spec = tiny_spec(m);
  spec.configs = {FeatureMask::baseline, FeatureMask::macro_only};
  spec.seeds = {3, 42};
  const auto a = run_ablation(spec, m, panel, tiny_ppo(), 1);
  const auto b = run_ablation(spec, m, panel, tiny_ppo(), 2);
  EXPECT_EQ(results_csv(a.runs), results_csv(b.runs));
  EXPECT_EQ(summary_json(a).dump(), summary_json(b).dump());
  EXPECT_EQ(convergence_csv(a.policies), convergence_csv(b.policies));
}

TEST(Ablation, PairsOnlyMatchingSeeds) {
  // Seed 1 has no baseline run, so only seed 0 can be paired.
  std::vector<RunResult> runs{
      {"baseline", 0, "test", 1.0, 0, 0, {}},
      {"full", 0, "test", 1.5, 0, 0, {}},
      {"full", 1, "test", 9.0, 0, 0, {}},
  };
  const auto s = summarize_runs(runs, {FeatureMask::baseline, FeatureMask::full}, {0, 1});
  const auto& full_test = s[3];
  ASSERT_EQ(full_test.config, "full");
  ASSERT_EQ(full_test.range, "test");
  ASSERT_TRUE(full_test.delta_sharpe.has_value());
  EXPECT_DOUBLE_EQ(*full_test.delta_sharpe, 0.5);
  EXPECT_FALSE(full_test.paired.has_value());  // one pair is not enough
  EXPECT_FALSE(full_test.note.empty());
}

TEST(Scenarios, RegimeGapWorldHasBothRegimesInTheTestRange) {
  const auto s = regime_gap_scenario(0);
  EXPECT_NO_THROW(s.spec.validate());
  const auto& m = s.world.market;
  const auto [first, last] = m.day_span(s.spec.test);
  std::size_t high = 0;
  for (std::size_t d = first + 1; d <= last; ++d) high += m.macro[d].vix >= 20.0;
  EXPECT_GT(high, 20u);
  EXPECT_GT(last - first - high, 20u);
}
