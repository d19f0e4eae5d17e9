// Acceptance run: one gtest per criterion, each printing a single
// "CRITERION n PASS|FAIL" line. ctest runs them one filter at a time.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "newsalpha/bench/scenarios.hpp"
#include "newsalpha/cli/app.hpp"
#include "newsalpha/metrics/signal.hpp"
#include "newsalpha/promptopt/loop.hpp"
#include "support.hpp"

using namespace newsalpha;
namespace fs = std::filesystem;

#ifndef NEWSALPHA_TOOL_PATH
#define NEWSALPHA_TOOL_PATH ""
#endif

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void criterion(int n, const char* name, const std::function<Verdict()>& body) {
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  std::printf("CRITERION %2d %s  %s: %s\n", n, v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
  std::fflush(stdout);
  EXPECT_TRUE(v.pass) << v.detail;
}

// Daily ICs with the requested IR exactly (sample statistics).
std::vector<double> ics_with_ir(double ir, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / double(n - 1));
  const double scale = 0.05;
  for (double& v : x) v = ((v - mean) / sd + ir) * scale;
  return x;
}

// Rank-then-Pearson written out longhand: mid-rank by counting.
double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
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
  const auto rx = ranks(x), ry = ranks(y);
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

PromptTemplate noisy_template(const std::string& id, double sigma) {
  return PromptTemplate::make(id, "Extract features for {{.Ticker}} on {{.Date}}. [[oracle-noise=" +
                                      io::fmt_double(sigma) + "]]");
}

int run_tool(const std::vector<std::string>& args) {
  const std::string tool = NEWSALPHA_TOOL_PATH;
  if (tool.empty()) {
    std::ostringstream out, err;
    return cli::dispatch(args, out, err);
  }
  std::string cmd = "'" + tool + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::vector<std::uint64_t> kSeeds{0, 1, 2, 3, 42};

}  // namespace

TEST(Acceptance, Criterion1_TStatIdentity) {
  criterion(1, "t-stat identity", [] {
    const double a = ic_summary(ics_with_ir(0.093, 117, 1)).t_stat;
    const double b = ic_summary(ics_with_ir(0.233, 117, 2)).t_stat;
    return Verdict{std::abs(a - 1.00) <= 0.01 && std::abs(b - 2.52) <= 0.01,
                   fmt("t(0.093, 117) = %.4f, t(0.233, 117) = %.4f", a, b)};
  });
}

TEST(Acceptance, Criterion2_GateReproduction) {
  criterion(2, "gate reproduction", [] {
    SignalMetrics m;
    m.signal_coverage = 0.408;
    m.ic_report.ic_ir = 0.104;
    m.quintile_spread = 0.002;
    m.hit_rate = 0.714;
    const auto r = evaluate_gates(m);
    std::string detail;
    int passed = 0;
    for (const auto& g : r.gates) {
      passed += g.pass;
      detail += g.name + (g.pass ? "=PASS " : "=FAIL ");
    }
    return Verdict{passed == 4 && r.gates.size() == 4 && r.overall_pass, detail};
  });
}

TEST(Acceptance, Criterion3_SpearmanOracle) {
  criterion(3, "spearman oracle", [] {
    Rng rng(3);
    double worst = 0.0;
    int compared = 0, degenerate = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      const std::size_t n = std::size_t(rng.uniform_int(3, 10));  // spearman needs 3 pairs
      const int levels = int(rng.uniform_int(2, 6));  // few levels -> many ties
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = double(rng.uniform_int(0, levels));
        y[i] = double(rng.uniform_int(0, levels));
      }
      if (is_constant(x) || is_constant(y)) {
        try {
          spearman(x, y);
          return Verdict{false, "constant input did not throw"};
        } catch (const DegenerateInput&) {
          ++degenerate;
        }
        continue;
      }
      worst = std::max(worst, std::abs(spearman(x, y) - brute_spearman(x, y)));
      ++compared;
    }
    return Verdict{worst <= 1e-12, fmt("%d vectors compared, %d degenerate, max |diff| = %.3g", compared,
                                       degenerate, worst)};
  });
}

TEST(Acceptance, Criterion4_PlantedSignalRecovery) {
  criterion(4, "planted signal recovery", [] {
    const SyntheticWorld world = build_world(SynthConfig{});
    const FeaturePanel panel = oracle_panel(world, 0.0, 1);
    const auto m = compute_signal_metrics(panel, world.market, 5);
    const std::vector<int> horizons{1, 2, 3, 5, 7, 10, 15, 20};
    const auto decay = ic_decay("sentiment", panel, world.market, horizons);
    int peak = 0;
    double best = -1e300, at5 = 0.0, at20 = 0.0;
    for (const auto& p : decay) {
      if (!p.report) continue;
      if (p.report->ic_mean > best) {
        best = p.report->ic_mean;
        peak = p.horizon;
      }
      if (p.horizon == 5) at5 = p.report->ic_mean;
      if (p.horizon == 20) at20 = p.report->ic_mean;
    }
    const bool ok = m.ic_report.t_stat > 3.0 && peak >= 3 && peak <= 10 && at20 < at5;
    return Verdict{ok, fmt("%zux%zu, t(5) = %.2f, decay peak at h=%d, IC(5) = %.4f, IC(20) = %.4f",
                           world.market.n_tickers(), world.market.n_days(), m.ic_report.t_stat, peak, at5,
                           at20)};
  });
}

TEST(Acceptance, Criterion5_PromptLoopSelection) {
  criterion(5, "prompt-loop selection", [] {
    const std::vector<std::pair<std::string, double>> variants{{"clean", 0.0}, {"half", 0.5}, {"loud", 1.0}};
    int clean = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      SynthConfig c;
      c.seed = 1000 + trial;
      const SyntheticWorld world = build_world(c);
      EventStore store(world.market.calendar);
      ingest_world(store, world);
      OracleClient client(trial);
      ExtractionCache cache;
      FeatureExtractor extractor(client, cache);
      const auto& cal = world.market.calendar;
      LoopConfig loop({cal[0], cal[149]}, {cal[150], cal[249]}, world.market.tickers);
      loop.store = &store;
      loop.extractor = &extractor;
      loop.market = &world.market;
      loop.macro_source = macro_lookup(world.market);
      // Rotate which variant is the baseline so order cannot decide the outcome.
      std::vector<PromptTemplate> order;
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& [id, sigma] = variants[(trial + k) % 3];
        order.push_back(noisy_template(id, sigma));
      }
      auto proposer = ScriptedProposer::from_templates({order[1], order[2]});
      loop.proposer = &proposer;
      const auto r = optimize(order[0], loop);
      clean += !r.no_pass && r.frozen.tmpl.id == "clean";
    }
    return Verdict{clean >= 19, fmt("sigma=0 frozen in %d/20 trials", clean)};
  });
}

TEST(Acceptance, Criterion6_GradientCheck) {
  criterion(6, "PPO gradient check", [] {
    const std::size_t width = 6, tickers = 2, n = 24;
    PolicyParams params = PolicyParams::init(width, tickers, 11);
    Rng rng(12);
    for (Eigen::Index i = 0; i < params.wpi().size(); ++i) params.wpi().data()[i] = rng.normal(0, 0.5);
    RolloutBatch batch;
    batch.observations = Eigen::MatrixXd(Eigen::Index(width), Eigen::Index(n));
    batch.actions = Eigen::MatrixXi(Eigen::Index(tickers), Eigen::Index(n));
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t k = 0; k < width; ++k) batch.observations(Eigen::Index(k), Eigen::Index(s)) = rng.normal();
      for (std::size_t t = 0; t < tickers; ++t) batch.actions(Eigen::Index(t), Eigen::Index(s)) = int(rng.uniform_int(0, 2));
    }
    // Old log-probs placed so every ratio sits well away from the clip kinks.
    const ForwardCache cache = forward_batch(params, batch.observations);
    std::vector<double> adv;
    std::vector<std::size_t> idx;
    for (std::size_t s = 0; s < n; ++s) {
      double logp = 0.0;
      for (std::size_t t = 0; t < tickers; ++t) {
        const auto lp = log_softmax3(cache.logits.block(Eigen::Index(3 * t), Eigen::Index(s), 3, 1));
        logp += lp[batch.actions(Eigen::Index(t), Eigen::Index(s))];
      }
      batch.log_probs.push_back(logp + (s % 3 == 0 ? rng.uniform(-0.05, 0.05) : (s % 3 == 1 ? 0.7 : -0.7)));
      batch.values.push_back(0.0);
      batch.rewards.push_back(0.0);
      batch.dones.push_back(0);
      batch.returns.push_back(rng.normal(0, 2));
      adv.push_back(rng.normal());
      idx.push_back(s);
    }
    batch.advantages = adv;
    const PPOConfig cfg;
    Eigen::VectorXd analytic;
    loss_and_gradient(params, batch, adv, idx, cfg, &analytic);
    Eigen::VectorXd numeric(analytic.size());
    PolicyParams p = params;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      const double keep = p.theta()[i];
      p.theta()[i] = keep + h;
      const double up = loss_and_gradient(p, batch, adv, idx, cfg, nullptr).total;
      p.theta()[i] = keep - h;
      const double down = loss_and_gradient(p, batch, adv, idx, cfg, nullptr).total;
      p.theta()[i] = keep;
      numeric[i] = (up - down) / (2 * h);
    }
    const double rel = (analytic - numeric).norm() / (analytic.norm() + numeric.norm());
    return Verdict{rel < 1e-4, fmt("%ld parameters, relative error %.3g", long(numeric.size()), rel)};
  });
}

TEST(Acceptance, Criterion7_Learnability) {
  criterion(7, "learnability", [] {
    const TrendScenario s = trend_scenario();
    const FeaturePanel panel = FeaturePanel::zeros(s.market.calendar.days(), s.market.tickers);
    PPOConfig cfg;
    cfg.total_timesteps = 50000;
    cfg.checkpoint_every = 10000;
    int improved = 0;
    std::string detail;
    for (std::uint64_t seed : kSeeds) {
      ObsNormalizer norm(s.train_env.width());
      const auto r = train([&] { return TradingEnv(s.train_env, s.market, panel); },
                           [&] { return TradingEnv(s.validation_env, s.market, panel); }, norm, cfg, seed);
      const double first = r.curve.front().eval_return, last = r.curve.back().eval_return;
      improved += last > first;
      detail += fmt("seed %llu %.2f%%->%.2f%%; ", (unsigned long long)seed, first, last);
    }
    return Verdict{improved >= 4, fmt("%d/5 improved: ", improved) + detail};
  });
}

TEST(Acceptance, Criterion8_AccountingConservation) {
  criterion(8, "accounting conservation", [] {
    SynthConfig c;
    c.n_tickers = 10;
    c.n_days = 200;
    const SyntheticWorld world = build_world(c);
    const FeaturePanel panel = oracle_panel(world, 0.0, 1);
    EnvConfig e;
    e.universe = world.market.tickers;
    e.feature_mask = FeatureMask::full;
    e.episode = {world.market.calendar[30], world.market.calendar[199]};
    e.initial_cash = 20000;
    TradingEnv env(e, world.market, panel);
    Rng rng(8);
    double worst = 0.0;
    bool cash_ok = true;
    int steps = 0;
    for (std::uint64_t episode = 0; steps < 10000; ++episode) {
      env.reset(episode);
      double sum_dv = 0.0, sum_costs = 0.0;
      for (bool done = false; !done && steps < 10000; ++steps) {
        ActionVector a(e.universe.size());
        for (int& x : a) x = int(rng.uniform_int(-1, 1));
        const auto r = env.step(a);
        done = r.done;
        sum_dv += r.info.market_pnl;
        sum_costs += r.info.costs;
        const auto& st = env.state();
        double holdings = 0.0;
        for (std::size_t t = 0; t < e.universe.size(); ++t) {
          holdings += double(st.portfolio.holdings[t]) * world.market.close(st.day, t);
        }
        worst = std::max(worst, std::abs(st.portfolio.cash + holdings - (e.initial_cash + sum_dv - sum_costs)));
        cash_ok = cash_ok && st.portfolio.cash >= 0.0;
      }
    }
    const double tol = 1e-9;
    return Verdict{worst <= tol && cash_ok,
                   fmt("%d steps, max |cash + holdings*close - (initial + sum dV - costs)| = %.3g (tol %.0e), "
                       "cash never negative: %s",
                       steps, worst, tol, cash_ok ? "yes" : "no")};
  });
}

TEST(Acceptance, Criterion9_CostSweepStructure) {
  criterion(9, "cost-sweep structure", [] {
    TrendScenario s = trend_scenario();
    s.train_env.initial_cash = 1e7;  // keeps the replayed trace free of cash-constrained buys
    s.validation_env.initial_cash = 1e7;
    const FeaturePanel panel = FeaturePanel::zeros(s.market.calendar.days(), s.market.tickers);
    PPOConfig cfg;
    cfg.total_timesteps = 4096;
    cfg.checkpoint_every = 2048;
    ObsNormalizer norm(s.train_env.width());
    const auto r = train([&] { return TradingEnv(s.train_env, s.market, panel); },
                         [&] { return TradingEnv(s.validation_env, s.market, panel); }, norm, cfg, 0);
    const Checkpoint frozen{cfg.total_timesteps, r.final_params, r.final_normalizer};
    const auto rows = cost_sweep({&frozen, s.validation_env}, s.market, panel, {0, 5, 10, 20, 50});
    bool monotone = true;
    std::size_t constrained = 0;
    std::string detail;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0) monotone = monotone && rows[i].trace_final_value <= rows[i - 1].trace_final_value;
      constrained += rows[i].trace_constrained_buys;
      detail += fmt("%gbp:%.2f ", rows[i].cost_bp, rows[i].trace_final_value);
    }
    const std::string csv = cost_sweep_csv(rows);
    const long lines = std::count(csv.begin(), csv.end(), '\n');
    return Verdict{rows.size() == 5 && lines == 6 && monotone,
                   fmt("%zu rows, csv %ld lines, constrained buys %zu, trace ", rows.size(), lines, constrained) +
                       detail};
  });
}

TEST(Acceptance, Criterion10_PairedTTest) {
  criterion(10, "paired t-test", [] {
    const double p1 = student_t_two_sided_p(0.76, 4);
    const double p2 = student_t_two_sided_p(2.776, 4);
    return Verdict{std::abs(p1 - 0.4873) <= 1e-3 && std::abs(p2 - 0.05) <= 1e-3,
                   fmt("p(0.76, 4) = %.5f (target 0.4873), p(2.776, 4) = %.5f (target 0.05)", p1, p2)};
  });
}

TEST(Acceptance, Criterion11_RegimeGap) {
  criterion(11, "regime gap in silico", [] {
    PPOConfig ppo;
    ppo.total_timesteps = 50000;
    std::vector<double> shock, calm;
    for (std::uint64_t seed : kSeeds) {
      const RegimeGapScenario s = regime_gap_scenario(seed);
      const auto result = run_ablation(s.spec, s.world.market, s.panel, ppo, 1);
      if (!result.failures.empty()) return Verdict{false, "ablation cell failed: " + result.failures[0].error};
      const auto table = regime_split(test_curves(result), vix_series(s.world.market), 20.0);
      for (const auto& row : table.summaries) {
        if (row.config != "llm_only" || !row.delta_sharpe) continue;
        (row.regime == "high_vol" ? shock : calm).push_back(*row.delta_sharpe);
      }
    }
    if (shock.size() != kSeeds.size() || calm.size() != kSeeds.size()) {
      return Verdict{false, "missing regime deltas"};
    }
    const double ms = sample_mean(shock), mc = sample_mean(calm);
    std::string per;
    for (std::size_t i = 0; i < shock.size(); ++i) per += fmt("(%.2f, %.2f) ", shock[i], calm[i]);
    return Verdict{ms < 0.0 && mc > 0.0,
                   fmt("mean llm_only dSharpe: shock %.3f, calm %.3f; per seed (shock, calm) ", ms, mc) + per};
  });
}

TEST(Acceptance, Criterion12_EndToEndDeterminism) {
  criterion(12, "end-to-end determinism", [] {
    testing_support::TempDir dir;
    auto p = [&](const std::string& rel) { return (dir / rel).string(); };
    io::write_atomic(dir / "prompt.txt", "Extract features for {{.Ticker}} on {{.Date}}.");
    if (run_tool({"synth", "--scenario", "regime-gap", "--seed", "0", "--out", p("synth")}) != 0 ||
        run_tool({"ingest", "--market", p("synth/market"), "--replay", p("synth/items.jsonl"), "--out",
                  p("ingest")}) != 0 ||
        run_tool({"extract", "--store", p("ingest/store"), "--market", p("synth/market"), "--template",
                  p("prompt.txt"), "--out", p("extract")}) != 0) {
      return Verdict{false, "pipeline before ablate failed"};
    }
    auto cfg = nlohmann::ordered_json::parse(io::read_file(dir / "synth/ablate.json"));
    cfg["spec"]["configs"] = {"baseline", "llm_only", "macro_only", "full"};
    cfg["spec"]["seeds"] = kSeeds;
    cfg["ppo"]["total_timesteps"] = 10000;  // reduced from the default to bound the runtime
    cfg["ppo"]["checkpoint_every"] = 5000;
    io::write_atomic(dir / "ablate.json", cfg.dump(2));
    if (run_tool({"ablate", "--config", p("ablate.json"), "--market", p("synth/market"), "--panel",
                  p("extract/panel"), "--out", p("first")}) != 0) {
      return Verdict{false, "ablate failed"};
    }
    const int rc = run_tool({"rerun", "--manifest", p("first/manifest.json"), "--out", p("second")});
    if (rc != 0) return Verdict{false, fmt("rerun exited %d", rc)};
    const std::string a = io::read_file(dir / "first/results.csv");
    const std::string b = io::read_file(dir / "second/results.csv");
    const long rows = std::count(a.begin(), a.end(), '\n') - 1;
    return Verdict{a == b && rows == 40,
                   fmt("results.csv %s across rerun (%ld rows, %zu bytes)", a == b ? "identical" : "differs", rows,
                       a.size())};
  });
}

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
