#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "newsalpha/bench/stats.hpp"
#include "newsalpha/bench/ttest.hpp"
#include "newsalpha/core/io.hpp"
#include "newsalpha/ppo/ppo.hpp"
#include "newsalpha/tradenv/env.hpp"

namespace newsalpha {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index writes only
// its own output slot, so the result order never depends on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t next = 0;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= n) return;
          i = next++;
        }
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

inline std::vector<double> equity_values(const std::vector<EquityPoint>& curve) {
  std::vector<double> v;
  v.reserve(curve.size());
  for (const auto& p : curve) v.push_back(p.value);
  return v;
}

// Whole initial_cash (fractional units) at the first close of `range`, held.
inline std::vector<EquityPoint> buy_and_hold(const MarketData& market, std::string_view ticker,
                                             const DayRange& range, double initial_cash = 100000.0) {
  const auto t = market.ticker_index(ticker);
  if (!t) throw UnknownTicker("'" + std::string(ticker) + "' not in market");
  const auto [first, last] = market.day_span(range);
  const double units = initial_cash / market.close(first, *t);
  std::vector<EquityPoint> curve;
  for (std::size_t d = first; d <= last; ++d) curve.push_back({market.calendar[d], units * market.close(d, *t)});
  return curve;
}

struct RunResult {
  std::string config;
  std::uint64_t seed = 0;
  std::string range;  // "validation" or "test"
  std::optional<double> sharpe;  // empty when undefined (flat curve)
  double total_return_pct = 0.0;
  double max_drawdown_pct = 0.0;
  std::vector<EquityPoint> equity;
};

inline RunResult score_curve(std::string config, std::uint64_t seed, std::string range,
                             std::vector<EquityPoint> equity) {
  RunResult r{std::move(config), seed, std::move(range), std::nullopt, 0.0, 0.0, std::move(equity)};
  const auto v = equity_values(r.equity);
  if (v.size() >= 3) r.sharpe = try_sharpe(daily_returns(v));
  r.total_return_pct = total_return_pct(v);
  r.max_drawdown_pct = 100.0 * max_drawdown(v);
  return r;
}

struct AblationSpec {
  std::vector<FeatureMask> configs{kAllMasks.begin(), kAllMasks.end()};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 42};
  DayRange train;
  DayRange validation;
  DayRange test;
  EnvConfig env;  // universe and trading terms; mask and episode are set per cell

  void validate() const {
    if (configs.empty() || seeds.empty()) throw ConfigError("ablation needs configs and seeds");
    if (std::find(configs.begin(), configs.end(), FeatureMask::baseline) == configs.end()) {
      throw ConfigError("ablation needs the baseline config");
    }
    for (const auto* r : {&train, &validation, &test}) {
      if (r->last < r->first) throw ConfigError("ablation range is reversed");
    }
    if (!(train.last < validation.first) || !(validation.last < test.first)) {
      throw ConfigError("ablation ranges must be disjoint and ordered train < validation < test");
    }
  }
};

inline nlohmann::ordered_json to_json(const AblationSpec& s) {
  nlohmann::ordered_json j;
  std::vector<std::string> configs;
  for (auto c : s.configs) configs.emplace_back(to_string(c));
  j["configs"] = configs;
  j["seeds"] = s.seeds;
  j["train"] = day_range_to_json(s.train);
  j["validation"] = day_range_to_json(s.validation);
  j["test"] = day_range_to_json(s.test);
  j["env"] = to_json(s.env);
  return j;
}

inline AblationSpec ablation_spec_from_json(const nlohmann::json& j) {
  AblationSpec s;
  if (j.contains("configs")) {
    s.configs.clear();
    for (const auto& c : j.at("configs")) s.configs.push_back(parse_feature_mask(c.get<std::string>()));
  }
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  s.train = day_range_from_json(j.at("train"));
  s.validation = day_range_from_json(j.at("validation"));
  s.test = day_range_from_json(j.at("test"));
  nlohmann::json env = j.at("env");
  if (!env.contains("episode")) env["episode"] = day_range_to_json(s.train);
  s.env = env_config_from_json(env);
  s.validate();
  return s;
}

struct TrainedPolicy {
  FeatureMask config = FeatureMask::baseline;
  std::uint64_t seed = 0;
  Checkpoint final;
  std::vector<CurvePoint> curve;
};

struct ConfigSummary {
  std::string config;
  std::string range;
  std::size_t n = 0;  // seeds with a defined Sharpe
  double sharpe_mean = 0.0;
  double sharpe_std = 0.0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double maxdd_mean = 0.0;
  std::optional<double> delta_sharpe;  // vs baseline, seed-aligned mean difference
  std::optional<PairedTestResult> paired;
  std::string note;
};

struct CellFailure {
  std::string config;
  std::uint64_t seed = 0;
  std::string error;
};

struct AblationResult {
  std::vector<RunResult> runs;  // config-major, then seed, then validation/test
  std::vector<TrainedPolicy> policies;
  std::vector<ConfigSummary> summaries;
  std::vector<CellFailure> failures;

  const TrainedPolicy* policy(FeatureMask config, std::uint64_t seed) const {
    for (const auto& p : policies) {
      if (p.config == config && p.seed == seed) return &p;
    }
    return nullptr;
  }
};

inline EnvConfig cell_env(const AblationSpec& spec, FeatureMask mask, const DayRange& range) {
  EnvConfig e = spec.env;
  e.feature_mask = mask;
  e.episode = range;
  return e;
}

namespace detail {

inline double mean_or_zero(const std::vector<double>& xs) { return xs.empty() ? 0.0 : sample_mean(xs); }
inline double std_or_zero(const std::vector<double>& xs) { return xs.size() < 2 ? 0.0 : sample_std(xs); }

}  // namespace detail

// Seed-aligned summaries; paired tests only ever pair the same seed.
inline std::vector<ConfigSummary> summarize_runs(const std::vector<RunResult>& runs,
                                                 const std::vector<FeatureMask>& configs,
                                                 const std::vector<std::uint64_t>& seeds) {
  std::map<std::tuple<std::string, std::string, std::uint64_t>, const RunResult*> index;
  for (const auto& r : runs) index[{r.config, r.range, r.seed}] = &r;
  std::vector<ConfigSummary> out;
  for (const char* range : {"validation", "test"}) {
    for (FeatureMask c : configs) {
      ConfigSummary s;
      s.config = to_string(c);
      s.range = range;
      std::vector<double> sharpes, returns, dds, a, b;
      for (auto seed : seeds) {
        const auto it = index.find({s.config, range, seed});
        if (it == index.end()) continue;
        const RunResult& r = *it->second;
        returns.push_back(r.total_return_pct);
        dds.push_back(r.max_drawdown_pct);
        if (r.sharpe) sharpes.push_back(*r.sharpe);
        if (c == FeatureMask::baseline) continue;
        const auto base = index.find({to_string(FeatureMask::baseline), range, seed});
        if (base != index.end() && r.sharpe && base->second->sharpe) {
          a.push_back(*r.sharpe);
          b.push_back(*base->second->sharpe);
        }
      }
      s.n = sharpes.size();
      s.sharpe_mean = detail::mean_or_zero(sharpes);
      s.sharpe_std = detail::std_or_zero(sharpes);
      s.return_mean = detail::mean_or_zero(returns);
      s.return_std = detail::std_or_zero(returns);
      s.maxdd_mean = detail::mean_or_zero(dds);
      if (c != FeatureMask::baseline && !a.empty()) {
        std::vector<double> d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        s.delta_sharpe = sample_mean(d);
        try {
          s.paired = paired_t(a, b);
        } catch (const Error& e) {
          s.note = e.what();
        }
      }
      if (sharpes.size() < returns.size()) {
        s.note += (s.note.empty() ? "" : "; ") + std::to_string(returns.size() - sharpes.size()) +
                  " run(s) with undefined Sharpe";
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

// Trains every (config, seed) cell on the train range and scores the final
// policy, frozen and deterministic, on validation and test. A failing cell is
// recorded and skipped.
inline AblationResult run_ablation(const AblationSpec& spec, const MarketData& market,
                                   const FeaturePanel& panel, const PPOConfig& ppo,
                                   std::size_t jobs = 1) {
  spec.validate();
  ppo.validate();
  struct Cell {
    std::optional<TrainedPolicy> policy;
    std::vector<RunResult> runs;
    std::optional<CellFailure> failure;
  };
  const std::size_t n_cells = spec.configs.size() * spec.seeds.size();
  std::vector<Cell> cells(n_cells);
  parallel_for(n_cells, jobs, [&](std::size_t i) {
    const FeatureMask mask = spec.configs[i / spec.seeds.size()];
    const std::uint64_t seed = spec.seeds[i % spec.seeds.size()];
    Cell& cell = cells[i];
    try {
      const EnvConfig train_env = cell_env(spec, mask, spec.train);
      const EnvConfig val_env = cell_env(spec, mask, spec.validation);
      const EnvConfig test_env = cell_env(spec, mask, spec.test);
      ObsNormalizer norm(train_env.width());
      TrainResult tr = train([&] { return TradingEnv(train_env, market, panel); },
                             [&] { return TradingEnv(val_env, market, panel); }, norm, ppo, seed);
      Checkpoint final{ppo.total_timesteps, tr.final_params, tr.final_normalizer};
      for (const auto& [label, cfg] : {std::pair{"validation", &val_env}, std::pair{"test", &test_env}}) {
        auto ep = evaluate_policy(final.params, final.normalizer, TradingEnv(*cfg, market, panel));
        cell.runs.push_back(score_curve(to_string(mask), seed, label, std::move(ep.equity)));
      }
      cell.policy = TrainedPolicy{mask, seed, std::move(final), std::move(tr.curve)};
    } catch (const Error& e) {
      cell.failure = CellFailure{to_string(mask), seed, e.what()};
      cell.runs.clear();
    }
  });
  AblationResult result;
  for (auto& cell : cells) {
    for (auto& r : cell.runs) result.runs.push_back(std::move(r));
    if (cell.policy) result.policies.push_back(std::move(*cell.policy));
    if (cell.failure) result.failures.push_back(std::move(*cell.failure));
  }
  result.summaries = summarize_runs(result.runs, spec.configs, spec.seeds);
  return result;
}

// --- regime split ------------------------------------------------------------

struct RegimeRow {
  std::string config;
  std::uint64_t seed = 0;
  std::string regime;  // "high_vol" or "low_vol"
  std::size_t n_days = 0;
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> sharpe;
};

struct RegimeSummary {
  std::string config;
  std::string regime;
  double sharpe_mean = 0.0;          // over seeds with a defined Sharpe
  std::optional<double> delta_sharpe;  // vs baseline, seed-aligned
};

struct RegimeTable {
  std::vector<RegimeRow> rows;
  std::vector<RegimeSummary> summaries;
};

struct LabelledCurve {
  std::string config;
  std::uint64_t seed = 0;
  std::vector<EquityPoint> equity;
};

// Each daily return (close d-1 -> close d) is classed by the VIX on day d:
// high_vol if vix >= threshold. Every return lands in exactly one regime.
inline std::pair<std::vector<double>, std::vector<double>> split_returns(
    const std::vector<EquityPoint>& equity, const std::map<Date, double>& vix, double threshold) {
  std::vector<double> high, low;
  for (std::size_t i = 1; i < equity.size(); ++i) {
    const auto it = vix.find(equity[i].date);
    if (it == vix.end()) throw PreconditionError("no VIX value for " + equity[i].date.iso());
    const double r = equity[i].value / equity[i - 1].value - 1.0;
    (it->second >= threshold ? high : low).push_back(r);
  }
  return {high, low};
}

inline RegimeTable regime_split(const std::vector<LabelledCurve>& curves,
                                const std::map<Date, double>& vix, double threshold = 20.0) {
  RegimeTable table;
  for (const auto& c : curves) {
    const auto [high, low] = split_returns(c.equity, vix, threshold);
    for (const auto& [name, rets] : {std::pair{"high_vol", &high}, std::pair{"low_vol", &low}}) {
      if (rets->size() < 2) {
        throw EmptyRegime(std::string(name) + " has " + std::to_string(rets->size()) + " day(s) for " +
                          c.config + " seed " + std::to_string(c.seed));
      }
      RegimeRow row{c.config, c.seed, name, rets->size(), sample_mean(*rets), sample_std(*rets),
                    try_sharpe(*rets)};
      table.rows.push_back(std::move(row));
    }
  }
  std::vector<std::string> configs;
  for (const auto& r : table.rows) {
    if (std::find(configs.begin(), configs.end(), r.config) == configs.end()) configs.push_back(r.config);
  }
  auto find = [&](const std::string& config, std::uint64_t seed, const std::string& regime) -> const RegimeRow* {
    for (const auto& r : table.rows) {
      if (r.config == config && r.seed == seed && r.regime == regime) return &r;
    }
    return nullptr;
  };
  for (const char* regime : {"high_vol", "low_vol"}) {
    for (const auto& config : configs) {
      RegimeSummary s{config, regime, 0.0, std::nullopt};
      std::vector<double> sharpes, deltas;
      for (const auto& r : table.rows) {
        if (r.config != config || r.regime != regime || !r.sharpe) continue;
        sharpes.push_back(*r.sharpe);
        const RegimeRow* base = find("baseline", r.seed, regime);
        if (config != "baseline" && base && base->sharpe) deltas.push_back(*r.sharpe - *base->sharpe);
      }
      s.sharpe_mean = detail::mean_or_zero(sharpes);
      if (!deltas.empty()) s.delta_sharpe = sample_mean(deltas);
      table.summaries.push_back(std::move(s));
    }
  }
  return table;
}

inline std::map<Date, double> vix_series(const MarketData& market) {
  std::map<Date, double> out;
  for (std::size_t d = 0; d < market.n_days(); ++d) out[market.calendar[d]] = market.macro[d].vix;
  return out;
}

// --- cost sweep ----------------------------------------------------------------

struct CostSweepRow {
  double cost_bp = 0.0;
  std::optional<double> sharpe;  // policy re-run at this cost
  double total_return_pct = 0.0;
  double final_value = 0.0;
  double trace_final_value = 0.0;  // fixed action trace replayed at this cost
  std::optional<double> trace_sharpe;
  std::size_t trace_constrained_buys = 0;
  std::optional<double> other_sharpe;  // second policy, when supplied
  std::optional<double> delta_sharpe;  // this policy minus the second
};

struct PolicyUnderTest {
  const Checkpoint* policy = nullptr;
  EnvConfig env;  // mask and episode of that policy; cost_bp is overridden
};

// One frozen policy evaluated (deterministic actions) at every cost level.
// The fixed trace is the action sequence the policy chose at the first level.
inline std::vector<CostSweepRow> cost_sweep(const PolicyUnderTest& subject, const MarketData& market,
                                            const FeaturePanel& panel, const std::vector<double>& levels,
                                            const PolicyUnderTest* other = nullptr) {
  if (levels.empty() || !std::is_sorted(levels.begin(), levels.end())) {
    throw PreconditionError("cost levels must be non-empty and ascending");
  }
  auto run = [&](const PolicyUnderTest& p, double bp) {
    EnvConfig e = p.env;
    e.cost_bp = bp;
    return evaluate_policy(p.policy->params, p.policy->normalizer, TradingEnv(e, market, panel));
  };
  std::vector<ActionVector> trace;
  std::vector<CostSweepRow> rows;
  for (double bp : levels) {
    CostSweepRow row;
    row.cost_bp = bp;
    const auto ep = run(subject, bp);
    if (trace.empty()) trace = ep.actions;
    const auto v = ep.values();
    row.sharpe = try_sharpe(daily_returns(v));
    row.total_return_pct = total_return_pct(v);
    row.final_value = v.back();
    EnvConfig e = subject.env;
    e.cost_bp = bp;
    const auto replay = replay_actions(TradingEnv(e, market, panel), trace);
    const auto rv = replay.values();
    row.trace_final_value = rv.back();
    row.trace_sharpe = try_sharpe(daily_returns(rv));
    for (const auto& s : replay.steps) row.trace_constrained_buys += s.constrained_buys;
    if (other) {
      row.other_sharpe = try_sharpe(daily_returns(run(*other, bp).values()));
      if (row.sharpe && row.other_sharpe) row.delta_sharpe = *row.sharpe - *row.other_sharpe;
    }
    rows.push_back(row);
  }
  return rows;
}

// --- report emission -------------------------------------------------------------

inline std::string opt_cell(const std::optional<double>& v) { return v ? io::fmt_double(*v) : ""; }

inline std::string results_csv(const std::vector<RunResult>& runs) {
  std::string out = "config,seed,range,sharpe,return_pct,maxdd_pct\n";
  for (const auto& r : runs) {
    out += r.config + "," + std::to_string(r.seed) + "," + r.range + "," + opt_cell(r.sharpe) + "," +
           io::fmt_double(r.total_return_pct) + "," + io::fmt_double(r.max_drawdown_pct) + "\n";
  }
  return out;
}

inline nlohmann::ordered_json summary_json(const AblationResult& r) {
  nlohmann::ordered_json j;
  j["summaries"] = nlohmann::ordered_json::array();
  for (const auto& s : r.summaries) {
    nlohmann::ordered_json e;
    e["config"] = s.config;
    e["range"] = s.range;
    e["n"] = s.n;
    e["sharpe_mean"] = s.sharpe_mean;
    e["sharpe_std"] = s.sharpe_std;
    e["return_mean"] = s.return_mean;
    e["return_std"] = s.return_std;
    e["maxdd_mean"] = s.maxdd_mean;
    e["delta_sharpe"] = s.delta_sharpe ? nlohmann::ordered_json(*s.delta_sharpe) : nlohmann::ordered_json();
    e["paired_t"] = s.paired ? to_json(*s.paired) : nlohmann::ordered_json();
    if (!s.note.empty()) e["note"] = s.note;
    j["summaries"].push_back(std::move(e));
  }
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : r.failures) {
    j["failures"].push_back({{"config", f.config}, {"seed", f.seed}, {"error", f.error}});
  }
  return j;
}

inline std::string equity_curves_csv(const std::vector<LabelledCurve>& curves) {
  std::string out = "config,seed,date,value\n";
  for (const auto& c : curves) {
    for (const auto& p : c.equity) {
      out += c.config + "," + std::to_string(c.seed) + "," + p.date.iso() + "," + io::fmt_double(p.value) + "\n";
    }
  }
  return out;
}

// Inverse of equity_curves_csv; curves keep their first-appearance order.
inline std::vector<LabelledCurve> parse_equity_curves_csv(std::string_view text) {
  std::vector<LabelledCurve> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto c = io::split(lines[i], ',');
    if (c.size() != 4) throw ParseError(i + 1, "expected config,seed,date,value");
    const std::uint64_t seed = std::stoull(c[1]);
    if (out.empty() || out.back().config != c[0] || out.back().seed != seed) {
      out.push_back({c[0], seed, {}});
    }
    out.back().equity.push_back({Date::parse(c[2]), io::parse_double(c[3])});
  }
  return out;
}

inline std::string convergence_csv(const std::vector<TrainedPolicy>& policies) {
  std::string out = "config,seed,timestep,eval_sharpe,eval_return\n";
  for (const auto& p : policies) {
    for (const auto& c : p.curve) {
      out += std::string(to_string(p.config)) + "," + std::to_string(p.seed) + "," +
             std::to_string(c.timestep) + "," + opt_cell(c.eval_sharpe) + "," + io::fmt_double(c.eval_return) + "\n";
    }
  }
  return out;
}

inline std::string regime_csv(const RegimeTable& t) {
  std::string out = "config,seed,regime,n_days,mean,std,sharpe\n";
  for (const auto& r : t.rows) {
    out += r.config + "," + std::to_string(r.seed) + "," + r.regime + "," + std::to_string(r.n_days) + "," +
           io::fmt_double(r.mean) + "," + io::fmt_double(r.std) + "," + opt_cell(r.sharpe) + "\n";
  }
  return out;
}

inline std::string cost_sweep_csv(const std::vector<CostSweepRow>& rows) {
  std::string out =
      "cost_bp,sharpe,return_pct,final_value,trace_final_value,trace_sharpe,trace_constrained_buys,"
      "other_sharpe,delta_sharpe\n";
  for (const auto& r : rows) {
    out += io::fmt_double(r.cost_bp) + "," + opt_cell(r.sharpe) + "," + io::fmt_double(r.total_return_pct) +
           "," + io::fmt_double(r.final_value) + "," + io::fmt_double(r.trace_final_value) + "," +
           opt_cell(r.trace_sharpe) + "," + std::to_string(r.trace_constrained_buys) + "," +
           opt_cell(r.other_sharpe) + "," + opt_cell(r.delta_sharpe) + "\n";
  }
  return out;
}

// Test-range equity curves of every trained policy, in run order.
inline std::vector<LabelledCurve> test_curves(const AblationResult& r) {
  std::vector<LabelledCurve> out;
  for (const auto& run : r.runs) {
    if (run.range == "test") out.push_back({run.config, run.seed, run.equity});
  }
  return out;
}

}  // namespace newsalpha
