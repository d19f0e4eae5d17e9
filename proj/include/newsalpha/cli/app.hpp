#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "newsalpha/backfill/adapter.hpp"
#include "newsalpha/backfill/store.hpp"
#include "newsalpha/bench/bench.hpp"
#include "newsalpha/bench/scenarios.hpp"
#include "newsalpha/cli/manifest.hpp"
#include "newsalpha/extract/extractor.hpp"
#include "newsalpha/metrics/signal.hpp"
#include "newsalpha/promptopt/loop.hpp"
#include "newsalpha/synth/pipeline.hpp"
#include "newsalpha/synth/trend.hpp"

namespace newsalpha::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kGateFailure = 3 };

// Thrown by a command to end with a specific exit code after its outputs and
// manifest are written.
struct CommandOutcome {
  int code = kOk;
};

// Per-run bookkeeping: every input read and output written goes through here
// so the manifest is complete.
class RunContext {
 public:
  RunContext(std::string command, std::vector<std::string> args, fs::path out, std::ostream& log)
      : out_(std::move(out)), log_(log), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.args = std::move(args);
    manifest_.working_directory = fs::current_path().string();
    manifest_.started_at = utc_now_iso();
  }

  const fs::path& out() const { return out_; }
  std::ostream& log() { return log_; }

  const fs::path& input(const fs::path& p) {
    manifest_.inputs[p.string()] = hash_path(p);
    return p;
  }

  // Hashes the config file (or, with none, the argument list) into the manifest.
  void config(const std::optional<fs::path>& p) {
    if (p) {
      input(*p);
      manifest_.config_hash = hex64(fnv1a(io::read_file(*p)));
    } else {
      Fnv1a h;
      for (const auto& a : manifest_.args) h.field(a);
      manifest_.config_hash = hex64(h.digest());
    }
  }

  void seed(std::uint64_t s) { manifest_.seeds.push_back(s); }

  void write(const std::string& rel, std::string_view content) {
    io::write_atomic(out_ / rel, content);
    manifest_.outputs.push_back(rel);
  }

  void write_json(const std::string& rel, const nlohmann::ordered_json& j) { write(rel, j.dump(2) + "\n"); }

  // Records files some library call wrote under `rel` directly.
  void adopt_tree(const std::string& rel) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(out_ / rel)) {
      if (e.is_regular_file()) files.push_back(fs::relative(e.path(), out_).generic_string());
    }
    std::sort(files.begin(), files.end());
    manifest_.outputs.insert(manifest_.outputs.end(), files.begin(), files.end());
  }

  fs::path finish() {
    manifest_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const fs::path path = out_ / "manifest.json";
    io::write_atomic(path, to_json(manifest_).dump(2) + "\n");
    return path;
  }

 private:
  fs::path out_;
  std::ostream& log_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

// ---- shared input helpers ----------------------------------------------------

inline nlohmann::json read_json(RunContext& ctx, const fs::path& p) {
  ctx.input(p);
  try {
    return nlohmann::json::parse(io::read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

inline MarketData read_market(RunContext& ctx, const fs::path& dir) {
  return load_market(ctx.input(dir));
}

// Panel directory: stock.csv + macro.csv.
inline void write_panel(RunContext& ctx, const std::string& rel, const FeaturePanel& p) {
  ctx.write(rel + "/stock.csv", panel_csv(p));
  ctx.write(rel + "/macro.csv", macro_csv(p.dates, p.macro));
}

inline FeaturePanel read_panel(RunContext& ctx, const fs::path& dir) {
  ctx.input(dir);
  return parse_panel(io::read_file(dir / "stock.csv"), io::read_file(dir / "macro.csv"));
}

// Without a panel, news features are zero and macro comes from the market.
inline FeaturePanel market_only_panel(const MarketData& m) {
  FeaturePanel p = FeaturePanel::zeros(m.calendar.days(), m.tickers);
  p.macro = m.macro;
  return p;
}

inline FeaturePanel panel_or_market(RunContext& ctx, const std::optional<fs::path>& dir,
                                    const MarketData& m) {
  return dir ? read_panel(ctx, *dir) : market_only_panel(m);
}

inline DayRange full_range(const MarketData& m) {
  return {m.calendar[0], m.calendar[m.n_days() - 1]};
}

inline DayRange range_or(const std::optional<std::string>& from, const std::optional<std::string>& to,
                         DayRange fallback) {
  if (from) fallback.first = Date::parse(*from);
  if (to) fallback.last = Date::parse(*to);
  if (fallback.last < fallback.first) throw ConfigError("--from is after --to");
  return fallback;
}

inline std::vector<double> parse_levels(const std::string& s) {
  std::vector<double> out;
  for (const auto& part : io::split(s, ',')) out.push_back(io::parse_double(io::trim(part)));
  return out;
}

// Extractor selection shared by extract and optimize.
struct ExtractorOptions {
  std::optional<fs::path> config;  // HTTP extractor JSON: endpoint, model, api_key_env
  std::uint64_t oracle_seed = 1;
  double oracle_noise = 0.0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--extractor", config, "HTTP extractor config JSON (default: synthetic oracle)");
    cmd->add_option("--oracle-seed", oracle_seed, "Oracle extractor noise seed");
    cmd->add_option("--oracle-noise", oracle_noise, "Oracle extractor sentiment noise sd");
  }

  std::unique_ptr<ExtractorClient> make(RunContext& ctx) const {
    if (!config) {
      ctx.seed(oracle_seed);
      return std::make_unique<OracleClient>(oracle_seed, oracle_noise);
    }
    const auto j = read_json(ctx, *config);
    HttpExtractorConfig c;
    c.endpoint = j.at("endpoint").get<std::string>();
    c.model = j.value("model", "");
    c.api_key_env = j.value("api_key_env", "");
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    return std::make_unique<HttpExtractor>(c);
  }
};

// ---- commands -------------------------------------------------------------------

struct SynthOptions {
  std::optional<fs::path> config;
  std::string scenario = "default";
  std::optional<std::uint64_t> seed;
};

inline void run_synth(const SynthOptions& o, RunContext& ctx) {
  ctx.config(o.config);
  if (o.scenario == "trend") {
    const auto s = trend_scenario(o.seed.value_or(7));
    ctx.seed(o.seed.value_or(7));
    write_market(s.market, ctx.out() / "market");
    ctx.adopt_tree("market");
    nlohmann::ordered_json train;
    train["env"] = to_json(s.train_env);
    train["validation"] = day_range_to_json(s.validation_env.episode);
    train["ppo"] = to_json(PPOConfig{});
    train["seed"] = 0;
    ctx.write_json("train.json", train);
    ctx.log() << "trend market: " << s.market.n_tickers() << " tickers x " << s.market.n_days() << " days\n";
    return;
  }
  SynthConfig cfg;
  std::optional<AblationSpec> spec;
  if (o.scenario == "regime-gap") {
    auto s = regime_gap_scenario(o.seed.value_or(0));
    cfg = s.world.config;
    spec = s.spec;
  } else if (o.scenario == "default") {
    if (o.config) cfg = synth_config_from_json(read_json(ctx, *o.config));
    if (o.seed) cfg.seed = *o.seed;
  } else {
    throw ConfigError("unknown scenario '" + o.scenario + "' (default, regime-gap, trend)");
  }
  ctx.seed(cfg.seed);
  const SyntheticWorld world = build_world(cfg);
  write_market(world.market, ctx.out() / "market");
  ctx.adopt_tree("market");
  ctx.write("events.jsonl", events_jsonl(world.events));
  std::string replay;
  for (const RawItem& item : pseudo_headlines(world.events)) replay += to_json(item).dump() + "\n";
  ctx.write("items.jsonl", replay);
  ctx.write_json("synth_config.json", to_json(cfg));
  if (spec) {
    nlohmann::ordered_json ablate;
    ablate["spec"] = to_json(*spec);
    ablate["ppo"] = to_json(PPOConfig{});
    ctx.write_json("ablate.json", ablate);
  }
  ctx.log() << "market: " << world.market.n_tickers() << " tickers x " << world.market.n_days()
            << " days, " << world.events.size() << " events\n";
}

struct IngestOptions {
  fs::path market;
  std::optional<fs::path> replay;
  std::optional<fs::path> adapter;
  std::optional<std::string> from, to;
};

inline void run_ingest(const IngestOptions& o, RunContext& ctx) {
  if (o.replay.has_value() == o.adapter.has_value()) {
    throw ConfigError("ingest needs exactly one of --replay or --adapter");
  }
  ctx.config(o.adapter);
  const auto cal = TradingCalendar::load(ctx.input(o.market) / "calendar.csv");
  fs::create_directories(ctx.out() / "store");
  EventStore store(cal, ctx.out() / "store");
  std::size_t added = 0;
  if (o.replay) {
    added = store.import_replay(ctx.input(*o.replay));
  } else {
    const AdapterConfig cfg = AdapterConfig::parse(io::read_file(*o.adapter));
    HttpAdapter adapter(cfg);
    const DayRange window = range_or(o.from, o.to, {cal[0], cal[cal.size() - 1]});
    added = store.put_items(fetch_source(adapter, window));
  }
  ctx.adopt_tree("store");
  ctx.log() << "stored " << added << " new item(s); store holds " << store.size() << "\n";
}

struct ExtractOptions {
  fs::path store, market, tmpl;
  std::optional<std::string> from, to;
  ExtractorOptions extractor;
};

inline void run_extract(const ExtractOptions& o, RunContext& ctx, std::size_t jobs) {
  ctx.config(std::nullopt);
  const MarketData market = read_market(ctx, o.market);
  ctx.input(o.store);
  const EventStore store(market.calendar, o.store);
  const PromptTemplate tmpl = PromptTemplate::load(ctx.input(o.tmpl));
  auto client = o.extractor.make(ctx);
  ExtractionCache cache;
  FeatureExtractor extractor(*client, cache);
  PanelOptions opts;
  opts.max_in_flight = jobs;
  const DayRange range = range_or(o.from, o.to, full_range(market));
  const PanelResult r = extract_panel(extractor, tmpl, store.query_bundles(market.tickers, range),
                                      macro_lookup(market), opts);
  write_panel(ctx, "panel", r.panel);
  nlohmann::ordered_json report;
  report["template"] = tmpl.id;
  report["template_hash"] = hex64(tmpl.hash);
  report["cells"] = r.panel.dates.size() * r.panel.tickers.size();
  report["failures"] = r.failures;
  report["warnings"] = r.warnings;
  report["signal_coverage"] = signal_coverage(r.panel);
  ctx.write_json("extract_report.json", report);
  ctx.log() << "panel " << r.panel.dates.size() << " days x " << r.panel.tickers.size() << " tickers, "
            << r.failures << " failed cell(s)\n";
}

struct MetricsOptions {
  fs::path panel, market;
  int horizon = 5;
  std::string horizons = "1,3,5,10,20";
  std::string feature = "sentiment";
  std::size_t min_names = 5;
};

inline void run_metrics(const MetricsOptions& o, RunContext& ctx) {
  ctx.config(std::nullopt);
  const MarketData market = read_market(ctx, o.market);
  const FeaturePanel panel = read_panel(ctx, o.panel);
  const SignalMetrics m = compute_signal_metrics(panel, market, o.horizon, o.feature, {}, o.min_names);
  nlohmann::ordered_json j;
  j["feature"] = o.feature;
  j["horizon"] = o.horizon;
  j["metrics"] = to_json(m);
  j["gates"] = to_json(evaluate_gates(m));
  ctx.write_json("ic_report.json", j);
  std::vector<int> hs;
  for (double h : parse_levels(o.horizons)) hs.push_back(int(h));
  ctx.write("decay.csv", decay_csv(ic_decay(o.feature, panel, market, hs, o.min_names)));
  try {
    ctx.write("ic_series.csv",
              ic_series_csv(daily_ic_series(o.feature, panel, forward_returns(market, o.horizon), o.min_names)));
  } catch (const EmptySeries& e) {
    ctx.log() << "no daily IC series: " << e.what() << "\n";
  }
  ctx.log() << "IC IR " << m.ic_ir() << ", t " << m.ic_report.t_stat << ", hit " << m.hit_rate << "\n";
}

struct OptimizeOptions {
  fs::path config, store, market, baseline;
  std::optional<fs::path> templates;
  std::optional<fs::path> proposer;
  ExtractorOptions extractor;
};

inline void run_optimize(const OptimizeOptions& o, RunContext& ctx, std::size_t jobs) {
  ctx.config(o.config);
  const auto j = read_json(ctx, o.config);
  const MarketData market = read_market(ctx, o.market);
  ctx.input(o.store);
  const EventStore store(market.calendar, o.store);
  LoopConfig cfg(day_range_from_json(j.at("optimization")), day_range_from_json(j.at("oos")),
                 j.value("universe", market.tickers));
  cfg.max_rounds = j.value("max_rounds", cfg.max_rounds);
  cfg.horizon_days = j.value("horizon_days", cfg.horizon_days);
  if (j.contains("thresholds")) cfg.thresholds = gate_thresholds_from_json(j.at("thresholds"));
  if (j.contains("weights")) cfg.weights = composite_weights_from_json(j.at("weights"));
  cfg.selection = parse_selection_rule(j.value("selection", std::string("max_composite")));
  cfg.panel_options.max_in_flight = jobs;

  const PromptTemplate baseline = PromptTemplate::load(ctx.input(o.baseline));
  std::unique_ptr<Proposer> proposer;
  if (o.templates && o.proposer) throw ConfigError("give --templates or --proposer, not both");
  if (o.templates) {
    proposer = std::make_unique<ScriptedProposer>(
        ScriptedProposer::from_templates(load_template_dir(ctx.input(*o.templates))));
  } else if (o.proposer) {
    const auto pj = read_json(ctx, *o.proposer);
    HttpProposerConfig pc;
    pc.endpoint = pj.at("endpoint").get<std::string>();
    pc.model = pj.value("model", "");
    pc.api_key_env = pj.value("api_key_env", "");
    pc.timeout_seconds = pj.value("timeout_seconds", pc.timeout_seconds);
    proposer = std::make_unique<HttpProposer>(pc);
  }
  auto client = o.extractor.make(ctx);
  ExtractionCache cache;
  FeatureExtractor extractor(*client, cache);
  cfg.store = &store;
  cfg.extractor = &extractor;
  cfg.proposer = proposer.get();
  cfg.market = &market;
  cfg.macro_source = macro_lookup(market);

  const OptimizeResult r = optimize(baseline, cfg);
  ctx.write("ledger.jsonl", ledger_jsonl(r.ledger));
  ctx.write_json("selected.json", to_json(r.frozen));
  if (r.no_pass) {
    ctx.log() << "no candidate passed the gates; ledger: " << (ctx.out() / "ledger.jsonl").string() << "\n";
    throw CommandOutcome{kGateFailure};
  }
  ctx.write("frozen_template.txt", r.frozen.tmpl.body);
  const OosValidation oos = validate_oos(r.frozen, cfg);
  nlohmann::ordered_json oj;
  oj["metrics"] = to_json(oos.metrics);
  oj["gates"] = to_json(oos.gate_result);
  oj["regressions"] = oos.regressions;
  ctx.write_json("oos.json", oj);
  ctx.log() << "frozen '" << r.frozen.tmpl.id << "' (round " << r.frozen.round << ")\n";
}

// Train config: {"env": EnvConfig, "validation": range, "ppo": PPOConfig, "seed": n}.
struct TrainOptions {
  fs::path config, market;
  std::optional<fs::path> panel;
  std::optional<std::string> mask;
  std::optional<std::uint64_t> seed;
};

inline void run_train(const TrainOptions& o, RunContext& ctx) {
  ctx.config(o.config);
  const auto j = read_json(ctx, o.config);
  EnvConfig env = env_config_from_json(j.at("env"));
  if (o.mask) env.feature_mask = parse_feature_mask(*o.mask);
  EnvConfig val = env;
  val.episode = day_range_from_json(j.at("validation"));
  const PPOConfig ppo = ppo_config_from_json(j.value("ppo", nlohmann::json::object()));
  const std::uint64_t seed = o.seed.value_or(j.value("seed", std::uint64_t{0}));
  ctx.seed(seed);
  const MarketData market = read_market(ctx, o.market);
  const FeaturePanel panel = panel_or_market(ctx, o.panel, market);

  ObsNormalizer norm(env.width());
  const TrainResult r = train([&] { return TradingEnv(env, market, panel); },
                              [&] { return TradingEnv(val, market, panel); }, norm, ppo, seed);
  for (const auto& c : r.checkpoints) {
    ctx.write_json("checkpoints/step_" + std::to_string(c.timestep) + ".json", checkpoint_json(c, ppo, seed));
  }
  const Checkpoint final{ppo.total_timesteps, r.final_params, r.final_normalizer};
  ctx.write_json("final.json", checkpoint_json(final, ppo, seed));
  ctx.write_json("env.json", to_json(env));
  ctx.write("curve.csv", curve_csv(r.curve));
  ctx.log() << "trained " << to_string(env.feature_mask) << " seed " << seed << ": " << r.updates.size()
            << " updates, " << r.checkpoints.size() << " checkpoint(s)\n";
}

struct EvaluateOptions {
  fs::path checkpoint, env, market;
  std::optional<fs::path> panel;
  std::optional<std::string> from, to;
  std::optional<double> cost_bp;
  std::optional<std::string> benchmark;
};

inline Checkpoint read_checkpoint(RunContext& ctx, const fs::path& p) {
  return checkpoint_from_json(read_json(ctx, p));
}

inline void run_evaluate(const EvaluateOptions& o, RunContext& ctx) {
  ctx.config(o.env);
  const Checkpoint ckpt = read_checkpoint(ctx, o.checkpoint);
  EnvConfig env = env_config_from_json(read_json(ctx, o.env));
  env.episode = range_or(o.from, o.to, env.episode);
  if (o.cost_bp) env.cost_bp = *o.cost_bp;
  const MarketData market = read_market(ctx, o.market);
  const FeaturePanel panel = panel_or_market(ctx, o.panel, market);
  auto ep = evaluate_policy(ckpt.params, ckpt.normalizer, TradingEnv(env, market, panel));
  ctx.write("trace.csv", episode_trace_csv(ep.steps));
  const RunResult r = score_curve(to_string(env.feature_mask), 0, "evaluation", ep.equity);
  std::vector<LabelledCurve> curves{{r.config, 0, r.equity}};
  nlohmann::ordered_json j;
  j["config"] = r.config;
  j["range"] = day_range_to_json(env.episode);
  j["cost_bp"] = env.cost_bp;
  j["sharpe"] = r.sharpe ? nlohmann::ordered_json(*r.sharpe) : nlohmann::ordered_json();
  j["return_pct"] = r.total_return_pct;
  j["maxdd_pct"] = r.max_drawdown_pct;
  if (o.benchmark) {
    const RunResult b =
        score_curve(*o.benchmark + "_buy_and_hold", 0, "evaluation",
                    buy_and_hold(market, *o.benchmark, env.episode, env.initial_cash));
    curves.push_back({b.config, 0, b.equity});
    j["benchmark"] = {{"ticker", *o.benchmark},
                      {"sharpe", b.sharpe ? nlohmann::ordered_json(*b.sharpe) : nlohmann::ordered_json()},
                      {"return_pct", b.total_return_pct},
                      {"maxdd_pct", b.max_drawdown_pct}};
  }
  ctx.write("equity.csv", equity_curves_csv(curves));
  ctx.write_json("evaluation.json", j);
  ctx.log() << r.config << ": return " << r.total_return_pct << "%, max drawdown " << r.max_drawdown_pct
            << "%\n";
}

// Ablate config: {"spec": AblationSpec, "ppo": PPOConfig}.
struct AblateOptions {
  fs::path config, market;
  std::optional<fs::path> panel;
};

inline void run_ablate(const AblateOptions& o, RunContext& ctx, std::size_t jobs) {
  ctx.config(o.config);
  const auto j = read_json(ctx, o.config);
  const AblationSpec spec = ablation_spec_from_json(j.at("spec"));
  const PPOConfig ppo = ppo_config_from_json(j.value("ppo", nlohmann::json::object()));
  for (auto s : spec.seeds) ctx.seed(s);
  const MarketData market = read_market(ctx, o.market);
  const FeaturePanel panel = panel_or_market(ctx, o.panel, market);
  const AblationResult r = run_ablation(spec, market, panel, ppo, jobs);
  ctx.write("results.csv", results_csv(r.runs));
  ctx.write_json("summary.json", summary_json(r));
  ctx.write("equity_curves.csv", equity_curves_csv(test_curves(r)));
  ctx.write("convergence.csv", convergence_csv(r.policies));
  for (const auto& p : r.policies) {
    const std::string name = std::string(to_string(p.config)) + "_seed" + std::to_string(p.seed);
    ctx.write_json("policies/" + name + ".json", checkpoint_json(p.final, ppo, p.seed));
    ctx.write_json("policies/" + name + ".env.json", to_json(cell_env(spec, p.config, spec.test)));
  }
  for (const auto& f : r.failures) ctx.log() << "cell failed: " << f.config << " seed " << f.seed << ": " << f.error << "\n";
  for (const auto& s : r.summaries) {
    ctx.log() << s.range << " " << s.config << ": Sharpe " << s.sharpe_mean << " +/- " << s.sharpe_std;
    if (s.delta_sharpe) ctx.log() << ", delta " << *s.delta_sharpe;
    if (s.paired) ctx.log() << ", p " << s.paired->p_value;
    ctx.log() << "\n";
  }
  if (!r.failures.empty()) throw CommandOutcome{kDataError};
}

struct CostSweepOptions {
  fs::path checkpoint, env, market;
  std::optional<fs::path> panel;
  std::optional<fs::path> other_checkpoint, other_env;
  std::string levels = "0,5,10,20,50";
};

inline void run_cost_sweep(const CostSweepOptions& o, RunContext& ctx) {
  ctx.config(o.env);
  if (o.other_checkpoint.has_value() != o.other_env.has_value()) {
    throw ConfigError("--other-checkpoint and --other-env go together");
  }
  const Checkpoint ckpt = read_checkpoint(ctx, o.checkpoint);
  const EnvConfig env = env_config_from_json(read_json(ctx, o.env));
  const MarketData market = read_market(ctx, o.market);
  const FeaturePanel panel = panel_or_market(ctx, o.panel, market);
  std::optional<Checkpoint> other_ckpt;
  std::optional<PolicyUnderTest> other;
  if (o.other_checkpoint) {
    other_ckpt = read_checkpoint(ctx, *o.other_checkpoint);
    other = PolicyUnderTest{&*other_ckpt, env_config_from_json(read_json(ctx, *o.other_env))};
  }
  const auto rows = cost_sweep({&ckpt, env}, market, panel, parse_levels(o.levels), other ? &*other : nullptr);
  ctx.write("cost_sweep.csv", cost_sweep_csv(rows));
  for (const auto& r : rows) {
    ctx.log() << r.cost_bp << " bp: final value " << r.final_value << ", fixed trace " << r.trace_final_value << "\n";
  }
}

// Collects figure-data tables from earlier run directories.
struct ReportOptions {
  fs::path ablation, market;
  std::optional<fs::path> metrics, cost_sweep;
  std::optional<std::string> benchmark;
  double vix_threshold = 20.0;
};

inline void run_report(const ReportOptions& o, RunContext& ctx) {
  ctx.config(std::nullopt);
  const MarketData market = read_market(ctx, o.market);
  const fs::path curves_path = ctx.input(o.ablation / "equity_curves.csv");
  auto curves = parse_equity_curves_csv(io::read_file(curves_path));
  if (curves.empty()) throw PreconditionError("no equity curves in " + curves_path.string());
  ctx.write("convergence.csv", io::read_file(ctx.input(o.ablation / "convergence.csv")));
  ctx.write("results.csv", io::read_file(ctx.input(o.ablation / "results.csv")));
  if (o.benchmark) {
    const auto& first = curves.front().equity;
    const auto bh = buy_and_hold(market, *o.benchmark, {first.front().date, first.back().date},
                                 first.front().value);
    curves.push_back({*o.benchmark + "_buy_and_hold", 0, bh});
  }
  ctx.write("equity_curves.csv", equity_curves_csv(curves));
  try {
    const RegimeTable t = regime_split(curves, vix_series(market), o.vix_threshold);
    ctx.write("regime.csv", regime_csv(t));
    std::string summary = "config,regime,sharpe_mean,delta_sharpe\n";
    for (const auto& s : t.summaries) {
      summary += s.config + "," + s.regime + "," + io::fmt_double(s.sharpe_mean) + "," + opt_cell(s.delta_sharpe) + "\n";
    }
    ctx.write("regime_summary.csv", summary);
  } catch (const EmptyRegime& e) {
    ctx.log() << "regime table skipped: " << e.what() << "\n";
  }
  if (o.metrics) ctx.write("ic_decay.csv", io::read_file(ctx.input(*o.metrics / "decay.csv")));
  if (o.cost_sweep) ctx.write("cost_sweep.csv", io::read_file(ctx.input(*o.cost_sweep / "cost_sweep.csv")));
  ctx.log() << "report written to " << ctx.out().string() << "\n";
}

// ---- dispatch ---------------------------------------------------------------------

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

namespace detail {

inline int rerun(const fs::path& manifest_path, const std::optional<std::string>& out_dir,
                 std::ostream& out, std::ostream& err) {
  const RunManifest m = run_manifest_from_json(nlohmann::json::parse(io::read_file(manifest_path)));
  if (m.command == "rerun") throw ConfigError("manifest records a rerun");
  const fs::path base = m.working_directory.empty() ? fs::current_path() : fs::path(m.working_directory);
  if (const auto changed = changed_inputs(m, base); !changed.empty()) {
    std::string list;
    for (const auto& c : changed) list += " " + c;
    throw StorageError("inputs changed since the recorded run:" + list);
  }
  std::vector<std::string> args = m.args;
  if (out_dir) args = with_output_dir(std::move(args), fs::absolute(*out_dir).string());
  const fs::path here = fs::current_path();
  fs::current_path(base);
  try {
    const int code = dispatch(args, out, err);
    fs::current_path(here);
    return code;
  } catch (...) {
    fs::current_path(here);
    throw;
  }
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Backfilled news features, signal metrics, prompt search and PPO trading experiments",
               "newsalpha"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::string out_dir;
  std::size_t jobs = 1;
  auto add_common = [&](CLI::App* cmd, bool with_jobs) {
    cmd->add_option("--out", out_dir, "Output directory")->required();
    if (with_jobs) cmd->add_option("--jobs", jobs, "Parallel workers")->check(CLI::PositiveNumber);
  };

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic market with planted news events");
  c_synth->add_option("--config", synth.config, "Synthetic market config JSON");
  c_synth->add_option("--scenario", synth.scenario, "default, regime-gap or trend");
  c_synth->add_option("--seed", synth.seed, "Generator seed (overrides the config)");
  add_common(c_synth, false);

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Load raw items into an event store");
  c_ingest->add_option("--market", ingest.market, "Market directory (for the trading calendar)")->required();
  c_ingest->add_option("--replay", ingest.replay, "JSON-lines replay file");
  c_ingest->add_option("--adapter", ingest.adapter, "HTTP source adapter config (key = value)");
  c_ingest->add_option("--from", ingest.from, "First day to fetch (YYYY-MM-DD)");
  c_ingest->add_option("--to", ingest.to, "Last day to fetch (YYYY-MM-DD)");
  add_common(c_ingest, false);

  ExtractOptions extract;
  auto* c_extract = app.add_subcommand("extract", "Extract a feature panel from an event store");
  c_extract->add_option("--store", extract.store, "Event store directory")->required();
  c_extract->add_option("--market", extract.market, "Market directory")->required();
  c_extract->add_option("--template", extract.tmpl, "Prompt template file")->required();
  c_extract->add_option("--from", extract.from, "First day (YYYY-MM-DD)");
  c_extract->add_option("--to", extract.to, "Last day (YYYY-MM-DD)");
  extract.extractor.add_to(c_extract);
  add_common(c_extract, true);

  MetricsOptions metrics;
  auto* c_metrics = app.add_subcommand("metrics", "IC suite and IC decay for a panel");
  c_metrics->add_option("--panel", metrics.panel, "Panel directory")->required();
  c_metrics->add_option("--market", metrics.market, "Market directory")->required();
  c_metrics->add_option("--horizon", metrics.horizon, "Forward-return horizon in trading days");
  c_metrics->add_option("--horizons", metrics.horizons, "Comma-separated decay horizons");
  c_metrics->add_option("--feature", metrics.feature, "Feature to score");
  c_metrics->add_option("--min-names", metrics.min_names, "Minimum names per daily IC");
  add_common(c_metrics, false);

  OptimizeOptions optimize_o;
  auto* c_opt = app.add_subcommand("optimize", "Search prompt templates against the adequacy gates");
  c_opt->add_option("--config", optimize_o.config, "Loop config JSON")->required();
  c_opt->add_option("--store", optimize_o.store, "Event store directory")->required();
  c_opt->add_option("--market", optimize_o.market, "Market directory")->required();
  c_opt->add_option("--baseline", optimize_o.baseline, "Baseline template file")->required();
  c_opt->add_option("--templates", optimize_o.templates, "Directory of scripted proposals");
  c_opt->add_option("--proposer", optimize_o.proposer, "HTTP proposer config JSON");
  optimize_o.extractor.add_to(c_opt);
  add_common(c_opt, true);

  TrainOptions train_o;
  auto* c_train = app.add_subcommand("train", "Train one PPO agent");
  c_train->add_option("--config", train_o.config, "Train config JSON")->required();
  c_train->add_option("--market", train_o.market, "Market directory")->required();
  c_train->add_option("--panel", train_o.panel, "Panel directory");
  c_train->add_option("--mask", train_o.mask, "baseline, llm_only, macro_only or full");
  c_train->add_option("--seed", train_o.seed, "Training seed (overrides the config)");
  add_common(c_train, false);

  EvaluateOptions eval;
  auto* c_eval = app.add_subcommand("evaluate", "Run a frozen policy over a date range");
  c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint JSON")->required();
  c_eval->add_option("--env", eval.env, "Env config JSON")->required();
  c_eval->add_option("--market", eval.market, "Market directory")->required();
  c_eval->add_option("--panel", eval.panel, "Panel directory");
  c_eval->add_option("--from", eval.from, "First day (YYYY-MM-DD)");
  c_eval->add_option("--to", eval.to, "Last day (YYYY-MM-DD)");
  c_eval->add_option("--cost-bp", eval.cost_bp, "Transaction cost override");
  c_eval->add_option("--benchmark", eval.benchmark, "Ticker for a buy-and-hold comparison");
  add_common(c_eval, false);

  AblateOptions ablate;
  auto* c_ablate = app.add_subcommand("ablate", "Feature-mask ablation over seeds");
  c_ablate->add_option("--config", ablate.config, "Ablation config JSON")->required();
  c_ablate->add_option("--market", ablate.market, "Market directory")->required();
  c_ablate->add_option("--panel", ablate.panel, "Panel directory");
  add_common(c_ablate, true);

  CostSweepOptions sweep;
  auto* c_sweep = app.add_subcommand("cost-sweep", "Evaluate a frozen policy across cost levels");
  c_sweep->add_option("--checkpoint", sweep.checkpoint, "Checkpoint JSON")->required();
  c_sweep->add_option("--env", sweep.env, "Env config JSON")->required();
  c_sweep->add_option("--market", sweep.market, "Market directory")->required();
  c_sweep->add_option("--panel", sweep.panel, "Panel directory");
  c_sweep->add_option("--other-checkpoint", sweep.other_checkpoint, "Second policy to compare");
  c_sweep->add_option("--other-env", sweep.other_env, "Env config of the second policy");
  c_sweep->add_option("--levels", sweep.levels, "Ascending comma-separated bp levels");
  add_common(c_sweep, false);

  ReportOptions report;
  auto* c_report = app.add_subcommand("report", "Assemble figure-data tables");
  c_report->add_option("--ablation", report.ablation, "Output directory of an ablate run")->required();
  c_report->add_option("--market", report.market, "Market directory")->required();
  c_report->add_option("--metrics", report.metrics, "Output directory of a metrics run");
  c_report->add_option("--cost-sweep", report.cost_sweep, "Output directory of a cost-sweep run");
  c_report->add_option("--benchmark", report.benchmark, "Ticker for a buy-and-hold curve");
  c_report->add_option("--vix-threshold", report.vix_threshold, "High-volatility VIX threshold");
  add_common(c_report, false);

  fs::path manifest_path;
  std::optional<std::string> rerun_out;
  auto* c_rerun = app.add_subcommand("rerun", "Repeat a recorded run from its manifest");
  c_rerun->add_option("--manifest", manifest_path, "manifest.json of the run")->required();
  c_rerun->add_option("--out", rerun_out, "Output directory (default: the recorded one)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsage;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (cmd == c_rerun) return detail::rerun(manifest_path, rerun_out, out, err);
    RunContext ctx(cmd->get_name(), args, out_dir, out);
    int code = kOk;
    try {
      if (cmd == c_synth) run_synth(synth, ctx);
      else if (cmd == c_ingest) run_ingest(ingest, ctx);
      else if (cmd == c_extract) run_extract(extract, ctx, jobs);
      else if (cmd == c_metrics) run_metrics(metrics, ctx);
      else if (cmd == c_opt) run_optimize(optimize_o, ctx, jobs);
      else if (cmd == c_train) run_train(train_o, ctx);
      else if (cmd == c_eval) run_evaluate(eval, ctx);
      else if (cmd == c_ablate) run_ablate(ablate, ctx, jobs);
      else if (cmd == c_sweep) run_cost_sweep(sweep, ctx);
      else if (cmd == c_report) run_report(report, ctx);
    } catch (const CommandOutcome& o) {
      code = o.code;
    }
    out << "manifest: " << ctx.finish().string() << "\n";
    return code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n\n" << cmd->help();
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

inline int dispatch_argv(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return dispatch(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace newsalpha::cli
