#pragma once

#include <cstdint>
#include <vector>

#include "newsalpha/bench/bench.hpp"
#include "newsalpha/synth/pipeline.hpp"
#include "newsalpha/synth/trend.hpp"

// Constructed worlds with a known answer, used by the acceptance run and the
// `synth --scenario` command.
namespace newsalpha {

// News is informative in the calm stretch and pure noise in a shock window at
// the end of the sample. The test range straddles both, so a regime split of
// the test curves has a calm part and a shock part.
struct RegimeGapScenario {
  SyntheticWorld world;
  FeaturePanel panel;  // noiseless oracle extraction
  AblationSpec spec;
};

inline SynthConfig regime_gap_config(std::uint64_t seed) {
  SynthConfig c;
  c.n_tickers = 8;
  c.n_days = 600;
  c.shock_windows = {{490, 599}};
  c.base_vol_calm = 0.006;
  c.base_vol_shock = 0.012;
  c.corr_calm = 0.1;
  c.corr_shock = 0.1;
  // Same drift in both regimes so only the news content differs.
  c.drift_calm = 0.001;
  c.drift_shock = 0.001;
  c.event_rate = 0.2;
  c.event_rate_shock_multiplier = 3.0;
  c.alpha_scale = 0.1;
  c.shock_alpha_multiplier = 0.0;
  c.seed = seed;
  return c;
}

inline RegimeGapScenario regime_gap_scenario(std::uint64_t seed) {
  RegimeGapScenario s{build_world(regime_gap_config(seed)), {}, {}};
  s.panel = oracle_panel(s.world, 0.0, 1);
  const auto& cal = s.world.market.calendar;
  s.spec.configs = {FeatureMask::baseline, FeatureMask::llm_only};
  s.spec.seeds = {seed};
  s.spec.train = {cal[30], cal[329]};
  s.spec.validation = {cal[330], cal[379]};
  s.spec.test = {cal[380], cal[599]};
  s.spec.env.universe = s.world.market.tickers;
  s.spec.env.episode = s.spec.train;
  s.spec.env.initial_cash = 20000.0;
  return s;
}

// Alternating up/down trends that a price-only agent can exploit.
struct TrendScenario {
  MarketData market;
  EnvConfig train_env;
  EnvConfig validation_env;
};

inline TrendScenario trend_scenario(std::uint64_t seed = 7) {
  TrendMarketConfig mc;
  mc.seed = seed;
  TrendScenario s{generate_trend_market(mc), {}, {}};
  const auto& cal = s.market.calendar;
  s.train_env.universe = s.market.tickers;
  s.train_env.feature_mask = FeatureMask::baseline;
  s.train_env.episode = {cal[30], cal[229]};
  s.validation_env = s.train_env;
  s.validation_env.episode = {cal[230], cal[329]};
  return s;
}

}  // namespace newsalpha
