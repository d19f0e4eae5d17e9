#pragma once

#include <optional>
#include <vector>

#include "newsalpha/backfill/store.hpp"
#include "newsalpha/extract/extractor.hpp"
#include "newsalpha/synth/market.hpp"

namespace newsalpha {

// A generated market together with the events planted in it.
struct SyntheticWorld {
  SynthConfig config;
  MarketData market;
  std::vector<HiddenEvent> events;

  DayRange full_range() const {
    return {market.calendar[0], market.calendar[market.n_days() - 1]};
  }
};

inline SyntheticWorld build_world(const SynthConfig& config) {
  EventDraw draw = generate_events(config, generate_market(config));
  return {config, std::move(draw.market), std::move(draw.events)};
}

// Loads the world's pseudo-headlines into `store`.
inline std::size_t ingest_world(EventStore& store, const SyntheticWorld& world) {
  return store.put_items(pseudo_headlines(world.events));
}

// Runs the oracle extractor over every (day, ticker) bundle in `range`,
// passing through the backfill store so the information boundary applies.
inline FeaturePanel oracle_panel(const SyntheticWorld& world, double noise_sigma,
                                 std::uint64_t seed, std::optional<DayRange> range = std::nullopt,
                                 std::size_t jobs = 1) {
  EventStore store(world.market.calendar);
  ingest_world(store, world);
  OracleClient client(seed, noise_sigma);
  ExtractionCache cache;
  FeatureExtractor extractor(client, cache);
  const auto tmpl = PromptTemplate::make("oracle", "{{.Ticker}} {{.Date}}");
  PanelOptions opts;
  opts.max_in_flight = jobs;
  return extract_panel(extractor, tmpl,
                       store.query_bundles(world.market.tickers, range.value_or(world.full_range())),
                       macro_lookup(world.market), opts)
      .panel;
}

}  // namespace newsalpha
