#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "newsalpha/backfill/raw_item.hpp"
#include "newsalpha/core/calendar.hpp"
#include "newsalpha/core/error.hpp"
#include "newsalpha/core/io.hpp"
#include "newsalpha/core/rng.hpp"
#include "newsalpha/extract/features.hpp"
#include "newsalpha/synth/event.hpp"

namespace newsalpha {

enum class Regime { calm, shock };

inline const char* to_string(Regime r) { return r == Regime::calm ? "calm" : "shock"; }

inline Regime parse_regime(const std::string& s) {
  if (s == "calm") return Regime::calm;
  if (s == "shock") return Regime::shock;
  throw ConfigError("unknown regime '" + s + "'");
}

struct Bar {
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  friend bool operator==(const Bar&, const Bar&) = default;
};

struct MarketData {
  TradingCalendar calendar;
  std::vector<std::string> tickers;
  std::vector<std::vector<Bar>> bars;  // [day][ticker]
  std::vector<MacroFeatures> macro;    // [day]
  std::vector<Regime> regime;          // [day]

  std::size_t n_days() const { return calendar.size(); }
  std::size_t n_tickers() const { return tickers.size(); }
  double close(std::size_t d, std::size_t t) const { return bars[d][t].close; }

  std::optional<std::size_t> ticker_index(std::string_view name) const {
    for (std::size_t i = 0; i < tickers.size(); ++i) {
      if (tickers[i] == name) return i;
    }
    return std::nullopt;
  }

  // Day indices whose dates fall in `range`, as [first, last] inclusive.
  std::pair<std::size_t, std::size_t> day_span(const DayRange& range) const {
    const auto& days = calendar.days();
    const auto lo = std::lower_bound(days.begin(), days.end(), range.first);
    const auto hi = std::upper_bound(days.begin(), days.end(), range.last);
    if (lo >= hi) throw RangeError("no trading days in " + range.first.iso() + ".." + range.last.iso());
    return {std::size_t(lo - days.begin()), std::size_t(hi - days.begin()) - 1};
  }

  friend bool operator==(const MarketData& a, const MarketData& b) {
    return a.calendar.days() == b.calendar.days() && a.tickers == b.tickers &&
           a.bars == b.bars && a.macro == b.macro && a.regime == b.regime;
  }
};

// Signal universe used when no explicit ticker list is configured.
inline const std::vector<std::string>& default_signal_universe() {
  static const std::vector<std::string> kTickers = {
      "AAPL", "ABBV", "ADBE", "AMD",  "AMZN", "AVGO", "BA",   "BAC",  "CAT", "COST",
      "CRM",  "CVX",  "GE",   "GOOGL", "GS",  "HD",   "INTC", "IWM",  "JNJ", "JPM",
      "LLY",  "MA",   "MCD",  "META", "MSFT", "NFLX", "NKE",  "NVDA", "ORCL", "QCOM",
      "QQQ",  "RTX",  "SPY",  "TSLA", "UNH",  "V",    "WMT",  "XOM"};
  return kTickers;
}

struct SynthConfig {
  std::size_t n_tickers = 38;
  std::size_t n_days = 250;
  Date start_date{2024, 1, 2};
  std::vector<std::string> tickers;  // overrides the default names when set

  double base_vol_calm = 0.012;
  double base_vol_shock = 0.025;
  double drift_calm = 0.0002;
  double drift_shock = -0.001;
  double corr_calm = 0.2;
  double corr_shock = 0.6;

  // VIX: Ornstein-Uhlenbeck towards the regime level.
  double vix_mean_reversion = 0.15;
  double vix_level_calm = 16.0;
  double vix_level_shock = 35.0;
  double vix_noise = 1.0;

  // Two-state Markov switch, unless explicit shock windows (day indices,
  // inclusive) are given.
  double p_calm_to_shock = 0.02;
  double p_shock_to_calm = 0.05;
  std::vector<std::pair<std::size_t, std::size_t>> shock_windows;

  double event_rate = 0.4;  // events per ticker-day; gives ~0.4 signal coverage
  double event_rate_shock_multiplier = 1.0;
  double alpha_scale = 0.05;
  int event_horizon = 5;
  double shock_alpha_multiplier = 1.0;  // 0 turns shock-regime news into noise

  std::uint64_t seed = 42;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
    };
    if (n_tickers == 0) throw ConfigError("n_tickers must be positive");
    if (n_days < 2) throw ConfigError("n_days must be at least 2");
    positive(base_vol_calm, "base_vol_calm");
    positive(base_vol_shock, "base_vol_shock");
    positive(vix_mean_reversion, "vix_mean_reversion");
    positive(vix_level_calm, "vix_level_calm");
    positive(vix_level_shock, "vix_level_shock");
    positive(alpha_scale, "alpha_scale");
    if (vix_noise < 0.0) throw ConfigError("vix_noise must be non-negative");
    if (event_rate < 0.0 || event_rate > 1.0) throw ConfigError("event_rate must be in [0, 1]");
    if (event_rate * event_rate_shock_multiplier > 1.0 || event_rate_shock_multiplier < 0.0) {
      throw ConfigError("shock event rate must be in [0, 1]");
    }
    if (corr_calm < 0.0 || corr_calm >= 1.0 || corr_shock < 0.0 || corr_shock >= 1.0) {
      throw ConfigError("correlations must be in [0, 1)");
    }
    if (p_calm_to_shock < 0.0 || p_calm_to_shock > 1.0 || p_shock_to_calm < 0.0 ||
        p_shock_to_calm > 1.0) {
      throw ConfigError("transition probabilities must be in [0, 1]");
    }
    if (event_horizon < 1 || event_horizon > 20) throw ConfigError("event_horizon must be in [1, 20]");
    if (shock_alpha_multiplier < 0.0) throw ConfigError("shock_alpha_multiplier must be >= 0");
    if (!tickers.empty() && tickers.size() != n_tickers) {
      throw ConfigError("tickers list length differs from n_tickers");
    }
    for (const auto& [a, b] : shock_windows) {
      if (a > b || b >= n_days) throw ConfigError("shock window out of range");
    }
  }

  std::vector<std::string> ticker_names() const {
    if (!tickers.empty()) return tickers;
    const auto& base = default_signal_universe();
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n_tickers; ++i) {
      if (i < base.size()) {
        out.push_back(base[i]);
      } else {
        char buf[16];
        std::snprintf(buf, sizeof buf, "SYN%03zu", i);
        out.push_back(buf);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["n_tickers"] = c.n_tickers;
  j["n_days"] = c.n_days;
  j["start_date"] = c.start_date.iso();
  j["tickers"] = c.tickers;
  j["base_vol_calm"] = c.base_vol_calm;
  j["base_vol_shock"] = c.base_vol_shock;
  j["drift_calm"] = c.drift_calm;
  j["drift_shock"] = c.drift_shock;
  j["corr_calm"] = c.corr_calm;
  j["corr_shock"] = c.corr_shock;
  j["vix_mean_reversion"] = c.vix_mean_reversion;
  j["vix_level_calm"] = c.vix_level_calm;
  j["vix_level_shock"] = c.vix_level_shock;
  j["vix_noise"] = c.vix_noise;
  j["p_calm_to_shock"] = c.p_calm_to_shock;
  j["p_shock_to_calm"] = c.p_shock_to_calm;
  j["shock_windows"] = c.shock_windows;
  j["event_rate"] = c.event_rate;
  j["event_rate_shock_multiplier"] = c.event_rate_shock_multiplier;
  j["alpha_scale"] = c.alpha_scale;
  j["event_horizon"] = c.event_horizon;
  j["shock_alpha_multiplier"] = c.shock_alpha_multiplier;
  j["seed"] = c.seed;
  return j;
}

// Missing keys keep their defaults.
inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("n_tickers", c.n_tickers);
  opt("n_days", c.n_days);
  if (j.contains("start_date")) c.start_date = Date::parse(j.at("start_date").get<std::string>());
  opt("tickers", c.tickers);
  if (j.contains("tickers") && !c.tickers.empty() && !j.contains("n_tickers")) {
    c.n_tickers = c.tickers.size();
  }
  opt("base_vol_calm", c.base_vol_calm);
  opt("base_vol_shock", c.base_vol_shock);
  opt("drift_calm", c.drift_calm);
  opt("drift_shock", c.drift_shock);
  opt("corr_calm", c.corr_calm);
  opt("corr_shock", c.corr_shock);
  opt("vix_mean_reversion", c.vix_mean_reversion);
  opt("vix_level_calm", c.vix_level_calm);
  opt("vix_level_shock", c.vix_level_shock);
  opt("vix_noise", c.vix_noise);
  opt("p_calm_to_shock", c.p_calm_to_shock);
  opt("p_shock_to_calm", c.p_shock_to_calm);
  opt("shock_windows", c.shock_windows);
  opt("event_rate", c.event_rate);
  opt("event_rate_shock_multiplier", c.event_rate_shock_multiplier);
  opt("alpha_scale", c.alpha_scale);
  opt("event_horizon", c.event_horizon);
  opt("shock_alpha_multiplier", c.shock_alpha_multiplier);
  opt("seed", c.seed);
  c.validate();
  return c;
}

namespace detail {

using DriftPanel = std::vector<std::vector<double>>;  // [day][ticker]

inline std::vector<Regime> simulate_regimes(const SynthConfig& cfg) {
  std::vector<Regime> regime(cfg.n_days, Regime::calm);
  if (!cfg.shock_windows.empty()) {
    for (const auto& [a, b] : cfg.shock_windows) {
      for (std::size_t d = a; d <= b; ++d) regime[d] = Regime::shock;
    }
    return regime;
  }
  Rng rng(derive_seed(cfg.seed, "regime"));
  for (std::size_t d = 1; d < cfg.n_days; ++d) {
    const double u = rng.uniform();
    if (regime[d - 1] == Regime::calm) {
      regime[d] = u < cfg.p_calm_to_shock ? Regime::shock : Regime::calm;
    } else {
      regime[d] = u < cfg.p_shock_to_calm ? Regime::calm : Regime::shock;
    }
  }
  return regime;
}

inline std::vector<MacroFeatures> simulate_macro(const SynthConfig& cfg,
                                                 const std::vector<Regime>& regime) {
  Rng rng(derive_seed(cfg.seed, "macro"));
  std::vector<MacroFeatures> macro(cfg.n_days);
  double vix = regime[0] == Regime::calm ? cfg.vix_level_calm : cfg.vix_level_shock;
  double treasury = 4.1;
  double spread = regime[0] == Regime::calm ? 3.4 : 4.8;
  for (std::size_t d = 0; d < cfg.n_days; ++d) {
    const bool shock = regime[d] == Regime::shock;
    const double z_vix = rng.normal();
    const double z_tsy = rng.normal();
    const double z_spread = rng.normal();
    const double z_sent = rng.normal();
    const double u_flag = rng.uniform();
    if (d > 0) {
      const double level = shock ? cfg.vix_level_shock : cfg.vix_level_calm;
      vix += cfg.vix_mean_reversion * (level - vix) + cfg.vix_noise * z_vix;
      treasury = std::clamp(treasury + 0.03 * z_tsy, 3.3, 5.0);
      spread += 0.1 * ((shock ? 4.8 : 3.4) - spread) + 0.05 * z_spread;
    }
    vix = std::max(vix, 9.0);
    macro[d].vix = vix;
    macro[d].treasury_10y = treasury;
    macro[d].credit_spread = std::max(spread, 0.5);
    macro[d].market_sentiment = std::clamp((shock ? -0.5 : 0.2) + 0.2 * z_sent, -1.0, 1.0);
    macro[d].macro_event_flag = u_flag < (shock ? 0.8 : 0.3) ? 1.0 : 0.0;
  }
  return macro;
}

// Every random draw happens regardless of `drift`, so re-simulating with
// planted drift reuses exactly the same shocks.
inline MarketData simulate(const SynthConfig& cfg, const DriftPanel* drift) {
  cfg.validate();
  MarketData m;
  m.calendar = TradingCalendar::weekdays(cfg.start_date, cfg.n_days);
  m.tickers = cfg.ticker_names();
  m.regime = simulate_regimes(cfg);
  m.macro = simulate_macro(cfg, m.regime);

  const std::size_t n = cfg.n_days;
  const std::size_t T = m.tickers.size();
  std::vector<double> factor(n);
  Rng factor_rng(derive_seed(cfg.seed, "factor"));
  for (double& f : factor) f = factor_rng.normal();

  m.bars.assign(n, std::vector<Bar>(T));
  for (std::size_t t = 0; t < T; ++t) {
    Rng rng(derive_seed(cfg.seed, "ticker", t));
    double prev_close = rng.uniform(20.0, 300.0);
    for (std::size_t d = 0; d < n; ++d) {
      const bool shock = m.regime[d] == Regime::shock;
      const double vol = shock ? cfg.base_vol_shock : cfg.base_vol_calm;
      const double rho = shock ? cfg.corr_shock : cfg.corr_calm;
      const double e = rng.normal();
      const double z_open = rng.normal();
      const double z_high = rng.normal();
      const double z_low = rng.normal();
      const double z_vol = rng.normal();
      double r = 0.0;
      if (d > 0) {
        r = (shock ? cfg.drift_shock : cfg.drift_calm) +
            vol * (std::sqrt(rho) * factor[d] + std::sqrt(1.0 - rho) * e);
        if (drift) r += (*drift)[d][t];
      }
      const double close = prev_close * std::exp(r);
      const double open = prev_close * std::exp(0.25 * vol * z_open);
      Bar& bar = m.bars[d][t];
      bar.open = open;
      bar.close = close;
      bar.high = std::max(open, close) * std::exp(0.5 * vol * std::abs(z_high));
      bar.low = std::min(open, close) * std::exp(-0.5 * vol * std::abs(z_low));
      bar.volume = std::round(std::exp(std::log(2.0e6) + 0.3 * z_vol)) + 1.0;
      prev_close = close;
    }
  }
  return m;
}

}  // namespace detail

inline MarketData generate_market(const SynthConfig& config) {
  return detail::simulate(config, nullptr);
}

// Re-simulates the market with each event's drift added to the log-returns
// of days date+1 ... date+horizon_days.
inline MarketData inject_events(const SynthConfig& config, const MarketData& base,
                                const std::vector<HiddenEvent>& events) {
  if (events.empty()) return base;
  detail::DriftPanel drift(base.n_days(), std::vector<double>(base.n_tickers(), 0.0));
  for (const HiddenEvent& e : events) {
    const auto d = base.calendar.index_of(e.date);
    const auto t = base.ticker_index(e.ticker);
    if (!d || !t) throw ConfigError("event outside market: " + e.ticker + " " + e.date.iso());
    for (int k = 1; k <= e.horizon_days && *d + k < base.n_days(); ++k) {
      drift[*d + k][*t] += e.alpha_per_day;
    }
  }
  return detail::simulate(config, &drift);
}

struct EventDraw {
  std::vector<HiddenEvent> events;
  MarketData market;  // re-simulated with planted drift
};

// Draws events at event_rate per ticker-day (never in the final
// event_horizon days, so every event has a full forward window) and injects
// their drift. In the shock regime the rate is scaled by
// event_rate_shock_multiplier and the drift by shock_alpha_multiplier.
inline EventDraw generate_events(const SynthConfig& config, const MarketData& market) {
  EventDraw out{{}, market};
  if (config.event_rate == 0.0) return out;
  Rng rng(derive_seed(config.seed, "events"));
  const int h = config.event_horizon;
  const std::size_t n = market.n_days();
  for (std::size_t d = 0; d + std::size_t(h) < n; ++d) {
    const bool shock = market.regime[d] == Regime::shock;
    const double rate = config.event_rate * (shock ? config.event_rate_shock_multiplier : 1.0);
    const double scale = config.alpha_scale * (shock ? config.shock_alpha_multiplier : 1.0);
    for (std::size_t t = 0; t < market.n_tickers(); ++t) {
      if (!rng.bernoulli(rate)) continue;
      HiddenEvent e;
      e.ticker = market.tickers[t];
      e.date = market.calendar[d];
      e.true_alpha_direction = rng.bernoulli(0.5) ? 1 : -1;
      e.strength = 1.0 - 0.9 * rng.uniform();  // (0.1, 1]
      e.horizon_days = h;
      e.alpha_per_day = e.true_alpha_direction * e.strength * scale / h;
      out.events.push_back(std::move(e));
    }
  }
  out.market = inject_events(config, market, out.events);
  return out;
}

// One news item per event, published two hours before that day's close.
inline std::vector<RawItem> pseudo_headlines(const std::vector<HiddenEvent>& events) {
  std::vector<RawItem> items;
  items.reserve(events.size());
  for (const HiddenEvent& e : events) {
    items.push_back(RawItem::make("synth", e.ticker,
                                  market_close_utc(e.date) - std::chrono::hours{2},
                                  ItemKind::news, event_headline(e), event_body(e)));
  }
  return items;
}

// Macro row lookup by date; throws RangeError for dates outside the market.
inline std::function<MacroFeatures(Date)> macro_lookup(const MarketData& market) {
  return [&market](Date d) {
    const auto idx = market.calendar.index_of(d);
    if (!idx) throw RangeError("no macro row for " + d.iso());
    return market.macro[*idx];
  };
}

// Directory layout: calendar.csv, macro.csv, regime.csv, ohlcv/<TICKER>.csv.
inline void write_market(const MarketData& m, const std::filesystem::path& dir) {
  io::write_atomic(dir / "calendar.csv", m.calendar.to_csv());
  io::write_atomic(dir / "macro.csv", macro_csv(m.calendar.days(), m.macro));
  std::string regime = "date,regime\n";
  for (std::size_t d = 0; d < m.n_days(); ++d) {
    regime += m.calendar[d].iso() + "," + to_string(m.regime[d]) + "\n";
  }
  io::write_atomic(dir / "regime.csv", regime);
  for (std::size_t t = 0; t < m.n_tickers(); ++t) {
    std::string csv = "date,open,high,low,close,volume\n";
    for (std::size_t d = 0; d < m.n_days(); ++d) {
      const Bar& b = m.bars[d][t];
      csv += m.calendar[d].iso() + "," + io::fmt_double(b.open) + "," + io::fmt_double(b.high) +
             "," + io::fmt_double(b.low) + "," + io::fmt_double(b.close) + "," +
             io::fmt_double(b.volume) + "\n";
    }
    io::write_atomic(dir / "ohlcv" / (m.tickers[t] + ".csv"), csv);
  }
}

inline MarketData load_market(const std::filesystem::path& dir) {
  MarketData m;
  m.calendar = TradingCalendar::load(dir / "calendar.csv");
  const std::size_t n = m.n_days();
  const auto macro = parse_macro_csv(io::read_file(dir / "macro.csv"));
  for (const Date& d : m.calendar.days()) {
    auto it = macro.find(d);
    if (it == macro.end()) throw ConfigError("macro.csv lacks " + d.iso());
    m.macro.push_back(it->second);
  }
  m.regime.assign(n, Regime::calm);
  if (std::filesystem::exists(dir / "regime.csv")) {
    const auto lines = io::split_lines(io::read_file(dir / "regime.csv"));
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (io::trim(lines[i]).empty()) continue;
      const auto c = io::split(lines[i], ',');
      if (c.size() != 2) throw ParseError(i + 1, "regime.csv: expected 2 columns");
      if (auto idx = m.calendar.index_of(Date::parse(c[0]))) m.regime[*idx] = parse_regime(io::trim(c[1]));
    }
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir / "ohlcv")) {
    if (e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  m.bars.assign(n, {});
  for (const auto& f : files) {
    m.tickers.push_back(f.stem().string());
    std::vector<Bar> series(n);
    std::vector<char> seen(n, 0);
    const auto lines = io::split_lines(io::read_file(f));
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (io::trim(lines[i]).empty()) continue;
      const auto c = io::split(lines[i], ',');
      if (c.size() != 6) throw ParseError(i + 1, f.string() + ": expected 6 columns");
      const auto idx = m.calendar.index_of(Date::parse(c[0]));
      if (!idx) continue;
      series[*idx] = Bar{io::parse_double(c[1]), io::parse_double(c[2]), io::parse_double(c[3]),
                         io::parse_double(c[4]), io::parse_double(c[5])};
      seen[*idx] = 1;
    }
    for (std::size_t d = 0; d < n; ++d) {
      if (!seen[d]) throw ConfigError(f.string() + " lacks " + m.calendar[d].iso());
      m.bars[d].push_back(series[d]);
    }
  }
  if (m.tickers.empty()) throw ConfigError("no OHLCV files in " + (dir / "ohlcv").string());
  return m;
}

inline std::string events_jsonl(const std::vector<HiddenEvent>& events) {
  std::string out;
  for (const HiddenEvent& e : events) out += to_json(e).dump() + "\n";
  return out;
}

inline std::vector<HiddenEvent> parse_events_jsonl(std::string_view text) {
  std::vector<HiddenEvent> out;
  const auto lines = io::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    try {
      out.push_back(hidden_event_from_json(nlohmann::json::parse(lines[i])));
    } catch (const std::exception& e) {
      throw ParseError(i + 1, e.what());
    }
  }
  return out;
}

}  // namespace newsalpha
