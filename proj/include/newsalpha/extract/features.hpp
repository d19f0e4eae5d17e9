#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "newsalpha/core/calendar.hpp"
#include "newsalpha/core/date.hpp"
#include "newsalpha/core/error.hpp"
#include "newsalpha/core/io.hpp"

namespace newsalpha {

// Stock-level features read from one day's bundle. All-zero means no signal.
struct StockFeatures {
  double sentiment = 0.0;            // [-1, 1]
  double impact = 0.0;               // [0, 1]
  double conflicting_signals = 0.0;  // [0, 1]
  double news_novelty = 0.0;         // [0, 1]
  std::string reasoning;             // never fed to the agent

  static constexpr std::size_t kDims = 4;
  static constexpr std::array<std::string_view, kDims> kNames = {
      "sentiment", "impact", "conflicting_signals", "news_novelty"};

  bool is_zero() const {
    return sentiment == 0.0 && impact == 0.0 && conflicting_signals == 0.0 &&
           news_novelty == 0.0;
  }

  bool in_bounds() const {
    return sentiment >= -1.0 && sentiment <= 1.0 && impact >= 0.0 && impact <= 1.0 &&
           conflicting_signals >= 0.0 && conflicting_signals <= 1.0 &&
           news_novelty >= 0.0 && news_novelty <= 1.0;
  }

  std::array<double, kDims> values() const {
    return {sentiment, impact, conflicting_signals, news_novelty};
  }

  friend bool operator==(const StockFeatures& a, const StockFeatures& b) {
    return a.values() == b.values();
  }
};

// Cross-sectionally constant market features for one date.
struct MacroFeatures {
  double vix = 0.0;
  double treasury_10y = 0.0;
  double credit_spread = 0.0;
  double market_sentiment = 0.0;  // [-1, 1]
  double macro_event_flag = 0.0;  // {0, 1}

  static constexpr std::size_t kDims = 5;
  static constexpr std::array<std::string_view, kDims> kNames = {
      "vix", "treasury_10y", "credit_spread", "market_sentiment", "macro_event_flag"};

  std::array<double, kDims> values() const {
    return {vix, treasury_10y, credit_spread, market_sentiment, macro_event_flag};
  }

  friend bool operator==(const MacroFeatures&, const MacroFeatures&) = default;
};

// Date x ticker grid of stock features plus one macro row per date. Missing
// extractions are stored as the all-zero vector.
struct FeaturePanel {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  std::vector<std::vector<StockFeatures>> stock;  // [date][ticker]
  std::vector<MacroFeatures> macro;               // [date]

  static FeaturePanel zeros(std::vector<Date> dates, std::vector<std::string> tickers) {
    FeaturePanel p;
    p.dates = std::move(dates);
    p.tickers = std::move(tickers);
    p.stock.assign(p.dates.size(), std::vector<StockFeatures>(p.tickers.size()));
    p.macro.assign(p.dates.size(), MacroFeatures{});
    return p;
  }

  std::optional<std::size_t> date_index(Date d) const {
    auto it = std::lower_bound(dates.begin(), dates.end(), d);
    if (it == dates.end() || *it != d) return std::nullopt;
    return std::size_t(it - dates.begin());
  }

  std::optional<std::size_t> ticker_index(std::string_view t) const {
    for (std::size_t i = 0; i < tickers.size(); ++i) {
      if (tickers[i] == t) return i;
    }
    return std::nullopt;
  }

  // Value of a named stock or macro feature at one cell.
  double feature(std::string_view name, std::size_t d, std::size_t t) const {
    const StockFeatures& s = stock[d][t];
    if (name == "sentiment") return s.sentiment;
    if (name == "impact") return s.impact;
    if (name == "conflicting_signals") return s.conflicting_signals;
    if (name == "news_novelty") return s.news_novelty;
    const MacroFeatures& m = macro[d];
    if (name == "vix") return m.vix;
    if (name == "treasury_10y") return m.treasury_10y;
    if (name == "credit_spread") return m.credit_spread;
    if (name == "market_sentiment") return m.market_sentiment;
    if (name == "macro_event_flag") return m.macro_event_flag;
    throw ConfigError("unknown feature '" + std::string(name) + "'");
  }

  // Sub-panel restricted to dates inside `range`.
  FeaturePanel slice(const DayRange& range) const {
    FeaturePanel p;
    p.tickers = tickers;
    for (std::size_t d = 0; d < dates.size(); ++d) {
      if (!range.contains(dates[d])) continue;
      p.dates.push_back(dates[d]);
      p.stock.push_back(stock[d]);
      p.macro.push_back(macro[d]);
    }
    return p;
  }
};

inline std::string macro_csv(const std::vector<Date>& dates,
                             const std::vector<MacroFeatures>& rows) {
  std::string out = "date,vix,treasury_10y,credit_spread,market_sentiment,macro_event_flag\n";
  for (std::size_t i = 0; i < dates.size(); ++i) {
    const MacroFeatures& m = rows[i];
    out += dates[i].iso() + "," + io::fmt_double(m.vix) + "," +
           io::fmt_double(m.treasury_10y) + "," + io::fmt_double(m.credit_spread) + "," +
           io::fmt_double(m.market_sentiment) + "," + io::fmt_double(m.macro_event_flag) +
           "\n";
  }
  return out;
}

// FRED-shaped macro CSV: required columns date, vix, treasury_10y,
// credit_spread; market_sentiment and macro_event_flag are optional (0).
inline std::map<Date, MacroFeatures> parse_macro_csv(std::string_view text) {
  const auto lines = io::split_lines(text);
  if (lines.empty()) throw ParseError(1, "empty macro CSV");
  const auto header = io::split(lines[0], ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[io::trim(header[i])] = i;
  for (const char* req : {"date", "vix", "treasury_10y", "credit_spread"}) {
    if (!col.contains(req)) throw ParseError(1, std::string("missing column ") + req);
  }
  std::map<Date, MacroFeatures> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto cells = io::split(lines[i], ',');
    auto get = [&](const std::string& name) -> double {
      auto it = col.find(name);
      if (it == col.end()) return 0.0;
      if (it->second >= cells.size()) throw ParseError(i + 1, "short row");
      return io::parse_double(cells[it->second]);
    };
    try {
      MacroFeatures m{get("vix"), get("treasury_10y"), get("credit_spread"),
                      get("market_sentiment"), get("macro_event_flag")};
      out[Date::parse(io::trim(cells[col["date"]]))] = m;
    } catch (const ConfigError& e) {
      throw ParseError(i + 1, e.what());
    }
  }
  return out;
}

inline std::string panel_csv(const FeaturePanel& p) {
  std::string out = "date,ticker,sentiment,impact,conflicting_signals,news_novelty\n";
  for (std::size_t d = 0; d < p.dates.size(); ++d) {
    for (std::size_t t = 0; t < p.tickers.size(); ++t) {
      const StockFeatures& s = p.stock[d][t];
      out += p.dates[d].iso() + "," + p.tickers[t] + "," + io::fmt_double(s.sentiment) +
             "," + io::fmt_double(s.impact) + "," + io::fmt_double(s.conflicting_signals) +
             "," + io::fmt_double(s.news_novelty) + "\n";
    }
  }
  return out;
}

// Inverse of panel_csv + macro_csv. Cells absent from the stock CSV are
// all-zero; every panel date must have a macro row.
inline FeaturePanel parse_panel(std::string_view stock_csv, std::string_view macro_text) {
  const auto lines = io::split_lines(stock_csv);
  std::map<Date, std::map<std::string, StockFeatures>> cells;
  std::vector<std::string> tickers;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto c = io::split(lines[i], ',');
    if (c.size() != 6) throw ParseError(i + 1, "expected 6 columns");
    try {
      StockFeatures s{io::parse_double(c[2]), io::parse_double(c[3]),
                      io::parse_double(c[4]), io::parse_double(c[5]), {}};
      cells[Date::parse(c[0])][c[1]] = s;
      tickers.push_back(c[1]);
    } catch (const ConfigError& e) {
      throw ParseError(i + 1, e.what());
    }
  }
  std::sort(tickers.begin(), tickers.end());
  tickers.erase(std::unique(tickers.begin(), tickers.end()), tickers.end());
  std::vector<Date> dates;
  for (const auto& [d, _] : cells) dates.push_back(d);
  FeaturePanel p = FeaturePanel::zeros(dates, tickers);
  const auto macro = parse_macro_csv(macro_text);
  for (std::size_t d = 0; d < dates.size(); ++d) {
    for (std::size_t t = 0; t < tickers.size(); ++t) {
      auto it = cells[dates[d]].find(tickers[t]);
      if (it != cells[dates[d]].end()) p.stock[d][t] = it->second;
    }
    auto m = macro.find(dates[d]);
    if (m == macro.end()) throw ConfigError("no macro row for " + dates[d].iso());
    p.macro[d] = m->second;
  }
  return p;
}

}  // namespace newsalpha
