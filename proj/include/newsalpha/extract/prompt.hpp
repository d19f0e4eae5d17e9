#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "newsalpha/backfill/raw_item.hpp"
#include "newsalpha/core/hash.hpp"
#include "newsalpha/core/io.hpp"
#include "newsalpha/extract/features.hpp"

namespace newsalpha {

inline constexpr std::string_view kTickerPlaceholder = "{{.Ticker}}";
inline constexpr std::string_view kDatePlaceholder = "{{.Date}}";
inline constexpr std::string_view kNoEventsMarker = "NO EVENTS";

namespace detail {

inline std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace detail

struct PromptTemplate {
  std::string id;
  std::string body;
  std::optional<std::string> lineage;
  std::uint64_t hash = 0;

  // Throws TemplateError unless each placeholder occurs exactly once.
  static PromptTemplate make(std::string id, std::string body,
                             std::optional<std::string> lineage = std::nullopt) {
    for (auto ph : {kTickerPlaceholder, kDatePlaceholder}) {
      const auto n = detail::count_occurrences(body, ph);
      if (n != 1) {
        throw TemplateError("template '" + id + "' must contain " + std::string(ph) +
                            " exactly once (found " + std::to_string(n) + ")");
      }
    }
    const std::uint64_t h = fnv1a(body);
    return PromptTemplate{std::move(id), std::move(body), std::move(lineage), h};
  }

  // id = file stem
  static PromptTemplate load(const std::filesystem::path& path) {
    return make(path.stem().string(), io::read_file(path));
  }
};

// Templates of a directory in filename order (the scripted proposer list).
inline std::vector<PromptTemplate> load_template_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PromptTemplate> out;
  for (const auto& f : files) out.push_back(PromptTemplate::load(f));
  return out;
}

// Instructions with placeholders substituted, followed by the bundle's items
// in stored order (or the NO EVENTS marker).
inline std::string render_prompt(const PromptTemplate& tmpl, const EventBundle& bundle) {
  std::string text = tmpl.body;
  const auto tp = text.find(kTickerPlaceholder);
  if (tp == std::string::npos) throw TemplateError("missing " + std::string(kTickerPlaceholder));
  text.replace(tp, kTickerPlaceholder.size(), bundle.ticker);
  const auto dp = text.find(kDatePlaceholder);
  if (dp == std::string::npos) throw TemplateError("missing " + std::string(kDatePlaceholder));
  text.replace(dp, kDatePlaceholder.size(), bundle.date.iso());

  text += "\n\n### EVENT BUNDLE\n";
  if (bundle.items.empty()) {
    text += kNoEventsMarker;
    text += "\n";
    return text;
  }
  for (const RawItem& item : bundle.items) {
    text += "- [" + format_rfc3339(item.published_at) + "] (" + to_string(item.kind) +
            ") " + item.headline + "\n";
    if (!item.body.empty()) text += "  " + item.body + "\n";
  }
  return text;
}

struct ParsedFeatures {
  StockFeatures features;
  std::vector<std::string> warnings;  // one entry per clamped field
};

namespace detail {

// End of the balanced JSON object starting at `open` (a '{'), honouring
// string literals; npos if unbalanced.
inline std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

}  // namespace detail

// Parses the first JSON object in an extractor reply and clamps numeric
// fields into their intervals.
inline ParsedFeatures parse_features(std::string_view raw) {
  std::optional<nlohmann::json> obj;
  for (auto open = raw.find('{'); open != std::string_view::npos;
       open = raw.find('{', open + 1)) {
    const auto close = detail::match_brace(raw, open);
    if (close == std::string_view::npos) break;
    try {
      obj = nlohmann::json::parse(raw.substr(open, close - open + 1));
      break;
    } catch (const nlohmann::json::parse_error&) {
    }
  }
  if (!obj || !obj->is_object()) throw SchemaError("no JSON object in reply");

  ParsedFeatures out;
  auto number = [&](const char* key, double lo, double hi) {
    auto it = obj->find(key);
    if (it == obj->end()) throw SchemaError(std::string("missing field '") + key + "'");
    if (!it->is_number()) throw SchemaError(std::string("field '") + key + "' is not numeric");
    const double v = it->get<double>();
    const double c = std::clamp(v, lo, hi);
    if (c != v) {
      out.warnings.push_back(std::string(key) + " clamped from " + io::fmt_double(v) +
                             " to " + io::fmt_double(c));
    }
    return c;
  };
  out.features.sentiment = number("sentiment", -1.0, 1.0);
  out.features.impact = number("impact", 0.0, 1.0);
  out.features.conflicting_signals = number("conflicting_signals", 0.0, 1.0);
  out.features.news_novelty = number("news_novelty", 0.0, 1.0);
  if (auto it = obj->find("reasoning"); it != obj->end() && it->is_string()) {
    out.features.reasoning = it->get<std::string>();
  }
  return out;
}

}  // namespace newsalpha
