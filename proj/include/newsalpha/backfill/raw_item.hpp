#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsalpha/core/date.hpp"
#include "newsalpha/core/error.hpp"
#include "newsalpha/core/hash.hpp"

namespace newsalpha {

enum class ItemKind { news, filing, insider_trade, options_flow };

inline const char* to_string(ItemKind k) {
  switch (k) {
    case ItemKind::news: return "news";
    case ItemKind::filing: return "filing";
    case ItemKind::insider_trade: return "insider_trade";
    case ItemKind::options_flow: return "options_flow";
  }
  return "news";
}

inline ItemKind parse_item_kind(const std::string& s) {
  if (s == "news") return ItemKind::news;
  if (s == "filing") return ItemKind::filing;
  if (s == "insider_trade") return ItemKind::insider_trade;
  if (s == "options_flow") return ItemKind::options_flow;
  throw ConfigError("unknown item kind '" + s + "'");
}

// One text record from a source. The checksum identifies the record for
// de-duplication and is a pure function of the content fields; `kind` is
// deliberately not part of it.
struct RawItem {
  std::string source_id;
  std::string ticker;
  Timestamp published_at{};
  ItemKind kind = ItemKind::news;
  std::string headline;
  std::string body;
  std::uint64_t checksum = 0;

  static std::uint64_t compute_checksum(const std::string& source_id,
                                        const std::string& ticker,
                                        Timestamp published_at,
                                        const std::string& headline,
                                        const std::string& body) {
    return Fnv1a{}
        .field(source_id)
        .field(ticker)
        .field(std::int64_t(published_at.time_since_epoch().count()))
        .field(headline)
        .field(body)
        .digest();
  }

  static RawItem make(std::string source_id, std::string ticker,
                      Timestamp published_at, ItemKind kind,
                      std::string headline, std::string body) {
    RawItem item{std::move(source_id), std::move(ticker), published_at, kind,
                 std::move(headline), std::move(body), 0};
    item.checksum = compute_checksum(item.source_id, item.ticker,
                                     item.published_at, item.headline,
                                     item.body);
    return item;
  }

  friend bool operator==(const RawItem&, const RawItem&) = default;
};

// Store ordering: timestamp, then checksum.
inline bool item_order(const RawItem& a, const RawItem& b) {
  if (a.published_at != b.published_at) return a.published_at < b.published_at;
  return a.checksum < b.checksum;
}

// Replay/log record: the six content keys plus the checksum (hex) when
// serialising for the store log. The checksum is always recomputed on read.
inline nlohmann::ordered_json to_json(const RawItem& item, bool with_checksum = true) {
  nlohmann::ordered_json j;
  j["source_id"] = item.source_id;
  j["ticker"] = item.ticker;
  j["published_at"] = format_rfc3339(item.published_at);
  j["kind"] = to_string(item.kind);
  j["headline"] = item.headline;
  j["body"] = item.body;
  if (with_checksum) j["checksum"] = hex64(item.checksum);
  return j;
}

// Throws ConfigError describing the first schema violation.
inline RawItem raw_item_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("record is not a JSON object");
  auto str = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(std::string("missing key '") + key + "'");
    if (!it->is_string()) throw ConfigError(std::string("key '") + key + "' is not a string");
    return it->get<std::string>();
  };
  std::string ticker = str("ticker");
  if (ticker.empty()) throw ConfigError("empty ticker");
  return RawItem::make(str("source_id"), std::move(ticker),
                       parse_rfc3339(str("published_at")),
                       parse_item_kind(str("kind")), str("headline"),
                       str("body"));
}

// All items for one (ticker, trading day), bounded by that day's close.
struct EventBundle {
  std::string ticker;
  Date date;
  std::vector<RawItem> items;
  Timestamp boundary{};

  bool empty() const { return items.empty(); }

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.field(ticker).field(date.iso());
    for (const RawItem& it : items) h.field(it.checksum);
    return h.digest();
  }
};

inline nlohmann::ordered_json to_json(const EventBundle& b) {
  nlohmann::ordered_json j;
  j["ticker"] = b.ticker;
  j["date"] = b.date.iso();
  j["boundary"] = format_rfc3339(b.boundary);
  auto items = nlohmann::ordered_json::array();
  for (const RawItem& it : b.items) items.push_back(to_json(it));
  j["items"] = std::move(items);
  return j;
}

}  // namespace newsalpha
