#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsalpha/backfill/raw_item.hpp"
#include "newsalpha/core/http.hpp"
#include "newsalpha/core/io.hpp"

namespace newsalpha {

// A news/filings source. Adapters only fetch; they never write to a store.
class SourceAdapter {
 public:
  virtual ~SourceAdapter() = default;
  virtual std::vector<RawItem> fetch(const DayRange& window) = 0;
};

// Items whose UTC publication day lies in `window`.
inline bool published_within(const RawItem& item, const DayRange& window) {
  const Date day(std::chrono::floor<std::chrono::days>(item.published_at));
  return window.contains(day);
}

class MockAdapter final : public SourceAdapter {
 public:
  explicit MockAdapter(std::vector<RawItem> canned) : canned_(std::move(canned)) {}

  std::vector<RawItem> fetch(const DayRange& window) override {
    ++calls_;
    std::vector<RawItem> out;
    for (const RawItem& r : canned_) {
      if (published_within(r, window)) out.push_back(r);
    }
    return out;
  }

  int calls() const { return calls_; }

 private:
  std::vector<RawItem> canned_;
  int calls_ = 0;
};

// Key-value adapter config:
//   endpoint = http://host:port/path
//   auth_token_env = NEWS_API_TOKEN
//   poll_window_days = 5
struct AdapterConfig {
  std::string endpoint;
  std::string auth_token_env;
  int poll_window_days = 1;

  static AdapterConfig parse(std::string_view text) {
    AdapterConfig cfg;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string line = io::trim(lines[i]);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(i + 1, "expected key = value");
      const std::string key = io::trim(line.substr(0, eq));
      const std::string value = io::trim(line.substr(eq + 1));
      if (key == "endpoint") cfg.endpoint = value;
      else if (key == "auth_token_env") cfg.auth_token_env = value;
      else if (key == "poll_window_days") cfg.poll_window_days = int(io::parse_double(value));
      else throw ParseError(i + 1, "unknown key '" + key + "'");
    }
    if (cfg.endpoint.empty()) throw ConfigError("adapter config lacks endpoint");
    if (cfg.poll_window_days < 1) throw ConfigError("poll_window_days must be >= 1");
    return cfg;
  }
};

// Generic JSON-over-HTTP source: GET <endpoint>?from=YYYY-MM-DD&to=YYYY-MM-DD
// with a bearer token; the reply is either a JSON array of replay records or
// JSON lines. Windows longer than poll_window_days are fetched in chunks.
class HttpAdapter final : public SourceAdapter {
 public:
  explicit HttpAdapter(AdapterConfig cfg) : cfg_(std::move(cfg)) {}

  std::vector<RawItem> fetch(const DayRange& window) override {
    const http::Url url = http::split_url(cfg_.endpoint);
    const std::string token = http::env_secret(cfg_.auth_token_env);
    httplib::Client client(url.origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

    std::vector<RawItem> out;
    for (Date from = window.first; from <= window.last;
         from = from.plus_days(cfg_.poll_window_days)) {
      const Date to = std::min(window.last, from.plus_days(cfg_.poll_window_days - 1));
      const httplib::Params params{{"from", from.iso()}, {"to", to.iso()}};
      auto res = client.Get(url.path, params, headers);
      http::check_response(res, "GET " + cfg_.endpoint);
      for (RawItem& item : parse_body(res->body)) out.push_back(std::move(item));
    }
    return out;
  }

 private:
  static std::vector<RawItem> parse_body(const std::string& body) {
    std::vector<RawItem> items;
    const std::string trimmed = io::trim(body);
    if (trimmed.empty()) return items;
    try {
      if (trimmed.front() == '[') {
        for (const auto& rec : nlohmann::json::parse(trimmed)) {
          items.push_back(raw_item_from_json(rec));
        }
        return items;
      }
      for (const std::string& line : io::split_lines(trimmed)) {
        if (io::trim(line).empty()) continue;
        items.push_back(raw_item_from_json(nlohmann::json::parse(line)));
      }
    } catch (const std::exception& e) {
      throw NetworkError(std::string("malformed payload: ") + e.what());
    }
    return items;
  }

  AdapterConfig cfg_;
};

// Normalises what an adapter returns: upper-case, trimmed tickers and
// recomputed checksums, sorted into store order.
inline std::vector<RawItem> fetch_source(SourceAdapter& adapter, const DayRange& window) {
  std::vector<RawItem> items = adapter.fetch(window);
  for (RawItem& r : items) {
    std::string t = io::trim(r.ticker);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return char(std::toupper(c)); });
    r = RawItem::make(std::move(r.source_id), std::move(t), r.published_at, r.kind,
                      std::move(r.headline), std::move(r.body));
  }
  std::sort(items.begin(), items.end(), item_order);
  return items;
}

}  // namespace newsalpha
