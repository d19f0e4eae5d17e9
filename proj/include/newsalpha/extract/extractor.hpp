#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "newsalpha/backfill/raw_item.hpp"
#include "newsalpha/core/http.hpp"
#include "newsalpha/core/rng.hpp"
#include "newsalpha/extract/features.hpp"
#include "newsalpha/extract/prompt.hpp"
#include "newsalpha/synth/event.hpp"

namespace newsalpha {

// Something that answers a rendered prompt with text. The bundle is passed
// alongside so test oracles can read ground truth; remote clients ignore it.
class ExtractorClient {
 public:
  virtual ~ExtractorClient() = default;
  virtual std::string complete(const std::string& prompt, const EventBundle& bundle) = 0;
};

struct HttpExtractorConfig {
  std::string endpoint;  // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  std::string api_key_env;
  int timeout_seconds = 120;
};

// Chat-completions style client: POST {model, messages} and read the reply
// from choices[0].message.content, a top-level "content", or the raw body.
class HttpExtractor final : public ExtractorClient {
 public:
  explicit HttpExtractor(HttpExtractorConfig cfg) : cfg_(std::move(cfg)) {}

  std::string complete(const std::string& prompt, const EventBundle&) override {
    const http::Url url = http::split_url(cfg_.endpoint);
    httplib::Client client(url.origin);
    client.set_read_timeout(cfg_.timeout_seconds);
    httplib::Headers headers;
    if (const std::string key = http::env_secret(cfg_.api_key_env); !key.empty()) {
      headers.emplace("Authorization", "Bearer " + key);
    }
    nlohmann::ordered_json req;
    req["model"] = cfg_.model;
    req["messages"] = nlohmann::ordered_json::array(
        {{{"role", "user"}, {"content", prompt}}});
    auto res = client.Post(url.path, headers, req.dump(), "application/json");
    http::check_response(res, "POST " + cfg_.endpoint);
    return reply_text(res->body);
  }

  static std::string reply_text(const std::string& body) {
    try {
      const auto j = nlohmann::json::parse(body);
      if (j.contains("choices") && !j["choices"].empty()) {
        return j["choices"][0].at("message").at("content").get<std::string>();
      }
      if (j.contains("content") && j["content"].is_string()) {
        return j["content"].get<std::string>();
      }
    } catch (const std::exception&) {
    }
    return body;
  }

 private:
  HttpExtractorConfig cfg_;
};

// Noise-injecting ground-truth extractor.
//   sentiment           = clamp(direction * strength + N(0, sigma), -1, 1)
//   impact              = clamp(strength + N(0, sigma), 0, 1)
//   conflicting_signals = clamp(sigma * |N(0, 1)|, 0, 1)
//   news_novelty        = clamp(0.5 + 0.5 * strength + 0.5 * N(0, sigma), 0, 1)
// Four normals are always drawn, in that order, so a stream's position does
// not depend on sigma.
inline StockFeatures oracle_extract(const std::optional<HiddenEvent>& event,
                                    double noise_sigma, Rng& rng) {
  if (!event) return {};
  const double z1 = rng.normal();
  const double z2 = rng.normal();
  const double z3 = rng.normal();
  const double z4 = rng.normal();
  StockFeatures f;
  f.sentiment = std::clamp(event->true_alpha_direction * event->strength + noise_sigma * z1,
                           -1.0, 1.0);
  f.impact = std::clamp(event->strength + noise_sigma * z2, 0.0, 1.0);
  f.conflicting_signals = std::clamp(noise_sigma * std::abs(z3), 0.0, 1.0);
  f.news_novelty = std::clamp(0.5 + 0.5 * event->strength + 0.5 * noise_sigma * z4, 0.0, 1.0);
  f.reasoning = "oracle";
  return f;
}

inline constexpr std::string_view kOracleNoiseDirective = "[[oracle-noise=";

// Client that recovers planted events from pseudo-headlines in the bundle and
// answers with oracle_extract JSON. The noise level is read from an
// "[[oracle-noise=S]]" directive in the prompt when present, which lets
// synthetic prompt candidates differ in quality. Each bundle gets its own RNG
// stream derived from (seed, bundle hash) so output is call-order free.
class OracleClient final : public ExtractorClient {
 public:
  explicit OracleClient(std::uint64_t seed, double default_sigma = 0.0)
      : seed_(seed), default_sigma_(default_sigma) {}

  std::string complete(const std::string& prompt, const EventBundle& bundle) override {
    const double sigma = noise_for(prompt);
    std::optional<HiddenEvent> event;
    for (const RawItem& item : bundle.items) {
      auto e = parse_event_text(item.headline, item.body, bundle.date);
      if (e && (!event || e->strength > event->strength)) event = e;
    }
    Rng rng(derive_seed(seed_, "oracle", bundle.content_hash()));
    const StockFeatures f = oracle_extract(event, sigma, rng);
    nlohmann::ordered_json j;
    j["reasoning"] = event ? "planted event" : "no planted event";
    j["sentiment"] = f.sentiment;
    j["impact"] = f.impact;
    j["conflicting_signals"] = f.conflicting_signals;
    j["news_novelty"] = f.news_novelty;
    return j.dump();
  }

  double noise_for(const std::string& prompt) const {
    const auto pos = prompt.find(kOracleNoiseDirective);
    if (pos == std::string::npos) return default_sigma_;
    const auto start = pos + kOracleNoiseDirective.size();
    const auto end = prompt.find("]]", start);
    return io::parse_double(prompt.substr(start, end - start));
  }

 private:
  std::uint64_t seed_;
  double default_sigma_;
};

// Extraction results keyed by (template hash, bundle hash). Optionally backed
// by a JSON-lines file that is appended to on every insert.
class ExtractionCache {
 public:
  ExtractionCache() = default;
  explicit ExtractionCache(std::filesystem::path file) : file_(std::move(file)) { load(); }

  std::optional<StockFeatures> get(std::uint64_t template_hash, std::uint64_t bundle_hash) const {
    std::lock_guard lk(mutex_);
    auto it = entries_.find({template_hash, bundle_hash});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(std::uint64_t template_hash, std::uint64_t bundle_hash, const StockFeatures& f) {
    std::lock_guard lk(mutex_);
    if (!entries_.emplace(std::pair{template_hash, bundle_hash}, f).second) return;
    if (!file_) return;
    std::ofstream out(*file_, std::ios::app | std::ios::binary);
    if (!out) throw StorageError("cannot append to " + file_->string());
    nlohmann::ordered_json j;
    j["template"] = hex64(template_hash);
    j["bundle"] = hex64(bundle_hash);
    j["sentiment"] = f.sentiment;
    j["impact"] = f.impact;
    j["conflicting_signals"] = f.conflicting_signals;
    j["news_novelty"] = f.news_novelty;
    j["reasoning"] = f.reasoning;
    out << j.dump() << '\n';
  }

  std::size_t size() const {
    std::lock_guard lk(mutex_);
    return entries_.size();
  }

 private:
  void load() {
    if (!file_ || !std::filesystem::exists(*file_)) return;
    std::ifstream in(*file_);
    std::string line;
    while (std::getline(in, line)) {
      if (io::trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line);
      StockFeatures f{j.at("sentiment").get<double>(), j.at("impact").get<double>(),
                      j.at("conflicting_signals").get<double>(),
                      j.at("news_novelty").get<double>(), j.value("reasoning", "")};
      entries_.emplace(std::pair{parse_hex64(j.at("template").get<std::string>()),
                                 parse_hex64(j.at("bundle").get<std::string>())},
                       f);
    }
  }

  std::optional<std::filesystem::path> file_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, StockFeatures> entries_;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds max_rate_limit_wait{60000};
};

// Stateless extraction front end: client + cache + retry policy. Counts the
// calls that actually reach the client.
class FeatureExtractor {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  FeatureExtractor(ExtractorClient& client, ExtractionCache& cache, RetryPolicy retry = {},
                   Sleeper sleeper = {})
      : client_(client), cache_(cache), retry_(retry), sleep_(std::move(sleeper)) {
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  StockFeatures extract_bundle(const PromptTemplate& tmpl, const EventBundle& bundle,
                               std::vector<std::string>* warnings = nullptr) {
    if (bundle.empty()) return {};
    const std::uint64_t bundle_hash = bundle.content_hash();
    if (auto hit = cache_.get(tmpl.hash, bundle_hash)) return *hit;

    const std::string prompt = render_prompt(tmpl, bundle);
    std::chrono::milliseconds backoff = retry_.initial_backoff;
    std::string last_error;
    bool last_was_schema = false;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
      if (attempt > 1) {
        sleep_(backoff);
        backoff *= 2;
      }
      try {
        ++client_calls_;
        const ParsedFeatures parsed = parse_features(client_.complete(prompt, bundle));
        if (warnings) {
          for (const auto& w : parsed.warnings) {
            warnings->push_back(bundle.ticker + " " + bundle.date.iso() + ": " + w);
          }
        }
        cache_.put(tmpl.hash, bundle_hash, parsed.features);
        return parsed.features;
      } catch (const SchemaError& e) {
        last_error = e.what();
        last_was_schema = true;
      } catch (const RateLimited& e) {
        last_error = e.what();
        last_was_schema = false;
        const auto wait = std::chrono::milliseconds(std::int64_t(e.retry_after() * 1000.0));
        if (wait > backoff) sleep_(std::min(wait - backoff, retry_.max_rate_limit_wait));
      } catch (const Error& e) {
        last_error = e.what();
        last_was_schema = false;
      }
    }
    if (last_was_schema) throw SchemaError(last_error);
    throw ExtractorError("gave up after " + std::to_string(retry_.max_attempts) +
                         " attempts: " + last_error);
  }

  std::size_t client_calls() const { return client_calls_.load(); }

 private:
  ExtractorClient& client_;
  ExtractionCache& cache_;
  RetryPolicy retry_;
  Sleeper sleep_;
  std::atomic<std::size_t> client_calls_{0};
};

struct PanelOptions {
  std::size_t max_in_flight = 8;
  double rate_per_second = 0.0;  // token bucket; 0 disables
  double failure_ceiling = 0.2;
};

struct PanelResult {
  FeaturePanel panel;
  std::vector<std::string> warnings;
  std::size_t failures = 0;
};

using MacroSource = std::function<MacroFeatures(Date)>;

namespace detail {

class TokenBucket {
 public:
  explicit TokenBucket(double rate)
      : rate_(rate), capacity_(std::max(1.0, rate)), tokens_(capacity_),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    if (rate_ <= 0.0) return;
    std::unique_lock lk(mutex_);
    while (true) {
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(capacity_,
                         tokens_ + rate_ * std::chrono::duration<double>(now - last_).count());
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double wait = (1.0 - tokens_) / rate_;
      lk.unlock();
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
      lk.lock();
    }
  }

 private:
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mutex_;
};

}  // namespace detail

// Extracts a rectangular date x ticker grid of bundles. Failed cells fall back
// to all-zero with a warning; results are merged by grid position so the
// worker count never changes the output.
inline PanelResult extract_panel(FeatureExtractor& extractor, const PromptTemplate& tmpl,
                                 const std::vector<EventBundle>& bundles,
                                 const MacroSource& macro_source,
                                 const PanelOptions& opts = {}) {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  for (const EventBundle& b : bundles) {
    dates.push_back(b.date);
    tickers.push_back(b.ticker);
  }
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
  std::sort(tickers.begin(), tickers.end());
  tickers.erase(std::unique(tickers.begin(), tickers.end()), tickers.end());
  if (bundles.size() != dates.size() * tickers.size()) {
    throw PreconditionError("bundles do not form a rectangular date x ticker grid");
  }

  PanelResult result{FeaturePanel::zeros(dates, tickers), {}, 0};
  FeaturePanel& panel = result.panel;
  std::vector<std::size_t> cell(bundles.size());
  std::vector<char> seen(bundles.size(), 0);
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const std::size_t d = *panel.date_index(bundles[i].date);
    const std::size_t t = *panel.ticker_index(bundles[i].ticker);
    cell[i] = d * tickers.size() + t;
    if (seen[cell[i]]++) throw PreconditionError("duplicate bundle in grid");
  }

  std::vector<std::optional<StockFeatures>> out(bundles.size());
  std::vector<std::vector<std::string>> notes(bundles.size());
  detail::TokenBucket bucket(opts.rate_per_second);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < bundles.size(); i = next++) {
      if (bundles[i].empty()) {
        out[i] = StockFeatures{};
        continue;
      }
      bucket.acquire();
      try {
        out[i] = extractor.extract_bundle(tmpl, bundles[i], &notes[i]);
      } catch (const Error& e) {
        notes[i].push_back(bundles[i].ticker + " " + bundles[i].date.iso() +
                           ": extraction failed, using zeros: " + e.what());
      }
    }
  };
  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min(opts.max_in_flight, bundles.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Merge in grid order.
  std::vector<std::size_t> order(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) order[cell[i]] = i;
  for (std::size_t c = 0; c < order.size(); ++c) {
    const std::size_t i = order[c];
    for (auto& n : notes[i]) result.warnings.push_back(std::move(n));
    if (!out[i]) {
      ++result.failures;
      continue;
    }
    panel.stock[c / tickers.size()][c % tickers.size()] = *out[i];
  }
  for (std::size_t d = 0; d < dates.size(); ++d) panel.macro[d] = macro_source(dates[d]);

  const double rate = bundles.empty() ? 0.0 : double(result.failures) / double(bundles.size());
  if (rate > opts.failure_ceiling) {
    throw PanelError(std::to_string(result.failures) + " of " +
                     std::to_string(bundles.size()) + " extractions failed (ceiling " +
                     io::fmt_double(opts.failure_ceiling) + ")");
  }
  return result;
}

}  // namespace newsalpha
