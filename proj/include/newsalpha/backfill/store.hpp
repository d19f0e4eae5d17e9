#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "newsalpha/backfill/raw_item.hpp"
#include "newsalpha/core/calendar.hpp"
#include "newsalpha/core/io.hpp"

namespace newsalpha {

// Append-only, point-in-time event store.
//
// Persistence is a single line-delimited log (`items.jsonl`) inside the store
// directory; the in-memory index is rebuilt from it on open. Without a
// directory the store is purely in memory.
//
// Readers may run concurrently; writes are serialised.
class EventStore {
 public:
  static constexpr const char* kLogName = "items.jsonl";

  explicit EventStore(TradingCalendar calendar,
                      std::optional<std::filesystem::path> dir = std::nullopt)
      : calendar_(std::move(calendar)), dir_(std::move(dir)) {
    if (dir_) load_log();
  }

  EventStore(const EventStore&) = delete;
  EventStore& operator=(const EventStore&) = delete;

  const TradingCalendar& calendar() const { return calendar_; }
  const std::optional<std::filesystem::path>& directory() const { return dir_; }

  // Returns the number of newly persisted items; checksum duplicates (against
  // the store and within `items`) are skipped.
  std::size_t put_items(std::span<const RawItem> items) {
    std::unique_lock lock(mutex_);
    std::vector<const RawItem*> fresh;
    std::unordered_set<std::uint64_t> batch;
    for (const RawItem& raw : items) {
      if (checksums_.contains(raw.checksum) || !batch.insert(raw.checksum).second) {
        continue;
      }
      fresh.push_back(&raw);
    }
    if (fresh.empty()) return 0;
    if (dir_) append_log(fresh);
    for (const RawItem* item : fresh) index(*item);
    return fresh.size();
  }

  std::size_t put_items(const std::vector<RawItem>& items) {
    return put_items(std::span<const RawItem>(items));
  }

  EventBundle build_bundle(const std::string& ticker, Date date) const {
    if (!calendar_.contains(date)) {
      throw UnknownTradingDay(date.iso() + " is not in the trading calendar");
    }
    if (access_logging_) {
      std::lock_guard lk(access_mutex_);
      access_log_.emplace_back(ticker, date);
    }
    EventBundle bundle{ticker, date, {}, market_close_utc(date)};
    std::shared_lock lock(mutex_);
    auto it = by_ticker_.find(ticker);
    if (it == by_ticker_.end()) return bundle;
    const std::vector<RawItem>& items = it->second;
    // Window is (previous trading day's close, this day's close]; overnight
    // and weekend items roll into the next trading day.
    const Timestamp lower = previous_close(date);
    auto lo = std::partition_point(items.begin(), items.end(), [&](const RawItem& r) {
      return r.published_at <= lower;
    });
    auto hi = std::partition_point(lo, items.end(), [&](const RawItem& r) {
      return r.published_at <= bundle.boundary;
    });
    bundle.items.assign(lo, hi);
    return bundle;
  }

  // One bundle per (trading day, ticker), date-major then ticker order.
  std::vector<EventBundle> query_bundles(std::vector<std::string> universe,
                                         const DayRange& range) const {
    if (range.last < range.first) throw PreconditionError("range start after end");
    std::sort(universe.begin(), universe.end());
    universe.erase(std::unique(universe.begin(), universe.end()), universe.end());
    std::vector<EventBundle> out;
    for (const Date& d : calendar_.in_range(range)) {
      for (const std::string& t : universe) out.push_back(build_bundle(t, d));
    }
    return out;
  }

  // Imports a line-delimited replay file. On a malformed line the valid
  // prefix before it is committed and ParseError carries the line number.
  std::size_t import_replay(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open replay file " + path.string());
    std::vector<RawItem> parsed;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (io::trim(line).empty()) continue;
      try {
        parsed.push_back(raw_item_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        put_items(parsed);
        throw ParseError(lineno, e.what());
      }
    }
    return put_items(parsed);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return checksums_.size();
  }

  void set_access_logging(bool on) { access_logging_ = on; }
  std::vector<std::pair<std::string, Date>> access_log() const {
    std::lock_guard lk(access_mutex_);
    return access_log_;
  }
  void clear_access_log() {
    std::lock_guard lk(access_mutex_);
    access_log_.clear();
  }

 private:
  // Close of the previous trading day, or the epoch when `date` is first.
  Timestamp previous_close(Date date) const {
    const auto idx = calendar_.index_of(date);
    if (!idx || *idx == 0) return Timestamp::min();
    return market_close_utc(calendar_[*idx - 1]);
  }

  void index(const RawItem& item) {
    checksums_.insert(item.checksum);
    auto& vec = by_ticker_[item.ticker];
    vec.insert(std::upper_bound(vec.begin(), vec.end(), item, item_order), item);
  }

  void append_log(const std::vector<const RawItem*>& items) {
    std::filesystem::create_directories(*dir_);
    std::ofstream out(*dir_ / kLogName, std::ios::app | std::ios::binary);
    if (!out) throw StorageError("cannot open log in " + dir_->string());
    for (const RawItem* item : items) out << to_json(*item).dump() << '\n';
    out.flush();
    if (!out) throw StorageError("write failed in " + dir_->string());
  }

  void load_log() {
    const auto path = *dir_ / kLogName;
    if (!std::filesystem::exists(path)) return;
    std::ifstream in(path);
    if (!in) throw StorageError("cannot read " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (io::trim(line).empty()) continue;
      RawItem item;
      try {
        item = raw_item_from_json(nlohmann::json::parse(line));
      } catch (const std::exception& e) {
        throw StorageError("corrupt log line " + std::to_string(lineno) + ": " + e.what());
      }
      if (!checksums_.contains(item.checksum)) index(item);
    }
  }

  TradingCalendar calendar_;
  std::optional<std::filesystem::path> dir_;
  mutable std::shared_mutex mutex_;
  std::unordered_set<std::uint64_t> checksums_;
  std::map<std::string, std::vector<RawItem>> by_ticker_;

  bool access_logging_ = false;
  mutable std::mutex access_mutex_;
  mutable std::vector<std::pair<std::string, Date>> access_log_;
};

}  // namespace newsalpha
