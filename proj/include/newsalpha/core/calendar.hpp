#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "newsalpha/core/date.hpp"
#include "newsalpha/core/io.hpp"

namespace newsalpha {

// Ordered set of trading days. Loaded from a CSV of ISO dates (one per line,
// optional "date" header) or generated as consecutive weekdays.
class TradingCalendar {
 public:
  TradingCalendar() = default;
  explicit TradingCalendar(std::vector<Date> days) : days_(std::move(days)) {
    std::sort(days_.begin(), days_.end());
    days_.erase(std::unique(days_.begin(), days_.end()), days_.end());
  }

  static TradingCalendar weekdays(Date start, std::size_t count) {
    std::vector<Date> days;
    days.reserve(count);
    for (Date d = start; days.size() < count; d = d.plus_days(1)) {
      if (!d.is_weekend()) days.push_back(d);
    }
    return TradingCalendar(std::move(days));
  }

  static TradingCalendar from_csv(std::string_view text) {
    std::vector<Date> days;
    const auto lines = io::split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string cell = io::trim(io::split(lines[i], ',').front());
      if (cell.empty() || (i == 0 && cell == "date")) continue;
      try {
        days.push_back(Date::parse(cell));
      } catch (const ConfigError& e) {
        throw ParseError(i + 1, e.what());
      }
    }
    return TradingCalendar(std::move(days));
  }

  static TradingCalendar load(const std::filesystem::path& path) {
    return from_csv(io::read_file(path));
  }

  std::string to_csv() const {
    std::string out = "date\n";
    for (const Date& d : days_) out += d.iso() + "\n";
    return out;
  }

  const std::vector<Date>& days() const { return days_; }
  std::size_t size() const { return days_.size(); }
  bool empty() const { return days_.empty(); }
  const Date& operator[](std::size_t i) const { return days_[i]; }

  bool contains(Date d) const {
    return std::binary_search(days_.begin(), days_.end(), d);
  }

  std::optional<std::size_t> index_of(Date d) const {
    auto it = std::lower_bound(days_.begin(), days_.end(), d);
    if (it == days_.end() || *it != d) return std::nullopt;
    return std::size_t(it - days_.begin());
  }

  std::vector<Date> in_range(const DayRange& r) const {
    auto lo = std::lower_bound(days_.begin(), days_.end(), r.first);
    auto hi = std::upper_bound(days_.begin(), days_.end(), r.last);
    return lo < hi ? std::vector<Date>(lo, hi) : std::vector<Date>{};
  }

 private:
  std::vector<Date> days_;
};

}  // namespace newsalpha
