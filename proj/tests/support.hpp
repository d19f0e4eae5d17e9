#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "newsalpha/synth/market.hpp"

namespace testing_support {

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("newsalpha_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Market with the given close paths (closes[t][d]); OHLC collapse to the close.
// Macro VIX is 15 on every day unless `vix` is given.
inline newsalpha::MarketData hand_market(const std::vector<std::vector<double>>& closes,
                                         std::vector<double> vix = {}) {
  using namespace newsalpha;
  MarketData m;
  const std::size_t n = closes.front().size();
  m.calendar = TradingCalendar::weekdays(Date{2024, 1, 2}, n);
  for (std::size_t t = 0; t < closes.size(); ++t) m.tickers.push_back("T" + std::to_string(t));
  m.bars.assign(n, std::vector<Bar>(closes.size()));
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t t = 0; t < closes.size(); ++t) {
      const double c = closes[t][d];
      m.bars[d][t] = {c, c, c, c, 1e6};
    }
  }
  if (vix.empty()) vix.assign(n, 15.0);
  m.macro.assign(n, MacroFeatures{});
  for (std::size_t d = 0; d < n; ++d) m.macro[d].vix = vix[d];
  m.regime.assign(n, Regime::calm);
  return m;
}

}  // namespace testing_support
