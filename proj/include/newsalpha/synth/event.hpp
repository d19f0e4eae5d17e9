#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include <json.hpp>

#include "newsalpha/core/date.hpp"
#include "newsalpha/core/io.hpp"

namespace newsalpha {

// Ground-truth news event planted by the synthetic generator. Its drift
// applies to log-returns of days date+1 ... date+horizon_days.
struct HiddenEvent {
  std::string ticker;
  Date date;
  int true_alpha_direction = 1;  // -1 or +1
  double strength = 1.0;         // (0, 1]
  int horizon_days = 5;          // 1 ... 20
  double alpha_per_day = 0.0;

  friend bool operator==(const HiddenEvent&, const HiddenEvent&) = default;
};

inline nlohmann::ordered_json to_json(const HiddenEvent& e) {
  nlohmann::ordered_json j;
  j["ticker"] = e.ticker;
  j["date"] = e.date.iso();
  j["direction"] = e.true_alpha_direction;
  j["strength"] = e.strength;
  j["horizon_days"] = e.horizon_days;
  j["alpha_per_day"] = e.alpha_per_day;
  return j;
}

inline HiddenEvent hidden_event_from_json(const nlohmann::json& j) {
  return HiddenEvent{j.at("ticker").get<std::string>(),
                     Date::parse(j.at("date").get<std::string>()),
                     j.at("direction").get<int>(),
                     j.at("strength").get<double>(),
                     j.at("horizon_days").get<int>(),
                     j.at("alpha_per_day").get<double>()};
}

// Pseudo-headline text for an event: "POSITIVE surprise of magnitude S for T".
// The body carries the horizon and drift so the event is fully recoverable.
inline std::string event_headline(const HiddenEvent& e) {
  return std::string(e.true_alpha_direction > 0 ? "POSITIVE" : "NEGATIVE") +
         " surprise of magnitude " + io::fmt_double(e.strength) + " for " + e.ticker;
}

inline std::string event_body(const HiddenEvent& e) {
  return "horizon_days=" + std::to_string(e.horizon_days) +
         "; alpha_per_day=" + io::fmt_double(e.alpha_per_day);
}

// Inverse of event_headline/event_body; nullopt for unrelated text.
inline std::optional<HiddenEvent> parse_event_text(const std::string& headline,
                                                   const std::string& body, Date date) {
  char dir[16] = {0};
  char strength[64] = {0};
  char ticker[64] = {0};
  if (std::sscanf(headline.c_str(), "%15s surprise of magnitude %63s for %63s", dir,
                  strength, ticker) != 3) {
    return std::nullopt;
  }
  const std::string d(dir);
  if (d != "POSITIVE" && d != "NEGATIVE") return std::nullopt;
  HiddenEvent e;
  e.ticker = ticker;
  e.date = date;
  e.true_alpha_direction = d == "POSITIVE" ? 1 : -1;
  try {
    e.strength = io::parse_double(strength);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  int horizon = 0;
  char alpha[64] = {0};
  if (std::sscanf(body.c_str(), "horizon_days=%d; alpha_per_day=%63s", &horizon, alpha) == 2) {
    e.horizon_days = horizon;
    try {
      e.alpha_per_day = io::parse_double(alpha);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return e;
}

}  // namespace newsalpha
