#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "newsalpha/metrics/signal.hpp"

namespace newsalpha {

struct GateThresholds {
  double signal_coverage_min = 0.25;
  double ic_ir_min = 0.05;
  double quintile_spread_min = 0.0;  // strict: spread must exceed it
  double hit_rate_min = 0.52;

  void validate() const {
    for (double v : {signal_coverage_min, ic_ir_min, quintile_spread_min, hit_rate_min}) {
      if (!std::isfinite(v)) throw ConfigError("gate thresholds must be finite");
    }
  }
};

struct GateCheck {
  std::string name;
  double threshold = 0.0;
  double value = 0.0;
  bool strict = false;
  bool pass = false;
};

struct GateResult {
  std::vector<GateCheck> gates;  // coverage, ic_ir, spread, hit rate
  bool overall_pass = false;

  const GateCheck& gate(std::string_view name) const {
    for (const auto& g : gates) {
      if (g.name == name) return g;
    }
    throw ConfigError("no gate named '" + std::string(name) + "'");
  }
};

inline GateResult evaluate_gates(const SignalMetrics& m, const GateThresholds& th = {}) {
  auto check = [](std::string name, double threshold, double value, bool strict) {
    const bool pass = strict ? value > threshold : value >= threshold;
    return GateCheck{std::move(name), threshold, value, strict, pass};
  };
  GateResult r;
  r.gates.push_back(check("signal_coverage", th.signal_coverage_min, m.signal_coverage, false));
  r.gates.push_back(check("ic_ir", th.ic_ir_min, m.ic_report.ic_ir, false));
  r.gates.push_back(check("quintile_spread", th.quintile_spread_min, m.quintile_spread, true));
  r.gates.push_back(check("hit_rate", th.hit_rate_min, m.hit_rate, false));
  r.overall_pass = true;
  for (const auto& g : r.gates) r.overall_pass = r.overall_pass && g.pass;
  return r;
}

inline nlohmann::ordered_json to_json(const GateThresholds& t) {
  nlohmann::ordered_json j;
  j["signal_coverage_min"] = t.signal_coverage_min;
  j["ic_ir_min"] = t.ic_ir_min;
  j["quintile_spread_min"] = t.quintile_spread_min;
  j["hit_rate_min"] = t.hit_rate_min;
  return j;
}

inline GateThresholds gate_thresholds_from_json(const nlohmann::json& j) {
  GateThresholds t;
  t.signal_coverage_min = j.value("signal_coverage_min", t.signal_coverage_min);
  t.ic_ir_min = j.value("ic_ir_min", t.ic_ir_min);
  t.quintile_spread_min = j.value("quintile_spread_min", t.quintile_spread_min);
  t.hit_rate_min = j.value("hit_rate_min", t.hit_rate_min);
  t.validate();
  return t;
}

inline nlohmann::ordered_json to_json(const GateResult& r) {
  nlohmann::ordered_json j;
  auto gates = nlohmann::ordered_json::array();
  for (const auto& g : r.gates) {
    nlohmann::ordered_json row;
    row["name"] = g.name;
    row["threshold"] = g.threshold;
    row["value"] = g.value;
    row["comparison"] = g.strict ? ">" : ">=";
    row["pass"] = g.pass;
    gates.push_back(std::move(row));
  }
  j["gates"] = std::move(gates);
  j["overall_pass"] = r.overall_pass;
  return j;
}

}  // namespace newsalpha
