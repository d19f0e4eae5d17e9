#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "newsalpha/core/error.hpp"

namespace newsalpha {

// Per-dimension running mean/variance (Welford) with clipping. Frozen
// (update_enabled = false) it is a pure function of its statistics.
class ObsNormalizer {
 public:
  ObsNormalizer() = default;
  explicit ObsNormalizer(std::size_t width, double clip = 10.0, double epsilon = 1e-8)
      : mean_(width, 0.0), m2_(width, 0.0), clip_(clip), epsilon_(epsilon) {}

  std::size_t width() const { return mean_.size(); }
  std::size_t count() const { return count_; }
  double clip_bound() const { return clip_; }
  bool update_enabled() const { return update_; }
  void set_update_enabled(bool on) { update_ = on; }

  double mean(std::size_t i) const { return mean_[i]; }
  // Population variance; 1 before any observation.
  double var(std::size_t i) const { return count_ == 0 ? 1.0 : m2_[i] / double(count_); }

  void update(std::span<const double> obs) {
    check(obs);
    ++count_;
    const double n = double(count_);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const double delta = obs[i] - mean_[i];
      mean_[i] += delta / n;
      m2_[i] += delta * (obs[i] - mean_[i]);
    }
  }

  std::vector<double> normalize(std::span<const double> obs) {
    if (update_) update(obs);
    return apply(obs);
  }

  std::vector<double> apply(std::span<const double> obs) const {
    check(obs);
    std::vector<double> out(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      out[i] = std::clamp((obs[i] - mean_[i]) / std::sqrt(var(i) + epsilon_), -clip_, clip_);
    }
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["count"] = count_;
    j["clip"] = clip_;
    j["epsilon"] = epsilon_;
    j["mean"] = mean_;
    j["m2"] = m2_;
    return j;
  }

  static ObsNormalizer from_json(const nlohmann::json& j) {
    ObsNormalizer n;
    n.count_ = j.at("count").get<std::size_t>();
    n.clip_ = j.at("clip").get<double>();
    n.epsilon_ = j.at("epsilon").get<double>();
    n.mean_ = j.at("mean").get<std::vector<double>>();
    n.m2_ = j.at("m2").get<std::vector<double>>();
    if (n.mean_.size() != n.m2_.size()) throw ConfigError("normalizer arrays differ in length");
    return n;
  }

  friend bool operator==(const ObsNormalizer&, const ObsNormalizer&) = default;

 private:
  void check(std::span<const double> obs) const {
    if (obs.size() != mean_.size()) {
      throw WidthMismatch("observation width " + std::to_string(obs.size()) + ", normalizer " +
                          std::to_string(mean_.size()));
    }
  }

  std::vector<double> mean_;
  std::vector<double> m2_;
  std::size_t count_ = 0;
  double clip_ = 10.0;
  double epsilon_ = 1e-8;
  bool update_ = true;
};

}  // namespace newsalpha
