#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "newsalpha/core/error.hpp"
#include "newsalpha/core/rng.hpp"
#include "newsalpha/tradenv/env.hpp"

namespace newsalpha {

inline constexpr int kActionsPerTicker = 3;  // index 0,1,2 -> action -1,0,+1

inline int action_from_index(int k) { return k - 1; }
inline int index_from_action(int a) { return a + 1; }

// All weights live in one flat vector; the accessors below are views.
// Order: W1 b1 W2 b2 Wpi bpi Wv bv, matrices column-major.
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(std::size_t obs_width, std::size_t n_tickers, std::size_t hidden = 64)
      : obs_width_(obs_width), n_tickers_(n_tickers), hidden_(hidden),
        theta_(Eigen::VectorXd::Zero(Eigen::Index(count(obs_width, n_tickers, hidden)))) {}

  static std::size_t count(std::size_t obs_width, std::size_t n_tickers, std::size_t hidden = 64) {
    const std::size_t heads = kActionsPerTicker * n_tickers;
    return hidden * obs_width + hidden + hidden * hidden + hidden + heads * hidden + heads + hidden + 1;
  }

  // Gaussian init scaled by 1/sqrt(fan_in); action heads damped so the
  // initial policy is near uniform.
  static PolicyParams init(std::size_t obs_width, std::size_t n_tickers, std::uint64_t seed,
                           std::size_t hidden = 64) {
    PolicyParams p(obs_width, n_tickers, hidden);
    Rng rng(seed);
    auto fill = [&](auto m, double gain) {
      const double sd = gain / std::sqrt(double(m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal(0.0, sd);
      }
    };
    fill(p.w1(), std::sqrt(2.0));
    fill(p.w2(), std::sqrt(2.0));
    fill(p.wpi(), 0.01);
    fill(p.wv(), 1.0);
    return p;
  }

  std::size_t obs_width() const { return obs_width_; }
  std::size_t n_tickers() const { return n_tickers_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t heads() const { return kActionsPerTicker * n_tickers_; }

  Eigen::VectorXd& theta() { return theta_; }
  const Eigen::VectorXd& theta() const { return theta_; }

  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using CMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using CVecMap = Eigen::Map<const Eigen::VectorXd>;

  MatMap w1() { return mat(0, hidden_, obs_width_); }
  VecMap b1() { return vec(off_b1(), hidden_); }
  MatMap w2() { return mat(off_w2(), hidden_, hidden_); }
  VecMap b2() { return vec(off_b2(), hidden_); }
  MatMap wpi() { return mat(off_wpi(), heads(), hidden_); }
  VecMap bpi() { return vec(off_bpi(), heads()); }
  MatMap wv() { return mat(off_wv(), 1, hidden_); }
  double& bv() { return theta_[Eigen::Index(off_bv())]; }

  CMatMap w1() const { return cmat(0, hidden_, obs_width_); }
  CVecMap b1() const { return cvec(off_b1(), hidden_); }
  CMatMap w2() const { return cmat(off_w2(), hidden_, hidden_); }
  CVecMap b2() const { return cvec(off_b2(), hidden_); }
  CMatMap wpi() const { return cmat(off_wpi(), heads(), hidden_); }
  CVecMap bpi() const { return cvec(off_bpi(), heads()); }
  CMatMap wv() const { return cmat(off_wv(), 1, hidden_); }
  double bv() const { return theta_[Eigen::Index(off_bv())]; }

  bool all_finite() const { return theta_.allFinite(); }

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    return a.obs_width_ == b.obs_width_ && a.n_tickers_ == b.n_tickers_ && a.hidden_ == b.hidden_ &&
           a.theta_ == b.theta_;
  }

 private:
  std::size_t off_b1() const { return hidden_ * obs_width_; }
  std::size_t off_w2() const { return off_b1() + hidden_; }
  std::size_t off_b2() const { return off_w2() + hidden_ * hidden_; }
  std::size_t off_wpi() const { return off_b2() + hidden_; }
  std::size_t off_bpi() const { return off_wpi() + heads() * hidden_; }
  std::size_t off_wv() const { return off_bpi() + heads(); }
  std::size_t off_bv() const { return off_wv() + hidden_; }

  MatMap mat(std::size_t off, std::size_t r, std::size_t c) {
    return MatMap(theta_.data() + off, Eigen::Index(r), Eigen::Index(c));
  }
  VecMap vec(std::size_t off, std::size_t n) { return VecMap(theta_.data() + off, Eigen::Index(n)); }
  CMatMap cmat(std::size_t off, std::size_t r, std::size_t c) const {
    return CMatMap(theta_.data() + off, Eigen::Index(r), Eigen::Index(c));
  }
  CVecMap cvec(std::size_t off, std::size_t n) const {
    return CVecMap(theta_.data() + off, Eigen::Index(n));
  }

  std::size_t obs_width_ = 0;
  std::size_t n_tickers_ = 0;
  std::size_t hidden_ = 64;
  Eigen::VectorXd theta_;
};

inline nlohmann::ordered_json to_json(const PolicyParams& p) {
  nlohmann::ordered_json j;
  j["obs_width"] = p.obs_width();
  j["n_tickers"] = p.n_tickers();
  j["hidden"] = p.hidden();
  j["theta"] = std::vector<double>(p.theta().data(), p.theta().data() + p.theta().size());
  return j;
}

inline PolicyParams policy_params_from_json(const nlohmann::json& j) {
  PolicyParams p(j.at("obs_width").get<std::size_t>(), j.at("n_tickers").get<std::size_t>(),
                 j.at("hidden").get<std::size_t>());
  const auto theta = j.at("theta").get<std::vector<double>>();
  if (theta.size() != std::size_t(p.theta().size())) throw ConfigError("parameter count mismatch");
  p.theta() = Eigen::Map<const Eigen::VectorXd>(theta.data(), Eigen::Index(theta.size()));
  return p;
}

// Activations for a batch; observations are columns.
struct ForwardCache {
  Eigen::MatrixXd x;
  Eigen::MatrixXd h1;
  Eigen::MatrixXd h2;
  Eigen::MatrixXd logits;  // heads x batch, ticker-major (3 rows per ticker)
  Eigen::RowVectorXd value;
};

inline ForwardCache forward_batch(const PolicyParams& p, Eigen::MatrixXd x) {
  if (std::size_t(x.rows()) != p.obs_width()) {
    throw WidthMismatch("observation width " + std::to_string(x.rows()) + ", policy " +
                        std::to_string(p.obs_width()));
  }
  ForwardCache c;
  c.x = std::move(x);
  c.h1 = ((p.w1() * c.x).colwise() + p.b1()).array().tanh().matrix();
  c.h2 = ((p.w2() * c.h1).colwise() + p.b2()).array().tanh().matrix();
  c.logits = (p.wpi() * c.h2).colwise() + p.bpi();
  c.value = (p.wv() * c.h2).array() + p.bv();
  return c;
}

struct PolicyOutput {
  Eigen::MatrixXd logits;  // n_tickers x 3
  double value = 0.0;
};

inline PolicyOutput policy_forward(const PolicyParams& p, std::span<const double> obs) {
  const ForwardCache c = forward_batch(
      p, Eigen::Map<const Eigen::VectorXd>(obs.data(), Eigen::Index(obs.size())));
  PolicyOutput out;
  out.logits = Eigen::Map<const Eigen::MatrixXd>(c.logits.data(), kActionsPerTicker,
                                                 Eigen::Index(p.n_tickers()))
                   .transpose();
  out.value = c.value(0);
  return out;
}

// Log-softmax of one 3-way head.
inline Eigen::Vector3d log_softmax3(const Eigen::Ref<const Eigen::Vector3d>& z) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  return (z.array() - lse).matrix();
}

struct SampledActions {
  ActionVector actions;
  std::vector<int> indices;
  double log_prob = 0.0;  // joint: sum over tickers
};

// Stochastic draws use one uniform per ticker (inverse CDF). Deterministic
// mode takes the argmax; ties go to the lowest index.
inline SampledActions sample_actions(const Eigen::MatrixXd& logits, Rng* rng) {
  SampledActions s;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const Eigen::Vector3d lp = log_softmax3(logits.row(t).transpose());
    int k = 0;
    if (rng) {
      const double u = rng->uniform();
      double acc = 0.0;
      k = kActionsPerTicker - 1;
      for (int i = 0; i < kActionsPerTicker; ++i) {
        acc += std::exp(lp[i]);
        if (u < acc) {
          k = i;
          break;
        }
      }
    } else {
      for (int i = 1; i < kActionsPerTicker; ++i) {
        if (logits(t, i) > logits(t, k)) k = i;
      }
    }
    s.indices.push_back(k);
    s.actions.push_back(action_from_index(k));
    s.log_prob += lp[k];
  }
  return s;
}

}  // namespace newsalpha
