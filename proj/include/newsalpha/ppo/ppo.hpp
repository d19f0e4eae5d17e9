#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "newsalpha/bench/stats.hpp"
#include "newsalpha/core/io.hpp"
#include "newsalpha/ppo/policy.hpp"
#include "newsalpha/tradenv/env.hpp"
#include "newsalpha/tradenv/normalizer.hpp"

namespace newsalpha {

struct PPOConfig {
  std::size_t total_timesteps = 50000;  // full-scale runs use 500000
  std::size_t rollout_horizon = 2048;
  std::size_t minibatch = 64;
  std::size_t epochs_per_update = 10;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  std::size_t checkpoint_every = 10000;  // full-scale runs checkpoint every 100000
  std::size_t hidden = 64;
  // Divide training rewards by the running std of the discounted return,
  // clipped to +-reward_clip.
  bool normalize_rewards = true;
  double reward_clip = 10.0;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in [0, 1]");
    if (!(clip_epsilon > 0.0)) throw ConfigError("clip_epsilon must be positive");
    if (rollout_horizon == 0 || minibatch == 0 || epochs_per_update == 0 || hidden == 0) {
      throw ConfigError("rollout_horizon, minibatch, epochs and hidden must be positive");
    }
    if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
    if (!(learning_rate > 0.0) || !(max_grad_norm > 0.0)) {
      throw ConfigError("learning_rate and max_grad_norm must be positive");
    }
  }
};

inline nlohmann::ordered_json to_json(const PPOConfig& c) {
  return {{"total_timesteps", c.total_timesteps}, {"rollout_horizon", c.rollout_horizon},
          {"minibatch", c.minibatch},             {"epochs_per_update", c.epochs_per_update},
          {"gamma", c.gamma},                     {"gae_lambda", c.gae_lambda},
          {"clip_epsilon", c.clip_epsilon},       {"value_coef", c.value_coef},
          {"entropy_coef", c.entropy_coef},       {"learning_rate", c.learning_rate},
          {"max_grad_norm", c.max_grad_norm},     {"checkpoint_every", c.checkpoint_every},
          {"hidden", c.hidden},                   {"normalize_rewards", c.normalize_rewards},
          {"reward_clip", c.reward_clip}};
}

inline PPOConfig ppo_config_from_json(const nlohmann::json& j) {
  PPOConfig c;
  c.total_timesteps = j.value("total_timesteps", c.total_timesteps);
  c.rollout_horizon = j.value("rollout_horizon", c.rollout_horizon);
  c.minibatch = j.value("minibatch", c.minibatch);
  c.epochs_per_update = j.value("epochs_per_update", c.epochs_per_update);
  c.gamma = j.value("gamma", c.gamma);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.clip_epsilon = j.value("clip_epsilon", c.clip_epsilon);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.hidden = j.value("hidden", c.hidden);
  c.normalize_rewards = j.value("normalize_rewards", c.normalize_rewards);
  c.reward_clip = j.value("reward_clip", c.reward_clip);
  c.validate();
  return c;
}

// Running scale of the discounted return, used to normalise training rewards.
class RewardScaler {
 public:
  RewardScaler(double gamma, double clip, double epsilon = 1e-8)
      : gamma_(gamma), clip_(clip), epsilon_(epsilon), stats_(1) {}

  double scale(double reward, bool done) {
    ret_ = ret_ * gamma_ + reward;
    stats_.update(std::span<const double>(&ret_, 1));
    if (done) ret_ = 0.0;
    return std::clamp(reward / std::sqrt(stats_.var(0) + epsilon_), -clip_, clip_);
  }

  nlohmann::ordered_json to_json() const {
    return {{"discounted_return", ret_}, {"stats", stats_.to_json()}};
  }

 private:
  double gamma_, clip_, epsilon_;
  double ret_ = 0.0;
  ObsNormalizer stats_;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// dones[t] != 0 means the episode ended after step t, so V[t+1] is masked.
// `last_value` bootstraps the step after the final one.
inline GaeResult gae(std::span<const double> rewards, std::span<const double> values,
                     std::span<const std::uint8_t> dones, double last_value, double gamma,
                     double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) throw LengthMismatch("gae inputs differ in length");
  GaeResult g;
  g.advantages.assign(n, 0.0);
  g.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = i + 1 < n ? values[i + 1] : last_value;
    const double live = dones[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * live - values[i];
    next_adv = delta + gamma * lambda * live * next_adv;
    g.advantages[i] = next_adv;
    g.returns[i] = next_adv + values[i];
  }
  return g;
}

// Clipped surrogate for one sample (to be maximised).
inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

struct RolloutBatch {
  Eigen::MatrixXd observations;  // width x n, normalised
  Eigen::MatrixXi actions;       // n_tickers x n, head indices 0..2
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages;  // filled by compute_advantages
  std::vector<double> returns;

  std::size_t size() const { return rewards.size(); }

  void check() const {
    const std::size_t n = size();
    if (std::size_t(observations.cols()) != n || std::size_t(actions.cols()) != n ||
        log_probs.size() != n || values.size() != n || dones.size() != n) {
      throw LengthMismatch("rollout batch fields differ in length");
    }
  }

  void compute_advantages(double last_value, double gamma, double lambda) {
    check();
    auto g = gae(rewards, values, dones, last_value, gamma, lambda);
    advantages = std::move(g.advantages);
    returns = std::move(g.returns);
  }
};

struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// PPO loss on the columns `idx` of `batch`, with `adv` already normalised.
//   total = -mean(min(r A, clip(r) A)) + c_v mean((V - R)^2) - c_e mean(H)
// If `grad` is non-null it receives d total / d theta.
inline LossBreakdown loss_and_gradient(const PolicyParams& p, const RolloutBatch& batch,
                                       std::span<const double> adv, std::span<const std::size_t> idx,
                                       const PPOConfig& cfg, Eigen::VectorXd* grad) {
  const Eigen::Index B = Eigen::Index(idx.size());
  const Eigen::Index T = Eigen::Index(p.n_tickers());
  Eigen::MatrixXd x(batch.observations.rows(), B);
  for (Eigen::Index i = 0; i < B; ++i) x.col(i) = batch.observations.col(Eigen::Index(idx[i]));
  const ForwardCache c = forward_batch(p, std::move(x));

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(c.logits.rows(), B);
  Eigen::RowVectorXd d_value(B);
  LossBreakdown L;
  const double inv_b = 1.0 / double(B);
  const double eps = cfg.clip_epsilon;
  for (Eigen::Index i = 0; i < B; ++i) {
    const std::size_t s = idx[i];
    double logp = 0.0, entropy = 0.0;
    Eigen::Matrix<double, 3, Eigen::Dynamic> lp(3, T);
    for (Eigen::Index t = 0; t < T; ++t) {
      lp.col(t) = log_softmax3(c.logits.block(3 * t, i, 3, 1));
      logp += lp(batch.actions(t, Eigen::Index(s)), t);
      const Eigen::Array3d pr = lp.col(t).array().exp();
      entropy -= (pr * lp.col(t).array()).sum();
    }
    const double log_ratio = logp - batch.log_probs[s];
    const double ratio = std::exp(log_ratio);
    const double a = adv[i];
    L.policy -= clipped_surrogate(ratio, a, eps) * inv_b;
    L.entropy += entropy * inv_b;
    L.approx_kl += ((ratio - 1.0) - log_ratio) * inv_b;
    if (std::abs(ratio - 1.0) > eps) L.clip_fraction += inv_b;
    const double v_err = c.value(i) - batch.returns[s];
    L.value += v_err * v_err * inv_b;

    // d(-min(rA, clip(r)A))/dlogp is -rA on the unclipped branch, 0 otherwise.
    const bool unclipped = ratio * a <= std::clamp(ratio, 1.0 - eps, 1.0 + eps) * a;
    const double g_logp = unclipped ? -ratio * a * inv_b : 0.0;
    d_value(i) = cfg.value_coef * 2.0 * v_err * inv_b;
    for (Eigen::Index t = 0; t < T; ++t) {
      const Eigen::Array3d pr = lp.col(t).array().exp();
      double h = 0.0;
      for (int k = 0; k < 3; ++k) h -= pr[k] * lp(k, t);
      const int chosen = batch.actions(t, Eigen::Index(s));
      for (int k = 0; k < 3; ++k) {
        // dlogp/dz_k = 1[k=a] - p_k ; dH/dz_k = -p_k (log p_k + H)
        const double dlogp = (k == chosen ? 1.0 : 0.0) - pr[k];
        const double dh = -pr[k] * (lp(k, t) + h);
        d_logits(3 * t + k, i) = g_logp * dlogp - cfg.entropy_coef * dh * inv_b;
      }
    }
  }
  L.total = L.policy + cfg.value_coef * L.value - cfg.entropy_coef * L.entropy;
  if (!grad) return L;

  PolicyParams g(p.obs_width(), p.n_tickers(), p.hidden());
  g.wpi() = d_logits * c.h2.transpose();
  g.bpi() = d_logits.rowwise().sum();
  g.wv() = d_value * c.h2.transpose();
  g.bv() = d_value.sum();
  const Eigen::MatrixXd d_h2 = p.wpi().transpose() * d_logits + p.wv().transpose() * d_value;
  const Eigen::MatrixXd d_z2 = (d_h2.array() * (1.0 - c.h2.array().square())).matrix();
  g.w2() = d_z2 * c.h1.transpose();
  g.b2() = d_z2.rowwise().sum();
  const Eigen::MatrixXd d_h1 = p.w2().transpose() * d_z2;
  const Eigen::MatrixXd d_z1 = (d_h1.array() * (1.0 - c.h1.array().square())).matrix();
  g.w1() = d_z1 * c.x.transpose();
  g.b1() = d_z1.rowwise().sum();
  *grad = std::move(g.theta());
  return L;
}

// Bias-corrected Adam.
class Adam {
 public:
  explicit Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(Eigen::VectorXd::Zero(Eigen::Index(n))), v_(Eigen::VectorXd::Zero(Eigen::Index(n))),
        lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, double(t_));
    const double c2 = 1.0 - std::pow(beta2_, double(t_));
    theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  std::size_t steps() const { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // before clipping, averaged over minibatches
  std::size_t minibatches = 0;
};

inline std::vector<double> normalized_advantages(const std::vector<double>& adv) {
  const double n = double(adv.size());
  double mean = 0.0;
  for (double a : adv) mean += a / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean) / n;
  const double sd = std::sqrt(var) + 1e-8;
  std::vector<double> out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) out[i] = (adv[i] - mean) / sd;
  return out;
}

// Epochs of shuffled minibatch steps. On a non-finite loss the update is
// abandoned and `params` is left untouched.
inline UpdateStats ppo_update(PolicyParams& params, Adam& opt, const RolloutBatch& batch,
                              const PPOConfig& cfg, Rng& shuffle_rng) {
  batch.check();
  if (batch.advantages.size() != batch.size()) throw PreconditionError("advantages not computed");
  const std::vector<double> adv = normalized_advantages(batch.advantages);
  PolicyParams work = params;
  Adam work_opt = opt;
  UpdateStats s;
  std::vector<std::size_t> order(batch.size());
  std::vector<double> mb_adv;
  Eigen::VectorXd grad;
  for (std::size_t epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[std::size_t(shuffle_rng.uniform_int(0, std::int64_t(i) - 1))]);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t end = std::min(order.size(), start + cfg.minibatch);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      mb_adv.clear();
      for (std::size_t k : idx) mb_adv.push_back(adv[k]);
      const LossBreakdown L = loss_and_gradient(work, batch, mb_adv, idx, cfg, &grad);
      if (!std::isfinite(L.total) || !grad.allFinite()) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", minibatch at " +
                            std::to_string(start) + ": policy " + std::to_string(L.policy) +
                            ", value " + std::to_string(L.value) + ", entropy " +
                            std::to_string(L.entropy));
      }
      const double norm = grad.norm();
      if (norm > cfg.max_grad_norm) grad *= cfg.max_grad_norm / norm;
      work_opt.step(work.theta(), grad);
      ++s.minibatches;
      s.policy_loss += L.policy;
      s.value_loss += L.value;
      s.entropy += L.entropy;
      s.approx_kl += L.approx_kl;
      s.clip_fraction += L.clip_fraction;
      s.grad_norm += norm;
    }
  }
  const double k = double(s.minibatches);
  s.policy_loss /= k;
  s.value_loss /= k;
  s.entropy /= k;
  s.approx_kl /= k;
  s.clip_fraction /= k;
  s.grad_norm /= k;
  params = std::move(work);
  opt = std::move(work_opt);
  return s;
}

struct EquityPoint {
  Date date;
  double value = 0.0;
};

struct EpisodeResult {
  std::vector<EquityPoint> equity;  // initial value plus one point per step
  std::vector<ActionVector> actions;
  std::vector<StepInfo> steps;

  std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& p : equity) v.push_back(p.value);
    return v;
  }
};

// One full episode with a frozen normaliser; nothing is mutated.
inline EpisodeResult evaluate_policy(const PolicyParams& params, const ObsNormalizer& norm,
                                     TradingEnv env, bool deterministic = true,
                                     std::uint64_t seed = 0) {
  if (norm.update_enabled()) throw PreconditionError("evaluate_policy needs a frozen normaliser");
  Rng rng(derive_seed(seed, "eval-sample"));
  env.reset(seed);
  EpisodeResult r;
  r.equity.push_back({env.date(), env.portfolio_value()});
  for (bool done = false; !done;) {
    const auto obs = norm.apply(env.observation());
    const auto out = policy_forward(params, obs);
    auto sampled = sample_actions(out.logits, deterministic ? nullptr : &rng);
    const auto step = env.step(sampled.actions);
    r.actions.push_back(std::move(sampled.actions));
    r.steps.push_back(step.info);
    r.equity.push_back({step.info.date, step.info.value});
    done = step.done;
  }
  return r;
}

// Replays a recorded action trace through a fresh episode.
inline EpisodeResult replay_actions(TradingEnv env, const std::vector<ActionVector>& trace) {
  env.reset(0);
  EpisodeResult r;
  r.equity.push_back({env.date(), env.portfolio_value()});
  for (const auto& a : trace) {
    const auto step = env.step(a);
    r.actions.push_back(a);
    r.steps.push_back(step.info);
    r.equity.push_back({step.info.date, step.info.value});
    if (step.done) break;
  }
  return r;
}

struct CurvePoint {
  std::size_t timestep = 0;
  std::optional<double> eval_sharpe;  // empty when the curve is flat
  double eval_return = 0.0;           // percent
};

struct Checkpoint {
  std::size_t timestep = 0;
  PolicyParams params;
  ObsNormalizer normalizer;
};

inline nlohmann::ordered_json checkpoint_json(const Checkpoint& c, const PPOConfig& cfg,
                                              std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["format"] = "newsalpha-ppo-checkpoint";
  j["version"] = 1;
  j["seed"] = seed;
  j["timestep"] = c.timestep;
  j["config"] = to_json(cfg);
  j["normalizer"] = c.normalizer.to_json();
  j["policy"] = to_json(c.params);
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "newsalpha-ppo-checkpoint" || j.value("version", 0) != 1) {
    throw ConfigError("not a version-1 checkpoint");
  }
  Checkpoint c;
  c.timestep = j.at("timestep").get<std::size_t>();
  c.params = policy_params_from_json(j.at("policy"));
  c.normalizer = ObsNormalizer::from_json(j.at("normalizer"));
  c.normalizer.set_update_enabled(false);
  return c;
}

inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "timestep,eval_sharpe,eval_return\n";
  for (const auto& p : curve) {
    out += std::to_string(p.timestep) + "," + (p.eval_sharpe ? io::fmt_double(*p.eval_sharpe) : "") +
           "," + io::fmt_double(p.eval_return) + "\n";
  }
  return out;
}

using EnvFactory = std::function<TradingEnv()>;

struct TrainResult {
  std::vector<Checkpoint> checkpoints;
  std::vector<CurvePoint> curve;
  std::vector<UpdateStats> updates;
  PolicyParams final_params;
  ObsNormalizer final_normalizer;  // frozen
};

// Hierarchical seeding: master seed -> "init" (weights), "sample" (actions),
// "shuffle" (minibatch order), "env" (episode seeds). The normaliser is
// caller-owned and updated during training only; each checkpoint is scored
// on the validation env with a frozen copy and deterministic actions.
inline TrainResult train(const EnvFactory& make_env, const EnvFactory& make_validation_env,
                         ObsNormalizer& norm, const PPOConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TradingEnv env = make_env();
  const TradingEnv validation = make_validation_env();
  if (validation.width() != env.width()) throw WidthMismatch("validation env width differs");
  if (norm.width() != env.width()) throw WidthMismatch("normaliser width differs from env");

  PolicyParams params = PolicyParams::init(env.width(), env.n_tickers(), derive_seed(seed, "init"), cfg.hidden);
  Adam opt(std::size_t(params.theta().size()), cfg.learning_rate);
  Rng sample_rng(derive_seed(seed, "sample"));
  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  Rng env_rng(derive_seed(seed, "env"));
  RewardScaler reward_scaler(cfg.gamma, cfg.reward_clip);
  norm.set_update_enabled(true);

  TrainResult result;
  auto checkpoint = [&](std::size_t timestep) {
    ObsNormalizer frozen = norm;
    frozen.set_update_enabled(false);
    const auto episode = evaluate_policy(params, frozen, validation, true);
    const auto values = episode.values();
    result.curve.push_back({timestep, try_sharpe(daily_returns(values)), total_return_pct(values)});
    result.checkpoints.push_back({timestep, params, std::move(frozen)});
  };

  env.reset(env_rng.next_u64());
  std::vector<double> obs = norm.normalize(env.observation());
  std::size_t steps = 0;
  while (steps < cfg.total_timesteps) {
    const std::size_t n = std::min(cfg.rollout_horizon, cfg.total_timesteps - steps);
    RolloutBatch batch;
    batch.observations.resize(Eigen::Index(env.width()), Eigen::Index(n));
    batch.actions.resize(Eigen::Index(env.n_tickers()), Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto out = policy_forward(params, obs);
      const auto sampled = sample_actions(out.logits, &sample_rng);
      batch.observations.col(Eigen::Index(i)) =
          Eigen::Map<const Eigen::VectorXd>(obs.data(), Eigen::Index(obs.size()));
      for (std::size_t t = 0; t < sampled.indices.size(); ++t) {
        batch.actions(Eigen::Index(t), Eigen::Index(i)) = sampled.indices[t];
      }
      batch.log_probs.push_back(sampled.log_prob);
      batch.values.push_back(out.value);
      const auto step = env.step(sampled.actions);
      batch.rewards.push_back(cfg.normalize_rewards ? reward_scaler.scale(step.reward, step.done)
                                                    : step.reward);
      batch.dones.push_back(step.done ? 1 : 0);
      if (step.done) env.reset(env_rng.next_u64());
      obs = norm.normalize(env.observation());
      ++steps;
      if (steps % cfg.checkpoint_every == 0) checkpoint(steps);
    }
    // Nothing after the final checkpoint could be scored, so skip that update.
    if (steps >= cfg.total_timesteps) break;
    const double last_value = batch.dones.back() ? 0.0 : policy_forward(params, obs).value;
    batch.compute_advantages(last_value, cfg.gamma, cfg.gae_lambda);
    result.updates.push_back(ppo_update(params, opt, batch, cfg, shuffle_rng));
  }
  result.final_params = params;
  result.final_normalizer = norm;
  result.final_normalizer.set_update_enabled(false);
  return result;
}

}  // namespace newsalpha
