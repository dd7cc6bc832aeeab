#include "qmdp/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qmdp/error.hpp"
#include "qmdp/parallel.hpp"
#include "qmdp/random.hpp"

namespace qmdp {

ExtendedPolicy::ExtendedPolicy(Policy base, Quantizer state_q, Quantizer action_q,
                               std::optional<Compactification> compact)
    : base_(std::move(base)),
      state_q_(std::move(state_q)),
      action_q_(std::move(action_q)),
      compact_(std::move(compact)) {
  const std::size_t expected = state_q_.size() + (compact_ ? 1 : 0);
  require(base_.size() == expected, "policy has " + std::to_string(base_.size()) + " entries, expected " +
                                        std::to_string(expected));
  for (std::size_t a : base_) require(a < action_q_.size(), "policy action index out of range");
  if (compact_) require(compact_->truncation.dim() == state_q_.dim(), "truncation dimension mismatch");
}

std::size_t ExtendedPolicy::finite_state(std::span<const double> z) const {
  require(z.size() == state_q_.dim(), "state dimension mismatch");
  if (compact_ && !compact_->truncation.contains(z)) return compact_->pseudo_state_index(state_q_);
  return state_q_.quantize(z);
}

const State& ExtendedPolicy::operator()(std::span<const double> z) const {
  return action_q_.point(base_[finite_state(z)]);
}

ExtendedPolicy extend_policy(const SolveResult& result, const Quantizer& state_q, const Quantizer& action_q,
                             std::optional<Compactification> compact) {
  return ExtendedPolicy(result.policy, state_q, action_q, std::move(compact));
}

std::size_t discounted_horizon(double beta, double cost_bound, double tail_tol) {
  require(beta > 0.0 && beta < 1.0, "discounted horizon needs beta in (0, 1)");
  require(tail_tol > 0.0, "tail_tol must be positive");
  require(cost_bound >= 0.0 && std::isfinite(cost_bound), "cost bound must be finite and non-negative");
  const auto tail = [&](std::size_t t) { return std::pow(beta, static_cast<double>(t)) * cost_bound / (1.0 - beta); };
  if (tail(1) <= tail_tol) return 1;
  double guess = std::ceil(std::log(tail_tol * (1.0 - beta) / cost_bound) / std::log(beta));
  std::size_t t = static_cast<std::size_t>(std::max(1.0, guess));
  while (tail(t) > tail_tol) ++t;
  while (t > 1 && tail(t - 1) <= tail_tol) --t;
  return t;
}

namespace {

enum class Accumulate { Discounted, Average };

struct Episode {
  double total = 0.0;
  bool escaped = false;
};

State initial_state(const ContinuousMdp& model, const InitialState& x0, Rng& rng) {
  if (x0) {
    require(x0->size() == model.state_space.dim(), "x0 dimension mismatch");
    return *x0;
  }
  const NoiseSpec* noise = model.noise();
  require(noise != nullptr, "x0 drawn from the noise needs a model with a noise law");
  State x(model.state_space.dim());
  for (double& v : x) v = noise->sample(rng);
  return x;
}

RolloutReport run(const ContinuousMdp& model, const ExtendedPolicy& policy, const InitialState& x0,
                  std::size_t horizon, Accumulate mode, bool keep_stages, const RolloutOptions& opts) {
  require(opts.episodes >= 1, "episodes must be at least 1");
  require(horizon >= 1, "horizon must be at least 1");
  const std::size_t episodes = opts.episodes;
  const double beta = model.beta;
  std::vector<Episode> result(episodes);
  std::vector<double> stages(keep_stages ? episodes * horizon : 0);
  const BoxSpace* box = opts.safety_box ? &*opts.safety_box : (model.state_space.unbounded ? nullptr : &model.state_space);

  parallel_for(episodes, opts.jobs, [&](std::size_t e) {
    Rng rng = make_stream(opts.seed, e);
    State x = initial_state(model, x0, rng);
    Episode ep;
    double discount = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      if (box && !box->contains(x, 1e-9)) ep.escaped = true;
      const State& a = policy(x);
      const double c = model.cost(x, a);
      if (!std::isfinite(c))
        fail(ErrorKind::Numeric, "non-finite stage cost in episode " + std::to_string(e) + " at t=" + std::to_string(t));
      if (keep_stages) stages[e * horizon + t] = c;
      ep.total += mode == Accumulate::Discounted ? discount * c : c;
      discount *= beta;
      if (t + 1 < horizon) x = sample_next(model, x, a, rng);
    }
    if (mode == Accumulate::Average) ep.total /= static_cast<double>(horizon);
    result[e] = ep;
  });

  RolloutReport rep;
  rep.episodes = episodes;
  rep.horizon = horizon;
  rep.seed = opts.seed;
  double sum = 0.0;
  for (const Episode& ep : result) {
    sum += ep.total;
    rep.escaped_episodes += ep.escaped ? 1 : 0;
  }
  rep.estimate = sum / static_cast<double>(episodes);
  if (episodes > 1) {
    double ss = 0.0;
    for (const Episode& ep : result) ss += (ep.total - rep.estimate) * (ep.total - rep.estimate);
    rep.std_error = std::sqrt(ss / static_cast<double>(episodes - 1) / static_cast<double>(episodes));
  }
  if (keep_stages) {
    rep.per_stage.assign(horizon, 0.0);
    rep.per_stage_stderr.assign(horizon, 0.0);
    for (std::size_t t = 0; t < horizon; ++t) {
      double s = 0.0;
      for (std::size_t e = 0; e < episodes; ++e) s += stages[e * horizon + t];
      const double mean = s / static_cast<double>(episodes);
      double ss = 0.0;
      for (std::size_t e = 0; e < episodes; ++e) {
        const double d = stages[e * horizon + t] - mean;
        ss += d * d;
      }
      rep.per_stage[t] = mean;
      if (episodes > 1)
        rep.per_stage_stderr[t] = std::sqrt(ss / static_cast<double>(episodes - 1) / static_cast<double>(episodes));
    }
  }
  return rep;
}

}  // namespace

RolloutReport rollout_discounted(const ContinuousMdp& model, const ExtendedPolicy& policy, const InitialState& x0,
                                 double tail_tol, const RolloutOptions& opts) {
  const std::size_t horizon = discounted_horizon(model.beta, model.assumptions.cost_sup_norm, tail_tol);
  return run(model, policy, x0, horizon, Accumulate::Discounted, opts.keep_per_stage, opts);
}

RolloutReport rollout_average(const ContinuousMdp& model, const ExtendedPolicy& policy, const InitialState& x0,
                              std::size_t horizon, const RolloutOptions& opts) {
  return run(model, policy, x0, horizon, Accumulate::Average, opts.keep_per_stage, opts);
}

RolloutReport per_stage_distortion(const ContinuousMdp& model, const ExtendedPolicy& policy, const InitialState& x0,
                                   std::size_t horizon, const RolloutOptions& opts) {
  RolloutReport rep = run(model, policy, x0, horizon, Accumulate::Average, true, opts);
  // The headline number is the smallest stage mean, with that stage's standard error.
  const auto it = std::min_element(rep.per_stage.begin(), rep.per_stage.end());
  const std::size_t t = static_cast<std::size_t>(it - rep.per_stage.begin());
  rep.estimate = *it;
  rep.std_error = rep.per_stage_stderr[t];
  return rep;
}

}  // namespace qmdp
