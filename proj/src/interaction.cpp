#include "evonash/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "evonash/errors.hpp"

namespace evonash {

namespace {

void check_pair(const Smm& m1, const Smm& m2) {
  if (m1.num_actions() != m2.num_actions())
    throw ShapeError("machines disagree on action count (" + std::to_string(m1.num_actions()) +
                     " vs " + std::to_string(m2.num_actions()) + ")");
}

void check_distribution(std::span<const double> d, const Smm& m, const char* which) {
  if (d.size() != m.num_states())
    throw ShapeError(std::string("state distribution ") + which + " has " +
                     std::to_string(d.size()) + " entries but the machine has " +
                     std::to_string(m.num_states()) + " states");
}

// out must be zeroed, r1/r2 sized S1/S2.
void joint_step_into(std::span<const double> d, std::span<double> out, const Smm& m1,
                     const Smm& m2, std::span<double> r1, std::span<double> r2) {
  const std::size_t S1 = m1.num_states();
  const std::size_t S2 = m2.num_states();
  const std::size_t A = m1.num_actions();
  for (std::size_t s = 0; s < S1; ++s) {
    for (std::size_t t = 0; t < S2; ++t) {
      const double w = d[s * S2 + t];
      std::fill(r1.begin(), r1.end(), 0.0);
      std::fill(r2.begin(), r2.end(), 0.0);
      for (std::size_t a = 0; a < A; ++a) {
        const double p2 = m2.emission(t, a);
        const double p1 = m1.emission(s, a);
        const auto row1 = m1.transition_row(s, a);
        for (std::size_t n = 0; n < S1; ++n) r1[n] += p2 * row1[n];
        const auto row2 = m2.transition_row(t, a);
        for (std::size_t n = 0; n < S2; ++n) r2[n] += p1 * row2[n];
      }
      for (std::size_t n1 = 0; n1 < S1; ++n1) {
        const double x = w * r1[n1];
        double* dst = out.data() + n1 * S2;
        for (std::size_t n2 = 0; n2 < S2; ++n2) dst[n2] += x * r2[n2];
      }
    }
  }
}

// d' = sum_s d(s) sum_a q(a) T(s, a, .)
void marginal_step_into(std::span<const double> d, std::span<const double> opponent_actions,
                        const Smm& m, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  // Mass would otherwise be multiplied by the opponent's total each step,
  // which amplifies rounding error geometrically.
  double norm = 0.0;
  for (double q : opponent_actions) norm += q;
  const std::size_t S = m.num_states();
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
      const double w = d[s] * opponent_actions[a] / norm;
      const auto row = m.transition_row(s, a);
      for (std::size_t n = 0; n < S; ++n) out[n] += w * row[n];
    }
  }
}

void action_distribution_into(std::span<const double> d, const Smm& m, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t s = 0; s < m.num_states(); ++s) {
    const auto row = m.emission_row(s);
    for (std::size_t a = 0; a < m.num_actions(); ++a) out[a] += d[s] * row[a];
  }
}

std::pair<double, double> joint_payoff(std::span<const double> d, const Smm& m1, const Smm& m2,
                                       const NormalFormGame& game) {
  const std::size_t S2 = m2.num_states();
  const std::size_t A = m1.num_actions();
  const auto& pr = game.payoff_row();
  const auto& pc = game.payoff_col();
  double v1 = 0.0;
  double v2 = 0.0;
  for (std::size_t s = 0; s < m1.num_states(); ++s) {
    for (std::size_t t = 0; t < S2; ++t) {
      const double w = d[s * S2 + t];
      for (std::size_t a1 = 0; a1 < A; ++a1) {
        const double p1 = w * m1.emission(s, a1);
        for (std::size_t a2 = 0; a2 < A; ++a2) {
          const double p = p1 * m2.emission(t, a2);
          const auto i = static_cast<Eigen::Index>(a1);
          const auto j = static_cast<Eigen::Index>(a2);
          v1 += p * pr(i, j);
          v2 += p * pc(i, j);
        }
      }
    }
  }
  return {v1, v2};
}

std::pair<double, double> marginal_payoff(std::span<const double> q1, std::span<const double> q2,
                                          const NormalFormGame& game) {
  return bilinear_payoff(game, q1, q2);
}

// Per-thread work buffers so pair evaluations do not allocate.
struct Scratch {
  std::vector<double> a, b, c, d, e, f;
};

std::span<double> sized(std::vector<double>& v, std::size_t n) {
  v.resize(n);
  return v;
}

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

std::pair<double, double> horizon_joint(const Smm& m1, const Smm& m2, const NormalFormGame& game,
                                        const InteractionConfig& cfg) {
  const std::size_t S1 = m1.num_states();
  const std::size_t S2 = m2.num_states();
  Scratch& buf = scratch();
  auto cur = sized(buf.a, S1 * S2);
  auto next = sized(buf.b, S1 * S2);
  const auto r1 = sized(buf.c, S1);
  const auto r2 = sized(buf.d, S2);
  for (std::size_t s = 0; s < S1; ++s)
    for (std::size_t t = 0; t < S2; ++t) cur[s * S2 + t] = m1.initial(s) * m2.initial(t);

  double sum1 = 0.0;
  double sum2 = 0.0;
  for (std::size_t k = 0; k < cfg.k_steps; ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    joint_step_into(cur, next, m1, m2, r1, r2);
    std::swap(cur, next);
    if (cfg.horizon_mode == HorizonMode::average) {
      const auto [v1, v2] = joint_payoff(cur, m1, m2, game);
      sum1 += v1;
      sum2 += v2;
    }
  }
  if (cfg.horizon_mode == HorizonMode::last) return joint_payoff(cur, m1, m2, game);
  const auto k = static_cast<double>(cfg.k_steps);
  return {sum1 / k, sum2 / k};
}

std::pair<double, double> horizon_factored(const Smm& m1, const Smm& m2,
                                           const NormalFormGame& game,
                                           const InteractionConfig& cfg) {
  const std::size_t A = m1.num_actions();
  Scratch& buf = scratch();
  auto d1 = sized(buf.a, m1.num_states());
  auto d2 = sized(buf.b, m2.num_states());
  auto n1 = sized(buf.c, m1.num_states());
  auto n2 = sized(buf.d, m2.num_states());
  const auto q1 = sized(buf.e, A);
  const auto q2 = sized(buf.f, A);
  std::copy(m1.initial().begin(), m1.initial().end(), d1.begin());
  std::copy(m2.initial().begin(), m2.initial().end(), d2.begin());

  double sum1 = 0.0;
  double sum2 = 0.0;
  for (std::size_t k = 0; k < cfg.k_steps; ++k) {
    action_distribution_into(d1, m1, q1);
    action_distribution_into(d2, m2, q2);
    marginal_step_into(d1, q2, m1, n1);
    marginal_step_into(d2, q1, m2, n2);
    std::swap(d1, n1);
    std::swap(d2, n2);
    if (cfg.horizon_mode == HorizonMode::average) {
      action_distribution_into(d1, m1, q1);
      action_distribution_into(d2, m2, q2);
      const auto [v1, v2] = marginal_payoff(q1, q2, game);
      sum1 += v1;
      sum2 += v2;
    }
  }
  if (cfg.horizon_mode == HorizonMode::last) {
    action_distribution_into(d1, m1, q1);
    action_distribution_into(d2, m2, q2);
    return marginal_payoff(q1, q2, game);
  }
  const auto k = static_cast<double>(cfg.k_steps);
  return {sum1 / k, sum2 / k};
}

std::size_t sample_index(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding can leave acc slightly below 1; fall through to the last
  // index with positive mass.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

struct RunningMoments {
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
  }
  double mean(double n) const { return sum / n; }
  double stderr_of_mean(double n) const {
    if (n < 2.0) return 0.0;
    const double m = sum / n;
    const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }
};

}  // namespace

std::string_view to_string(ChainMethod m) {
  return m == ChainMethod::joint ? "joint" : "factored";
}

std::string_view to_string(HorizonMode m) { return m == HorizonMode::last ? "last" : "average"; }

ChainMethod parse_chain_method(std::string_view text) {
  if (text == "joint") return ChainMethod::joint;
  if (text == "factored") return ChainMethod::factored;
  throw ConfigError("unknown interaction method '" + std::string(text) +
                    "' (expected joint or factored)");
}

HorizonMode parse_horizon_mode(std::string_view text) {
  if (text == "last") return HorizonMode::last;
  if (text == "average") return HorizonMode::average;
  throw ConfigError("unknown horizon mode '" + std::string(text) +
                    "' (expected last or average)");
}

void InteractionConfig::validate() const {
  if (k_steps < 1) throw ConfigError("k_steps must be at least 1");
}

JointDistribution::JointDistribution(std::size_t states1, std::size_t states2,
                                     std::vector<double> probs)
    : states1_(states1), states2_(states2), probs_(std::move(probs)) {
  if (states1_ < 1 || states2_ < 1 || probs_.size() != states1_ * states2_)
    throw ShapeError("joint distribution: expected " + std::to_string(states1_) + "x" +
                     std::to_string(states2_) + " entries, got " + std::to_string(probs_.size()));
  double sum = 0.0;
  for (double& p : probs_) {
    if (!std::isfinite(p) || p < -1e-12)
      throw ValidationError("joint distribution: entry out of range");
    p = std::max(0.0, p);
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError("joint distribution sums to " + std::to_string(sum));
}

JointDistribution JointDistribution::product(std::span<const double> d1,
                                             std::span<const double> d2) {
  std::vector<double> probs(d1.size() * d2.size());
  for (std::size_t s = 0; s < d1.size(); ++s)
    for (std::size_t t = 0; t < d2.size(); ++t) probs[s * d2.size() + t] = d1[s] * d2[t];
  return JointDistribution(d1.size(), d2.size(), std::move(probs));
}

std::vector<double> JointDistribution::marginal1() const {
  std::vector<double> m(states1_, 0.0);
  for (std::size_t s = 0; s < states1_; ++s)
    for (std::size_t t = 0; t < states2_; ++t) m[s] += (*this)(s, t);
  return m;
}

std::vector<double> JointDistribution::marginal2() const {
  std::vector<double> m(states2_, 0.0);
  for (std::size_t s = 0; s < states1_; ++s)
    for (std::size_t t = 0; t < states2_; ++t) m[t] += (*this)(s, t);
  return m;
}

double JointDistribution::total() const {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

void check_compatible(const Smm& m, const NormalFormGame& game) {
  if (!game.is_square() || game.actions_row() != m.num_actions())
    throw ShapeError("agent with " + std::to_string(m.num_actions()) + " actions cannot play game '" +
                     game.name() + "' (" + std::to_string(game.actions_row()) + "x" +
                     std::to_string(game.actions_col()) + ")");
}

JointDistribution joint_step(const JointDistribution& d, const Smm& m1, const Smm& m2) {
  check_pair(m1, m2);
  if (d.states1() != m1.num_states() || d.states2() != m2.num_states())
    throw ShapeError("joint distribution is " + std::to_string(d.states1()) + "x" +
                     std::to_string(d.states2()) + " but the machines have " +
                     std::to_string(m1.num_states()) + " and " + std::to_string(m2.num_states()) +
                     " states");
  std::vector<double> out(d.probs().size(), 0.0);
  std::vector<double> r1(m1.num_states());
  std::vector<double> r2(m2.num_states());
  joint_step_into(d.probs(), out, m1, m2, r1, r2);
  return JointDistribution(d.states1(), d.states2(), std::move(out));
}

StatePair factored_step(std::span<const double> d1, std::span<const double> d2, const Smm& m1,
                        const Smm& m2) {
  check_pair(m1, m2);
  check_distribution(d1, m1, "d1");
  check_distribution(d2, m2, "d2");
  std::vector<double> q1(m1.num_actions());
  std::vector<double> q2(m2.num_actions());
  action_distribution_into(d1, m1, q1);
  action_distribution_into(d2, m2, q2);
  StatePair out{std::vector<double>(d1.size()), std::vector<double>(d2.size())};
  marginal_step_into(d1, q2, m1, out.first);
  marginal_step_into(d2, q1, m2, out.second);
  return out;
}

std::pair<std::vector<double>, std::vector<double>> factored_horizon_actions(const Smm& m1,
                                                                            const Smm& m2,
                                                                            std::size_t k_steps) {
  check_pair(m1, m2);
  const std::size_t A = m1.num_actions();
  Scratch& buf = scratch();
  auto d1 = sized(buf.a, m1.num_states());
  auto d2 = sized(buf.b, m2.num_states());
  auto n1 = sized(buf.c, m1.num_states());
  auto n2 = sized(buf.d, m2.num_states());
  std::copy(m1.initial().begin(), m1.initial().end(), d1.begin());
  std::copy(m2.initial().begin(), m2.initial().end(), d2.begin());
  std::vector<double> q1(A);
  std::vector<double> q2(A);
  for (std::size_t k = 0; k < k_steps; ++k) {
    action_distribution_into(d1, m1, q1);
    action_distribution_into(d2, m2, q2);
    marginal_step_into(d1, q2, m1, n1);
    marginal_step_into(d2, q1, m2, n2);
    std::swap(d1, n1);
    std::swap(d2, n2);
  }
  action_distribution_into(d1, m1, q1);
  action_distribution_into(d2, m2, q2);
  return {std::move(q1), std::move(q2)};
}

std::pair<double, double> stage_payoff(const JointDistribution& d, const Smm& m1, const Smm& m2,
                                       const NormalFormGame& game) {
  check_pair(m1, m2);
  check_compatible(m1, game);
  if (d.states1() != m1.num_states() || d.states2() != m2.num_states())
    throw ShapeError("joint distribution shape does not match the machines");
  return joint_payoff(d.probs(), m1, m2, game);
}

std::pair<double, double> stage_payoff(std::span<const double> d1, std::span<const double> d2,
                                       const Smm& m1, const Smm& m2, const NormalFormGame& game) {
  check_pair(m1, m2);
  check_compatible(m1, game);
  check_distribution(d1, m1, "d1");
  check_distribution(d2, m2, "d2");
  const auto q1 = action_distribution(d1, m1);
  const auto q2 = action_distribution(d2, m2);
  return marginal_payoff(q1, q2, game);
}

std::vector<double> action_distribution(std::span<const double> d, const Smm& m) {
  check_distribution(d, m, "d");
  std::vector<double> q(m.num_actions());
  action_distribution_into(d, m, q);
  return q;
}

std::pair<double, double> horizon_values(const Smm& m1, const Smm& m2, const NormalFormGame& game,
                                         const InteractionConfig& cfg,
                                         InteractionCounters* counters) {
  cfg.validate();
  check_pair(m1, m2);
  check_compatible(m1, game);
  const auto values = cfg.method == ChainMethod::joint ? horizon_joint(m1, m2, game, cfg)
                                                       : horizon_factored(m1, m2, game, cfg);
  if (counters) {
    counters->pair_evaluations += 1;
    counters->chain_steps += cfg.k_steps;
  }
  return values;
}

MatchEstimate simulate_match(const Smm& m1, const Smm& m2, const NormalFormGame& game,
                             std::size_t k_steps, std::size_t rollouts, Rng& rng) {
  check_pair(m1, m2);
  check_compatible(m1, game);
  if (rollouts < 1) throw ConfigError("simulate_match needs at least one rollout");
  if (k_steps < 1) throw ConfigError("k_steps must be at least 1");

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto& pr = game.payoff_row();
  const auto& pc = game.payoff_col();
  RunningMoments last1, last2, avg1, avg2;

  for (std::size_t r = 0; r < rollouts; ++r) {
    std::size_t s = sample_index(m1.initial(), unif(rng));
    std::size_t t = sample_index(m2.initial(), unif(rng));
    std::size_t a1 = sample_index(m1.emission_row(s), unif(rng));
    std::size_t a2 = sample_index(m2.emission_row(t), unif(rng));
    double run1 = 0.0;
    double run2 = 0.0;
    double pay1 = 0.0;
    double pay2 = 0.0;
    for (std::size_t k = 0; k < k_steps; ++k) {
      s = sample_index(m1.transition_row(s, a2), unif(rng));
      t = sample_index(m2.transition_row(t, a1), unif(rng));
      a1 = sample_index(m1.emission_row(s), unif(rng));
      a2 = sample_index(m2.emission_row(t), unif(rng));
      pay1 = pr(static_cast<Eigen::Index>(a1), static_cast<Eigen::Index>(a2));
      pay2 = pc(static_cast<Eigen::Index>(a1), static_cast<Eigen::Index>(a2));
      run1 += pay1;
      run2 += pay2;
    }
    last1.add(pay1);
    last2.add(pay2);
    avg1.add(run1 / static_cast<double>(k_steps));
    avg2.add(run2 / static_cast<double>(k_steps));
  }

  const auto n = static_cast<double>(rollouts);
  MatchEstimate est;
  est.rollouts = rollouts;
  est.last = {last1.mean(n), last2.mean(n), last1.stderr_of_mean(n), last2.stderr_of_mean(n)};
  est.average = {avg1.mean(n), avg2.mean(n), avg1.stderr_of_mean(n), avg2.stderr_of_mean(n)};
  return est;
}

FitnessVector interaction(std::span<const Smm> population, const NormalFormGame& game,
                          const InteractionConfig& cfg, std::size_t workers,
                          InteractionCounters* counters) {
  cfg.validate();
  if (population.empty()) throw ConfigError("interaction needs a non-empty population");
  for (const auto& m : population) check_compatible(m, game);

  const std::size_t P = population.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(P * (P - 1) / 2);
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t j = i + 1; j < P; ++j) pairs.emplace_back(i, j);

  std::vector<std::pair<double, double>> values(pairs.size());
  auto evaluate = [&](std::size_t begin, std::size_t end, InteractionCounters& local) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto [i, j] = pairs[p];
      values[p] = horizon_values(population[i], population[j], game, cfg, &local);
    }
  };

  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, pairs.size()));
  std::vector<InteractionCounters> local(workers);
  if (workers == 1) {
    evaluate(0, pairs.size(), local[0]);
  } else {
    std::vector<std::exception_ptr> failures(workers);
    {
      std::vector<std::jthread> threads;
      threads.reserve(workers);
      const std::size_t chunk = (pairs.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = std::min(pairs.size(), w * chunk);
        const std::size_t end = std::min(pairs.size(), begin + chunk);
        threads.emplace_back([&, begin, end, w] {
          try {
            evaluate(begin, end, local[w]);
          } catch (...) {
            failures[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  FitnessVector scores(P, 0.0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    scores[pairs[p].first] += values[p].first;
    scores[pairs[p].second] += values[p].second;
  }
  if (counters)
    for (const auto& c : local) *counters += c;
  return scores;
}

}  // namespace evonash
