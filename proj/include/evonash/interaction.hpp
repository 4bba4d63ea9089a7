#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "evonash/game.hpp"
#include "evonash/rng.hpp"
#include "evonash/smm.hpp"

namespace evonash {

enum class ChainMethod { joint, factored };
enum class HorizonMode { last, average };

std::string_view to_string(ChainMethod m);
std::string_view to_string(HorizonMode m);
ChainMethod parse_chain_method(std::string_view text);
HorizonMode parse_horizon_mode(std::string_view text);

struct InteractionConfig {
  std::size_t k_steps = 5;
  ChainMethod method = ChainMethod::joint;
  HorizonMode horizon_mode = HorizonMode::last;

  void validate() const;
};

// Probability that agent 1 is in state s while agent 2 is in state t.
class JointDistribution {
 public:
  JointDistribution(std::size_t states1, std::size_t states2, std::vector<double> probs);

  static JointDistribution product(std::span<const double> d1, std::span<const double> d2);

  std::size_t states1() const { return states1_; }
  std::size_t states2() const { return states2_; }
  double operator()(std::size_t s, std::size_t t) const { return probs_[s * states2_ + t]; }
  std::span<const double> probs() const { return probs_; }

  std::vector<double> marginal1() const;
  std::vector<double> marginal2() const;
  double total() const;

 private:
  std::size_t states1_;
  std::size_t states2_;
  std::vector<double> probs_;
};

using FitnessVector = std::vector<double>;
using StatePair = std::pair<std::vector<double>, std::vector<double>>;

// Work done by the interaction routines; read by the benchmark harness.
struct InteractionCounters {
  std::uint64_t pair_evaluations = 0;
  std::uint64_t chain_steps = 0;

  InteractionCounters& operator+=(const InteractionCounters& o) {
    pair_evaluations += o.pair_evaluations;
    chain_steps += o.chain_steps;
    return *this;
  }
};

// One exact step of the coupled chain. Each machine moves conditioned on the
// action the other emitted from its current state.
JointDistribution joint_step(const JointDistribution& d, const Smm& m1, const Smm& m2);

// Mean-field step: each marginal moves against the opponent's average action
// distribution.
StatePair factored_step(std::span<const double> d1, std::span<const double> d2, const Smm& m1,
                        const Smm& m2);

// Expected per-round payoffs (agent 1 plays rows, agent 2 columns).
std::pair<double, double> stage_payoff(const JointDistribution& d, const Smm& m1, const Smm& m2,
                                       const NormalFormGame& game);
std::pair<double, double> stage_payoff(std::span<const double> d1, std::span<const double> d2,
                                       const Smm& m1, const Smm& m2, const NormalFormGame& game);

// Action distribution of a machine under a state distribution.
std::vector<double> action_distribution(std::span<const double> d, const Smm& m);

// Action distributions of both machines after k_steps factored steps from
// their initial states.
std::pair<std::vector<double>, std::vector<double>> factored_horizon_actions(const Smm& m1,
                                                                            const Smm& m2,
                                                                            std::size_t k_steps);

std::pair<double, double> horizon_values(const Smm& m1, const Smm& m2, const NormalFormGame& game,
                                         const InteractionConfig& cfg,
                                         InteractionCounters* counters = nullptr);

struct PayoffEstimate {
  double mean1 = 0.0;
  double mean2 = 0.0;
  double stderr1 = 0.0;
  double stderr2 = 0.0;
};

// Monte-Carlo estimate of horizon_values for both horizon modes from the
// same rollouts.
struct MatchEstimate {
  PayoffEstimate last;
  PayoffEstimate average;
  std::size_t rollouts = 0;

  const PayoffEstimate& for_mode(HorizonMode m) const {
    return m == HorizonMode::last ? last : average;
  }
};

MatchEstimate simulate_match(const Smm& m1, const Smm& m2, const NormalFormGame& game,
                             std::size_t k_steps, std::size_t rollouts, Rng& rng);

// Round-robin over unordered pairs i < j. Pair results land in a pair-indexed
// buffer and are summed in pair order, so the output does not depend on the
// number of workers.
FitnessVector interaction(std::span<const Smm> population, const NormalFormGame& game,
                          const InteractionConfig& cfg, std::size_t workers = 1,
                          InteractionCounters* counters = nullptr);

// Throws ShapeError unless the machine can play `game` in either role.
void check_compatible(const Smm& m, const NormalFormGame& game);

}  // namespace evonash
