#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evonash/rng.hpp"

namespace evonash {

// Stochastic Moore machine. In state s the agent emits action a with
// probability emission(s, a); after seeing the opponent play a it moves to
// state s' with probability transition(s, a, s'). A deterministic Moore
// machine is the one-hot special case.
//
// The constructor checks shapes and finiteness and clamps entries within
// 1e-12 of [0, 1]. Row sums are not enforced here; see validate().
class Smm {
 public:
  static constexpr double kSumTolerance = 1e-9;
  static constexpr double kClampTolerance = 1e-12;

  Smm(std::size_t num_states, std::size_t num_actions, std::vector<double> initial,
      std::vector<double> emission, std::vector<double> transition);

  // Single-state machine that always plays `action`.
  static Smm constant(std::size_t num_actions, std::size_t action);

  std::size_t num_states() const { return states_; }
  std::size_t num_actions() const { return actions_; }

  double initial(std::size_t s) const { return initial_[s]; }
  double emission(std::size_t s, std::size_t a) const { return emission_[s * actions_ + a]; }
  double transition(std::size_t s, std::size_t a, std::size_t next) const {
    return transition_[(s * actions_ + a) * states_ + next];
  }

  std::span<const double> initial() const { return initial_; }
  std::span<const double> emission_row(std::size_t s) const {
    return std::span<const double>(emission_).subspan(s * actions_, actions_);
  }
  std::span<const double> transition_row(std::size_t s, std::size_t a) const {
    return std::span<const double>(transition_).subspan((s * actions_ + a) * states_, states_);
  }

  // Flat row-major storage: emission is S x A, transition is S x A x S.
  const std::vector<double>& initial_data() const { return initial_; }
  const std::vector<double>& emission_data() const { return emission_; }
  const std::vector<double>& transition_data() const { return transition_; }

  bool operator==(const Smm&) const = default;

 private:
  std::size_t states_;
  std::size_t actions_;
  std::vector<double> initial_;
  std::vector<double> emission_;
  std::vector<double> transition_;
};

struct Violation {
  std::string row;  // "initial", "emission[s]" or "transition[s][a]"
  double sum = 0.0;
  std::string detail;

  std::string message() const;
};

// First stochasticity violation in initial, emission, transition order.
std::optional<Violation> validate(const Smm& m);

// Throws ValidationError carrying validate()'s report.
void ensure_valid(const Smm& m);

struct MutationParams {
  double rate = 0.1;
  double sigma = 0.1;

  void validate() const;
};

// Every row drawn from a flat Dirichlet.
Smm random_smm(std::size_t num_states, std::size_t num_actions, Rng& rng);

// Each row is perturbed with probability params.rate: Gaussian noise of scale
// sigma, negatives clamped to zero, renormalized (uniform if nothing is
// left). sigma == 0 leaves the machine bit-identical.
Smm mutate(const Smm& parent, const MutationParams& params, Rng& rng);

nlohmann::ordered_json smm_to_json(const Smm& m);
Smm smm_from_json(const nlohmann::json& doc);

void save_smm(const Smm& m, const std::filesystem::path& path);
Smm load_smm(const std::filesystem::path& path);

}  // namespace evonash
