#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evonash/game.hpp"

namespace evonash {

inline constexpr double kFeasibilityTolerance = 1e-9;
inline constexpr double kDedupTolerance = 1e-7;
inline constexpr std::size_t kDefaultOracleCap = 8;

struct Equilibrium {
  MixedStrategy sigma_row;
  MixedStrategy sigma_col;
  double payoff_row = 0.0;
  double payoff_col = 0.0;
  std::vector<std::size_t> support_row;
  std::vector<std::size_t> support_col;
};

struct EquilibriumSet {
  std::vector<Equilibrium> equilibria;
  // Set when some support pair had a singular indifference system and was
  // skipped; the list may then be incomplete.
  bool degenerate = false;
};

// Exact equilibria by enumerating equal-size support pairs. Complete for
// nondegenerate games. Throws ConfigError when either side exceeds the cap.
EquilibriumSet support_enumeration(const NormalFormGame& game,
                                   std::size_t max_actions = kDefaultOracleCap);

// Best pure-response payoff minus current payoff, per player. Never negative.
std::pair<double, double> regret(const NormalFormGame& game, const MixedStrategy& sigma_row,
                                 const MixedStrategy& sigma_col);

bool is_epsilon_equilibrium(const NormalFormGame& game, const MixedStrategy& sigma_row,
                            const MixedStrategy& sigma_col, double epsilon);

struct NearestEquilibrium {
  double distance = 0.0;
  std::size_t index = 0;
};

// L1(row) + L1(col) to the closest listed equilibrium.
NearestEquilibrium nearest_equilibrium(const MixedStrategy& sigma_row,
                                       const MixedStrategy& sigma_col,
                                       std::span<const Equilibrium> equilibria);

double distance_to_nearest_equilibrium(const MixedStrategy& sigma_row,
                                       const MixedStrategy& sigma_col,
                                       std::span<const Equilibrium> equilibria);

nlohmann::ordered_json equilibrium_to_json(const Equilibrium& eq);
nlohmann::ordered_json equilibria_to_json(const EquilibriumSet& set);

}  // namespace evonash
