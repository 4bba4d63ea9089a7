#include "evonash/nash_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "evonash/errors.hpp"

namespace evonash {

namespace {

// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<std::size_t>> subsets_of_size(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur(k);
  for (std::size_t i = 0; i < k; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    std::size_t i = k;
    while (i > 0 && cur[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++cur[i - 1];
    for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

// Opponent mix over `theirs` that makes every action in `mine` pay the same.
// payoff(i, j) is the payoff to the player choosing i against opponent action
// j. Returns (mix over all opponent actions, common value), or nullopt if the
// system is singular.
std::optional<std::pair<Eigen::VectorXd, double>> indifference_mix(
    const Eigen::MatrixXd& payoff, const std::vector<std::size_t>& mine,
    const std::vector<std::size_t>& theirs) {
  const auto k = static_cast<Eigen::Index>(mine.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c)
      system(r, c) = payoff(static_cast<Eigen::Index>(mine[static_cast<std::size_t>(r)]),
                            static_cast<Eigen::Index>(theirs[static_cast<std::size_t>(c)]));
    system(r, k) = -1.0;
  }
  for (Eigen::Index c = 0; c < k; ++c) system(k, c) = 1.0;
  rhs(k) = 1.0;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite()) return std::nullopt;

  Eigen::VectorXd mix = Eigen::VectorXd::Zero(payoff.cols());
  for (Eigen::Index c = 0; c < k; ++c)
    mix(static_cast<Eigen::Index>(theirs[static_cast<std::size_t>(c)])) = sol(c);
  return std::make_pair(mix, sol(k));
}

std::optional<MixedStrategy> feasible_strategy(const Eigen::VectorXd& mix) {
  if (mix.minCoeff() < -kFeasibilityTolerance) return std::nullopt;
  std::vector<double> p(static_cast<std::size_t>(mix.size()));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < mix.size(); ++i) {
    p[static_cast<std::size_t>(i)] = std::max(0.0, mix(i));
    sum += p[static_cast<std::size_t>(i)];
  }
  for (double& x : p) x /= sum;
  return MixedStrategy(std::move(p));
}

std::vector<std::size_t> support_of(const MixedStrategy& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] > kFeasibilityTolerance) out.push_back(i);
  return out;
}

double linf(const MixedStrategy& a, const MixedStrategy& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double l1(const MixedStrategy& a, const MixedStrategy& b) {
  if (a.size() != b.size()) throw ShapeError("strategies of different length cannot be compared");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return d;
}

Eigen::VectorXd as_vector(const MixedStrategy& s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) v(static_cast<Eigen::Index>(i)) = s[i];
  return v;
}

}  // namespace

EquilibriumSet support_enumeration(const NormalFormGame& game, std::size_t max_actions) {
  const std::size_t m = game.actions_row();
  const std::size_t n = game.actions_col();
  if (m > max_actions || n > max_actions)
    throw ConfigError("game '" + game.name() + "' is " + std::to_string(m) + "x" +
                      std::to_string(n) + ", above the support enumeration cap of " +
                      std::to_string(max_actions));

  const Eigen::MatrixXd& A = game.payoff_row();
  // Column player's payoff indexed (own action, opponent action).
  const Eigen::MatrixXd Bt = game.payoff_col().transpose();

  EquilibriumSet result;
  for (std::size_t k = 1; k <= std::min(m, n); ++k) {
    const auto row_supports = subsets_of_size(m, k);
    const auto col_supports = subsets_of_size(n, k);
    for (const auto& I : row_supports) {
      for (const auto& J : col_supports) {
        // The column mix makes the row player indifferent on I, and vice versa.
        const auto col_solution = indifference_mix(A, I, J);
        const auto row_solution = indifference_mix(Bt, J, I);
        if (!col_solution || !row_solution) {
          result.degenerate = true;
          continue;
        }
        const auto y = feasible_strategy(col_solution->first);
        const auto x = feasible_strategy(row_solution->first);
        if (!x || !y) continue;

        const Eigen::VectorXd xv = as_vector(*x);
        const Eigen::VectorXd yv = as_vector(*y);
        const Eigen::VectorXd row_payoffs = A * yv;
        const Eigen::VectorXd col_payoffs = Bt * xv;
        const double u_row = xv.dot(row_payoffs);
        const double u_col = yv.dot(col_payoffs);
        if (row_payoffs.maxCoeff() > u_row + kFeasibilityTolerance) continue;
        if (col_payoffs.maxCoeff() > u_col + kFeasibilityTolerance) continue;

        const bool duplicate = std::any_of(
            result.equilibria.begin(), result.equilibria.end(), [&](const Equilibrium& e) {
              return linf(e.sigma_row, *x) <= kDedupTolerance &&
                     linf(e.sigma_col, *y) <= kDedupTolerance;
            });
        if (duplicate) continue;

        const auto [pr, pc] = expected_payoff(game, *x, *y);
        result.equilibria.push_back(
            Equilibrium{*x, *y, pr, pc, support_of(*x), support_of(*y)});
      }
    }
  }
  return result;
}

std::pair<double, double> regret(const NormalFormGame& game, const MixedStrategy& sigma_row,
                                 const MixedStrategy& sigma_col) {
  const auto [u_row, u_col] = expected_payoff(game, sigma_row, sigma_col);
  const Eigen::VectorXd x = as_vector(sigma_row);
  const Eigen::VectorXd y = as_vector(sigma_col);
  const double best_row = (game.payoff_row() * y).maxCoeff();
  const double best_col = (game.payoff_col().transpose() * x).maxCoeff();
  return {std::max(0.0, best_row - u_row), std::max(0.0, best_col - u_col)};
}

bool is_epsilon_equilibrium(const NormalFormGame& game, const MixedStrategy& sigma_row,
                            const MixedStrategy& sigma_col, double epsilon) {
  if (epsilon < 0.0 || std::isnan(epsilon))
    throw ConfigError("epsilon must be non-negative, got " + std::to_string(epsilon));
  const auto [r_row, r_col] = regret(game, sigma_row, sigma_col);
  return r_row <= epsilon && r_col <= epsilon;
}

NearestEquilibrium nearest_equilibrium(const MixedStrategy& sigma_row,
                                       const MixedStrategy& sigma_col,
                                       std::span<const Equilibrium> equilibria) {
  if (equilibria.empty()) throw ConfigError("no equilibria to compare against");
  NearestEquilibrium best{std::numeric_limits<double>::infinity(), 0};
  for (std::size_t i = 0; i < equilibria.size(); ++i) {
    const double d =
        l1(sigma_row, equilibria[i].sigma_row) + l1(sigma_col, equilibria[i].sigma_col);
    if (d < best.distance) best = {d, i};
  }
  return best;
}

double distance_to_nearest_equilibrium(const MixedStrategy& sigma_row,
                                       const MixedStrategy& sigma_col,
                                       std::span<const Equilibrium> equilibria) {
  return nearest_equilibrium(sigma_row, sigma_col, equilibria).distance;
}

nlohmann::ordered_json equilibrium_to_json(const Equilibrium& eq) {
  nlohmann::ordered_json doc;
  auto probs = [](const MixedStrategy& s) {
    return std::vector<double>(s.probs().begin(), s.probs().end());
  };
  doc["sigma_row"] = probs(eq.sigma_row);
  doc["sigma_col"] = probs(eq.sigma_col);
  doc["payoff_row"] = eq.payoff_row;
  doc["payoff_col"] = eq.payoff_col;
  doc["support_row"] = eq.support_row;
  doc["support_col"] = eq.support_col;
  return doc;
}

nlohmann::ordered_json equilibria_to_json(const EquilibriumSet& set) {
  nlohmann::ordered_json doc;
  auto list = nlohmann::ordered_json::array();
  for (const auto& eq : set.equilibria) list.push_back(equilibrium_to_json(eq));
  doc["equilibria"] = std::move(list);
  doc["degenerate"] = set.degenerate;
  return doc;
}

}  // namespace evonash
