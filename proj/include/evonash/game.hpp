#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace evonash {

// A two-player game in normal form. payoff_row(i, j) and payoff_col(i, j) are
// the payoffs when the row player picks action i and the column player
// picks action j. Immutable once constructed.
class NormalFormGame {
 public:
  NormalFormGame(std::string name, Eigen::MatrixXd payoff_row,
                 Eigen::MatrixXd payoff_col,
                 std::vector<std::string> action_labels_row = {},
                 std::vector<std::string> action_labels_col = {});

  const std::string& name() const { return name_; }
  std::size_t actions_row() const { return static_cast<std::size_t>(payoff_row_.rows()); }
  std::size_t actions_col() const { return static_cast<std::size_t>(payoff_row_.cols()); }
  const Eigen::MatrixXd& payoff_row() const { return payoff_row_; }
  const Eigen::MatrixXd& payoff_col() const { return payoff_col_; }
  const std::vector<std::string>& action_labels_row() const { return labels_row_; }
  const std::vector<std::string>& action_labels_col() const { return labels_col_; }

  bool is_square() const { return actions_row() == actions_col(); }
  // payoff_col == payoff_row^T, i.e. the roles are interchangeable.
  bool is_symmetric(double tol = 0.0) const;

  bool operator==(const NormalFormGame&) const = default;

 private:
  std::string name_;
  Eigen::MatrixXd payoff_row_;
  Eigen::MatrixXd payoff_col_;
  std::vector<std::string> labels_row_;
  std::vector<std::string> labels_col_;
};

// Probability vector over a player's actions. Entries within 1e-12 below zero
// are clamped; the total must be 1 within 1e-9.
class MixedStrategy {
 public:
  static constexpr double kSumTolerance = 1e-9;
  static constexpr double kClampTolerance = 1e-12;

  explicit MixedStrategy(std::vector<double> probs);

  static MixedStrategy pure(std::size_t num_actions, std::size_t action);
  static MixedStrategy uniform(std::size_t num_actions);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  bool operator==(const MixedStrategy&) const = default;

 private:
  std::vector<double> probs_;
};

std::vector<std::string> builtin_game_names();

// prisoners_dilemma, stag_hunt, chicken, battle. Throws ConfigError for
// anything else.
NormalFormGame builtin_game(std::string_view name);

NormalFormGame game_from_json(const nlohmann::json& doc);
nlohmann::ordered_json game_to_json(const NormalFormGame& game);

NormalFormGame load_game(const std::filesystem::path& path);
void save_game(const NormalFormGame& game, const std::filesystem::path& path);

// Builtin identifier if it names one, otherwise a path to a game file.
NormalFormGame resolve_game(std::string_view id_or_path);

// row^T * payoff * col on raw (not necessarily normalized) weight vectors.
std::pair<double, double> bilinear_payoff(const NormalFormGame& game,
                                          std::span<const double> row,
                                          std::span<const double> col);

std::pair<double, double> expected_payoff(const NormalFormGame& game,
                                          const MixedStrategy& sigma_row,
                                          const MixedStrategy& sigma_col);

}  // namespace evonash
