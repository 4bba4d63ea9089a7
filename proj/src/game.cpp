#include "evonash/game.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evonash/errors.hpp"

namespace evonash {

namespace {

std::string shape_string(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Eigen::MatrixXd matrix_from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::MatrixXd parse_matrix(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw ParseError(std::string("game file: missing field '") + key + "'");
  const auto& rows = doc.at(key);
  if (!rows.is_array() || rows.empty())
    throw ParseError(std::string("game file: '") + key + "' must be a non-empty array of arrays");
  const std::size_t n_rows = rows.size();
  std::size_t n_cols = 0;
  for (std::size_t i = 0; i < n_rows; ++i) {
    if (!rows[i].is_array() || rows[i].empty())
      throw ParseError(std::string("game file: ") + key + "[" + std::to_string(i) +
                       "] must be a non-empty array");
    if (i == 0) n_cols = rows[i].size();
    if (rows[i].size() != n_cols)
      throw ParseError(std::string("game file: ") + key + " is ragged (row " + std::to_string(i) +
                       " has " + std::to_string(rows[i].size()) + " entries, expected " +
                       std::to_string(n_cols) + ")");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < n_rows; ++i) {
    for (std::size_t j = 0; j < n_cols; ++j) {
      const auto& v = rows[i][j];
      if (!v.is_number())
        throw ParseError(std::string("game file: ") + key + "[" + std::to_string(i) + "][" +
                         std::to_string(j) + "] is not a number: " + v.dump());
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v.get<double>();
    }
  }
  return m;
}

std::vector<std::string> parse_labels(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) return {};
  const auto& labels = doc.at(key);
  if (!labels.is_array()) throw ParseError(std::string("game file: '") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& l : labels) {
    if (!l.is_string()) throw ParseError(std::string("game file: '") + key + "' must hold strings");
    out.push_back(l.get<std::string>());
  }
  return out;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Line number (1-based) of a byte offset, for parse diagnostics.
std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

}  // namespace

NormalFormGame::NormalFormGame(std::string name, Eigen::MatrixXd payoff_row,
                               Eigen::MatrixXd payoff_col,
                               std::vector<std::string> action_labels_row,
                               std::vector<std::string> action_labels_col)
    : name_(std::move(name)),
      payoff_row_(std::move(payoff_row)),
      payoff_col_(std::move(payoff_col)),
      labels_row_(std::move(action_labels_row)),
      labels_col_(std::move(action_labels_col)) {
  if (payoff_row_.rows() < 1 || payoff_row_.cols() < 1)
    throw ShapeError("game '" + name_ + "': payoff matrices need at least one row and column");
  if (payoff_row_.rows() != payoff_col_.rows() || payoff_row_.cols() != payoff_col_.cols())
    throw ShapeError("game '" + name_ + "': shape mismatch, payoff_row is " +
                     shape_string(payoff_row_) + " but payoff_col is " + shape_string(payoff_col_));
  if (!payoff_row_.allFinite() || !payoff_col_.allFinite())
    throw ValidationError("game '" + name_ + "': payoff entries must be finite");
  if (!labels_row_.empty() && labels_row_.size() != actions_row())
    throw ShapeError("game '" + name_ + "': expected " + std::to_string(actions_row()) +
                     " row action labels, got " + std::to_string(labels_row_.size()));
  if (!labels_col_.empty() && labels_col_.size() != actions_col())
    throw ShapeError("game '" + name_ + "': expected " + std::to_string(actions_col()) +
                     " column action labels, got " + std::to_string(labels_col_.size()));
}

bool NormalFormGame::is_symmetric(double tol) const {
  if (!is_square()) return false;
  return (payoff_col_ - payoff_row_.transpose()).cwiseAbs().maxCoeff() <= tol;
}

MixedStrategy::MixedStrategy(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw ValidationError("mixed strategy must have at least one action");
  double sum = 0.0;
  for (double& p : probs_) {
    if (!std::isfinite(p)) throw ValidationError("mixed strategy entry is not finite");
    if (p < 0.0) {
      if (p < -kClampTolerance)
        throw ValidationError("mixed strategy entry " + std::to_string(p) + " is negative");
      p = 0.0;
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "mixed strategy sums to " << sum << ", expected 1";
    throw ValidationError(msg.str());
  }
}

MixedStrategy MixedStrategy::pure(std::size_t num_actions, std::size_t action) {
  std::vector<double> p(num_actions, 0.0);
  p.at(action) = 1.0;
  return MixedStrategy(std::move(p));
}

MixedStrategy MixedStrategy::uniform(std::size_t num_actions) {
  return MixedStrategy(std::vector<double>(num_actions, 1.0 / static_cast<double>(num_actions)));
}

std::vector<std::string> builtin_game_names() {
  return {"prisoners_dilemma", "stag_hunt", "chicken", "battle"};
}

NormalFormGame builtin_game(std::string_view name) {
  if (name == "prisoners_dilemma") {
    auto row = matrix_from_rows({{3, 0}, {5, 1}});
    Eigen::MatrixXd col = row.transpose();
    return {"prisoners_dilemma", row, col, {"Cooperate", "Defect"}, {"Cooperate", "Defect"}};
  }
  if (name == "stag_hunt") {
    auto row = matrix_from_rows({{4, 0}, {3, 3}});
    Eigen::MatrixXd col = row.transpose();
    return {"stag_hunt", row, col, {"Stag", "Hare"}, {"Stag", "Hare"}};
  }
  if (name == "chicken") {
    auto row = matrix_from_rows({{0, -1}, {1, -10}});
    Eigen::MatrixXd col = row.transpose();
    return {"chicken", row, col, {"Swerve", "Dare"}, {"Swerve", "Dare"}};
  }
  if (name == "battle") {
    return {"battle", matrix_from_rows({{2, 0}, {0, 1}}), matrix_from_rows({{1, 0}, {0, 2}}),
            {"Opera", "Football"}, {"Opera", "Football"}};
  }
  std::string valid;
  for (const auto& n : builtin_game_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown game '" + std::string(name) + "'; valid identifiers: " + valid);
}

NormalFormGame game_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("game file: top level must be an object");
  std::string name = "unnamed";
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw ParseError("game file: 'name' must be a string");
    name = doc.at("name").get<std::string>();
  }
  return NormalFormGame(name, parse_matrix(doc, "payoff_row"), parse_matrix(doc, "payoff_col"),
                        parse_labels(doc, "action_labels_row"),
                        parse_labels(doc, "action_labels_col"));
}

nlohmann::ordered_json game_to_json(const NormalFormGame& game) {
  nlohmann::ordered_json doc;
  doc["name"] = game.name();
  doc["payoff_row"] = matrix_to_json(game.payoff_row());
  doc["payoff_col"] = matrix_to_json(game.payoff_col());
  if (!game.action_labels_row().empty()) doc["action_labels_row"] = game.action_labels_row();
  if (!game.action_labels_col().empty()) doc["action_labels_col"] = game.action_labels_col();
  return doc;
}

NormalFormGame load_game(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open game file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  try {
    return game_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_game(const NormalFormGame& game, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write game file " + path.string());
  out << game_to_json(game).dump(2) << "\n";
}

NormalFormGame resolve_game(std::string_view id_or_path) {
  for (const auto& n : builtin_game_names())
    if (n == id_or_path) return builtin_game(n);
  const std::filesystem::path path(id_or_path);
  if (!std::filesystem::exists(path)) {
    std::string valid;
    for (const auto& n : builtin_game_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("'" + std::string(id_or_path) +
                      "' is neither a builtin game nor an existing file; builtins: " + valid);
  }
  return load_game(path);
}

std::pair<double, double> bilinear_payoff(const NormalFormGame& game,
                                          std::span<const double> row,
                                          std::span<const double> col) {
  if (row.size() != game.actions_row() || col.size() != game.actions_col())
    throw ShapeError("strategy lengths (" + std::to_string(row.size()) + ", " +
                     std::to_string(col.size()) + ") do not match game '" + game.name() + "' (" +
                     std::to_string(game.actions_row()) + ", " +
                     std::to_string(game.actions_col()) + ")");
  const Eigen::Map<const Eigen::VectorXd> x(row.data(), static_cast<Eigen::Index>(row.size()));
  const Eigen::Map<const Eigen::VectorXd> y(col.data(), static_cast<Eigen::Index>(col.size()));
  return {x.dot(game.payoff_row() * y), x.dot(game.payoff_col() * y)};
}

std::pair<double, double> expected_payoff(const NormalFormGame& game,
                                          const MixedStrategy& sigma_row,
                                          const MixedStrategy& sigma_col) {
  return bilinear_payoff(game, sigma_row.probs(), sigma_col.probs());
}

}  // namespace evonash
