#include <doctest.h>

#include <cmath>

#include "evonash/errors.hpp"
#include "evonash/game.hpp"
#include "test_support.hpp"

using namespace evonash;
using evonash::testing::TempDir;

TEST_CASE("builtin prisoners dilemma matrices") {
  const auto g = builtin_game("prisoners_dilemma");
  Eigen::MatrixXd row(2, 2);
  row << 3, 0, 5, 1;
  CHECK(g.payoff_row() == row);
  CHECK(g.payoff_col() == row.transpose());
  CHECK(g.actions_row() == 2);
  CHECK(g.actions_col() == 2);
  CHECK(g.is_symmetric());
}

TEST_CASE("builtin games") {
  Eigen::MatrixXd chicken(2, 2);
  chicken << 0, -1, 1, -10;
  CHECK(builtin_game("chicken").payoff_row() == chicken);
  CHECK(builtin_game("chicken").is_symmetric());
  CHECK(builtin_game("stag_hunt").is_symmetric());

  const auto battle = builtin_game("battle");
  CHECK_FALSE(battle.is_symmetric());
  CHECK(battle.payoff_row()(0, 0) == 2.0);
  CHECK(battle.payoff_col()(1, 1) == 2.0);

  for (const auto& name : builtin_game_names()) CHECK(builtin_game(name).name() == name);
  CHECK_THROWS_AS(builtin_game("nosuchgame"), ConfigError);
}

TEST_CASE("unknown game name lists the alternatives") {
  try {
    builtin_game("nosuchgame");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("prisoners_dilemma") != std::string::npos);
  }
}

TEST_CASE("game construction rejects bad shapes and values") {
  CHECK_THROWS_AS(NormalFormGame("g", Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 3)),
                  ShapeError);
  CHECK_THROWS_AS(NormalFormGame("g", Eigen::MatrixXd::Zero(0, 0), Eigen::MatrixXd::Zero(0, 0)),
                  InputError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(NormalFormGame("g", bad, Eigen::MatrixXd::Zero(2, 2)), ValidationError);
  CHECK_THROWS_AS(NormalFormGame("g", Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
                                 {"a"}),
                  ShapeError);
}

TEST_CASE("mixed strategies") {
  CHECK(MixedStrategy::pure(3, 1).probs()[1] == 1.0);
  CHECK(MixedStrategy::uniform(4)[2] == doctest::Approx(0.25));
  CHECK_NOTHROW(MixedStrategy({0.5, 0.5 + 1e-10}));
  CHECK(MixedStrategy({-1e-13, 1.0})[0] == 0.0);
  CHECK_THROWS_AS(MixedStrategy({0.6, 0.6}), ValidationError);
  CHECK_THROWS_AS(MixedStrategy({-0.1, 1.1}), ValidationError);
  CHECK_THROWS_AS(MixedStrategy({}), InputError);
}

TEST_CASE("expected payoff") {
  const auto pd = builtin_game("prisoners_dilemma");
  const auto dd = expected_payoff(pd, MixedStrategy({0, 1}), MixedStrategy({0, 1}));
  CHECK(dd.first == 1.0);
  CHECK(dd.second == 1.0);
  const auto cd = expected_payoff(pd, MixedStrategy({1, 0}), MixedStrategy({0, 1}));
  CHECK(cd.first == 0.0);
  CHECK(cd.second == 5.0);

  const auto chicken = builtin_game("chicken");
  const auto half = MixedStrategy::uniform(2);
  const auto [r, c] = expected_payoff(chicken, half, half);
  CHECK(r == doctest::Approx(-2.5));
  CHECK(c == doctest::Approx(-2.5));

  CHECK_THROWS_AS(expected_payoff(pd, MixedStrategy::uniform(3), half), ShapeError);
}

TEST_CASE("expected payoff matches brute-force enumeration") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = evonash::testing::random_game(3, 2, rng);
    std::vector<double> x{u(rng), u(rng), u(rng)}, y{u(rng), u(rng)};
    double sx = x[0] + x[1] + x[2], sy = y[0] + y[1];
    for (auto& v : x) v /= sx;
    for (auto& v : y) v /= sy;
    double er = 0, ec = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 2; ++j) {
        er += x[i] * y[j] * g.payoff_row()(i, j);
        ec += x[i] * y[j] * g.payoff_col()(i, j);
      }
    const auto [r, c] = expected_payoff(g, MixedStrategy(x), MixedStrategy(y));
    CHECK(r == doctest::Approx(er).epsilon(1e-12));
    CHECK(c == doctest::Approx(ec).epsilon(1e-12));
  }
}

TEST_CASE("game file round trip") {
  TempDir dir;
  for (const auto& name : builtin_game_names()) {
    const auto g = builtin_game(name);
    save_game(g, dir / (name + ".json"));
    CHECK(load_game(dir / (name + ".json")) == g);
    CHECK(resolve_game((dir / (name + ".json")).string()) == g);
  }
}

TEST_CASE("load_game reads a handwritten PD file") {
  TempDir dir;
  evonash::testing::write_file(dir / "pd.json", R"({
    "name": "prisoners_dilemma",
    "payoff_row": [[3, 0], [5, 1]],
    "payoff_col": [[3, 5], [0, 1]],
    "action_labels_row": ["Cooperate", "Defect"],
    "action_labels_col": ["Cooperate", "Defect"]
  })");
  CHECK(load_game(dir / "pd.json") == builtin_game("prisoners_dilemma"));
}

TEST_CASE("load_game rejections") {
  TempDir dir;
  evonash::testing::write_file(dir / "shape.json",
                               R"({"payoff_row": [[1,2],[3,4]], "payoff_col": [[1,2,3],[4,5,6]]})");
  CHECK_THROWS_AS(load_game(dir / "shape.json"), ShapeError);

  evonash::testing::write_file(dir / "text.json",
                               R"({"payoff_row": [[1,"x"],[3,4]], "payoff_col": [[1,2],[3,4]]})");
  CHECK_THROWS_AS(load_game(dir / "text.json"), ParseError);

  evonash::testing::write_file(dir / "syntax.json", "{\n  \"payoff_row\": [[1,2],\n  oops\n}");
  try {
    load_game(dir / "syntax.json");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }

  CHECK_THROWS_AS(load_game(dir / "missing.json"), IoError);
  CHECK_THROWS_AS(resolve_game("nosuchgame"), InputError);
}
