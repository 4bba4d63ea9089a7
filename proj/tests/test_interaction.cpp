#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "evonash/errors.hpp"
#include "evonash/interaction.hpp"
#include "test_support.hpp"

using namespace evonash;

namespace {

const NormalFormGame& pd() {
  static const NormalFormGame g = builtin_game("prisoners_dilemma");
  return g;
}

// Same machine with the transition rows forced equal across observed actions.
Smm decoupled(const Smm& m) {
  const std::size_t S = m.num_states(), A = m.num_actions();
  std::vector<double> t(m.transition_data());
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 1; a < A; ++a)
      for (std::size_t n = 0; n < S; ++n) t[(s * A + a) * S + n] = m.transition(s, 0, n);
  return Smm(S, A, m.initial_data(), m.emission_data(), t);
}

// Relabels states so that new state i is old state perm[i].
Smm permuted(const Smm& m, const std::vector<std::size_t>& perm) {
  const std::size_t S = m.num_states(), A = m.num_actions();
  std::vector<std::size_t> inv(S);
  for (std::size_t i = 0; i < S; ++i) inv[perm[i]] = i;
  std::vector<double> init(S), em(S * A), tr(S * A * S);
  for (std::size_t i = 0; i < S; ++i) {
    init[i] = m.initial(perm[i]);
    for (std::size_t a = 0; a < A; ++a) {
      em[i * A + a] = m.emission(perm[i], a);
      for (std::size_t n = 0; n < S; ++n)
        tr[(i * A + a) * S + inv[n]] = m.transition(perm[i], a, n);
    }
  }
  return Smm(S, A, init, em, tr);
}

JointDistribution brute_force_step(const JointDistribution& d, const Smm& m1, const Smm& m2) {
  const std::size_t S1 = m1.num_states(), S2 = m2.num_states(), A = m1.num_actions();
  std::vector<double> out(S1 * S2, 0.0);
  for (std::size_t s = 0; s < S1; ++s)
    for (std::size_t t = 0; t < S2; ++t)
      for (std::size_t a1 = 0; a1 < A; ++a1)
        for (std::size_t a2 = 0; a2 < A; ++a2)
          for (std::size_t s2 = 0; s2 < S1; ++s2)
            for (std::size_t t2 = 0; t2 < S2; ++t2)
              out[s2 * S2 + t2] += d(s, t) * m1.emission(s, a1) * m2.emission(t, a2) *
                                   m1.transition(s, a2, s2) * m2.transition(t, a1, t2);
  return JointDistribution(S1, S2, out);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("joint_step on single-state machines") {
  const auto a = Smm::constant(2, 0), b = Smm::constant(2, 1);
  const auto d = joint_step(JointDistribution::product(a.initial(), b.initial()), a, b);
  REQUIRE(d.probs().size() == 1);
  CHECK(d(0, 0) == 1.0);
}

TEST_CASE("joint_step matches brute-force enumeration") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m1 = random_smm(2, 2, rng), m2 = random_smm(2, 2, rng);
    auto d = JointDistribution::product(m1.initial(), m2.initial());
    for (int k = 0; k < 3; ++k) {
      const auto fast = joint_step(d, m1, m2);
      const auto slow = brute_force_step(d, m1, m2);
      CHECK(max_abs_diff(fast.probs(), slow.probs()) <= 1e-12);
      d = fast;
    }
  }
  // Unequal state counts and three actions.
  const auto m1 = random_smm(3, 3, rng), m2 = random_smm(2, 3, rng);
  const auto d = JointDistribution::product(m1.initial(), m2.initial());
  CHECK(max_abs_diff(joint_step(d, m1, m2).probs(), brute_force_step(d, m1, m2).probs()) <=
        1e-12);
}

TEST_CASE("decoupled chains factorize") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m1 = decoupled(random_smm(3, 2, rng)), m2 = decoupled(random_smm(2, 2, rng));
    auto d = JointDistribution::product(m1.initial(), m2.initial());
    std::vector<double> d1(m1.initial().begin(), m1.initial().end());
    std::vector<double> d2(m2.initial().begin(), m2.initial().end());
    for (int k = 0; k < 10; ++k) {
      d = joint_step(d, m1, m2);
      auto [n1, n2] = factored_step(d1, d2, m1, m2);
      d1 = n1;
      d2 = n2;
      const auto prod = JointDistribution::product(d1, d2);
      CHECK(max_abs_diff(d.probs(), prod.probs()) <= 1e-12);
      CHECK(max_abs_diff(d.marginal1(), d1) <= 1e-9);
      CHECK(max_abs_diff(d.marginal2(), d2) <= 1e-9);
    }
  }
}

TEST_CASE("factored step equals joint marginals after one step from a product") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m1 = random_smm(3, 2, rng), m2 = random_smm(2, 2, rng);
    const auto joint = joint_step(JointDistribution::product(m1.initial(), m2.initial()), m1, m2);
    const auto [d1, d2] = factored_step(m1.initial(), m2.initial(), m1, m2);
    CHECK(max_abs_diff(joint.marginal1(), d1) <= 1e-12);
    CHECK(max_abs_diff(joint.marginal2(), d2) <= 1e-12);
  }
  const auto a = Smm::constant(2, 0);
  const auto [d1, d2] = factored_step(a.initial(), a.initial(), a, a);
  CHECK(d1 == std::vector<double>{1.0});
  CHECK(d2 == std::vector<double>{1.0});
}

TEST_CASE("chain steps stay on the simplex over 1000 compositions") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m1 = random_smm(4, 3, rng), m2 = random_smm(3, 3, rng);
    auto d = JointDistribution::product(m1.initial(), m2.initial());
    std::vector<double> d1(m1.initial().begin(), m1.initial().end());
    std::vector<double> d2(m2.initial().begin(), m2.initial().end());
    for (int k = 0; k < 1000; ++k) {
      d = joint_step(d, m1, m2);
      auto [n1, n2] = factored_step(d1, d2, m1, m2);
      d1 = std::move(n1);
      d2 = std::move(n2);
    }
    CHECK(std::abs(d.total() - 1.0) <= 1e-9);
    CHECK(std::abs(std::accumulate(d1.begin(), d1.end(), 0.0) - 1.0) <= 1e-9);
    CHECK(std::abs(std::accumulate(d2.begin(), d2.end(), 0.0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("JointDistribution validation") {
  CHECK_THROWS_AS(JointDistribution(2, 2, {1.0, 0.0}), ShapeError);
  CHECK_THROWS_AS(JointDistribution(1, 2, {0.7, 0.7}), ValidationError);
  const JointDistribution d(2, 2, {0.1, 0.2, 0.3, 0.4});
  CHECK(d.marginal1()[1] == doctest::Approx(0.7));
  CHECK(d.marginal2()[0] == doctest::Approx(0.4));
}

TEST_CASE("stage payoff examples") {
  const auto defect = Smm::constant(2, 1), coop = Smm::constant(2, 0);
  const auto d = JointDistribution::product(defect.initial(), coop.initial());
  const auto [a, b] = stage_payoff(d, defect, coop, pd());
  CHECK(a == 5.0);
  CHECK(b == 0.0);

  const Smm uniform(2, 2, {0.5, 0.5}, {0.5, 0.5, 0.5, 0.5},
                    {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  const JointDistribution flat(2, 2, {0.25, 0.25, 0.25, 0.25});
  const auto [u1, u2] = stage_payoff(flat, uniform, uniform, pd());
  CHECK(u1 == doctest::Approx(2.25));
  CHECK(u2 == doctest::Approx(2.25));

  const auto [f1, f2] = stage_payoff(uniform.initial(), uniform.initial(), uniform, uniform, pd());
  CHECK(f1 == doctest::Approx(2.25));
  CHECK(f2 == doctest::Approx(2.25));
}

TEST_CASE("role swap on a symmetric game swaps payoffs") {
  Rng rng(12);
  for (const char* name : {"prisoners_dilemma", "chicken", "stag_hunt"}) {
    const auto g = builtin_game(name);
    for (int trial = 0; trial < 20; ++trial) {
      const auto m1 = random_smm(2, 2, rng), m2 = random_smm(3, 2, rng);
      for (auto method : {ChainMethod::joint, ChainMethod::factored}) {
        const InteractionConfig cfg{5, method, HorizonMode::last};
        const auto ab = horizon_values(m1, m2, g, cfg);
        const auto ba = horizon_values(m2, m1, g, cfg);
        CHECK(ab.first == doctest::Approx(ba.second).epsilon(1e-12));
        CHECK(ab.second == doctest::Approx(ba.first).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("horizon values of constant machines") {
  const auto defect = Smm::constant(2, 1), coop = Smm::constant(2, 0);
  for (auto method : {ChainMethod::joint, ChainMethod::factored})
    for (auto mode : {HorizonMode::last, HorizonMode::average}) {
      const auto [a, b] = horizon_values(defect, coop, pd(), {5, method, mode});
      CHECK(a == 5.0);
      CHECK(b == 0.0);
    }
}

TEST_CASE("K = 1 makes the horizon modes agree") {
  Rng rng(40);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m1 = random_smm(2, 2, rng), m2 = random_smm(2, 2, rng);
    const auto last = horizon_values(m1, m2, pd(), {1, ChainMethod::joint, HorizonMode::last});
    const auto avg = horizon_values(m1, m2, pd(), {1, ChainMethod::joint, HorizonMode::average});
    CHECK(last.first == doctest::Approx(avg.first).epsilon(1e-14));
    CHECK(last.second == doctest::Approx(avg.second).epsilon(1e-14));
  }
}

TEST_CASE("horizon values agree with Monte Carlo") {
  Rng rng(1234);
  const auto m1 = random_smm(2, 2, rng), m2 = random_smm(2, 2, rng);
  const auto est = simulate_match(m1, m2, pd(), 5, 100000, rng);
  for (auto mode : {HorizonMode::last, HorizonMode::average}) {
    const auto exact = horizon_values(m1, m2, pd(), {5, ChainMethod::joint, mode});
    const auto& e = est.for_mode(mode);
    CHECK(std::abs(e.mean1 - exact.first) <= 4 * e.stderr1 + 1e-12);
    CHECK(std::abs(e.mean2 - exact.second) <= 4 * e.stderr2 + 1e-12);
  }
}

TEST_CASE("simulate_match on deterministic machines") {
  Rng rng(3);
  const auto est = simulate_match(Smm::constant(2, 1), Smm::constant(2, 0), pd(), 5, 100, rng);
  CHECK(est.rollouts == 100);
  CHECK(est.last.mean1 == 5.0);
  CHECK(est.last.mean2 == 0.0);
  CHECK(est.last.stderr1 == 0.0);
  CHECK(est.last.stderr2 == 0.0);
  CHECK(est.average.mean1 == 5.0);

  // Tit-for-tat against always-defect: deterministic but multi-state.
  const Smm tft(2, 2, {1, 0}, {1, 0, 0, 1}, {1, 0, 0, 1, 1, 0, 0, 1});
  const auto sim = simulate_match(tft, Smm::constant(2, 1), pd(), 4, 50, rng);
  for (auto mode : {HorizonMode::last, HorizonMode::average}) {
    const auto exact = horizon_values(tft, Smm::constant(2, 1), pd(), {4, ChainMethod::joint, mode});
    CHECK(sim.for_mode(mode).mean1 == doctest::Approx(exact.first).epsilon(1e-12));
    CHECK(sim.for_mode(mode).stderr1 == 0.0);
  }
  CHECK_THROWS_AS(simulate_match(tft, tft, pd(), 4, 0, rng), ConfigError);
}

TEST_CASE("state relabeling leaves horizon values unchanged") {
  Rng rng(55);
  const auto g = builtin_game("battle");
  for (int trial = 0; trial < 30; ++trial) {
    const auto m1 = random_smm(3, 2, rng), m2 = random_smm(4, 2, rng);
    std::vector<std::size_t> p1{2, 0, 1}, p2{3, 1, 0, 2};
    for (auto method : {ChainMethod::joint, ChainMethod::factored})
      for (auto mode : {HorizonMode::last, HorizonMode::average}) {
        const InteractionConfig cfg{6, method, mode};
        const auto base = horizon_values(m1, m2, g, cfg);
        const auto perm = horizon_values(permuted(m1, p1), permuted(m2, p2), g, cfg);
        CHECK(std::abs(base.first - perm.first) <= 1e-12);
        CHECK(std::abs(base.second - perm.second) <= 1e-12);
      }
  }
}

TEST_CASE("decoupled machines give identical joint and factored values") {
  Rng rng(66);
  const auto g = builtin_game("chicken");
  for (int trial = 0; trial < 30; ++trial) {
    const auto m1 = decoupled(random_smm(3, 2, rng)), m2 = decoupled(random_smm(2, 2, rng));
    for (auto mode : {HorizonMode::last, HorizonMode::average}) {
      const auto j = horizon_values(m1, m2, g, {7, ChainMethod::joint, mode});
      const auto f = horizon_values(m1, m2, g, {7, ChainMethod::factored, mode});
      CHECK(std::abs(j.first - f.first) <= 1e-9);
      CHECK(std::abs(j.second - f.second) <= 1e-9);
    }
  }
}

TEST_CASE("interaction examples") {
  const auto defect = Smm::constant(2, 1), coop = Smm::constant(2, 0);
  const InteractionConfig cfg;
  CHECK(interaction(std::vector<Smm>{defect}, pd(), cfg) == FitnessVector{0.0});
  CHECK(interaction(std::vector<Smm>{defect, defect, defect}, pd(), cfg) ==
        FitnessVector{2.0, 2.0, 2.0});
  CHECK(interaction(std::vector<Smm>{defect, coop}, pd(), cfg) == FitnessVector{5.0, 0.0});
}

TEST_CASE("interaction counts pairs and steps") {
  Rng rng(4);
  std::vector<Smm> pop;
  for (int i = 0; i < 7; ++i) pop.push_back(random_smm(2, 2, rng));
  InteractionCounters c;
  interaction(pop, pd(), {5, ChainMethod::joint, HorizonMode::last}, 1, &c);
  CHECK(c.pair_evaluations == 21);
  CHECK(c.chain_steps == 105);
  interaction(pop, pd(), {3, ChainMethod::factored, HorizonMode::average}, 3, &c);
  CHECK(c.pair_evaluations == 42);
  CHECK(c.chain_steps == 168);
}

TEST_CASE("swapping agents permutes scores") {
  Rng rng(19);
  const auto g = builtin_game("stag_hunt");
  std::vector<Smm> pop;
  for (int i = 0; i < 6; ++i) pop.push_back(random_smm(2, 2, rng));
  const auto base = interaction(pop, g, {});
  std::swap(pop[1], pop[4]);
  const auto swapped = interaction(pop, g, {});
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t j = i == 1 ? 4 : i == 4 ? 1 : i;
    CHECK(swapped[i] == doctest::Approx(base[j]).epsilon(1e-12));
  }
}

TEST_CASE("interaction is bit-identical for any worker count") {
  Rng rng(23);
  std::vector<Smm> pop;
  for (int i = 0; i < 13; ++i) pop.push_back(random_smm(3, 2, rng));
  const auto one = interaction(pop, pd(), {}, 1);
  for (std::size_t w : {2u, 3u, 8u, 64u}) CHECK(interaction(pop, pd(), {}, w) == one);
}

TEST_CASE("interaction rejects incompatible agents and configs") {
  Rng rng(1);
  std::vector<Smm> pop{random_smm(2, 3, rng), random_smm(2, 3, rng)};
  CHECK_THROWS_AS(interaction(pop, pd(), {}), ShapeError);
  CHECK_NOTHROW(check_compatible(Smm::constant(2, 0), pd()));
  CHECK_THROWS_AS((InteractionConfig{0, ChainMethod::joint, HorizonMode::last}.validate()),
                  ConfigError);
  Eigen::MatrixXd rect = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(check_compatible(Smm::constant(2, 0), NormalFormGame("r", rect, rect)),
                  ShapeError);
}

TEST_CASE("method and mode names") {
  CHECK(parse_chain_method("joint") == ChainMethod::joint);
  CHECK(parse_chain_method(to_string(ChainMethod::factored)) == ChainMethod::factored);
  CHECK(parse_horizon_mode("average") == HorizonMode::average);
  CHECK_THROWS_AS(parse_chain_method("exact"), ConfigError);
  CHECK_THROWS_AS(parse_horizon_mode("mean"), ConfigError);
}

TEST_CASE("factored horizon actions follow factored_step") {
  Rng rng(90);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m1 = random_smm(3, 2, rng), m2 = random_smm(2, 2, rng);
    StatePair d{m1.initial_data(), m2.initial_data()};
    for (int k = 0; k < 4; ++k) d = factored_step(d.first, d.second, m1, m2);
    const auto [q1, q2] = factored_horizon_actions(m1, m2, 4);
    CHECK(max_abs_diff(q1, action_distribution(d.first, m1)) <= 1e-12);
    CHECK(max_abs_diff(q2, action_distribution(d.second, m2)) <= 1e-12);
  }
}
