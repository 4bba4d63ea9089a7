#include "evonash/evolution.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "evonash/errors.hpp"

namespace evonash {

namespace {

template <class T>
T read_field(const nlohmann::json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
  }
}

std::size_t read_count(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number_unsigned())
    throw ConfigError(std::string("config: '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

void reject_unknown(const nlohmann::json& doc, std::initializer_list<const char*> known,
                    const char* where) {
  for (const auto& [key, _] : doc.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError(std::string("config: unknown field '") + key + "' in " + where);
  }
}

}  // namespace

std::string_view to_string(ReproductiveMode m) {
  return m == ReproductiveMode::truncation ? "truncation" : "roulette";
}

std::string_view to_string(SurvivalMode m) {
  return m == SurvivalMode::truncation ? "truncation" : "uniform";
}

ReproductiveMode parse_reproductive_mode(std::string_view text) {
  if (text == "truncation") return ReproductiveMode::truncation;
  if (text == "roulette") return ReproductiveMode::roulette;
  throw ConfigError("unknown reproductive_mode '" + std::string(text) +
                    "' (expected truncation or roulette)");
}

SurvivalMode parse_survival_mode(std::string_view text) {
  if (text == "truncation") return SurvivalMode::truncation;
  if (text == "uniform") return SurvivalMode::uniform;
  throw ConfigError("unknown survival_mode '" + std::string(text) +
                    "' (expected truncation or uniform)");
}

std::size_t EvolutionConfig::parents() const {
  return num_parents.value_or(std::max<std::size_t>(1, population_size / 2));
}

void EvolutionConfig::validate() const {
  if (generations < 1) throw ConfigError("generations must be at least 1");
  if (population_size < 1) throw ConfigError("population_size must be at least 1");
  if (state_size < 1) throw ConfigError("state_size must be at least 1");
  if (parents() < 1) throw ConfigError("num_parents must be at least 1");
  if (parents() > population_size)
    throw ConfigError("num_parents (" + std::to_string(parents()) +
                      ") must not exceed population_size (" + std::to_string(population_size) +
                      ")");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  interaction.validate();
  mutation.validate();
}

EvolutionConfig config_from_json(const nlohmann::json& doc, EvolutionConfig cfg) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  reject_unknown(doc,
                 {"generations", "population_size", "state_size", "interaction",
                  "reproductive_mode", "survival_mode", "num_parents", "overlap", "mutation",
                  "seed", "workers"},
                 "config");
  if (doc.contains("generations")) cfg.generations = read_count(doc, "generations");
  if (doc.contains("population_size")) cfg.population_size = read_count(doc, "population_size");
  if (doc.contains("state_size")) cfg.state_size = read_count(doc, "state_size");
  if (doc.contains("num_parents")) cfg.num_parents = read_count(doc, "num_parents");
  if (doc.contains("workers")) cfg.workers = read_count(doc, "workers");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned())
      throw ConfigError("config: 'seed' must be an unsigned 64-bit integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("overlap")) cfg.overlap = read_field<bool>(doc, "overlap");
  if (doc.contains("reproductive_mode"))
    cfg.reproductive_mode = parse_reproductive_mode(read_field<std::string>(doc, "reproductive_mode"));
  if (doc.contains("survival_mode"))
    cfg.survival_mode = parse_survival_mode(read_field<std::string>(doc, "survival_mode"));
  if (doc.contains("interaction")) {
    const auto& in = doc.at("interaction");
    if (!in.is_object()) throw ConfigError("config: 'interaction' must be an object");
    reject_unknown(in, {"k_steps", "method", "horizon_mode"}, "interaction");
    if (in.contains("k_steps")) cfg.interaction.k_steps = read_count(in, "k_steps");
    if (in.contains("method"))
      cfg.interaction.method = parse_chain_method(read_field<std::string>(in, "method"));
    if (in.contains("horizon_mode"))
      cfg.interaction.horizon_mode = parse_horizon_mode(read_field<std::string>(in, "horizon_mode"));
  }
  if (doc.contains("mutation")) {
    const auto& mu = doc.at("mutation");
    if (!mu.is_object()) throw ConfigError("config: 'mutation' must be an object");
    reject_unknown(mu, {"rate", "sigma"}, "mutation");
    if (mu.contains("rate")) cfg.mutation.rate = read_field<double>(mu, "rate");
    if (mu.contains("sigma")) cfg.mutation.sigma = read_field<double>(mu, "sigma");
  }
  return cfg;
}

nlohmann::ordered_json config_to_json(const EvolutionConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["generations"] = cfg.generations;
  doc["population_size"] = cfg.population_size;
  doc["state_size"] = cfg.state_size;
  doc["interaction"] = {{"k_steps", cfg.interaction.k_steps},
                        {"method", to_string(cfg.interaction.method)},
                        {"horizon_mode", to_string(cfg.interaction.horizon_mode)}};
  doc["reproductive_mode"] = to_string(cfg.reproductive_mode);
  doc["survival_mode"] = to_string(cfg.survival_mode);
  doc["num_parents"] = cfg.parents();
  doc["overlap"] = cfg.overlap;
  doc["mutation"] = {{"rate", cfg.mutation.rate}, {"sigma", cfg.mutation.sigma}};
  doc["seed"] = cfg.seed;
  return doc;
}

std::vector<std::size_t> top_indices(std::span<const double> fitness, std::size_t n) {
  if (n > fitness.size())
    throw ConfigError("cannot select " + std::to_string(n) + " of " +
                      std::to_string(fitness.size()) + " agents");
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  order.resize(n);
  return order;
}

std::vector<std::size_t> reproductive_selection(std::span<const double> fitness,
                                                ReproductiveMode mode, std::size_t n_parents,
                                                Rng& rng) {
  if (n_parents > fitness.size())
    throw ConfigError("num_parents (" + std::to_string(n_parents) +
                      ") exceeds population size (" + std::to_string(fitness.size()) + ")");
  if (mode == ReproductiveMode::truncation) return top_indices(fitness, n_parents);

  // Roulette is proportional to fitness. Payoffs can be negative, in which
  // case everything is shifted up to just above zero first.
  const auto [lo, hi] = std::minmax_element(fitness.begin(), fitness.end());
  std::vector<double> weights(fitness.begin(), fitness.end());
  if (*lo <= 0.0) {
    const double eps = 1e-9 * std::max({1.0, std::abs(*lo), std::abs(*hi)});
    for (double& w : weights) w += eps - *lo;
  }
  std::discrete_distribution<std::size_t> wheel(weights.begin(), weights.end());
  std::vector<std::size_t> picks(n_parents);
  for (auto& p : picks) p = wheel(rng);
  return picks;
}

std::vector<std::size_t> survival_selection(std::span<const double> fitness, SurvivalMode mode,
                                            std::size_t n_survivors, Rng& rng) {
  if (n_survivors > fitness.size())
    throw ConfigError("cannot keep " + std::to_string(n_survivors) + " survivors out of " +
                      std::to_string(fitness.size()) + " agents");
  if (mode == SurvivalMode::truncation) return top_indices(fitness, n_survivors);

  // Partial Fisher-Yates draws a uniform subset.
  std::vector<std::size_t> idx(fitness.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n_survivors; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n_survivors);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<Smm> make_children(std::span<const Smm> parents, const MutationParams& mutation,
                               std::size_t num_children, Rng& rng) {
  if (num_children == 0) return {};
  if (parents.empty()) throw ConfigError("make_children: no parents to copy");
  std::vector<Smm> children;
  children.reserve(num_children);
  for (std::size_t c = 0; c < num_children; ++c)
    children.push_back(mutate(parents[c % parents.size()], mutation, rng));
  return children;
}

MixedStrategy extract_population_strategy(std::span<const Smm> population,
                                          const NormalFormGame& game,
                                          const InteractionConfig& cfg) {
  cfg.validate();
  if (population.empty()) throw ConfigError("cannot read a strategy from an empty population");
  for (const auto& m : population) check_compatible(m, game);
  const std::size_t P = population.size();
  const std::size_t A = game.actions_row();

  std::vector<std::vector<double>> per_agent(P, std::vector<double>(A, 0.0));
  if (P == 1) {
    per_agent[0] = factored_horizon_actions(population[0], population[0], cfg.k_steps).first;
  } else {
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t j = i + 1; j < P; ++j) {
        const auto [qi, qj] = factored_horizon_actions(population[i], population[j], cfg.k_steps);
        for (std::size_t a = 0; a < A; ++a) {
          per_agent[i][a] += qi[a];
          per_agent[j][a] += qj[a];
        }
      }
    }
    for (auto& q : per_agent)
      for (double& x : q) x /= static_cast<double>(P - 1);
  }

  std::vector<double> mean(A, 0.0);
  for (const auto& q : per_agent)
    for (std::size_t a = 0; a < A; ++a) mean[a] += q[a];
  double total = 0.0;
  for (double& x : mean) {
    x = std::max(0.0, x / static_cast<double>(P));
    total += x;
  }
  for (double& x : mean) x /= total;
  return MixedStrategy(std::move(mean));
}

EvolutionResult evolve(const EvolutionConfig& config, const NormalFormGame& game,
                       const GenerationObserver& observer) {
  config.validate();
  if (!game.is_square())
    throw ShapeError("evolve needs a square game; '" + game.name() + "' is " +
                     std::to_string(game.actions_row()) + "x" + std::to_string(game.actions_col()));
  using clock = std::chrono::steady_clock;

  const std::size_t P = config.population_size;
  const std::size_t A = game.actions_row();
  const std::size_t n_parents = config.parents();
  const std::size_t n_children = config.children();

  Rng init_rng = derive_rng(config.seed, 0);
  std::vector<Smm> population;
  population.reserve(P);
  for (std::size_t i = 0; i < P; ++i) population.push_back(random_smm(config.state_size, A, init_rng));

  EvolutionResult result;
  result.history.records.reserve(config.generations);
  Rng rng = derive_rng(config.seed, 1);

  for (std::size_t g = 0; g < config.generations; ++g) {
    const auto start = clock::now();
    shuffle_population(population, rng);
    FitnessVector fitness = interaction(population, game, config.interaction, config.workers,
                                        &result.history.counters);

    GenerationRecord record;
    record.generation = g;
    record.mean_fitness = std::accumulate(fitness.begin(), fitness.end(), 0.0) / static_cast<double>(P);
    record.max_fitness = *std::max_element(fitness.begin(), fitness.end());
    const auto strategy = extract_population_strategy(population, game, config.interaction);
    record.action_distribution.assign(strategy.probs().begin(), strategy.probs().end());

    const auto parent_idx =
        reproductive_selection(fitness, config.reproductive_mode, n_parents, rng);
    std::vector<Smm> parents;
    parents.reserve(parent_idx.size());
    for (auto i : parent_idx) parents.push_back(population[i]);

    std::vector<Smm> next;
    next.reserve(P + n_children);
    if (!config.overlap) {
      const auto keep = survival_selection(fitness, config.survival_mode, P - n_children, rng);
      for (auto i : keep) next.push_back(population[i]);
      auto children = make_children(parents, config.mutation, n_children, rng);
      for (auto& c : children) next.push_back(std::move(c));
    } else {
      // Parents stay in the pool next to their offspring; a second survival
      // pass trims back to P. Children inherit their parent's fitness.
      const auto keep = survival_selection(fitness, config.survival_mode, P, rng);
      FitnessVector pool_fitness;
      pool_fitness.reserve(P + n_children);
      for (auto i : keep) {
        next.push_back(population[i]);
        pool_fitness.push_back(fitness[i]);
      }
      auto children = make_children(parents, config.mutation, n_children, rng);
      for (std::size_t c = 0; c < children.size(); ++c) {
        next.push_back(std::move(children[c]));
        pool_fitness.push_back(fitness[parent_idx[c % parent_idx.size()]]);
      }
      const auto trimmed = survival_selection(pool_fitness, config.survival_mode, P, rng);
      std::vector<Smm> kept;
      kept.reserve(P);
      for (auto i : trimmed) kept.push_back(std::move(next[i]));
      next = std::move(kept);
    }
    population = std::move(next);

    record.fitness = std::move(fitness);
    record.millis =
        std::chrono::duration<double, std::milli>(clock::now() - start).count();
    if (observer) observer(record, population);
    result.history.records.push_back(std::move(record));
  }
  result.population = std::move(population);
  return result;
}

}  // namespace evonash
