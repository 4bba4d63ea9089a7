#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evonash/game.hpp"
#include "evonash/interaction.hpp"
#include "evonash/rng.hpp"
#include "evonash/smm.hpp"

namespace evonash {

enum class ReproductiveMode { truncation, roulette };
enum class SurvivalMode { truncation, uniform };

std::string_view to_string(ReproductiveMode m);
std::string_view to_string(SurvivalMode m);
ReproductiveMode parse_reproductive_mode(std::string_view text);
SurvivalMode parse_survival_mode(std::string_view text);

// Defaults are the constants used for the four 2x2 benchmark games:
// G = 1000, P = 10, K = 5, S = 2.
struct EvolutionConfig {
  std::size_t generations = 1000;
  std::size_t population_size = 10;
  std::size_t state_size = 2;
  InteractionConfig interaction;
  ReproductiveMode reproductive_mode = ReproductiveMode::truncation;
  SurvivalMode survival_mode = SurvivalMode::truncation;
  // Unset means population_size / 2 (at least 1).
  std::optional<std::size_t> num_parents;
  bool overlap = false;
  MutationParams mutation;
  std::uint64_t seed = 0;
  // Threads for the interaction phase. Does not affect results.
  std::size_t workers = 1;

  std::size_t parents() const;
  std::size_t children() const { return parents(); }
  // Throws ConfigError naming the violated invariant.
  void validate() const;
};

// Mirrors the field names of EvolutionConfig. Missing keys keep the values
// already in `base`; unknown keys are rejected.
EvolutionConfig config_from_json(const nlohmann::json& doc, EvolutionConfig base = {});
nlohmann::ordered_json config_to_json(const EvolutionConfig& cfg);

struct GenerationRecord {
  std::size_t generation = 0;
  FitnessVector fitness;
  double mean_fitness = 0.0;
  double max_fitness = 0.0;
  // Population mean action distribution of the evaluated population.
  std::vector<double> action_distribution;
  double millis = 0.0;
};

struct RunHistory {
  std::vector<GenerationRecord> records;
  InteractionCounters counters;
};

struct EvolutionResult {
  std::vector<Smm> population;
  RunHistory history;
};

// Fisher-Yates.
template <class T>
void shuffle_population(std::vector<T>& population, Rng& rng) {
  for (std::size_t i = population.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    using std::swap;
    swap(population[i - 1], population[pick(rng)]);
  }
}

// Indices of the n highest-fitness entries, best first; ties go to the lower
// index.
std::vector<std::size_t> top_indices(std::span<const double> fitness, std::size_t n);

std::vector<std::size_t> reproductive_selection(std::span<const double> fitness,
                                                ReproductiveMode mode, std::size_t n_parents,
                                                Rng& rng);

// Truncation returns best-first order; uniform returns ascending indices.
std::vector<std::size_t> survival_selection(std::span<const double> fitness, SurvivalMode mode,
                                            std::size_t n_survivors, Rng& rng);

// Child c mutates parents[c % parents.size()]; children draw from rng in order.
std::vector<Smm> make_children(std::span<const Smm> parents, const MutationParams& mutation,
                               std::size_t num_children, Rng& rng);

// Per-agent horizon action distribution (factored chain against each other
// member in turn), averaged over the population.
MixedStrategy extract_population_strategy(std::span<const Smm> population,
                                          const NormalFormGame& game,
                                          const InteractionConfig& cfg);

using GenerationObserver = std::function<void(const GenerationRecord&, std::span<const Smm>)>;

EvolutionResult evolve(const EvolutionConfig& config, const NormalFormGame& game,
                       const GenerationObserver& observer = {});

}  // namespace evonash
