#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evonash/evolution.hpp"
#include "evonash/game.hpp"

namespace evonash::bench {

enum class SweepVariable { G, P, K, S, A };

std::string_view to_string(SweepVariable v);
SweepVariable parse_sweep_variable(std::string_view text);

struct SweepSpec {
  EvolutionConfig base_config;
  SweepVariable variable = SweepVariable::G;
  std::vector<std::size_t> values;
  std::size_t repetitions = 5;
  // Game for every sweep except A, which draws a random square game of side
  // A (payoffs uniform in [0, 1]) per point.
  std::optional<NormalFormGame> game;

  // values strictly ascending, at least 3 of them; repetitions >= 1.
  void validate() const;
};

struct BenchRecord {
  std::size_t value = 0;
  double median_ms = 0.0;
  std::uint64_t pair_count = 0;
  std::uint64_t step_count = 0;
  std::uint64_t seed = 0;
  // Set when this point's configuration was rejected; the sweep goes on.
  std::optional<std::string> error;
};

// Applies one sweep value to a copy of the base configuration.
EvolutionConfig config_for_point(const EvolutionConfig& base, SweepVariable variable,
                                 std::size_t value);

NormalFormGame random_square_game(std::size_t side, std::uint64_t seed);

// Closed-form counter predictions for a configuration.
std::uint64_t expected_pair_count(const EvolutionConfig& cfg);
std::uint64_t expected_step_count(const EvolutionConfig& cfg);

std::vector<BenchRecord> run_sweep(const SweepSpec& spec);

struct ScalingFit {
  double exponent = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

// Least-squares slope of log(y) against log(x).
ScalingFit fit_power_law(std::span<const double> x, std::span<const double> y);

inline constexpr double kDefaultNoiseFloorMs = 50.0;

// Fit on median timings, ignoring points below the noise floor. Throws
// ConfigError if fewer than three points remain.
ScalingFit fit_scaling_exponent(std::span<const BenchRecord> records,
                                double min_value_cutoff = kDefaultNoiseFloorMs);

enum class Counter { pairs, steps };
ScalingFit fit_counter_exponent(std::span<const BenchRecord> records, Counter counter);

struct Band {
  double lo;
  double hi;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Acceptance band for timing exponents; none for S and A, which are reported
// as measured.
std::optional<Band> timing_band(SweepVariable v);

void write_csv(std::span<const BenchRecord> records, SweepVariable variable, ChainMethod method,
               std::size_t repetitions, const std::filesystem::path& path);

// Log-log scatter of the records with the fitted line and exponent.
void write_svg(std::span<const BenchRecord> records, SweepVariable variable,
               const std::optional<ScalingFit>& fit, const std::filesystem::path& path);

nlohmann::ordered_json verdict_json(SweepVariable variable, std::span<const BenchRecord> records,
                                    double min_value_cutoff);

}  // namespace evonash::bench
