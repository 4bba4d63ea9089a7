#include "evonash/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evonash/errors.hpp"
#include "evonash/rng.hpp"

namespace evonash::bench {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

}  // namespace

std::string_view to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::G: return "G";
    case SweepVariable::P: return "P";
    case SweepVariable::K: return "K";
    case SweepVariable::S: return "S";
    case SweepVariable::A: return "A";
  }
  return "?";
}

SweepVariable parse_sweep_variable(std::string_view text) {
  if (text == "G") return SweepVariable::G;
  if (text == "P") return SweepVariable::P;
  if (text == "K") return SweepVariable::K;
  if (text == "S") return SweepVariable::S;
  if (text == "A") return SweepVariable::A;
  throw ConfigError("unknown sweep variable '" + std::string(text) + "' (expected G, P, K, S or A)");
}

void SweepSpec::validate() const {
  if (values.size() < 3)
    throw ConfigError("a sweep needs at least 3 values, got " + std::to_string(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 1) throw ConfigError("sweep values must be positive");
    if (i > 0 && values[i] <= values[i - 1])
      throw ConfigError("sweep values must be strictly ascending");
  }
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (variable != SweepVariable::A && !game)
    throw ConfigError("a game is required unless sweeping A");
}

EvolutionConfig config_for_point(const EvolutionConfig& base, SweepVariable variable,
                                 std::size_t value) {
  EvolutionConfig cfg = base;
  switch (variable) {
    case SweepVariable::G: cfg.generations = value; break;
    case SweepVariable::P: cfg.population_size = value; break;
    case SweepVariable::K: cfg.interaction.k_steps = value; break;
    case SweepVariable::S: cfg.state_size = value; break;
    case SweepVariable::A: break;
  }
  return cfg;
}

NormalFormGame random_square_game(std::size_t side, std::uint64_t seed) {
  if (side < 1) throw ConfigError("game side must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(side);
  Eigen::MatrixXd row(n, n);
  Eigen::MatrixXd col(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) row(i, j) = unif(rng);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) col(i, j) = unif(rng);
  return NormalFormGame("random_" + std::to_string(side) + "x" + std::to_string(side), row, col);
}

std::uint64_t expected_pair_count(const EvolutionConfig& cfg) {
  const std::uint64_t P = cfg.population_size;
  return static_cast<std::uint64_t>(cfg.generations) * (P * (P - 1) / 2);
}

std::uint64_t expected_step_count(const EvolutionConfig& cfg) {
  return expected_pair_count(cfg) * cfg.interaction.k_steps;
}

std::vector<BenchRecord> run_sweep(const SweepSpec& spec) {
  spec.validate();
  std::vector<BenchRecord> records;
  records.reserve(spec.values.size());
  for (std::size_t value : spec.values) {
    BenchRecord rec;
    rec.value = value;
    rec.seed = mix_seed(spec.base_config.seed, value);
    try {
      const EvolutionConfig cfg = config_for_point(spec.base_config, spec.variable, value);
      cfg.validate();
      const NormalFormGame game = spec.variable == SweepVariable::A
                                      ? random_square_game(value, rec.seed)
                                      : *spec.game;
      std::vector<double> times;
      times.reserve(spec.repetitions);
      for (std::size_t r = 0; r < spec.repetitions; ++r) {
        EvolutionConfig run_cfg = cfg;
        run_cfg.seed = mix_seed(rec.seed, r);
        const auto start = std::chrono::steady_clock::now();
        const auto result = evolve(run_cfg, game);
        times.push_back(std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start)
                            .count());
        rec.pair_count = result.history.counters.pair_evaluations;
        rec.step_count = result.history.counters.chain_steps;
      }
      rec.median_ms = median(std::move(times));
    } catch (const InputError& e) {
      rec.error = e.what();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

ScalingFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("fit_power_law: x and y differ in length");
  if (x.size() < 2) throw ConfigError("fit_power_law needs at least two points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw ConfigError("fit_power_law needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("fit_power_law needs at least two distinct x values");
  ScalingFit fit;
  fit.exponent = sxy / sxx;
  // A flat response is fitted perfectly by slope 0.
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.points = x.size();
  return fit;
}

ScalingFit fit_scaling_exponent(std::span<const BenchRecord> records, double min_value_cutoff) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (r.error || r.median_ms < min_value_cutoff) continue;
    x.push_back(static_cast<double>(r.value));
    y.push_back(r.median_ms);
  }
  if (x.size() < 3)
    throw ConfigError("only " + std::to_string(x.size()) + " sweep points above the " +
                      fmt(min_value_cutoff) + " ms noise floor; need 3 (raise G)");
  return fit_power_law(x, y);
}

ScalingFit fit_counter_exponent(std::span<const BenchRecord> records, Counter counter) {
  std::vector<double> x, y;
  for (const auto& r : records) {
    if (r.error) continue;
    x.push_back(static_cast<double>(r.value));
    y.push_back(static_cast<double>(counter == Counter::pairs ? r.pair_count : r.step_count));
  }
  if (x.size() < 3) throw ConfigError("need at least 3 valid sweep points to fit counters");
  return fit_power_law(x, y);
}

std::optional<Band> timing_band(SweepVariable v) {
  switch (v) {
    case SweepVariable::G: return Band{0.85, 1.15};
    case SweepVariable::P: return Band{1.8, 2.25};
    case SweepVariable::K: return Band{0.85, 1.15};
    default: return std::nullopt;
  }
}

void write_csv(std::span<const BenchRecord> records, SweepVariable variable, ChainMethod method,
               std::size_t repetitions, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "sweep_variable,value,median_ms,pair_count,step_count,seed,method,repetitions\n";
  for (const auto& r : records) {
    out << to_string(variable) << ',' << r.value << ',';
    if (r.error)
      out << "nan";
    else
      out << fmt(r.median_ms, 9);
    out << ',' << r.pair_count << ',' << r.step_count << ',' << r.seed << ',' << to_string(method)
        << ',' << repetitions << '\n';
  }
}

void write_svg(std::span<const BenchRecord> records, SweepVariable variable,
               const std::optional<ScalingFit>& fit, const std::filesystem::path& path) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : records)
    if (!r.error && r.median_ms > 0.0)
      pts.emplace_back(std::log10(static_cast<double>(r.value)), std::log10(r.median_ms));

  constexpr double W = 640, H = 480, M = 60;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    y0 = y1 = pts[0].second;
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    if (x1 - x0 < 1e-9) x1 = x0 + 1;
    if (y1 - y0 < 1e-9) y1 = y0 + 1;
  }
  auto px = [&](double x) { return M + (x - x0) / (x1 - x0) * (W - 2 * M); };
  auto py = [&](double y) { return H - M - (y - y0) / (y1 - y0) * (H - 2 * M); };

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">log10 "
      << to_string(variable) << "</text>\n";
  out << "<text x=\"15\" y=\"" << H / 2 << "\" transform=\"rotate(-90 15 " << H / 2
      << ")\" text-anchor=\"middle\">log10 median ms</text>\n";
  for (const auto& [x, y] : pts)
    out << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y))
        << "\" r=\"4\" fill=\"steelblue\"/>\n";
  if (fit && !pts.empty()) {
    double mx = 0, my = 0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    auto line_y = [&](double x) { return my + fit->exponent * (x - mx); };
    out << "<line x1=\"" << fmt(px(x0)) << "\" y1=\"" << fmt(py(line_y(x0))) << "\" x2=\""
        << fmt(px(x1)) << "\" y2=\"" << fmt(py(line_y(x1)))
        << "\" stroke=\"firebrick\" stroke-dasharray=\"6 4\"/>\n";
    out << "<text x=\"" << M + 10 << "\" y=\"" << M - 20 << "\">exponent " << fmt(fit->exponent, 4)
        << ", r^2 " << fmt(fit->r_squared, 4) << "</text>\n";
  }
  out << "</svg>\n";
}

nlohmann::ordered_json verdict_json(SweepVariable variable, std::span<const BenchRecord> records,
                                    double min_value_cutoff) {
  nlohmann::ordered_json doc;
  doc["sweep_variable"] = to_string(variable);
  doc["noise_floor_ms"] = min_value_cutoff;
  const auto band = timing_band(variable);
  if (band)
    doc["band"] = {band->lo, band->hi};
  else
    doc["band"] = nullptr;

  bool pass = true;
  try {
    const auto fit = fit_scaling_exponent(records, min_value_cutoff);
    doc["timing"] = {{"exponent", fit.exponent}, {"r_squared", fit.r_squared},
                     {"points", fit.points}};
    if (band) pass = band->contains(fit.exponent);
  } catch (const ConfigError& e) {
    doc["timing"] = {{"error", e.what()}};
    pass = false;
  }
  try {
    const auto pairs = fit_counter_exponent(records, Counter::pairs);
    const auto steps = fit_counter_exponent(records, Counter::steps);
    doc["counters"] = {{"pair_exponent", pairs.exponent}, {"step_exponent", steps.exponent}};
  } catch (const ConfigError& e) {
    doc["counters"] = {{"error", e.what()}};
  }
  auto errors = nlohmann::ordered_json::array();
  for (const auto& r : records)
    if (r.error) errors.push_back({{"value", r.value}, {"error", *r.error}});
  doc["point_errors"] = std::move(errors);
  doc["pass"] = pass;
  return doc;
}

}  // namespace evonash::bench
