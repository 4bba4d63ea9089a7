#include "evonash/cli.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "evonash/bench.hpp"
#include "evonash/errors.hpp"
#include "evonash/evolution.hpp"
#include "evonash/game.hpp"
#include "evonash/interaction.hpp"
#include "evonash/nash_oracle.hpp"
#include "evonash/smm.hpp"

namespace evonash::cli {

namespace fs = std::filesystem;

namespace {

// Thrown once the inputs have been accepted, so failures map to exit 3.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::uint64_t parse_seed(const std::string& text, const char* source) {
  try {
    // stoull would silently wrap a leading minus sign.
    if (text.empty() || !std::isdigit(static_cast<unsigned char>(text.front())))
      throw std::invalid_argument(text);
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 10);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string(source) + " is not an unsigned 64-bit integer: '" + text + "'");
  }
}

std::vector<std::size_t> parse_values(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(parse_seed(item, "--values entry")));
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw ConfigError("output directory " + dir.string() + " is not writable");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
}

std::size_t default_workers() {
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::vector<double> probs_of(const MixedStrategy& s) {
  return {s.probs().begin(), s.probs().end()};
}

// ---------------------------------------------------------------- evolve

struct EvolveOptions {
  std::string game = "prisoners_dilemma";
  std::string config;
  std::string seed;
  std::string out = "evolve_out";
  std::size_t workers = 0;
};

std::string history_csv(const RunHistory& history, std::size_t actions) {
  std::ostringstream os;
  os << "generation,mean_fitness,max_fitness";
  for (std::size_t a = 0; a < actions; ++a) os << ",action_prob_" << a;
  os << '\n';
  for (const auto& r : history.records) {
    os << r.generation << ',' << num(r.mean_fitness) << ',' << num(r.max_fitness);
    for (double p : r.action_distribution) os << ',' << num(p);
    os << '\n';
  }
  return os.str();
}

std::string timings_csv(const RunHistory& history) {
  std::ostringstream os;
  os << "generation,millis\n";
  for (const auto& r : history.records) os << r.generation << ',' << num(r.millis) << '\n';
  return os.str();
}

int cmd_evolve(const EvolveOptions& opt, std::ostream& out) {
  EvolutionConfig cfg;
  bool seed_from_file = false;
  bool workers_from_file = false;
  if (!opt.config.empty()) {
    const auto doc = read_json_file(opt.config);
    cfg = config_from_json(doc);
    seed_from_file = doc.is_object() && doc.contains("seed");
    workers_from_file = doc.is_object() && doc.contains("workers");
  }
  if (!opt.seed.empty()) {
    cfg.seed = parse_seed(opt.seed, "--seed");
  } else if (!seed_from_file) {
    if (const char* env = std::getenv("EVONASH_SEED")) cfg.seed = parse_seed(env, "EVONASH_SEED");
  }
  if (opt.workers > 0)
    cfg.workers = opt.workers;
  else if (!workers_from_file)
    cfg.workers = default_workers();
  cfg.validate();

  const NormalFormGame game = resolve_game(opt.game);
  if (!game.is_square())
    throw ShapeError("evolve needs a square game; '" + game.name() + "' is " +
                     std::to_string(game.actions_row()) + "x" + std::to_string(game.actions_col()));
  const fs::path dir(opt.out);
  ensure_dir(dir);

  EvolutionResult result;
  try {
    result = evolve(cfg, game);
  } catch (const std::exception& e) {
    throw RuntimeFailure(std::string("evolution failed: ") + e.what());
  }

  const std::size_t A = game.actions_row();
  write_text(dir / "history.csv", history_csv(result.history, A));
  write_text(dir / "timings.csv", timings_csv(result.history));

  ensure_dir(dir / "agents");
  std::vector<std::string> agent_files;
  for (std::size_t i = 0; i < result.population.size(); ++i) {
    std::ostringstream name;
    name << "agents/agent_" << std::setw(3) << std::setfill('0') << i << ".json";
    try {
      save_smm(result.population[i], dir / name.str());
    } catch (const IoError& e) {
      throw RuntimeFailure(e.what());
    }
    agent_files.push_back(name.str());
  }

  const MixedStrategy strategy =
      extract_population_strategy(result.population, game, cfg.interaction);
  const auto [regret_row, regret_col] = regret(game, strategy, strategy);

  nlohmann::ordered_json summary;
  summary["seed"] = cfg.seed;
  summary["game"] = game_to_json(game);
  summary["config"] = config_to_json(cfg);
  summary["strategy"] = probs_of(strategy);
  if (!game.action_labels_row().empty()) summary["action_labels"] = game.action_labels_row();
  summary["regret"] = {regret_row, regret_col};
  if (A <= kDefaultOracleCap) {
    const auto eqs = support_enumeration(game);
    nlohmann::ordered_json oracle = equilibria_to_json(eqs);
    if (!eqs.equilibria.empty()) {
      const auto nearest = nearest_equilibrium(strategy, strategy, eqs.equilibria);
      oracle["nearest_index"] = nearest.index;
      oracle["distance_to_nearest"] = nearest.distance;
    }
    summary["oracle"] = std::move(oracle);
  }
  summary["pair_evaluations"] = result.history.counters.pair_evaluations;
  summary["chain_steps"] = result.history.counters.chain_steps;
  summary["final_mean_fitness"] = result.history.records.back().mean_fitness;
  summary["history_file"] = "history.csv";
  summary["timings_file"] = "timings.csv";
  summary["agent_files"] = agent_files;
  write_text(dir / "summary.json", summary.dump(2) + "\n");

  out << "seed " << cfg.seed << ", game " << game.name() << ", G=" << cfg.generations
      << " P=" << cfg.population_size << " K=" << cfg.interaction.k_steps
      << " S=" << cfg.state_size << "\nstrategy";
  for (double p : strategy.probs()) out << ' ' << num(p);
  out << "\nregret " << num(regret_row) << ' ' << num(regret_col) << "\nwrote " << dir.string()
      << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- bench

struct BenchOptions {
  std::string sweep;
  std::string values;
  std::size_t reps = 5;
  std::string method = "joint";
  std::string out = "bench_out";
  std::string config;
  std::string game = "prisoners_dilemma";
  std::string seed;
  std::size_t workers = 1;
  double noise_floor_ms = bench::kDefaultNoiseFloorMs;
};

int cmd_bench(const BenchOptions& opt, std::ostream& out) {
  bench::SweepSpec spec;
  if (!opt.config.empty()) spec.base_config = config_from_json(read_json_file(opt.config));
  if (!opt.seed.empty()) spec.base_config.seed = parse_seed(opt.seed, "--seed");
  spec.base_config.interaction.method = parse_chain_method(opt.method);
  spec.base_config.workers = std::max<std::size_t>(1, opt.workers);
  spec.variable = bench::parse_sweep_variable(opt.sweep);
  spec.values = parse_values(opt.values);
  spec.repetitions = opt.reps;
  if (spec.variable != bench::SweepVariable::A) spec.game = resolve_game(opt.game);
  spec.validate();
  const fs::path dir(opt.out);
  ensure_dir(dir);

  std::vector<bench::BenchRecord> records;
  try {
    records = bench::run_sweep(spec);
  } catch (const std::exception& e) {
    throw RuntimeFailure(std::string("sweep failed: ") + e.what());
  }

  const std::string stem = "bench_" + std::string(bench::to_string(spec.variable));
  try {
    bench::write_csv(records, spec.variable, spec.base_config.interaction.method, spec.repetitions,
                     dir / (stem + ".csv"));
  } catch (const IoError& e) {
    throw RuntimeFailure(e.what());
  }
  auto verdict = bench::verdict_json(spec.variable, records, opt.noise_floor_ms);
  std::optional<bench::ScalingFit> fit;
  if (verdict["timing"].contains("exponent"))
    fit = bench::ScalingFit{verdict["timing"]["exponent"].get<double>(),
                            verdict["timing"]["r_squared"].get<double>(),
                            verdict["timing"]["points"].get<std::size_t>()};
  try {
    bench::write_svg(records, spec.variable, fit, dir / (stem + ".svg"));
  } catch (const IoError& e) {
    throw RuntimeFailure(e.what());
  }
  verdict["method"] = to_string(spec.base_config.interaction.method);
  write_text(dir / ("verdict_" + std::string(bench::to_string(spec.variable)) + ".json"),
             verdict.dump(2) + "\n");

  for (const auto& r : records) {
    out << bench::to_string(spec.variable) << '=' << r.value;
    if (r.error)
      out << "  error: " << *r.error << '\n';
    else
      out << "  median " << num(r.median_ms) << " ms  pairs " << r.pair_count << "  steps "
          << r.step_count << '\n';
  }
  out << verdict.dump(2) << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------ nash

int cmd_nash(const std::string& game_id, std::size_t cap, std::ostream& out) {
  const NormalFormGame game = resolve_game(game_id);
  const auto eqs = support_enumeration(game, cap);
  nlohmann::ordered_json doc;
  doc["game"] = game.name();
  if (!game.action_labels_row().empty()) doc["action_labels_row"] = game.action_labels_row();
  if (!game.action_labels_col().empty()) doc["action_labels_col"] = game.action_labels_col();
  const auto body = equilibria_to_json(eqs);
  doc["equilibria"] = body["equilibria"];
  doc["degenerate"] = body["degenerate"];
  out << doc.dump(2) << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- match

struct MatchOptions {
  std::string agent1;
  std::string agent2;
  std::string game = "prisoners_dilemma";
  std::size_t k = 5;
  std::size_t simulate = 0;
  std::string seed;
};

int cmd_match(const MatchOptions& opt, std::ostream& out) {
  const Smm m1 = load_smm(opt.agent1);
  const Smm m2 = load_smm(opt.agent2);
  const NormalFormGame game = resolve_game(opt.game);
  check_compatible(m1, game);
  check_compatible(m2, game);
  if (opt.k < 1) throw ConfigError("--k must be at least 1");
  std::uint64_t seed = 0;
  if (!opt.seed.empty())
    seed = parse_seed(opt.seed, "--seed");
  else if (const char* env = std::getenv("EVONASH_SEED"))
    seed = parse_seed(env, "EVONASH_SEED");

  nlohmann::ordered_json doc;
  doc["game"] = game.name();
  doc["k_steps"] = opt.k;
  for (ChainMethod method : {ChainMethod::joint, ChainMethod::factored}) {
    nlohmann::ordered_json per_mode;
    for (HorizonMode mode : {HorizonMode::last, HorizonMode::average}) {
      const auto [v1, v2] = horizon_values(m1, m2, game, {opt.k, method, mode});
      per_mode[std::string(to_string(mode))] = {v1, v2};
    }
    doc[std::string(to_string(method))] = std::move(per_mode);
  }
  if (opt.simulate > 0) {
    Rng rng(seed);
    const auto est = simulate_match(m1, m2, game, opt.k, opt.simulate, rng);
    auto estimate = [](const PayoffEstimate& e) {
      return nlohmann::ordered_json{{"mean", {e.mean1, e.mean2}},
                                    {"stderr", {e.stderr1, e.stderr2}}};
    };
    doc["simulation"] = {{"rollouts", est.rollouts},
                         {"seed", seed},
                         {"last", estimate(est.last)},
                         {"average", estimate(est.average)}};
  }
  out << doc.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolutionary approximation of Nash equilibria with stochastic Moore machines",
               "evonash"};
  app.require_subcommand(1);

  EvolveOptions evolve_opt;
  auto* evolve_cmd = app.add_subcommand("evolve", "Run the genetic algorithm on a game");
  evolve_cmd->add_option("--game", evolve_opt.game, "Builtin game id or game file")
      ->capture_default_str();
  evolve_cmd->add_option("--config", evolve_opt.config, "Run configuration JSON");
  evolve_cmd->add_option("--seed", evolve_opt.seed, "Master seed (falls back to EVONASH_SEED)");
  evolve_cmd->add_option("--out", evolve_opt.out, "Output directory")->capture_default_str();
  evolve_cmd->add_option("--workers", evolve_opt.workers,
                         "Interaction threads (default: available parallelism)");

  BenchOptions bench_opt;
  auto* bench_cmd = app.add_subcommand("bench", "Time a parameter sweep and fit its exponent");
  bench_cmd->add_option("--sweep", bench_opt.sweep, "G, P, K, S or A")->required();
  bench_cmd->add_option("--values", bench_opt.values, "Comma-separated ascending integers")
      ->required();
  bench_cmd->add_option("--reps", bench_opt.reps, "Repetitions per point")->capture_default_str();
  bench_cmd->add_option("--method", bench_opt.method, "joint or factored")->capture_default_str();
  bench_cmd->add_option("--out", bench_opt.out, "Output directory")->capture_default_str();
  bench_cmd->add_option("--config", bench_opt.config, "Base run configuration JSON");
  bench_cmd->add_option("--game", bench_opt.game, "Builtin game id or game file")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_opt.seed, "Base seed");
  bench_cmd->add_option("--workers", bench_opt.workers, "Interaction threads")
      ->capture_default_str();
  bench_cmd->add_option("--noise-floor-ms", bench_opt.noise_floor_ms,
                        "Ignore points faster than this when fitting")
      ->capture_default_str();

  std::string nash_game;
  std::size_t nash_cap = kDefaultOracleCap;
  auto* nash_cmd = app.add_subcommand("nash", "Print the exact equilibria of a game");
  nash_cmd->add_option("--game", nash_game, "Builtin game id or game file")->required();
  nash_cmd->add_option("--cap", nash_cap, "Largest action count accepted")->capture_default_str();

  MatchOptions match_opt;
  auto* match_cmd = app.add_subcommand("match", "Horizon values of one pair of agents");
  match_cmd->add_option("--agent1", match_opt.agent1, "Row agent file")->required();
  match_cmd->add_option("--agent2", match_opt.agent2, "Column agent file")->required();
  match_cmd->add_option("--game", match_opt.game, "Builtin game id or game file")
      ->capture_default_str();
  match_cmd->add_option("--k", match_opt.k, "Chain steps")->capture_default_str();
  match_cmd->add_option("--simulate", match_opt.simulate, "Monte-Carlo rollouts for a cross-check");
  match_cmd->add_option("--seed", match_opt.seed, "Seed for --simulate");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (evolve_cmd->parsed()) return cmd_evolve(evolve_opt, out);
    if (bench_cmd->parsed()) return cmd_bench(bench_opt, out);
    if (nash_cmd->parsed()) return cmd_nash(nash_game, nash_cap, out);
    if (match_cmd->parsed()) return cmd_match(match_opt, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace evonash::cli
