#include "evonash/smm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "evonash/errors.hpp"

namespace evonash {

namespace {

void clamp_entries(std::vector<double>& values, const char* what) {
  for (double& v : values) {
    if (!std::isfinite(v)) throw ValidationError(std::string("smm: non-finite entry in ") + what);
    if (v < 0.0 && v >= -Smm::kClampTolerance) v = 0.0;
    if (v > 1.0 && v <= 1.0 + Smm::kClampTolerance) v = 1.0;
  }
}

std::optional<Violation> check_row(std::span<const double> row, std::string name) {
  double sum = 0.0;
  for (double v : row) sum += v;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] < 0.0 || row[i] > 1.0)
      return Violation{std::move(name), sum, "entry " + std::to_string(i) + " outside [0, 1]"};
  }
  if (std::abs(sum - 1.0) > Smm::kSumTolerance)
    return Violation{std::move(name), sum, "row does not sum to 1"};
  return std::nullopt;
}

void fill_dirichlet(std::span<double> row, Rng& rng) {
  std::exponential_distribution<double> unit_exp(1.0);
  double sum = 0.0;
  for (double& v : row) {
    v = unit_exp(rng);
    sum += v;
  }
  if (sum <= 0.0) {
    for (double& v : row) v = 1.0 / static_cast<double>(row.size());
    return;
  }
  for (double& v : row) v /= sum;
}

void perturb_row(std::span<double> row, double sigma, Rng& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  double sum = 0.0;
  for (double& v : row) {
    v = std::max(0.0, v + noise(rng));
    sum += v;
  }
  if (sum <= 0.0) {
    for (double& v : row) v = 1.0 / static_cast<double>(row.size());
    return;
  }
  for (double& v : row) v /= sum;
}

void append_row(const nlohmann::json& arr, const std::string& name, std::size_t n,
                std::vector<double>& out) {
  if (!arr.is_array() || arr.size() != n)
    throw ParseError("agent file: '" + name + "' must be an array of length " + std::to_string(n));
  for (const auto& v : arr) {
    if (!v.is_number()) throw ParseError("agent file: non-numeric entry in '" + name + "'");
    out.push_back(v.get<double>());
  }
}

}  // namespace

Smm::Smm(std::size_t num_states, std::size_t num_actions, std::vector<double> initial,
         std::vector<double> emission, std::vector<double> transition)
    : states_(num_states),
      actions_(num_actions),
      initial_(std::move(initial)),
      emission_(std::move(emission)),
      transition_(std::move(transition)) {
  if (states_ < 1 || actions_ < 1) throw ShapeError("smm: need at least one state and one action");
  if (initial_.size() != states_)
    throw ShapeError("smm: initial has " + std::to_string(initial_.size()) + " entries, expected " +
                     std::to_string(states_));
  if (emission_.size() != states_ * actions_)
    throw ShapeError("smm: emission has " + std::to_string(emission_.size()) +
                     " entries, expected " + std::to_string(states_ * actions_));
  if (transition_.size() != states_ * actions_ * states_)
    throw ShapeError("smm: transition has " + std::to_string(transition_.size()) +
                     " entries, expected " + std::to_string(states_ * actions_ * states_));
  clamp_entries(initial_, "initial");
  clamp_entries(emission_, "emission");
  clamp_entries(transition_, "transition");
}

Smm Smm::constant(std::size_t num_actions, std::size_t action) {
  if (action >= num_actions)
    throw ConfigError("action " + std::to_string(action) + " is out of range for " +
                      std::to_string(num_actions) + " actions");
  std::vector<double> emission(num_actions, 0.0);
  emission[action] = 1.0;
  return Smm(1, num_actions, {1.0}, std::move(emission), std::vector<double>(num_actions, 1.0));
}

std::string Violation::message() const {
  std::ostringstream msg;
  msg.precision(17);
  msg << row << ": " << detail << " (sum " << sum << ")";
  return msg.str();
}

std::optional<Violation> validate(const Smm& m) {
  if (auto v = check_row(m.initial(), "initial")) return v;
  for (std::size_t s = 0; s < m.num_states(); ++s)
    if (auto v = check_row(m.emission_row(s), "emission[" + std::to_string(s) + "]")) return v;
  for (std::size_t s = 0; s < m.num_states(); ++s)
    for (std::size_t a = 0; a < m.num_actions(); ++a)
      if (auto v = check_row(m.transition_row(s, a),
                             "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]"))
        return v;
  return std::nullopt;
}

void ensure_valid(const Smm& m) {
  if (auto v = validate(m)) throw ValidationError("smm: " + v->message());
}

void MutationParams::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw ConfigError("mutation rate must lie in [0, 1], got " + std::to_string(rate));
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw ConfigError("mutation sigma must be a finite non-negative number, got " +
                      std::to_string(sigma));
}

Smm random_smm(std::size_t num_states, std::size_t num_actions, Rng& rng) {
  if (num_states < 1 || num_actions < 1)
    throw ConfigError("random_smm: need at least one state and one action");
  std::vector<double> initial(num_states);
  std::vector<double> emission(num_states * num_actions);
  std::vector<double> transition(num_states * num_actions * num_states);
  fill_dirichlet(initial, rng);
  for (std::size_t s = 0; s < num_states; ++s)
    fill_dirichlet(std::span<double>(emission).subspan(s * num_actions, num_actions), rng);
  for (std::size_t r = 0; r < num_states * num_actions; ++r)
    fill_dirichlet(std::span<double>(transition).subspan(r * num_states, num_states), rng);
  return Smm(num_states, num_actions, std::move(initial), std::move(emission),
             std::move(transition));
}

Smm mutate(const Smm& parent, const MutationParams& params, Rng& rng) {
  params.validate();
  if (params.sigma == 0.0 || params.rate == 0.0) return parent;

  const std::size_t S = parent.num_states();
  const std::size_t A = parent.num_actions();
  std::vector<double> initial = parent.initial_data();
  std::vector<double> emission = parent.emission_data();
  std::vector<double> transition = parent.transition_data();

  std::bernoulli_distribution selected(params.rate);
  auto maybe_perturb = [&](std::span<double> row) {
    if (selected(rng)) perturb_row(row, params.sigma, rng);
  };
  maybe_perturb(initial);
  for (std::size_t s = 0; s < S; ++s) maybe_perturb(std::span<double>(emission).subspan(s * A, A));
  for (std::size_t r = 0; r < S * A; ++r)
    maybe_perturb(std::span<double>(transition).subspan(r * S, S));
  return Smm(S, A, std::move(initial), std::move(emission), std::move(transition));
}

nlohmann::ordered_json smm_to_json(const Smm& m) {
  const std::size_t S = m.num_states();
  const std::size_t A = m.num_actions();
  nlohmann::ordered_json doc;
  doc["num_states"] = S;
  doc["num_actions"] = A;
  doc["initial"] = m.initial_data();
  auto emission = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < S; ++s) {
    auto row = m.emission_row(s);
    emission.push_back(std::vector<double>(row.begin(), row.end()));
  }
  doc["emission"] = std::move(emission);
  auto transition = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < S; ++s) {
    auto per_action = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < A; ++a) {
      auto row = m.transition_row(s, a);
      per_action.push_back(std::vector<double>(row.begin(), row.end()));
    }
    transition.push_back(std::move(per_action));
  }
  doc["transition"] = std::move(transition);
  return doc;
}

Smm smm_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("agent file: top level must be an object");
  for (const char* key : {"num_states", "num_actions", "initial", "emission", "transition"})
    if (!doc.contains(key)) throw ParseError(std::string("agent file: missing field '") + key + "'");
  const auto& js = doc.at("num_states");
  const auto& ja = doc.at("num_actions");
  if (!js.is_number_unsigned() || !ja.is_number_unsigned())
    throw ParseError("agent file: num_states and num_actions must be positive integers");
  const auto S = js.get<std::size_t>();
  const auto A = ja.get<std::size_t>();
  if (S < 1 || A < 1) throw ParseError("agent file: num_states and num_actions must be positive");

  std::vector<double> initial;
  append_row(doc.at("initial"), "initial", S, initial);

  const auto& em = doc.at("emission");
  if (!em.is_array() || em.size() != S)
    throw ParseError("agent file: 'emission' must hold " + std::to_string(S) + " rows");
  std::vector<double> emission;
  emission.reserve(S * A);
  for (std::size_t s = 0; s < S; ++s)
    append_row(em[s], "emission[" + std::to_string(s) + "]", A, emission);

  const auto& tr = doc.at("transition");
  if (!tr.is_array() || tr.size() != S)
    throw ParseError("agent file: 'transition' must hold " + std::to_string(S) + " blocks");
  std::vector<double> transition;
  transition.reserve(S * A * S);
  for (std::size_t s = 0; s < S; ++s) {
    if (!tr[s].is_array() || tr[s].size() != A)
      throw ParseError("agent file: transition[" + std::to_string(s) + "] must hold " +
                       std::to_string(A) + " rows");
    for (std::size_t a = 0; a < A; ++a)
      append_row(tr[s][a], "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]", S,
                 transition);
  }

  Smm m(S, A, std::move(initial), std::move(emission), std::move(transition));
  ensure_valid(m);
  return m;
}

void save_smm(const Smm& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write agent file " + path.string());
  out << smm_to_json(m).dump(2) << "\n";
}

Smm load_smm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open agent file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    return smm_from_json(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace evonash
