#include "cbflab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cbflab/error.hpp"
#include "cbflab/snapshot_io.hpp"

namespace cbflab {

using json = nlohmann::json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::verify: return "verify";
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::pullback: return "pullback";
    case ExperimentKind::attractor: return "attractor";
    case ExperimentKind::semicontinuity: return "semicontinuity";
    case ExperimentKind::tails: return "tails";
  }
  return "unknown";
}

ExperimentKind experiment_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::verify, ExperimentKind::simulate, ExperimentKind::pullback, ExperimentKind::attractor,
                 ExperimentKind::semicontinuity, ExperimentKind::tails})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::invalid_config, "unknown experiment kind '" + s + "'");
}

namespace {

std::string forcing_kind_name(ForcingKind k) {
  switch (k) {
    case ForcingKind::zero: return "zero";
    case ForcingKind::constant_field: return "constant";
    case ForcingKind::periodic: return "periodic";
    case ForcingKind::decaying: return "decaying";
  }
  return "zero";
}

std::string shape_name(ForcingShape s) {
  switch (s) {
    case ForcingShape::random: return "random";
    case ForcingShape::shear: return "shear";
    case ForcingShape::taylor_green: return "taylor_green";
    case ForcingShape::compact_bump: return "compact_bump";
  }
  return "random";
}

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorKind::type_error, where("") + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = convert<T>(j_.at(key), where(key));
  }

  template <class T>
  void get_opt(const std::string& key, std::optional<T>& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = convert<T>(j_.at(key), where(key));
  }

  void get_list(const std::string& key, std::vector<double>& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (!v.is_array()) throw Error(ErrorKind::type_error, where(key) + " must be an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(convert<double>(v[i], where(key) + "[" + std::to_string(i) + "]"));
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw Error(ErrorKind::unknown_key, "unknown key '" + where(it.key()) + "'");
  }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <class T>
  static T convert(const json& v, const std::string& at) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw Error(ErrorKind::type_error, at + " must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw Error(ErrorKind::type_error, at + " must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw Error(ErrorKind::type_error, at + " must be a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw Error(ErrorKind::type_error, at + " must be an integer");
      return static_cast<T>(v.get<long long>());
    } else {
      if (!v.is_number()) throw Error(ErrorKind::type_error, at + " must be a number");
      return v.get<double>();
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ForcingKind forcing_kind_from(const std::string& s, const std::string& at) {
  for (auto k : {ForcingKind::zero, ForcingKind::constant_field, ForcingKind::periodic, ForcingKind::decaying})
    if (forcing_kind_name(k) == s) return k;
  throw Error(ErrorKind::invalid_config, at + ": unknown forcing kind '" + s + "'");
}

ForcingShape shape_from(const std::string& s, const std::string& at) {
  for (auto k : {ForcingShape::random, ForcingShape::shear, ForcingShape::taylor_green, ForcingShape::compact_bump})
    if (shape_name(k) == s) return k;
  throw Error(ErrorKind::invalid_config, at + ": unknown forcing shape '" + s + "'");
}

Scheme scheme_from(const std::string& s, const std::string& at) {
  for (auto k : {Scheme::imex_cn_ab2, Scheme::imex_euler, Scheme::heun_stratonovich})
    if (to_string(k) == s) return k;
  throw Error(ErrorKind::invalid_config, at + ": unknown scheme '" + s + "'");
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::invalid_config, msg);
}

void check_increasing(const std::vector<double>& v, const std::string& at) {
  require(!v.empty(), at + " must not be empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(std::isfinite(v[i]) && v[i] > 0.0, at + " entries must be positive");
    require(i == 0 || v[i] > v[i - 1], at + " must be strictly increasing");
  }
}

void validate(RunConfig& c) {
  const auto& d = c.domain;
  require(d.d == 2 || d.d == 3, "domain.d must be 2 or 3");
  require(d.N >= 4 && d.N % 2 == 0, "domain.N must be even and at least 4");
  require(d.L > 0.0, "domain.L must be positive");
  require(d.dealias > 0.0 && d.dealias <= 1.0, "domain.dealias must lie in (0, 1]");

  c.params.d = d.d;
  const Admissibility adm = validate_params(c.params);
  if (!adm.admissible) throw Error(ErrorKind::inadmissible_params, adm.reason);
  require(c.params.epsilon >= 0.0 && c.params.epsilon <= 1.0, "params.epsilon must lie in [0, 1]");

  for (std::size_t i = 0; i < c.epsilon_ladder.size(); ++i) {
    const double e = c.epsilon_ladder[i];
    if (!(e > 0.0 && e <= 1.0))
      throw Error(ErrorKind::invalid_range, "params.epsilon_ladder entries must lie in (0, 1]");
    if (i > 0 && !(e < c.epsilon_ladder[i - 1]))
      throw Error(ErrorKind::ladder_not_decreasing,
                  "params.epsilon_ladder must strictly decrease (entry " + std::to_string(i) + " is " +
                      format_double(e) + " after " + format_double(c.epsilon_ladder[i - 1]) + ")");
  }

  if (!c.forcing.delta_given) c.forcing.spec.delta = c.params.alpha / 2.0;
  require(c.forcing.spec.delta >= 0.0 && c.forcing.spec.delta < c.params.alpha,
          "forcing.delta must lie in [0, alpha)");
  require(c.forcing.amplitude >= 0.0, "forcing.amplitude must be >= 0");
  require(c.forcing.spec.period > 0.0, "forcing.period must be positive");

  require(c.solver.dt > 0.0, "solver.dt must be positive");
  require(c.solver.stride >= 0, "solver.stride must be >= 0");

  auto& e = c.experiment;
  require(e.t_end > 0.0, "experiment.t_end must be positive");
  check_increasing(e.horizons, "experiment.horizons");
  if (e.k_ladder.empty()) e.k_ladder = {d.L / 8.0, d.L / 4.0};
  check_increasing(e.k_ladder, "experiment.k_ladder");
  require(e.tail_horizon > 0.0, "experiment.tail_horizon must be positive");
  require(e.family.samples >= 1, "experiment.family.samples must be >= 1");
  require(e.family.rho0 >= 0.0, "experiment.family.rho0 must be >= 0");
  require(e.initial.kind == "random" || e.initial.kind == "zero", "experiment.initial.kind must be random or zero");
  require(e.path.dt > 0.0 && e.path.dt <= c.solver.dt, "experiment.path.dt must be positive and <= solver.dt");
  require(c.workers >= 1, "workers must be >= 1");

  bool noisy = c.params.epsilon != 0.0 || c.solver.scheme == Scheme::heun_stratonovich;
  if (e.kind == ExperimentKind::semicontinuity || e.kind == ExperimentKind::tails) {
    require(!c.epsilon_ladder.empty(), "params.epsilon_ladder is required for " + to_string(e.kind));
    noisy = true;
  }
  if (noisy && e.kind != ExperimentKind::verify)
    require(e.path.seed.has_value(), "experiment.path.seed is required for stochastic experiments");

  const double need_lo = required_path_start(c), need_hi = required_path_end(c);
  if (e.path.t_min) require(*e.path.t_min <= need_lo, "experiment.path.t_min must be <= " + format_double(need_lo));
  if (e.path.t_max) require(*e.path.t_max >= need_hi, "experiment.path.t_max must be >= " + format_double(need_hi));
}

}  // namespace

double required_path_start(const RunConfig& c) {
  const auto& e = c.experiment;
  const double kappa = c.params.alpha + (c.forcing.spec.kind == ForcingKind::decaying ? 2.0 * c.forcing.spec.growth : 0.0);
  const double tail = kappa > 0.0 ? std::ceil(std::log(1e12) / kappa) : 0.0;
  double lo = std::min({0.0, -e.tau, -e.horizons.back(), -e.tail_horizon});
  if (c.forcing.spec.kind != ForcingKind::zero) lo = std::min(lo, -tail);
  return lo - 1.0;
}

double required_path_end(const RunConfig& c) {
  return std::max({0.0, -c.experiment.tau, c.experiment.t_end}) + 1.0;
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::invalid_config, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader r(root, "");
  if (r.has("domain")) {
    Reader b = r.child("domain");
    b.get("d", c.domain.d);
    b.get("L", c.domain.L);
    b.get("N", c.domain.N);
    b.get("dealias", c.domain.dealias);
    b.finish();
  }
  if (r.has("params")) {
    Reader b = r.child("params");
    b.get("mu", c.params.mu);
    b.get("alpha", c.params.alpha);
    b.get("beta", c.params.beta);
    b.get("r", c.params.r);
    b.get("epsilon", c.params.epsilon);
    b.get_list("epsilon_ladder", c.epsilon_ladder);
    b.finish();
  }
  if (r.has("forcing")) {
    Reader b = r.child("forcing");
    std::string kind = forcing_kind_name(c.forcing.spec.kind), shape = shape_name(c.forcing.shape);
    b.get("kind", kind);
    c.forcing.spec.kind = forcing_kind_from(kind, b.where("kind"));
    b.get("shape", shape);
    c.forcing.shape = shape_from(shape, b.where("shape"));
    if (b.has("delta")) c.forcing.delta_given = true;
    b.get("delta", c.forcing.spec.delta);
    b.get("period", c.forcing.spec.period);
    b.get("modulation", c.forcing.spec.modulation);
    b.get("growth", c.forcing.spec.growth);
    b.get("amplitude", c.forcing.amplitude);
    b.get("seed", c.forcing.seed);
    b.get("kc", c.forcing.kc);
    b.finish();
  }
  if (r.has("solver")) {
    Reader b = r.child("solver");
    std::string scheme = to_string(c.solver.scheme);
    b.get("scheme", scheme);
    c.solver.scheme = scheme_from(scheme, b.where("scheme"));
    b.get("dt", c.solver.dt);
    b.get("stride", c.solver.stride);
    b.finish();
  }
  if (r.has("experiment")) {
    Reader b = r.child("experiment");
    std::string kind = to_string(c.experiment.kind);
    b.get("kind", kind);
    c.experiment.kind = experiment_from_string(kind);
    b.get("tau", c.experiment.tau);
    b.get("t_end", c.experiment.t_end);
    b.get_list("horizons", c.experiment.horizons);
    b.get_list("k_ladder", c.experiment.k_ladder);
    b.get("tail_horizon", c.experiment.tail_horizon);
    if (b.has("family")) {
      Reader f = b.child("family");
      f.get("rho0", c.experiment.family.rho0);
      f.get("power", c.experiment.family.power);
      f.get("samples", c.experiment.family.samples);
      f.get("seed", c.experiment.family.seed);
      f.get("max_mode", c.experiment.family.max_mode);
      f.finish();
    }
    if (b.has("initial")) {
      Reader f = b.child("initial");
      f.get("kind", c.experiment.initial.kind);
      f.get("seed", c.experiment.initial.seed);
      f.get("kc", c.experiment.initial.kc);
      f.get("amplitude", c.experiment.initial.amplitude);
      f.finish();
    }
    if (b.has("path")) {
      Reader f = b.child("path");
      f.get_opt("seed", c.experiment.path.seed);
      f.get("dt", c.experiment.path.dt);
      f.get_opt("t_min", c.experiment.path.t_min);
      f.get_opt("t_max", c.experiment.path.t_max);
      f.finish();
    }
    b.finish();
  }
  if (r.has("output")) {
    Reader b = r.child("output");
    b.get("directory", c.output.directory);
    b.get("snapshots", c.output.snapshots);
    b.finish();
  }
  r.get("workers", c.workers);
  r.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& c, int indent) {
  json j;
  j["domain"] = {{"d", c.domain.d}, {"L", c.domain.L}, {"N", c.domain.N}, {"dealias", c.domain.dealias}};
  j["params"] = {{"mu", c.params.mu},       {"alpha", c.params.alpha},     {"beta", c.params.beta},
                 {"r", c.params.r},         {"epsilon", c.params.epsilon}, {"epsilon_ladder", c.epsilon_ladder}};
  j["forcing"] = {{"kind", forcing_kind_name(c.forcing.spec.kind)},
                  {"shape", shape_name(c.forcing.shape)},
                  {"delta", c.forcing.spec.delta},
                  {"period", c.forcing.spec.period},
                  {"modulation", c.forcing.spec.modulation},
                  {"growth", c.forcing.spec.growth},
                  {"amplitude", c.forcing.amplitude},
                  {"seed", c.forcing.seed},
                  {"kc", c.forcing.kc}};
  j["solver"] = {{"scheme", to_string(c.solver.scheme)}, {"dt", c.solver.dt}, {"stride", c.solver.stride}};
  const auto& e = c.experiment;
  json path = {{"dt", e.path.dt}, {"t_min", e.path.t_min.value_or(required_path_start(c))},
               {"t_max", e.path.t_max.value_or(required_path_end(c))}};
  if (e.path.seed) path["seed"] = *e.path.seed;
  j["experiment"] = {{"kind", to_string(e.kind)},
                     {"tau", e.tau},
                     {"t_end", e.t_end},
                     {"horizons", e.horizons},
                     {"k_ladder", e.k_ladder},
                     {"tail_horizon", e.tail_horizon},
                     {"family",
                      {{"rho0", e.family.rho0},
                       {"power", e.family.power},
                       {"samples", e.family.samples},
                       {"seed", e.family.seed},
                       {"max_mode", e.family.max_mode}}},
                     {"initial",
                      {{"kind", e.initial.kind},
                       {"seed", e.initial.seed},
                       {"kc", e.initial.kc},
                       {"amplitude", e.initial.amplitude}}},
                     {"path", path}};
  j["output"] = {{"directory", c.output.directory}, {"snapshots", c.output.snapshots}};
  j["workers"] = c.workers;
  return j.dump(indent);
}

}  // namespace cbflab
