#pragma once

// JSON run configuration: schema, defaults and cross-field validation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbflab/integrators.hpp"
#include "cbflab/operators.hpp"
#include "cbflab/stochastic_env.hpp"

namespace cbflab {

enum class ExperimentKind { verify, simulate, pullback, attractor, semicontinuity, tails };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_from_string(const std::string& s);

enum class ForcingShape { random, shear, taylor_green, compact_bump };

struct DomainBlock {
  int d = 2;
  double L = 3.141592653589793;
  int N = 32;
  double dealias = 2.0 / 3.0;
};

struct ForcingBlock {
  ForcingSpec spec;           // kind, delta, period, modulation, growth
  bool delta_given = false;   // delta defaults to alpha / 2
  ForcingShape shape = ForcingShape::random;
  double amplitude = 1.0;     // H-norm of the spatial profile
  std::uint64_t seed = 1;     // random shape only
  double kc = 2.0;            // random shape spectral width
};

struct SolverBlock {
  Scheme scheme = Scheme::imex_cn_ab2;
  double dt = 1e-3;
  int stride = 10;
};

struct FamilyBlock {
  double rho0 = 1.0;
  double power = 0.0;
  int samples = 8;
  std::uint64_t seed = 1;
  int max_mode = 2;
};

struct InitialBlock {
  std::string kind = "random";  // random | zero
  std::uint64_t seed = 1;
  double kc = 3.0;
  double amplitude = 1.0;  // H-norm
};

struct PathBlock {
  std::optional<std::uint64_t> seed;  // required when any epsilon != 0
  double dt = 1e-3;
  std::optional<double> t_min, t_max;  // derived from the experiment when absent
};

struct ExperimentBlock {
  ExperimentKind kind = ExperimentKind::simulate;
  double tau = 0.0;
  double t_end = 1.0;                 // simulate: integrate over [tau, tau + t_end]
  std::vector<double> horizons{2.0, 4.0, 8.0};
  std::vector<double> k_ladder;       // tails; default {L/8, L/4}
  double tail_horizon = 5.0;
  FamilyBlock family;
  InitialBlock initial;
  PathBlock path;
};

struct OutputBlock {
  std::string directory = "out";
  bool snapshots = true;
};

struct RunConfig {
  DomainBlock domain;
  PhysicalParameters params;
  std::vector<double> epsilon_ladder;  // semicontinuity / tails
  ForcingBlock forcing;
  SolverBlock solver;
  ExperimentBlock experiment;
  OutputBlock output;
  int workers = 1;
};

/// Parses and validates; errors carry the offending key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical JSON echo of a resolved config (sorted keys, defaults filled).
std::string config_to_json(const RunConfig& cfg, int indent = 2);

/// Earliest path time any experiment in this config evaluates.
double required_path_start(const RunConfig& cfg);
double required_path_end(const RunConfig& cfg);

}  // namespace cbflab
