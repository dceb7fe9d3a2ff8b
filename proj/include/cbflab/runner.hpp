#pragma once

// Experiment orchestration behind the command-line tool: builds the domain,
// forcing, path and initial data from a RunConfig, runs one experiment and
// writes its CSV tables, snapshots and manifest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cbflab/config.hpp"
#include "cbflab/spectral_domain.hpp"
#include "cbflab/stochastic_env.hpp"

namespace cbflab {

/// Spatial forcing profile with H-norm `amplitude`. The compact bump is the
/// perpendicular gradient of exp(-1/(1 - |x|^2/R^2)) with R = L/4, so it is
/// supported in |x| <= L/4 before spectral truncation.
SpectralVelocityField forcing_shape(const TorusDomain& domain, ForcingShape shape, double amplitude,
                                    std::uint64_t seed = 1, double kc = 2.0);

ForcingProfile build_forcing(const RunConfig& cfg, const TorusDomain& domain);
SpectralVelocityField build_initial(const RunConfig& cfg, const TorusDomain& domain);
WienerPath build_path(const RunConfig& cfg);

struct RunResult {
  bool passed = true;
  std::string stage;
  std::map<std::string, std::string> summary;  // sorted, echoed into the manifest
  std::vector<std::filesystem::path> files;    // relative to the output directory
};

/// Runs cfg.experiment.kind and writes every artifact under cfg.output.directory.
/// Experiment errors propagate as cbflab::Error with the stage in the message.
RunResult run_experiment(const RunConfig& cfg);

/// "blob <size>\0<content>" SHA-1, hex encoded.
std::string git_blob_sha1(const std::string& content);

}  // namespace cbflab
