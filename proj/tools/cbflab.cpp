// Command-line front end: one subcommand per experiment.
//   exit 0: success, 1: experiment failure, 2: configuration error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbflab/config.hpp"
#include "cbflab/error.hpp"
#include "cbflab/runner.hpp"

namespace {

bool is_config_error(cbflab::ErrorKind k) {
  using cbflab::ErrorKind;
  switch (k) {
    case ErrorKind::invalid_config:
    case ErrorKind::unknown_key:
    case ErrorKind::type_error:
    case ErrorKind::inadmissible_params:
    case ErrorKind::ladder_not_decreasing:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic convective Brinkman-Forchheimer experiments"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  for (const char* name : {"verify", "simulate", "pullback", "attractor", "semicontinuity", "tails"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
    sub->add_option("--workers", workers, "worker threads (overrides workers)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Wiener path seed (overrides experiment.path.seed)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string kind = app.get_subcommands().front()->get_name();

  cbflab::RunConfig cfg;
  try {
    nlohmann::json j = nlohmann::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw cbflab::Error(cbflab::ErrorKind::invalid_config, "cannot open config file '" + config_path + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      try {
        j = nlohmann::json::parse(ss.str());
      } catch (const nlohmann::json::parse_error& e) {
        throw cbflab::Error(cbflab::ErrorKind::type_error, std::string("config is not valid JSON: ") + e.what());
      }
      if (!j.is_object()) throw cbflab::Error(cbflab::ErrorKind::type_error, "config root must be an object");
    }
    j["experiment"]["kind"] = kind;
    if (!out_dir.empty()) j["output"]["directory"] = out_dir;
    if (workers > 0) j["workers"] = workers;
    if (seed) j["experiment"]["path"]["seed"] = *seed;
    cfg = cbflab::parse_config(j.dump());
  } catch (const cbflab::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    const cbflab::RunResult res = cbflab::run_experiment(cfg);
    for (const auto& [k, v] : res.summary) std::cout << k << " = " << v << "\n";
    std::cout << "artifacts written to " << cfg.output.directory << "\n";
    if (!res.passed) {
      std::cerr << "experiment '" << res.stage << "' did not pass its checks\n";
      return 1;
    }
    return 0;
  } catch (const cbflab::Error& e) {
    std::cerr << e.what() << "\n";
    return is_config_error(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "stage '" << kind << "' failed: " << e.what() << "\n";
    return 1;
  }
}
