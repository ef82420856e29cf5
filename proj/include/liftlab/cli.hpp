#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace liftlab {

struct RunConfig {
  std::string subcommand;
  std::string process;
  std::string preset;
  std::string velocity_law = "hypercube";
  std::optional<double> omega;
  double length = 1.0;
  double gamma = 1.0;
  double m = 1.0;           // curvature of the quadratic potential
  std::optional<double> T;  // empty: m_hat^{-1/2}
  int d = 2;
  int n_interior = 200;
  int n_quad = 64;
  std::optional<double> t_end;
  int n_replicas = 1000;
  int n_samples = 10;
  std::uint64_t seed = 42;
  int threads = 0;
  std::string out;
  std::vector<double> omegas, gammas;

  bool operator==(const RunConfig&) const = default;
};

// Full config as JSON (keys mirror the flag names). Unset optionals are omitted.
nlohmann::json render_config(const RunConfig& c);
// Validates and fills defaults. Errors: UnknownKey, MissingRequired, TypeError.
RunConfig config_from_json(const nlohmann::json& j);
// Hash over the semantic fields (everything except out and threads).
std::string run_config_hash(const RunConfig& c);

// argv[1] is the subcommand. A --config JSON file supplies defaults; flags override it.
RunConfig parse_config(const std::vector<std::string>& args);

// Executes the config, writes artifacts and returns the summary
// {subcommand, metrics, artifacts, config_hash}. Throws liftlab::Error on failure.
nlohmann::json run(const RunConfig& c);

// Whole command line: exit code 0 ok, 1 domain error, 2 usage error.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace liftlab
