#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "refprior/divergence.hpp"
#include "refprior/errors.hpp"
#include "refprior/information.hpp"
#include "refprior/models.hpp"
#include "refprior/prior.hpp"
#include "refprior/reference.hpp"
#include "refprior/table_io.hpp"

namespace refprior::cli {

// The run configuration is malformed or inconsistent (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Command { compute, oracle, permissibility, info_diagnostics };
enum class OracleKind { jeffreys, nonregular, uniform_pair, theta_theta2, arcsine };

struct PermissibilityOptions {
  PriorFn prior;
  CompactSequence sequence;
  std::vector<double> i_values;
  double threshold = 0.05;
  DiscrepancySettings settings;
};

struct InfoOptions {
  PriorFn prior;
  std::optional<PriorFn> alternative;  // MMI gap against this prior when set
  CompactSet set;
  std::vector<std::size_t> ks;
  InformationSettings settings;
  InformationEstimator estimator;
};

struct RunConfig {
  Command command = Command::compute;
  ModelPtr model;
  // Optional narrowing of the parameter space; grid points must lie inside.
  Interval bounds{kNegInf, kInf};
  std::vector<double> grid;
  double anchor = kNaN;
  MCConfig mc;
  OracleKind oracle = OracleKind::theta_theta2;
  std::optional<OracleKind> overlay;
  PermissibilityOptions permissibility;
  InfoOptions info;
  std::string output_path;
  TableFormat format = TableFormat::csv;
  // Effective configuration (overrides applied, output path removed), as
  // embedded in every output and hashed.
  nlohmann::json document;
  std::uint64_t hash = 0;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t threads = 0;  // 0: REFPRIOR_THREADS or hardware concurrency
};

// Throws ConfigError.
RunConfig parse_config(const nlohmann::json& doc, const Overrides& overrides = {});
RunConfig load_config(const std::string& path, const Overrides& overrides = {});

// Files written by run.
struct RunOutcome {
  std::vector<std::string> files;
};
RunOutcome execute(const RunConfig& config);

// Full front-end: 0 on success, 2 on a configuration error, 1 on any other
// failure. Failures print a one-line JSON error record to err.
int run(const std::string& config_path, const Overrides& overrides, std::ostream& err);

// log of the closed-form prior at theta, unnormalized.
double oracle_log_prior(OracleKind kind, const Model& model, double theta, const QuadratureSettings& settings);
OracleKind parse_oracle_kind(const std::string& name);
std::string to_string(OracleKind kind);

}  // namespace refprior::cli
