#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "keyrate/optimizer.hpp"

namespace keyrate {

/// Invalid experiment configuration; `path` names the offending field (e.g. "eval.n_samples").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

  [[nodiscard]] const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// A computed value came out non-finite or a solver failed its own check.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepAxis { snr_db, coherence_T };

std::string_view to_string(SweepAxis axis);

enum class OutputFormat { csv, json };

struct ExperimentConfig {
  int T = 10;
  double rho = 0.95;
  double snr_db = 30.0;
  double var_h = 1.0;
  double var_g = 1.0;

  std::optional<SweepAxis> axis;
  std::vector<double> axis_values;

  std::vector<BoundLabel> curves{BoundLabel::training, BoundLabel::upper, BoundLabel::lower_pd,
                                 BoundLabel::lower_nodisc};
  OptimizeSpec optimizer;
  EvalConfig eval;
  RncModel rnc = RncModel::training_based();

  std::string output_path;
  OutputFormat format = OutputFormat::csv;
};

/// dB to linear power, applied once at the CLI boundary.
double db_to_linear(double db);

/// Parses and validates a JSON config. Unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Checks cross-field invariants; throws ConfigError.
void validate(const ExperimentConfig& config);

/// "fig4": SNR 0..50 dB step 5, T = 10, rho = 0.95. "fig5": T in {2,5,10,20,50,100},
/// rho = 0.99 at `fig5_snr_db` (30 or 35). All four curves.
ExperimentConfig preset(const std::string& name, double fig5_snr_db = 30.0);

/// "training" | "genie" | "const:VALUE".
RncModel parse_rnc(const std::string& text);
std::string rnc_to_string(const RncModel& rnc);

Eps1Rule parse_eps1_rule(const std::string& text);

/// Canonical JSON form. Excludes the worker count, which never affects results.
nlohmann::json to_json(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Provenance block embedded in every output.
nlohmann::json manifest(const ExperimentConfig& config, const std::string& command);

SystemParams system_at(const ExperimentConfig& config, double axis_value);

nlohmann::json to_json(const RateBreakdown& rate);
nlohmann::json to_json(const SchemeParams& scheme);

/// One axis point. Values are rounded to 9 significant digits on construction
/// so the CSV text round-trips exactly. NaN marks a missing value.
struct SweepRow {
  double axis_value = 0.0;
  std::vector<std::pair<std::string, double>> columns;
  std::string status = "ok";
};

inline constexpr const char* kMissing = "NA";

double round_significant(double value);
std::string format_number(double value);

struct SweepResult {
  std::vector<SweepRow> rows;
  nlohmann::json summary;
  bool all_ok = true;
};

/// Column names for the configured curves, in CSV order (after the axis column).
std::vector<std::string> sweep_columns(const ExperimentConfig& config);

nlohmann::json cmd_rates(const ExperimentConfig& config);
SweepResult cmd_sweep(const ExperimentConfig& config);
nlohmann::json cmd_optimize(const ExperimentConfig& config, OptimizeTarget target);

std::string rows_to_csv(const ExperimentConfig& config, const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_csv(const std::string& text);
nlohmann::json rows_to_json(const std::vector<SweepRow>& rows);

enum class FaultInjection { none, q1_sign_flip };

struct CheckResult {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  [[nodiscard]] bool passed() const;
};

ValidationReport cmd_validate(const ExperimentConfig& config, FaultInjection fault = FaultInjection::none);
nlohmann::json to_json(const ValidationReport& report);

/// Exit codes of the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

}  // namespace keyrate
