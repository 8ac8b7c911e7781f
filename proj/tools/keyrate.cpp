#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "keyrate/experiment.hpp"

namespace {

using keyrate::ConfigError;
using keyrate::ExperimentConfig;

struct Options {
  std::string config_path;
  std::string preset;
  double fig5_snr_db = 30.0;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<unsigned> workers;
  std::string out;
  std::string format;
  std::string rnc;
  std::string eps1_rule;
  std::string curves;
  std::string target = "lower_pd";
  std::string fault = "none";
};

std::uint64_t parse_env_u64(const char* name) {
  const std::string text = std::getenv(name);
  char* end = nullptr;
  errno = 0;
  const auto v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || text.front() == '-' || errno != 0 || end != text.c_str() + text.size()) {
    throw ConfigError(std::string("env.") + name, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

ExperimentConfig build_config(const Options& o) {
  if (!o.config_path.empty() && !o.preset.empty()) throw ConfigError("preset", "use either --config or --preset");
  ExperimentConfig config;
  if (!o.config_path.empty()) {
    config = keyrate::load_config(o.config_path);
  } else if (!o.preset.empty()) {
    config = keyrate::preset(o.preset, o.fig5_snr_db);
  }

  if (std::getenv("KEYRATE_SEED")) config.eval.seed = parse_env_u64("KEYRATE_SEED");
  if (std::getenv("KEYRATE_WORKERS")) config.eval.workers = static_cast<unsigned>(parse_env_u64("KEYRATE_WORKERS"));

  if (o.seed) config.eval.seed = *o.seed;
  if (o.samples) config.eval.n_samples = *o.samples;
  if (o.workers) config.eval.workers = *o.workers;
  if (!o.rnc.empty()) config.rnc = keyrate::parse_rnc(o.rnc);
  if (!o.eps1_rule.empty()) config.optimizer.nodisc.eps1_rule = keyrate::parse_eps1_rule(o.eps1_rule);
  if (!o.out.empty()) config.output_path = o.out;
  if (o.format == "json") {
    config.format = keyrate::OutputFormat::json;
  } else if (o.format == "csv") {
    config.format = keyrate::OutputFormat::csv;
  }
  if (!o.curves.empty()) {
    nlohmann::json list = nlohmann::json::array();
    std::stringstream in(o.curves);
    std::string item;
    while (std::getline(in, item, ',')) list.push_back(item);
    config.curves = keyrate::parse_config({{"curves", list}}).curves;
  }
  keyrate::validate(config);
  return config;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("output.path", "cannot write " + path);
  out << text;
}

int run_sweep(const ExperimentConfig& config) {
  const auto result = keyrate::cmd_sweep(config);
  if (config.format == keyrate::OutputFormat::json) {
    nlohmann::json doc = result.summary;
    doc["rows"] = keyrate::rows_to_json(result.rows);
    write_text(config.output_path, doc.dump(2) + "\n");
  } else {
    write_text(config.output_path, keyrate::rows_to_csv(config, result.rows));
    if (config.output_path.empty()) {
      std::cerr << result.summary.dump(2) << "\n";
    } else {
      std::ofstream(config.output_path + ".summary.json") << result.summary.dump(2) << "\n";
    }
  }
  return result.all_ok ? keyrate::kExitOk : keyrate::kExitNumeric;
}

int run_validate(const ExperimentConfig& config, const std::string& fault_name) {
  keyrate::FaultInjection fault = keyrate::FaultInjection::none;
  if (fault_name == "q1-sign-flip") fault = keyrate::FaultInjection::q1_sign_flip;
  const auto report = keyrate::cmd_validate(config, fault);
  for (const auto& c : report.checks) {
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << ": observed " << keyrate::format_number(c.observed)
              << ", expected " << keyrate::format_number(c.expected) << " +- " << keyrate::format_number(c.tolerance)
              << " (" << c.detail << ")\n";
  }
  write_text(config.output_path, keyrate::to_json(report).dump(2) + "\n");
  return report.passed() ? keyrate::kExitOk : keyrate::kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secret-key rate bounds for reciprocal fading channels"};
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "Built-in experiment")->check(CLI::IsMember({"fig4", "fig5"}));
    cmd->add_option("--fig5-snr", o.fig5_snr_db, "SNR in dB for the fig5 preset")->check(CLI::IsMember({30.0, 35.0}));
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--samples", o.samples, "Monte Carlo samples per expectation");
    cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
    cmd->add_option("--out", o.out, "Output file (default stdout)");
    cmd->add_option("--format", o.format, "Sweep output format")->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--rnc", o.rnc, "Non-coherent rate model: training, genie or const:VALUE");
    cmd->add_option("--eps1-rule", o.eps1_rule, "Pilot quantization budget")->check(CLI::IsMember({"Tminus1", "T"}));
    cmd->add_option("--curves", o.curves, "Comma-separated curves to evaluate");
  };

  auto* rates = app.add_subcommand("rates", "Evaluate the requested bounds at one point");
  auto* sweep = app.add_subcommand("sweep", "Evaluate the bounds along the configured axis");
  auto* optimize = app.add_subcommand("optimize", "Optimize a lower-bound scheme at one point");
  auto* validate = app.add_subcommand("validate", "Run the cross-check suite");
  for (auto* cmd : {rates, sweep, optimize, validate}) add_common(cmd);
  optimize->add_option("--target", o.target, "Bound to optimize")->check(CLI::IsMember({"lower_pd", "lower_nodisc"}));
  validate->add_option("--inject-fault", o.fault, "Test hook")->check(CLI::IsMember({"none", "q1-sign-flip"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? keyrate::kExitOk : keyrate::kExitConfig;
  }

  try {
    const auto config = build_config(o);
    if (rates->parsed()) {
      write_text(config.output_path, keyrate::cmd_rates(config).dump(2) + "\n");
      return keyrate::kExitOk;
    }
    if (sweep->parsed()) return run_sweep(config);
    if (optimize->parsed()) {
      const auto target =
          o.target == "lower_nodisc" ? keyrate::OptimizeTarget::lower_nodisc : keyrate::OptimizeTarget::lower_pd;
      write_text(config.output_path, keyrate::cmd_optimize(config, target).dump(2) + "\n");
      return keyrate::kExitOk;
    }
    return run_validate(config, o.fault);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return keyrate::kExitConfig;
  } catch (const keyrate::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return keyrate::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return keyrate::kExitNumeric;
  }
}
