#include "keyrate/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "keyrate/gaussian_info.hpp"
#include "keyrate/kernels.hpp"
#include "keyrate/parallel.hpp"

#ifndef KEYRATE_VERSION
#define KEYRATE_VERSION "0.0.0"
#endif

namespace keyrate {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so the rest can be
// reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  [[nodiscard]] std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      const auto raw = v->get<std::int64_t>();
      if (raw < 0 && std::is_unsigned_v<Int>) throw ConfigError(field(key), "must be non-negative");
      out = static_cast<Int>(raw);
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

BoundLabel parse_label(const std::string& text, const std::string& path) {
  for (auto label : {BoundLabel::training, BoundLabel::upper, BoundLabel::lower_pd, BoundLabel::lower_nodisc}) {
    if (text == to_string(label)) return label;
  }
  throw ConfigError(path, "unknown curve '" + text + "' (expected training, upper, lower_pd or lower_nodisc)");
}

EvalMethod parse_method(const std::string& text, const std::string& path) {
  if (text == "mc") return EvalMethod::mc;
  if (text == "quadrature") return EvalMethod::quadrature;
  throw ConfigError(path, "expected 'mc' or 'quadrature'");
}

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct PointResult {
  std::map<BoundLabel, RateBreakdown> rates;
  std::optional<OptimizeReport> pd;
  std::optional<OptimizeReport> nodisc;
};

bool wants(const ExperimentConfig& config, BoundLabel label) {
  return std::find(config.curves.begin(), config.curves.end(), label) != config.curves.end();
}

void check_finite(const RateBreakdown& r) {
  if (!std::isfinite(r.total) || !std::isfinite(r.std_error)) {
    throw NumericError(std::string(to_string(r.label)) + " evaluated to a non-finite value");
  }
}

PointResult evaluate_point(const ExperimentConfig& config, const SystemParams& sys, const EvalConfig& eval) {
  PointResult out;
  if (wants(config, BoundLabel::training)) out.rates[BoundLabel::training] = rate_training(sys.T(), sys.channel().rho());
  if (wants(config, BoundLabel::upper)) out.rates[BoundLabel::upper] = rate_upper(sys, eval);
  if (wants(config, BoundLabel::lower_pd)) {
    OptimizeSpec spec = config.optimizer;
    spec.target = OptimizeTarget::lower_pd;
    out.pd = optimize_scheme(sys, spec, config.rnc, eval);
    out.rates[BoundLabel::lower_pd] = out.pd->best_rate;
  }
  if (wants(config, BoundLabel::lower_nodisc)) {
    OptimizeSpec spec = config.optimizer;
    spec.target = OptimizeTarget::lower_nodisc;
    out.nodisc = optimize_scheme(sys, spec, config.rnc, eval);
    out.rates[BoundLabel::lower_nodisc] = out.nodisc->best_rate;
  }
  for (const auto& [label, r] : out.rates) check_finite(r);
  return out;
}

json point_json(const ExperimentConfig& config, const SystemParams& sys) {
  return {{"T", sys.T()},
          {"snr_db", 10.0 * std::log10(sys.P())},
          {"P", sys.P()},
          {"rho", sys.channel().rho()},
          {"var_h", config.var_h},
          {"var_g", config.var_g}};
}

json report_json(const OptimizeReport& r) {
  json trace = json::array();
  for (const auto& e : r.trace) {
    trace.push_back({{"p1", e.scheme.p1}, {"p2", e.scheme.p2}, {"eps1", e.scheme.eps1}, {"eps2", e.scheme.eps2},
                     {"total", number_or_null(e.total)}});
  }
  return {{"best", to_json(r.best)},
          {"best_rate", to_json(r.best_rate)},
          {"warm_start", to_json(r.warm_start)},
          {"warm_start_rate", r.warm_start_rate},
          {"warm_start_is_high_snr_schedule", r.warm_start_is_high_snr_schedule},
          {"pass_best", r.pass_best},
          {"evaluations", r.trace.size()},
          {"trace", trace}};
}

double axis_or_default(const ExperimentConfig& config) {
  if (config.axis && config.axis_values.size() == 1) return config.axis_values.front();
  return *config.axis == SweepAxis::snr_db ? config.snr_db : config.T;
}

std::string sanitize(std::string text) {
  for (auto& c : text) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  }
  return text;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::string_view to_string(SweepAxis axis) { return axis == SweepAxis::snr_db ? "snr_db" : "T"; }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

RncModel parse_rnc(const std::string& text) {
  if (text == "training") return RncModel::training_based();
  if (text == "genie") return RncModel::coherent_genie();
  if (text.rfind("const:", 0) == 0) {
    const std::string value = text.substr(6);
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size()) {
      throw ConfigError("rnc", "bad constant '" + value + "'");
    }
    try {
      return RncModel::constant(v);
    } catch (const InvalidArgument& e) {
      throw ConfigError("rnc", e.what());
    }
  }
  throw ConfigError("rnc", "expected training, genie or const:VALUE");
}

std::string rnc_to_string(const RncModel& rnc) {
  if (rnc.kind() != RncModel::Kind::constant_override) return std::string(to_string(rnc.kind()));
  return "const:" + format_number(rnc.constant_value());
}

Eps1Rule parse_eps1_rule(const std::string& text) {
  if (text == "Tminus1") return Eps1Rule::Tminus1;
  if (text == "T") return Eps1Rule::T;
  throw ConfigError("optimizer.eps1_rule", "expected Tminus1 or T");
}

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  ObjectReader root(j, "");

  if (const auto* sys = root.find("system")) {
    ObjectReader r(*sys, "system");
    r.integer("T", c.T);
    r.number("rho", c.rho);
    r.number("snr_db", c.snr_db);
    r.number("var_h", c.var_h);
    r.number("var_g", c.var_g);
    r.finish();
  }

  if (const auto* sweep = root.find("sweep")) {
    ObjectReader r(*sweep, "sweep");
    std::string axis = "snr_db";
    r.string("axis", axis);
    if (axis == "snr_db") {
      c.axis = SweepAxis::snr_db;
    } else if (axis == "T") {
      c.axis = SweepAxis::coherence_T;
    } else {
      throw ConfigError("sweep.axis", "expected snr_db or T");
    }
    const auto* values = r.find("values");
    if (!values || !values->is_array()) throw ConfigError("sweep.values", "expected an array of numbers");
    for (std::size_t i = 0; i < values->size(); ++i) {
      const auto& v = (*values)[i];
      const std::string path = "sweep.values[" + std::to_string(i) + "]";
      if (!v.is_number()) throw ConfigError(path, "expected a number");
      c.axis_values.push_back(v.get<double>());
    }
    r.finish();
  }

  if (const auto* curves = root.find("curves")) {
    if (!curves->is_array()) throw ConfigError("curves", "expected an array of curve names");
    c.curves.clear();
    for (std::size_t i = 0; i < curves->size(); ++i) {
      const std::string path = "curves[" + std::to_string(i) + "]";
      if (!(*curves)[i].is_string()) throw ConfigError(path, "expected a string");
      c.curves.push_back(parse_label((*curves)[i].get<std::string>(), path));
    }
  }

  if (const auto* opt = root.find("optimizer")) {
    ObjectReader r(*opt, "optimizer");
    r.number("tau_min", c.optimizer.tau_min);
    r.number("tau_max", c.optimizer.tau_max);
    r.integer("tau_grid", c.optimizer.tau_grid);
    r.number("eps_min", c.optimizer.eps_min);
    r.number("eps_max", c.optimizer.eps_max);
    r.integer("eps_grid", c.optimizer.eps_grid);
    r.integer("passes", c.optimizer.passes);
    r.number("tolerance", c.optimizer.tolerance);
    r.integer("final_sample_factor", c.optimizer.final_sample_factor);
    std::string rule;
    r.string("eps1_rule", rule);
    if (!rule.empty()) c.optimizer.nodisc.eps1_rule = parse_eps1_rule(rule);
    r.finish();
  }

  if (const auto* eval = root.find("eval")) {
    ObjectReader r(*eval, "eval");
    r.integer("n_samples", c.eval.n_samples);
    r.integer("seed", c.eval.seed);
    r.integer("quadrature_order", c.eval.quadrature_order);
    r.boolean("antithetic", c.eval.antithetic);
    r.integer("workers", c.eval.workers);
    std::string method;
    r.string("method", method);
    if (!method.empty()) c.eval.method = parse_method(method, "eval.method");
    r.integer("power_grid", c.eval.power_grid);
    r.integer("power_quadrature_order", c.eval.power_quadrature_order);
    r.number("power_budget_tol", c.eval.power_budget_tol);
    r.integer("power_max_bisections", c.eval.power_max_bisections);
    r.number("power_gap_tol", c.eval.power_gap_tol);
    r.finish();
  }

  std::string rnc;
  root.string("rnc", rnc);
  if (!rnc.empty()) c.rnc = parse_rnc(rnc);

  if (const auto* out = root.find("output")) {
    ObjectReader r(*out, "output");
    r.string("path", c.output_path);
    std::string format;
    r.string("format", format);
    if (format == "json") {
      c.format = OutputFormat::json;
    } else if (format.empty() || format == "csv") {
      c.format = OutputFormat::csv;
    } else {
      throw ConfigError("output.format", "expected csv or json");
    }
    r.finish();
  }

  root.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

void validate(const ExperimentConfig& c) {
  require(c.T >= 2, "system.T", "must be at least 2");
  require(c.rho >= 0.0 && c.rho < 1.0, "system.rho", "must lie in [0, 1)");
  require(c.var_h > 0.0, "system.var_h", "must be positive");
  require(c.var_g > 0.0, "system.var_g", "must be positive");
  require(std::isfinite(c.snr_db), "system.snr_db", "must be finite");
  require(!c.curves.empty(), "curves", "at least one curve is required");
  for (std::size_t i = 0; i < c.curves.size(); ++i) {
    for (std::size_t j = i + 1; j < c.curves.size(); ++j) {
      require(c.curves[i] != c.curves[j], "curves[" + std::to_string(j) + "]", "duplicate curve");
    }
  }
  if (c.axis) {
    require(!c.axis_values.empty(), "sweep.values", "at least one axis value is required");
    for (std::size_t i = 0; i < c.axis_values.size(); ++i) {
      const std::string path = "sweep.values[" + std::to_string(i) + "]";
      const double v = c.axis_values[i];
      require(std::isfinite(v), path, "must be finite");
      if (i > 0) require(v > c.axis_values[i - 1], path, "axis values must be strictly increasing");
      if (*c.axis == SweepAxis::coherence_T) require(v >= 2.0 && v == std::floor(v), path, "T must be an integer >= 2");
    }
  }
  if (c.eval.method == EvalMethod::mc) {
    require(c.eval.n_samples >= kMinMcSamples, "eval.n_samples", "must be at least " + std::to_string(kMinMcSamples));
  }
  require(c.eval.quadrature_order >= 8 && c.eval.quadrature_order <= 252, "eval.quadrature_order",
          "must lie in [8, 252]");
  require(c.eval.power_grid >= 1, "eval.power_grid", "must be at least 1");
  require(c.eval.power_quadrature_order >= 8 && c.eval.power_quadrature_order <= 256, "eval.power_quadrature_order",
          "must lie in [8, 256]");
  require(c.eval.power_budget_tol > 0.0, "eval.power_budget_tol", "must be positive");
  require(c.eval.power_max_bisections >= 1, "eval.power_max_bisections", "must be at least 1");
  require(c.eval.power_gap_tol > 0.0, "eval.power_gap_tol", "must be positive");
  try {
    validate(c.optimizer);
  } catch (const InvalidArgument& e) {
    throw ConfigError("optimizer", e.what());
  }
}

ExperimentConfig preset(const std::string& name, double fig5_snr_db) {
  ExperimentConfig c;
  if (name == "fig4") {
    c.T = 10;
    c.rho = 0.95;
    c.axis = SweepAxis::snr_db;
    for (int db = 0; db <= 50; db += 5) c.axis_values.push_back(db);
  } else if (name == "fig5") {
    if (fig5_snr_db != 30.0 && fig5_snr_db != 35.0) throw ConfigError("preset", "fig5 SNR must be 30 or 35 dB");
    c.rho = 0.99;
    c.snr_db = fig5_snr_db;
    c.axis = SweepAxis::coherence_T;
    c.axis_values = {2, 5, 10, 20, 50, 100};
  } else {
    throw ConfigError("preset", "unknown preset '" + name + "' (expected fig4 or fig5)");
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json curves = json::array();
  for (auto label : c.curves) curves.push_back(to_string(label));
  json j = {
      {"system", {{"T", c.T}, {"rho", c.rho}, {"snr_db", c.snr_db}, {"var_h", c.var_h}, {"var_g", c.var_g}}},
      {"curves", curves},
      {"optimizer",
       {{"tau_min", c.optimizer.tau_min},
        {"tau_max", c.optimizer.tau_max},
        {"tau_grid", c.optimizer.tau_grid},
        {"eps_min", c.optimizer.eps_min},
        {"eps_max", c.optimizer.eps_max},
        {"eps_grid", c.optimizer.eps_grid},
        {"passes", c.optimizer.passes},
        {"tolerance", c.optimizer.tolerance},
        {"final_sample_factor", c.optimizer.final_sample_factor},
        {"eps1_rule", to_string(c.optimizer.nodisc.eps1_rule)}}},
      {"eval",
       {{"n_samples", c.eval.n_samples},
        {"seed", c.eval.seed},
        {"quadrature_order", c.eval.quadrature_order},
        {"antithetic", c.eval.antithetic},
        {"method", to_string(c.eval.method)},
        {"power_grid", c.eval.power_grid},
        {"power_quadrature_order", c.eval.power_quadrature_order},
        {"power_budget_tol", c.eval.power_budget_tol},
        {"power_max_bisections", c.eval.power_max_bisections},
        {"power_gap_tol", c.eval.power_gap_tol}}},
      {"rnc", rnc_to_string(c.rnc)},
  };
  if (c.axis) j["sweep"] = {{"axis", to_string(*c.axis)}, {"values", c.axis_values}};
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(config).dump())));
  return buf;
}

json manifest(const ExperimentConfig& config, const std::string& command) {
  return {{"tool", "keyrate"},
          {"version", KEYRATE_VERSION},
          {"command", command},
          {"config_hash", config_hash(config)},
          {"config", to_json(config)},
          {"seed", config.eval.seed},
          {"n_samples", config.eval.n_samples},
          {"method", to_string(config.eval.method)},
          {"rng", to_string(RngAlgorithm::philox4x32_10)},
          {"kernel", to_string(simd::active_kernels().isa)},
          {"compiler", __VERSION__},
          {"units", "bits per channel use (log base 2)"},
          {"snr_convention", "SNR in dB is 10 log10(P) with unit noise variance"},
          {"eps_schedule", "warm start eps1 = eps2 = 1/log2(1+P) (implementation choice)"}};
}

SystemParams system_at(const ExperimentConfig& config, double axis_value) {
  int T = config.T;
  double snr = config.snr_db;
  if (config.axis == SweepAxis::coherence_T) {
    T = static_cast<int>(axis_value);
  } else if (config.axis == SweepAxis::snr_db) {
    snr = axis_value;
  }
  return SystemParams(T, db_to_linear(snr), ChannelParams(config.rho, config.var_h, config.var_g));
}

json to_json(const SchemeParams& s) {
  return {{"p1", s.p1}, {"p2", s.p2}, {"eps1", s.eps1}, {"eps2", s.eps2}, {"alpha", s.alpha()}};
}

json to_json(const RateBreakdown& r) {
  json j = {{"label", to_string(r.label)},
            {"total", r.total},
            {"reciprocity_term", r.reciprocity_term},
            {"forward_term", r.forward_term},
            {"reverse_term", r.reverse_term},
            {"penalty_terms", r.penalty_terms},
            {"std_error", r.std_error},
            {"forward_clamped", r.forward_clamped},
            {"reverse_clamped", r.reverse_clamped},
            {"forward_unclamped", r.forward_unclamped},
            {"reverse_unclamped", r.reverse_unclamped},
            {"overhead_factor", r.overhead_factor},
            {"infeasible_quantization", r.infeasible_quantization},
            {"diagnostics", r.diagnostics}};
  if (r.label == BoundLabel::upper) {
    j["power_dual_gap"] = r.power_dual_gap;
    j["power_converged"] = r.power_converged;
  }
  if (r.quantization) {
    j["quantization"] = {{"q1", r.quantization->q1}, {"q2", r.quantization->q2}, {"sigma_sq", r.quantization->sigma_sq}};
  }
  return j;
}

double round_significant(double value) {
  if (!std::isfinite(value)) return value;
  return std::strtod(format_number(value).c_str(), nullptr);
}

std::string format_number(double value) {
  if (!std::isfinite(value)) return kMissing;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

std::vector<std::string> sweep_columns(const ExperimentConfig& config) {
  std::vector<std::string> cols;
  for (auto label : config.curves) {
    const std::string name(to_string(label));
    cols.push_back(name);
    cols.push_back(name + "_se");
    switch (label) {
      case BoundLabel::training:
        break;
      case BoundLabel::upper:
        cols.push_back(name + "_dual_gap");
        break;
      case BoundLabel::lower_pd:
        cols.push_back(name + "_P1");
        cols.push_back(name + "_P2");
        break;
      case BoundLabel::lower_nodisc:
        for (const char* s : {"_P1", "_P2", "_eps1", "_eps2", "_Q1", "_Q2"}) cols.push_back(name + s);
        break;
    }
  }
  return cols;
}

json cmd_rates(const ExperimentConfig& config) {
  validate(config);
  if (config.axis && config.axis_values.size() != 1) {
    throw ConfigError("sweep.values", "rates needs a single point; use sweep for several");
  }
  const auto sys = system_at(config, config.axis ? axis_or_default(config) : 0.0);
  const auto result = evaluate_point(config, sys, config.eval);
  json bounds = json::object();
  json totals = json::object();
  for (const auto& [label, r] : result.rates) {
    bounds[std::string(to_string(label))] = to_json(r);
    totals[std::string(to_string(label))] = r.total;
  }
  if (result.pd) bounds["lower_pd"]["optimizer"] = report_json(*result.pd);
  if (result.nodisc) bounds["lower_nodisc"]["optimizer"] = report_json(*result.nodisc);

  const auto gamma = gamma_constant(sys.channel(), config.eval);
  json derived = {{"gamma", gamma.value}, {"gamma_std_error", gamma.std_error}, {"gamma_over_T", gamma.value / sys.T()}};
  if (result.rates.contains(BoundLabel::upper) && result.rates.contains(BoundLabel::lower_pd)) {
    const double gap = result.rates.at(BoundLabel::upper).total - result.rates.at(BoundLabel::lower_pd).total;
    derived["upper_minus_lower_pd"] = gap;
    derived["gap_over_gamma_over_T"] = gap / (gamma.value / sys.T());
  }
  if (result.rates.contains(BoundLabel::lower_pd) && result.rates.contains(BoundLabel::training)) {
    derived["lower_pd_over_training"] =
        result.rates.at(BoundLabel::lower_pd).total / result.rates.at(BoundLabel::training).total;
  }
  return {{"manifest", manifest(config, "rates")},
          {"point", point_json(config, sys)},
          {"totals", totals},
          {"bounds", bounds},
          {"derived", derived},
          {"rnc", {{"model", rnc_to_string(config.rnc)}, {"value", rate_nc(config.rnc, sys, config.eval)}}}};
}

SweepResult cmd_sweep(const ExperimentConfig& config) {
  validate(config);
  if (!config.axis) throw ConfigError("sweep", "sweep needs an axis and values");
  const auto columns = sweep_columns(config);
  SweepResult out;
  out.rows.resize(config.axis_values.size());

  EvalConfig inner = config.eval;
  if (out.rows.size() > 1) inner.workers = 1;
  parallel_for(out.rows.size(), config.eval.workers, [&](std::size_t i) {
    SweepRow& row = out.rows[i];
    row.axis_value = round_significant(config.axis_values[i]);
    std::map<std::string, double> values;
    try {
      const auto sys = system_at(config, config.axis_values[i]);
      const auto point = evaluate_point(config, sys, inner);
      for (const auto& [label, r] : point.rates) {
        const std::string name(to_string(label));
        values[name] = r.total;
        values[name + "_se"] = r.std_error;
        if (label == BoundLabel::upper) values[name + "_dual_gap"] = r.power_dual_gap;
        if (label == BoundLabel::lower_pd || label == BoundLabel::lower_nodisc) {
          const auto& best = label == BoundLabel::lower_pd ? point.pd->best : point.nodisc->best;
          values[name + "_P1"] = best.p1;
          values[name + "_P2"] = best.p2;
          if (label == BoundLabel::lower_nodisc) {
            values[name + "_eps1"] = best.eps1;
            values[name + "_eps2"] = best.eps2;
            if (r.quantization) {
              values[name + "_Q1"] = r.quantization->q1;
              values[name + "_Q2"] = r.quantization->q2;
            }
          }
        }
      }
    } catch (const std::exception& e) {
      values.clear();
      row.status = sanitize(std::string("error: ") + e.what());
    }
    for (const auto& col : columns) {
      const auto it = values.find(col);
      row.columns.emplace_back(col, it == values.end() ? std::nan("") : round_significant(it->second));
    }
  });

  json violations = json::array();
  json failed = json::array();
  for (const auto& row : out.rows) {
    if (row.status != "ok") {
      out.all_ok = false;
      failed.push_back({{"axis_value", row.axis_value}, {"status", row.status}});
      continue;
    }
    std::map<std::string, double> v(row.columns.begin(), row.columns.end());
    const auto has = [&](const char* k) { return v.contains(k) && std::isfinite(v[k]); };
    if (has("lower_nodisc") && has("lower_pd")) {
      const double tol = 3.0 * std::hypot(v["lower_nodisc_se"], v["lower_pd_se"]);
      if (v["lower_nodisc"] > v["lower_pd"] + tol) {
        violations.push_back({{"axis_value", row.axis_value}, {"pair", "lower_nodisc <= lower_pd"}});
      }
    }
    if (has("lower_pd") && has("upper")) {
      const double tol = 3.0 * std::hypot(v["lower_pd_se"], v["upper_se"]);
      if (v["lower_pd"] > v["upper"] + tol) {
        violations.push_back({{"axis_value", row.axis_value}, {"pair", "lower_pd <= upper"}});
      }
    }
  }
  out.summary = {{"manifest", manifest(config, "sweep")},
                 {"axis", to_string(*config.axis)},
                 {"columns", columns},
                 {"row_count", out.rows.size()},
                 {"failed_rows", failed},
                 {"ordering_violations", violations},
                 {"csv_format", "decimal, 9 significant digits, NA for missing values"}};
  return out;
}

json cmd_optimize(const ExperimentConfig& config, OptimizeTarget target) {
  validate(config);
  if (config.axis && config.axis_values.size() != 1) {
    throw ConfigError("sweep.values", "optimize needs a single point");
  }
  const auto sys = system_at(config, config.axis ? axis_or_default(config) : 0.0);
  OptimizeSpec spec = config.optimizer;
  spec.target = target;
  const auto report = optimize_scheme(sys, spec, config.rnc, config.eval);
  check_finite(report.best_rate);
  return {{"manifest", manifest(config, "optimize")},
          {"point", point_json(config, sys)},
          {"target", to_string(target)},
          {"report", report_json(report)},
          {"training", rate_training(sys.T(), sys.channel().rho()).total}};
}

std::string rows_to_csv(const ExperimentConfig& config, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << (config.axis ? std::string(to_string(*config.axis)) : std::string("axis"));
  for (const auto& col : sweep_columns(config)) out << ',' << col;
  out << ",status\n";
  for (const auto& row : rows) {
    out << format_number(row.axis_value);
    for (const auto& [name, value] : row.columns) out << ',' << format_number(value);
    out << ',' << row.status << '\n';
  }
  return out.str();
}

std::vector<SweepRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("CSV has no header");
  const auto header = split(line, ',');
  if (header.size() < 2 || header.back() != "status") throw InvalidArgument("CSV header must end with status");
  std::vector<SweepRow> rows;
  const auto parse = [](const std::string& cell) {
    if (cell == kMissing) return std::nan("");
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) throw InvalidArgument("bad CSV number '" + cell + "'");
    return v;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw InvalidArgument("CSV row has the wrong number of cells");
    SweepRow row;
    row.axis_value = parse(cells.front());
    for (std::size_t i = 1; i + 1 < cells.size(); ++i) row.columns.emplace_back(header[i], parse(cells[i]));
    row.status = cells.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

json rows_to_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json r = {{"axis_value", row.axis_value}, {"status", row.status}};
    for (const auto& [name, value] : row.columns) r[name] = number_or_null(value);
    out.push_back(r);
  }
  return out;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

CheckResult check_closed_forms(std::uint64_t seed, FaultInjection fault) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> lp(std::log(0.1), std::log(1e4)), r(0.0, 0.999),
      lq(std::log(1e-4), std::log(1e2));
  const double sign = fault == FaultInjection::q1_sign_flip ? -1.0 : 1.0;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double p1 = std::exp(lp(gen)), rho = r(gen), q1 = std::exp(lq(gen));
    const double a = lmmse_coefficient(p1);
    const auto model = build_quantized_chain(rho, p1, q1);
    const double diffs[] = {
        gaussian_mi(model, {kU_AB}, {kHhat_AB}).bits - quantized_own_mi(a, sign * q1),
        gaussian_mi(model, {kU_AB}, {kHhat_BA}).bits - quantized_cross_mi(a, rho, sign * q1),
        gaussian_mi(model, {kU_AB}, {kU_BA}).bits - quantized_pair_mi(a, rho, sign * q1),
    };
    for (double d : diffs) worst = std::max(worst, std::isfinite(d) ? std::abs(d) : INFINITY);
  }
  return {"closed_form_vs_covariance", worst <= 1e-10, worst, 0.0, 1e-10,
          "max |closed form - determinant oracle| over 200 random (P1, rho, Q1), bits"};
}

CheckResult check_reduction_without_quantization(std::uint64_t seed) {
  std::mt19937_64 gen(seed + 1);
  std::uniform_int_distribution<int> Td(2, 100);
  std::uniform_real_distribution<double> lp(std::log(0.1), std::log(1e5)), r(0.0, 0.999), tau(0.0, 1.0);
  EvalConfig cfg;
  cfg.method = EvalMethod::quadrature;
  const ExpectationEngine engine(cfg);
  NodiscOptions forced;
  forced.q1_override = 0.0;
  forced.q2_override = 0.0;
  forced.apply_overhead = false;
  const auto rnc = RncModel::constant(1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SystemParams sys(Td(gen), std::exp(lp(gen)), ChannelParams(r(gen)));
    const auto scheme = SchemeParams::from_split(sys, tau(gen), 0.1, 0.1);
    const double pd = rate_lower_pd(sys, scheme, engine).total;
    const double nd = rate_lower_nodisc(sys, scheme, rnc, engine, forced).total;
    worst = std::max(worst, std::abs(pd - nd));
  }
  return {"reduction_without_quantization", worst <= 1e-12, worst, 0.0, 1e-12,
          "max |no-discussion(Q=0, no overhead) - public discussion| over 100 random sets, bits"};
}

CheckResult check_mc_vs_quadrature(const EvalConfig& eval) {
  EvalConfig cfg = eval;
  cfg.method = EvalMethod::mc;
  double worst = 0.0;
  int count = 0;
  for (double a : {0.1, 0.5, 1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e4, 1e5}) {
    for (double b : {0.0, 0.3, 1.0, 10.0, 1e3}) {
      const auto f = Functional::ratio(a, b);
      const auto mc = eval_mc(f, cfg, link_stream(cfg.seed, Link::forward));
      const auto q = eval_quadrature(f, eval.quadrature_order);
      worst = std::max(worst, std::abs(mc.value - q.value) / mc.std_error);
      ++count;
    }
  }
  return {"mc_vs_quadrature", worst < 4.0, worst, 0.0, 4.0,
          "max |MC - quadrature| / MC std error over " + std::to_string(count) + " (a, b) points"};
}

CheckResult check_gamma(const EvalConfig& eval) {
  EvalConfig q = eval;
  q.method = EvalMethod::quadrature;
  const double expected = 2.0 / std::numbers::ln2;
  const auto quad = gamma_constant(ChannelParams(0.5), q);
  EvalConfig m = eval;
  m.method = EvalMethod::mc;
  const auto mc = gamma_constant(ChannelParams(0.5), m);
  const double z = std::abs(mc.value - expected) / mc.std_error;
  const bool ok = std::abs(quad.value - expected) <= 1e-5 && z < 4.0;
  return {"gamma_constant", ok, mc.value, expected, 4.0 * mc.std_error,
          "quadrature " + format_number(quad.value) + "; MC within 4 std errors required"};
}

CheckResult check_ordering(const ExperimentConfig& config) {
  double worst = -INFINITY;
  std::string where;
  for (double snr : {0.0, 20.0, 40.0}) {
    for (int T : {2, 10}) {
      for (double rho : {0.5, 0.99}) {
        const SystemParams sys(T, db_to_linear(snr), ChannelParams(rho));
        OptimizeSpec spec = config.optimizer;
        spec.target = OptimizeTarget::lower_pd;
        const auto pd = optimize_scheme(sys, spec, config.rnc, config.eval).best_rate;
        spec.target = OptimizeTarget::lower_nodisc;
        const auto nd = optimize_scheme(sys, spec, config.rnc, config.eval).best_rate;
        const auto up = rate_upper(sys, config.eval);
        const double s1 = std::max(std::hypot(nd.std_error, pd.std_error), 1e-300);
        const double s2 = std::max(pd.std_error, 1e-300);
        for (double z : {(nd.total - pd.total) / s1, (pd.total - up.total) / s2}) {
          if (z > worst) {
            worst = z;
            where = "SNR " + format_number(snr) + " dB, T " + std::to_string(T) + ", rho " + format_number(rho);
          }
        }
      }
    }
  }
  return {"bound_ordering", worst <= 3.0, worst, 0.0, 3.0,
          "max excess of lower_nodisc over lower_pd or lower_pd over upper, in std errors (at " + where + ")"};
}

CheckResult check_high_snr_gap(const ExperimentConfig& config) {
  const SystemParams sys(10, 1e6, ChannelParams(0.95));
  OptimizeSpec spec = config.optimizer;
  spec.target = OptimizeTarget::lower_pd;
  const auto pd = optimize_scheme(sys, spec, config.rnc, config.eval).best_rate;
  const auto up = rate_upper(sys, config.eval);
  const double target = 2.0 / std::numbers::ln2 / sys.T();
  const double gap = up.total - pd.total;
  return {"high_snr_gap", std::abs(gap - target) <= 0.05 * target, gap, target, 0.05 * target,
          "upper - optimized lower_pd at 60 dB, T = 10, rho = 0.95 vs gamma/T, bits"};
}

}  // namespace

ValidationReport cmd_validate(const ExperimentConfig& config, FaultInjection fault) {
  validate(config);
  ValidationReport report;
  report.checks.push_back(check_closed_forms(config.eval.seed, fault));
  report.checks.push_back(check_reduction_without_quantization(config.eval.seed));
  report.checks.push_back(check_mc_vs_quadrature(config.eval));
  report.checks.push_back(check_gamma(config.eval));
  report.checks.push_back(check_ordering(config));
  report.checks.push_back(check_high_snr_gap(config));
  return report;
}

json to_json(const ValidationReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"observed", number_or_null(c.observed)},
                      {"expected", c.expected},
                      {"tolerance", c.tolerance},
                      {"detail", c.detail}});
  }
  return {{"passed", report.passed()}, {"checks", checks}};
}

}  // namespace keyrate
