#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "keyrate/experiment.hpp"
#include "keyrate/gaussian_info.hpp"
#include "keyrate/power_allocation.hpp"

namespace {

using namespace keyrate;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) { return format_number(v); }

double gamma_target() { return 2.0 / std::numbers::ln2; }

Outcome ac1_closed_forms() {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> lp(std::log(0.1), std::log(1e4)), r(0.0, 0.999),
      lq(std::log(1e-4), std::log(1e2));
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double p1 = std::exp(lp(gen)), rho = r(gen), q1 = std::exp(lq(gen));
    const double a = lmmse_coefficient(p1);
    const auto model = build_quantized_chain(rho, p1, q1);
    const double same = std::log2(1.0 + a / q1);
    const double cross = -std::log2(1.0 - a * a * rho * rho / (1.0 + q1 / a));
    const double pair = -std::log2(1.0 - a * a * rho * rho / std::pow(1.0 + q1 / a, 2));
    worst = std::max({worst, std::abs(gaussian_mi(model, {kU_AB}, {kHhat_AB}).bits - same),
                      std::abs(gaussian_mi(model, {kU_AB}, {kHhat_BA}).bits - cross),
                      std::abs(gaussian_mi(model, {kU_AB}, {kU_BA}).bits - pair)});
  }
  return {worst <= 1e-10, "max deviation " + fmt(worst) + " bits over 200 points (limit 1e-10)"};
}

Outcome ac2_reduction() {
  std::mt19937_64 gen(20240602);
  std::uniform_int_distribution<int> Td(2, 100);
  std::uniform_real_distribution<double> lp(std::log(0.1), std::log(1e5)), r(0.0, 0.999), tau(0.0, 1.0),
      le(std::log(1e-3), 0.0);
  EvalConfig cfg;
  cfg.n_samples = 20'000;
  const ExpectationEngine engine(cfg);
  NodiscOptions forced;
  forced.q1_override = 0.0;
  forced.q2_override = 0.0;
  forced.apply_overhead = false;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const SystemParams sys(Td(gen), std::exp(lp(gen)), ChannelParams(r(gen)));
    const auto scheme = SchemeParams::from_split(sys, tau(gen), std::exp(le(gen)), std::exp(le(gen)));
    const double pd = rate_lower_pd(sys, scheme, engine).total;
    const double nd = rate_lower_nodisc(sys, scheme, RncModel::constant(1.0), engine, forced).total;
    worst = std::max(worst, std::abs(pd - nd));
  }
  return {worst <= 1e-12, "max |difference| " + fmt(worst) + " bits over 100 sets (limit 1e-12)"};
}

Outcome ac3_gamma() {
  EvalConfig mc;
  mc.n_samples = 10'000'000;
  const auto m = gamma_constant(ChannelParams(0.95), mc);
  EvalConfig q;
  q.method = EvalMethod::quadrature;
  const auto quad = gamma_constant(ChannelParams(0.95), q);
  const double dm = std::abs(m.value - gamma_target());
  const double dq = std::abs(quad.value - gamma_target());
  return {dm <= 3e-3 && dq <= 1e-5, "MC " + fmt(m.value) + " (off " + fmt(dm) + ", limit 0.003), quadrature " +
                                        fmt(quad.value) + " (off " + fmt(dq) + ", limit 1e-5), target " +
                                        fmt(gamma_target())};
}

double proof_schedule_gap(double P, const EvalConfig& cfg) {
  const SystemParams sys(10, P, ChannelParams(0.95));
  SchemeParams s;
  s.p1 = P - std::sqrt(P);
  s.p2 = std::sqrt(P) / (sys.T() - 1);
  return rate_upper(sys, cfg).total - rate_lower_pd(sys, s, cfg).total;
}

double eps_schedule_gap(double P, const EvalConfig& cfg) {
  const SystemParams sys(10, P, ChannelParams(0.95));
  const auto s = high_snr_schedule(P, sys.T());
  return rate_upper(sys, cfg).total - rate_lower_nodisc(sys, s, RncModel::coherent_genie(), cfg).total;
}

Outcome gap_criterion(const std::function<double(double, const EvalConfig&)>& gap, double tolerance) {
  const double target = gamma_target() / 10.0;
  const double at = gap(1e6, EvalConfig{});
  std::ostringstream trend;
  EvalConfig q;
  q.method = EvalMethod::quadrature;
  for (double P : {1e6, 1e8, 1e10}) trend << " P=" << fmt(P) << ": " << fmt(gap(P, q) / target);
  return {std::abs(at - target) <= tolerance * target,
          "gap " + fmt(at) + " bits = " + fmt(at / target) + " x gamma/T (allowed " + fmt(1 - tolerance) + ".." +
              fmt(1 + tolerance) + "); quadrature trend in units of gamma/T:" + trend.str()};
}

Outcome ac6_ordering() {
  ExperimentConfig c;
  OptimizeSpec pd_spec = c.optimizer, nd_spec = c.optimizer;
  pd_spec.target = OptimizeTarget::lower_pd;
  nd_spec.target = OptimizeTarget::lower_nodisc;
  double worst = -INFINITY;
  std::string where;
  int points = 0;
  for (double snr : {0.0, 10.0, 20.0, 30.0, 40.0}) {
    for (int T : {2, 5, 10, 50}) {
      for (double rho : {0.5, 0.9, 0.99}) {
        const SystemParams sys(T, db_to_linear(snr), ChannelParams(rho));
        const auto pd = optimize_scheme(sys, pd_spec, c.rnc, c.eval).best_rate;
        const auto nd = optimize_scheme(sys, nd_spec, c.rnc, c.eval).best_rate;
        const auto up = rate_upper(sys, c.eval);
        const double s1 = std::hypot(nd.std_error, pd.std_error);
        const double s2 = std::hypot(pd.std_error, up.std_error);
        for (double z : {(nd.total - pd.total) / s1, (pd.total - up.total) / s2}) {
          if (z > worst) {
            worst = z;
            where = fmt(snr) + " dB, T=" + std::to_string(T) + ", rho=" + fmt(rho);
          }
        }
        ++points;
      }
    }
  }
  return {worst <= 3.0, std::to_string(points) + " points; largest excess " + fmt(worst) + " std errors at " + where +
                            " (limit 3)"};
}

Outcome ac7_fig4() {
  std::ifstream in(KEYRATE_FIXTURE_DIR "/rate_oracle.json");
  const auto fixture = nlohmann::json::parse(in);
  ExperimentConfig c = preset("fig4");
  OptimizeSpec spec = c.optimizer;
  spec.target = OptimizeTarget::lower_nodisc;
  double tmin = INFINITY, tmax = -INFINITY, worst_margin = INFINITY, worst_dev = 0.0;
  for (double snr : c.axis_values) {
    const auto sys = system_at(c, snr);
    const double training = rate_training(sys.T(), sys.channel().rho()).total;
    tmin = std::min(tmin, training);
    tmax = std::max(tmax, training);
    if (snr < 20.0) continue;
    const double nd = optimize_scheme(sys, spec, c.rnc, c.eval).best_rate.total;
    for (const auto& row : fixture["fig4"]) {
      if (row["snr_db"].get<double>() != snr) continue;
      const double frozen = row["lower_nodisc"].get<double>() - row["training"].get<double>();
      worst_dev = std::max(worst_dev, std::abs((nd - training) - frozen));
    }
    worst_margin = std::min(worst_margin, nd - training);
  }
  const bool ok = tmax - tmin < 1e-9 && worst_margin > 0.0 && worst_dev <= 2e-3;
  return {ok, "training spread " + fmt(tmax - tmin) + " (limit 1e-9); smallest lower_nodisc - training margin at >= 20 dB " +
                  fmt(worst_margin) + " bits; max deviation from frozen margins " + fmt(worst_dev) + " (limit 2e-3)"};
}

Outcome ac8_power() {
  bool ok = true;
  std::ostringstream d;
  for (double P : {1.0, 10.0, 100.0}) {
    const auto policy = optimize_power_allocation(P, 1.0, 1.0, EvalConfig{});
    ok = ok && policy.gains.size() == 512 && policy.dual_gap < 1e-3 && policy.value >= policy.constant_value;
    d << "P=" << fmt(P) << ": gap " << fmt(policy.dual_gap) << ", value " << fmt(policy.value) << " vs constant "
      << fmt(policy.constant_value) << "; ";
  }
  return {ok, d.str() + "512 cells"};
}

Outcome ac9_cross_validation() {
  EvalConfig cfg;
  double worst = 0.0;
  int n = 0;
  for (double a : {0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e4, 1e5}) {
    for (double b : {0.0, 0.5, 2.0, 20.0, 500.0}) {
      const auto f = Functional::ratio(a, b);
      const auto mc = eval_mc(f, cfg, link_stream(cfg.seed + n, Link::forward));
      const auto q = eval_quadrature(f, cfg.quadrature_order);
      worst = std::max(worst, std::abs(mc.value - q.value) / mc.std_error);
      ++n;
    }
  }
  return {worst < 4.0, std::to_string(n) + " points; max |MC - quadrature| = " + fmt(worst) + " std errors (limit 4)"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome ac10_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli binary given"};
  const auto dir = std::filesystem::temp_directory_path() / ("keyrate_ac10_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"rates", "rates --samples 20000"},
      {"sweep", "sweep --preset fig5 --samples 20000 --curves training,upper,lower_pd,lower_nodisc"},
      {"optimize", "optimize --target lower_nodisc --samples 20000 --fig5-snr 35"},
      {"validate", "validate --samples 20000 --seed 5"},
  };
  bool ok = true;
  std::ostringstream d;
  for (const auto& [name, args] : commands) {
    std::vector<std::string> outputs;
    std::vector<int> codes;
    for (const char* workers : {"1", "4", "0"}) {
      const auto out = dir / (name + "_" + workers + ".out");
      const std::string cmd =
          "KEYRATE_WORKERS=" + std::string(workers) + " '" + cli + "' " + args + " --out '" + out.string() + "' 2>/dev/null";
      codes.push_back(std::system(cmd.c_str()));
      std::string text = slurp(out);
      if (name == "sweep") text += slurp(out.string() + ".summary.json");
      outputs.push_back(text);
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2] &&
                      codes[0] == codes[1] && codes[0] == codes[2];
    ok = ok && same;
    d << name << (same ? " identical" : " DIFFERS") << " (" << outputs[0].size() << " bytes); ";
  }
  std::filesystem::remove_all(dir);
  return {ok, d.str() + "workers 1, 4 and all cores"};
}

struct Criterion {
  int id;
  double runtime_limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string cli;
  app.add_option("--only", only, "Run a single criterion (1-10)")->check(CLI::Range(1, 10));
  app.add_option("--cli", cli, "Path to the keyrate command-line binary");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, 1.0, ac1_closed_forms},
      {2, 1.0, ac2_reduction},
      {3, 30.0, ac3_gamma},
      {4, 120.0, [] { return gap_criterion(proof_schedule_gap, 0.05); }},
      {5, 120.0, [] { return gap_criterion(eps_schedule_gap, 0.10); }},
      {6, 900.0, ac6_ordering},
      {7, 600.0, ac7_fig4},
      {8, 60.0, ac8_power},
      {9, 60.0, ac9_cross_validation},
      {10, 0.0, [&cli] { return ac10_determinism(cli); }},
  };

  bool all = true;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool passed = o.passed;
    std::string timing = "runtime " + fmt(secs) + " s";
    if (c.runtime_limit_s > 0.0) {
      timing += " (limit " + fmt(c.runtime_limit_s) + " s)";
      passed = passed && secs < c.runtime_limit_s;
    }
    std::cout << "AC" << c.id << ' ' << (passed ? "PASS" : "FAIL") << ": " << o.detail << "; " << timing << std::endl;
    all = all && passed;
  }
  return all ? 0 : 1;
}
