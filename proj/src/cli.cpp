// Batch front end over the library: argument parsing, canonical config
// serialization, and the four subcommand drivers (energy, scan, verify,
// lune).  Everything here is sequential apart from the thread count handed
// to the energy-module k-sums, whose reductions are order-fixed, so the
// output bytes depend only on the parsed config — never on --threads.

#include "fermicorr/cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fermicorr/errors.hpp"
#include "fermicorr/fock.hpp"
#include "fermicorr/lattice.hpp"
#include "fermicorr/numerics.hpp"
#include "fermicorr/onebody.hpp"
#include "fermicorr/potential.hpp"

namespace fermicorr {
namespace {

// Shortest decimal form that parses back to the same double.
std::string fmt_num(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// Quote a flag value for the canonical command line only when the plain
// token would not survive whitespace splitting.
std::string shell_value(const std::string& s) {
  if (!s.empty() && s.find_first_of(" \t\"") == std::string::npos) return s;
  std::string quoted = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') quoted += '\\';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

void warn_potential(const PotentialModel& model, std::ostream& err) {
  for (const auto& w : model.warnings()) err << "warning: " << w << '\n';
}

double single_kf(const RunConfig& cfg) {
  if (cfg.k_F.size() != 1) {
    throw std::invalid_argument(cfg.command +
                                " needs exactly one k_F; pass --kf <value>");
  }
  return cfg.k_F.front();
}

// ---------------------------------------------------------------------------
// Argument parsing

// CLI11 writes into the RunConfig fields directly; the few flags whose
// meaning depends on presence or on the fired subcommand land in side slots
// and are folded in afterwards.
struct FlagSlots {
  RunConfig cfg;
  double kf = 0.0;
  std::vector<double> kf_list;
  std::string format_str;
  double beta = 0.0;
};

void build_app(CLI::App& app, FlagSlots& slots) {
  app.description("Fermi-gas correlation-energy toolkit");

  const auto add_shared = [&slots](CLI::App* sub) {
    sub->add_option("--kf", slots.kf, "Fermi momentum k_F");
    sub->add_option("--kf-list", slots.kf_list,
                    "comma-separated k_F values (scan)")
        ->delimiter(',');
    sub->add_option(
        "--potential", slots.cfg.potential,
        "coulomb:g=<f> | yukawa:g=<f>,mu=<f> | table:<path> | none");
    sub->add_option("--kcut", slots.cfg.kcut,
                    "exhaustive k-sum radius; default: adaptive truncation");
    sub->add_option("--tail-tol", slots.cfg.tail_tol,
                    "adaptive k-sum relative tail tolerance");
    sub->add_option("--quad-tol", slots.cfg.quad_tol,
                    "quadrature relative tolerance");
    sub->add_option("--threads", slots.cfg.threads,
                    "work-pool size; 0 = hardware parallelism");
    sub->add_option("--seed", slots.cfg.seed,
                    "random seed, recorded in every output header");
    sub->add_option("--out", slots.cfg.out, "output path; default: stdout");
    sub->add_option("--format", slots.format_str, "csv | json")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--cache-dir", slots.cfg.cache_dir,
                    "lune cache directory (env FERMICORR_CACHE overrides)");
  };

  add_shared(app.add_subcommand(
      "energy", "one correlation-energy report for a single k_F"));
  add_shared(app.add_subcommand(
      "scan", "one report per k_F, with the a*kF*log(kF)+b*kF fit from >= 3 rows"));
  CLI::App* verify =
      app.add_subcommand("verify", "run the library's verification suites");
  add_shared(verify);
  verify->add_option("--suite", slots.cfg.suite,
                     "onebody | fock-algebra | fock-diag | fock-nb | "
                     "energy-identities | all");
  CLI::App* lune_cmd = app.add_subcommand(
      "lune", "lune sizes over a momentum range, with optional cache mirror");
  add_shared(lune_cmd);
  lune_cmd->add_option("--beta", slots.beta,
                       "emit the per-lune power sum over lambda^beta");
}

void validate_config(const RunConfig& cfg) {
  static const std::set<std::string> commands = {"energy", "scan", "verify",
                                                 "lune"};
  if (!commands.count(cfg.command)) {
    throw std::invalid_argument("missing command (energy | scan | verify | "
                                "lune); see --help");
  }
  if (cfg.command == "scan") {
    if (cfg.k_F.empty()) {
      throw std::invalid_argument("scan needs at least one k_F; pass --kf or "
                                  "--kf-list");
    }
  } else if (cfg.k_F.size() != 1) {
    throw std::invalid_argument(cfg.command +
                                " needs exactly one k_F; pass --kf <value>");
  }
  for (const double kf : cfg.k_F) {
    if (!(kf > 0.0) || !std::isfinite(kf)) {
      throw std::invalid_argument("k_F must be positive and finite, got " +
                                  fmt_num(kf));
    }
  }
  if (!(cfg.kcut >= 0.0) || !std::isfinite(cfg.kcut)) {
    throw std::invalid_argument("--kcut must be finite and >= 0");
  }
  if (cfg.threads < 0) throw std::invalid_argument("--threads must be >= 0");
  if (cfg.command == "verify") {
    static const std::set<std::string> suites = {
        "onebody",  "fock-algebra",      "fock-diag",
        "fock-nb",  "energy-identities", "all"};
    if (!suites.count(cfg.suite)) {
      throw std::invalid_argument(
          "unknown suite '" + cfg.suite +
          "' (onebody | fock-algebra | fock-diag | fock-nb | "
          "energy-identities | all)");
    }
  }
}

RunConfig assemble_config(CLI::App& app, FlagSlots& slots) {
  const std::vector<CLI::App*> fired = app.get_subcommands();
  if (fired.empty()) {
    throw std::invalid_argument("missing command (energy | scan | verify | "
                                "lune); see --help");
  }
  CLI::App* sub = fired.front();
  RunConfig cfg = slots.cfg;
  cfg.command = sub->get_name();

  const bool has_kf = sub->count("--kf") > 0;
  const bool has_list = sub->count("--kf-list") > 0;
  if (has_kf && has_list) {
    throw std::invalid_argument("--kf and --kf-list are mutually exclusive");
  }
  if (has_kf) {
    cfg.k_F = {slots.kf};
  } else if (has_list) {
    cfg.k_F = slots.kf_list;
  } else if (cfg.command == "verify") {
    cfg.k_F = {0.9};  // small enough for the Fock sectors to stay exact
  }

  if (sub->count("--potential") == 0) {
    // verify exercises kernels, which are empty for the zero potential.
    cfg.potential = cfg.command == "verify" ? "coulomb:g=1" : "none";
  }
  if (sub->count("--format") == 0) {
    cfg.format =
        cfg.command == "verify" ? OutputFormat::json : OutputFormat::csv;
  } else {
    cfg.format =
        slots.format_str == "json" ? OutputFormat::json : OutputFormat::csv;
  }
  if (cfg.command == "lune" && sub->count("--beta") > 0) cfg.beta = slots.beta;

  validate_config(cfg);
  return cfg;
}

template <typename ParseFn>
RunConfig parse_with(ParseFn&& do_parse) {
  CLI::App app;
  FlagSlots slots;
  build_app(app, slots);
  try {
    do_parse(app);
  } catch (const CLI::CallForHelp&) {
    RunConfig help;
    help.command = "help";
    return help;
  } catch (const CLI::CallForAllHelp&) {
    RunConfig help;
    help.command = "help";
    return help;
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(e.what());
  }
  return assemble_config(app, slots);
}

}  // namespace

KSumPolicy RunConfig::ksum_policy() const {
  return kcut > 0.0 ? KSumPolicy::exhaustive(kcut)
                    : KSumPolicy::adaptive(tail_tol);
}

QuadratureSpec RunConfig::quadrature() const {
  QuadratureSpec quad;
  quad.rel_tol = quad_tol;
  return quad;
}

int RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

RunConfig parse_run_config(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("fermicorr");
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_with([&argv](CLI::App& app) {
    app.parse(static_cast<int>(argv.size()), argv.data());
  });
}

RunConfig parse_run_config(const std::string& command_line) {
  return parse_with(
      [&command_line](CLI::App& app) { app.parse(command_line, false); });
}

std::string serialize_run_config(const RunConfig& cfg) {
  if (cfg.command == "help") return "--help";
  std::string s = cfg.command;
  if (cfg.k_F.size() == 1) {
    s += " --kf " + fmt_num(cfg.k_F.front());
  } else if (!cfg.k_F.empty()) {
    s += " --kf-list ";
    for (std::size_t i = 0; i < cfg.k_F.size(); ++i) {
      if (i > 0) s += ',';
      s += fmt_num(cfg.k_F[i]);
    }
  }
  s += " --potential " + shell_value(cfg.potential);
  if (cfg.kcut > 0.0) s += " --kcut " + fmt_num(cfg.kcut);
  s += " --tail-tol " + fmt_num(cfg.tail_tol);
  s += " --quad-tol " + fmt_num(cfg.quad_tol);
  s += " --threads " + std::to_string(cfg.threads);
  s += " --seed " + std::to_string(cfg.seed);
  if (!cfg.out.empty()) s += " --out " + shell_value(cfg.out);
  s += " --format ";
  s += cfg.format == OutputFormat::json ? "json" : "csv";
  if (cfg.command == "verify") s += " --suite " + cfg.suite;
  if (!cfg.cache_dir.empty()) s += " --cache-dir " + shell_value(cfg.cache_dir);
  if (cfg.command == "lune" && cfg.beta) s += " --beta " + fmt_num(*cfg.beta);
  return s;
}

// ---------------------------------------------------------------------------
// energy / scan

int cmd_energy(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const double kf = single_kf(cfg);
  const PotentialModel model = PotentialModel::parse(cfg.potential);
  warn_potential(model, err);
  const bool with_per_k = cfg.format == OutputFormat::json;
  const EnergyReport report =
      upper_bound(model, kf, cfg.ksum_policy(), cfg.quadrature(), with_per_k,
                  cfg.effective_threads(), cfg.seed);
  if (cfg.format == OutputFormat::csv) {
    out << "# seed=" << cfg.seed << '\n'
        << energy_csv_header() << '\n'
        << energy_csv_row(report) << '\n';
  } else {
    out << energy_report_json(report) << '\n';
  }
  return 0;
}

int cmd_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.k_F.empty()) {
    throw std::invalid_argument(
        "scan needs at least one k_F; pass --kf or --kf-list");
  }
  const PotentialModel model = PotentialModel::parse(cfg.potential);
  warn_potential(model, err);

  std::vector<double> kfs;
  for (const double kf : cfg.k_F) {
    if (std::find(kfs.begin(), kfs.end(), kf) != kfs.end()) {
      err << "warning: duplicate k_F " << fmt_num(kf) << " dropped\n";
      continue;
    }
    kfs.push_back(kf);
  }

  std::vector<EnergyReport> reports;
  reports.reserve(kfs.size());
  for (const double kf : kfs) {
    reports.push_back(upper_bound(model, kf, cfg.ksum_policy(),
                                  cfg.quadrature(), /*with_per_k=*/false,
                                  cfg.effective_threads(), cfg.seed));
  }
  std::optional<ScalingFit> fit;
  if (reports.size() >= 3) fit = fit_scaling(reports);

  if (cfg.format == OutputFormat::csv) {
    out << "# seed=" << cfg.seed << '\n' << energy_csv_header() << '\n';
    for (const auto& r : reports) out << energy_csv_row(r) << '\n';
    if (fit) {
      out << "# fit: e_corr_bos ~ a*k_F*log(k_F) + b*k_F; a=" << fmt_num(fit->a)
          << " b=" << fmt_num(fit->b) << " residual=" << fmt_num(fit->residual)
          << '\n';
    }
  } else {
    nlohmann::json doc;
    doc["seed"] = cfg.seed;
    doc["reports"] = nlohmann::json::array();
    for (const auto& r : reports) {
      doc["reports"].push_back(nlohmann::json::parse(energy_report_json(r)));
    }
    if (fit) {
      doc["fit"] = {{"a", fit->a}, {"b", fit->b}, {"residual", fit->residual}};
    } else {
      doc["fit"] = nullptr;
    }
    out << doc.dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify

namespace {

struct SuiteEntry {
  std::string config_label;
  SuiteReport report;
};

// 100 seeded random instances of the standing hypotheses (diagonal positive
// h, nonnegative v) plus every lune with |k| <= 2 k_F, folded into one
// worst-residual row per inequality.
SuiteEntry run_onebody_suite(const RunConfig& cfg, const PotentialModel& model,
                             double kf) {
  const std::vector<double> t_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, bool>> agg;  // worst violation, failed
  const auto fold = [&order, &agg](const std::vector<BoundReport>& reports) {
    for (const auto& r : reports) {
      auto [it, inserted] =
          agg.try_emplace(r.name, std::pair{r.max_violation, !r.pass});
      if (inserted) {
        order.push_back(r.name);
      } else {
        it->second.first = std::max(it->second.first, r.max_violation);
        it->second.second = it->second.second || !r.pass;
      }
    }
  };
  double worst_route_diff = 0.0;
  const auto fold_trace = [&worst_route_diff](const TraceCorrection& tc) {
    worst_route_diff = std::max(worst_route_diff, tc.rel_diff);
  };

  std::mt19937_64 rng = num::rng_for(cfg.seed, "cli-onebody");
  std::uniform_int_distribution<int> dim_d(2, 20);
  std::uniform_real_distribution<double> lam_d(0.1, 10.0);
  std::uniform_real_distribution<double> v_d(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = dim_d(rng);
    Eigen::MatrixXd hm = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd vv(dim);
    for (int i = 0; i < dim; ++i) {
      hm(i, i) = lam_d(rng);
      vv[i] = v_d(rng);
    }
    const LuneOperator h{{1, 0, 0}, std::move(hm)};
    const LuneVector v{{1, 0, 0}, std::move(vv)};
    const LuneOperator K = build_K(h, v);
    fold(check_element_bounds(h, v, K, t_grid));
    fold_trace(trace_correction(h, v, K));
  }

  const FermiBall ball = fermi_ball(kf);
  for (const LatticeVector& k : fermi_ball(2.0 * kf).points) {
    if (k.norm2() == 0) continue;
    const Lune lu = lune(ball, k);
    const LuneOperator h = build_h(lu);
    const LuneVector v = build_v(lu, model, kf);
    const LuneOperator K = build_K(h, v);
    fold(check_element_bounds(h, v, K, t_grid));
    fold_trace(trace_correction(h, v, K));
  }

  SuiteReport rep;
  rep.suite = "onebody";
  for (const auto& name : order) {
    CheckResult c;
    c.name = name;
    c.residual = agg[name].first;
    c.tolerance = kBoundSlack;
    c.status = agg[name].second ? CheckResult::Status::fail
                                : CheckResult::Status::pass;
    rep.checks.push_back(std::move(c));
  }
  CheckResult tc;
  tc.name = "trace-route-agreement";
  tc.residual = worst_route_diff;
  tc.tolerance = 1e-8;
  tc.status = worst_route_diff <= tc.tolerance ? CheckResult::Status::pass
                                               : CheckResult::Status::fail;
  rep.checks.push_back(std::move(tc));
  return {"random+lunes", std::move(rep)};
}

// Scalar closed form, per-k agreement of the correlation integral with the
// one-body trace correction, and the quadratic-expansion identity, over
// every lune with |k| <= 2 k_F.
SuiteEntry run_energy_identities_suite(const RunConfig& cfg,
                                       const PotentialModel& model, double kf) {
  SuiteReport rep;
  rep.suite = "energy-identities";

  {
    Eigen::MatrixXd hm(1, 1);
    hm(0, 0) = 1.0;
    const LuneOperator h{{0, 0, 1}, std::move(hm)};
    const LuneVector v{{0, 0, 1}, Eigen::VectorXd::Ones(1)};
    const TraceCorrection tc = trace_correction(h, v, build_K(h, v));
    const double target = std::sqrt(3.0) - 2.0;
    CheckResult c;
    c.name = "scalar-trace-closed-form";
    c.residual =
        std::max(std::abs(tc.route1 - target), std::abs(tc.route2 - target));
    c.tolerance = 1e-10;
    c.status = c.residual <= c.tolerance ? CheckResult::Status::pass
                                         : CheckResult::Status::fail;
    rep.checks.push_back(std::move(c));
  }

  const QuadratureSpec quad = cfg.quadrature();
  const FermiBall ball = fermi_ball(kf);
  double worst_route = 0.0;
  double worst_quadratic = 0.0;
  bool quadratic_pass = true;
  for (const LatticeVector& k : fermi_ball(2.0 * kf).points) {
    if (k.norm2() == 0) continue;
    const Lune lu = lune(ball, k);
    const LuneOperator h = build_h(lu);
    const LuneVector v = build_v(lu, model, kf);
    const TraceCorrection tc = trace_correction(h, v, build_K(h, v));
    const double bos = e_corr_bos_k(lu, model, kf, quad);
    worst_route = std::max(
        worst_route, std::abs(bos - tc.route1) /
                         std::max({1.0, std::abs(bos), std::abs(tc.route1)}));
    const BoundReport q = quadratic_expansion_check(lu);
    worst_quadratic = std::max(worst_quadratic, q.max_violation);
    quadratic_pass = quadratic_pass && q.pass;
  }
  CheckResult route;
  route.name = "per-k-route-agreement";
  route.residual = worst_route;
  route.tolerance = 1e-8;
  route.status = worst_route <= route.tolerance ? CheckResult::Status::pass
                                                : CheckResult::Status::fail;
  rep.checks.push_back(std::move(route));
  CheckResult quadratic;
  quadratic.name = "quadratic-expansion-identity";
  quadratic.residual = worst_quadratic;
  quadratic.tolerance = 1e-8;
  quadratic.status = quadratic_pass ? CheckResult::Status::pass
                                    : CheckResult::Status::fail;
  rep.checks.push_back(std::move(quadratic));
  return {"lunes |k| <= 2 k_F", std::move(rep)};
}

// A Fock sector too large for exact verification is reported as a skipped
// suite rather than an error, so `--suite all` stays usable at any k_F.
SuiteReport skipped_suite(const std::string& suite, const std::string& why) {
  SuiteReport rep;
  rep.suite = suite;
  CheckResult c;
  c.name = "mode-set-capacity";
  c.status = CheckResult::Status::skipped;
  rep.checks.push_back(std::move(c));
  rep.suite += " (" + why + ")";
  return rep;
}

}  // namespace

int cmd_verify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const double kf = single_kf(cfg);
  validate_config(cfg);  // rejects unknown suite names
  const PotentialModel model = PotentialModel::parse(cfg.potential);
  warn_potential(model, err);

  const bool all = cfg.suite == "all";
  std::vector<SuiteEntry> entries;

  if (all || cfg.suite == "onebody") {
    entries.push_back(run_onebody_suite(cfg, model, kf));
  }

  if (all || cfg.suite.rfind("fock-", 0) == 0) {
    FockSuiteOptions opt;
    opt.seed = cfg.seed;
    const std::vector<std::vector<LatticeVector>> k_lists = {
        {{1, 0, 0}, {-1, 0, 0}},
        {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}}};
    for (const auto& ks : k_lists) {
      try {
        const ModeSet ms = build_mode_set(kf, ks);
        const FockSector sector = build_sector(ms, ms.n_fill);
        const std::string label = std::to_string(ms.size()) + "-mode";
        if (all || cfg.suite == "fock-algebra") {
          entries.push_back({label, verify_algebra(ms, sector, opt)});
          entries.push_back(
              {label, verify_fermionic_estimates(ms, sector, model, kf, opt)});
        }
        if (all || cfg.suite == "fock-diag") {
          entries.push_back(
              {label, verify_diagonalization(ms, sector, model, kf, opt)});
          entries.push_back(
              {label, verify_exchange_value(ms, sector, model, kf, opt)});
        }
        if (all || cfg.suite == "fock-nb") {
          entries.push_back(
              {label, verify_nonbosonizable(ms, sector, model, kf, opt)});
        }
      } catch (const resource_limit_error& e) {
        err << "warning: skipping Fock suites for one momentum list: "
            << e.what() << '\n';
        entries.push_back(
            {"oversized", skipped_suite(cfg.suite == "all" ? "fock" : cfg.suite,
                                        "mode set over capacity")});
      }
    }
  }

  if (all || cfg.suite == "energy-identities") {
    entries.push_back(run_energy_identities_suite(cfg, model, kf));
  }

  bool all_pass = true;
  for (const auto& e : entries) all_pass = all_pass && e.report.passed();

  if (cfg.format == OutputFormat::json) {
    nlohmann::json doc;
    doc["seed"] = cfg.seed;
    doc["k_F"] = kf;
    doc["potential"] = model.spec_string();
    doc["requested"] = cfg.suite;
    doc["passed"] = all_pass;
    doc["suites"] = nlohmann::json::array();
    for (const auto& e : entries) {
      nlohmann::json j = nlohmann::json::parse(suite_report_json(e.report));
      j["config"] = e.config_label;
      doc["suites"].push_back(std::move(j));
    }
    out << doc.dump(2) << '\n';
  } else {
    out << "# seed=" << cfg.seed << '\n'
        << "config,suite,check,status,residual,tolerance\n";
    for (const auto& e : entries) {
      for (const auto& c : e.report.checks) {
        const char* status = c.status == CheckResult::Status::pass ? "pass"
                             : c.status == CheckResult::Status::fail
                                 ? "fail"
                                 : "skipped";
        out << e.config_label << ',' << e.report.suite << ',' << c.name << ','
            << status << ',' << fmt_num(c.residual) << ','
            << fmt_num(c.tolerance) << '\n';
      }
    }
  }
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// lune

int cmd_lune(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const double kf = single_kf(cfg);
  const double radius = cfg.kcut > 0.0 ? cfg.kcut : 2.0 * kf + 2.0;
  const FermiBall ball = fermi_ball(kf);
  const long N = static_cast<long>(ball.N());

  std::string cache_dir = cfg.cache_dir;
  if (const char* env = std::getenv("FERMICORR_CACHE")) cache_dir = env;
  LuneCache cache;
  std::string cache_path;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    cache_path = cache_dir + "/lunes_kf_" + fmt_num(kf) + ".csv";
    if (std::filesystem::exists(cache_path)) {
      const std::size_t loaded = cache.load_csv(cache_path, kf);
      err << "cache: loaded " << loaded << " lunes from " << cache_path << '\n';
    }
  }
  if (cfg.beta && (*cfg.beta < -1.0 || *cfg.beta > 0.0)) {
    err << "warning: beta outside [-1, 0] has no growth envelope; the power "
           "sums are reported as-is\n";
  }

  nlohmann::json doc;
  if (cfg.format == OutputFormat::json) {
    doc["seed"] = cfg.seed;
    doc["k_F"] = kf;
    doc["N"] = N;
    if (cfg.beta) doc["beta"] = *cfg.beta;
    doc["rows"] = nlohmann::json::array();
  } else {
    out << "# seed=" << cfg.seed << '\n'
        << "# k_F=" << fmt_num(kf) << " N=" << N
        << (cfg.beta ? " beta=" + fmt_num(*cfg.beta) : std::string{}) << '\n'
        << "kx,ky,kz,norm2,lune_size,N"
        << (cfg.beta ? ",power_sum" : "") << '\n';
  }

  for (const LatticeVector& k : fermi_ball(radius).points) {
    if (k.norm2() == 0) continue;
    const std::shared_ptr<const Lune> lu = cache.get(ball, k);
    if (cfg.format == OutputFormat::json) {
      nlohmann::json row;
      row["k"] = {k.x, k.y, k.z};
      row["norm2"] = k.norm2();
      row["lune_size"] = lu->size();
      if (cfg.beta) row["power_sum"] = lune_power_sum(*lu, *cfg.beta).value;
      doc["rows"].push_back(std::move(row));
    } else {
      out << k.x << ',' << k.y << ',' << k.z << ',' << k.norm2() << ','
          << lu->size() << ',' << N;
      if (cfg.beta) out << ',' << fmt_num(lune_power_sum(*lu, *cfg.beta).value);
      out << '\n';
    }
  }
  if (cfg.format == OutputFormat::json) out << doc.dump(2) << '\n';

  if (!cache_path.empty()) {
    const std::size_t written = cache.save_csv(cache_path, kf);
    err << "cache: wrote " << written << " lunes to " << cache_path << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Dispatch

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.command == "energy") return cmd_energy(cfg, out, err);
    if (cfg.command == "scan") return cmd_scan(cfg, out, err);
    if (cfg.command == "verify") return cmd_verify(cfg, out, err);
    if (cfg.command == "lune") return cmd_lune(cfg, out, err);
    err << "error: unknown command '" << cfg.command << "'\n";
    return 2;
  } catch (const resource_limit_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const numerical_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app;
  FlagSlots slots;
  build_app(app, slots);
  RunConfig cfg;
  try {
    app.parse(argc, argv);
    cfg = assemble_config(app, slots);
  } catch (const CLI::ParseError& e) {
    // Prints help for help requests (exit 0) and the parse diagnostic
    // otherwise; every parse failure is a configuration error.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  if (!cfg.out.empty()) {
    std::ofstream file(cfg.out);
    if (!file) {
      std::cerr << "error: cannot open output path " << cfg.out << '\n';
      return 2;
    }
    return run_command(cfg, file, std::cerr);
  }
  return run_command(cfg, std::cout, std::cerr);
}

}  // namespace fermicorr
