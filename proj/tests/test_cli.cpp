// CLI driver tests: config round-trip, exit codes, output schemas, cache
// behavior, and bit-exact determinism under thread-count variation.  The
// subprocess cases spawn the real binary (path in FERMICORR_BIN) and the
// fixture table lives under FERMICORR_DATA.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fermicorr/cli.hpp"
#include "fermicorr/errors.hpp"

using namespace fermicorr;

namespace {

std::string data_path(const std::string& name) {
  const char* data = std::getenv("FERMICORR_DATA");
  REQUIRE(data != nullptr);
  return std::string(data) + "/" + name;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("fermicorr_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs `[env_prefix] $FERMICORR_BIN <args>` through the shell, capturing
// stdout/stderr and the exit code.
RunResult run_cli(const std::string& args, const std::string& env_prefix = {}) {
  const char* bin = std::getenv("FERMICORR_BIN");
  REQUIRE(bin != nullptr);
  static int counter = 0;
  const auto base = scratch_dir() / ("run" + std::to_string(counter++));
  const auto out_path = base.string() + ".out";
  const auto err_path = base.string() + ".err";
  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += std::string(bin) + " " + args + " > " + out_path + " 2> " + err_path;
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  std::filesystem::remove(out_path);
  std::filesystem::remove(err_path);
  return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : lines_of(text)) {
    if (line.empty() || line[0] == '#' || (line[0] >= 'a' && line[0] <= 'z') ||
        line[0] == 'k') {
      continue;  // comments and header
    }
    rows.push_back(split(line, ','));
  }
  return rows;
}

}  // namespace

TEST_CASE("config round-trip: serialize(parse(s)) is a canonical fixed point") {
  const std::vector<std::string> inputs = {
      "energy --kf 1 --potential table:unit-mode.json --format csv",
      "energy --kf 0.9 --potential none",
      "scan --kf-list 3,4,5 --potential coulomb:g=1 --kcut 10 --seed 11",
      "verify --suite onebody --seed 7",
      "verify --suite all --kf 0.9",
      "lune --kf 1 --beta -1 --cache-dir /tmp/cache",
      "energy --kf 2 --potential yukawa:g=1,mu=0.5 --tail-tol 1e-05 "
      "--quad-tol 1e-09 --threads 4 --seed 3 --out r.csv --format json",
  };
  for (const auto& s : inputs) {
    CAPTURE(s);
    const RunConfig cfg = parse_run_config(s);
    const std::string canon = serialize_run_config(cfg);
    const RunConfig cfg2 = parse_run_config(canon);
    CHECK(cfg == cfg2);
    CHECK(canon == serialize_run_config(cfg2));
  }
  CHECK(parse_run_config(std::string("--help")).command == "help");
}

TEST_CASE("config parsing: defaults, policies, and rejection of bad input") {
  const RunConfig v = parse_run_config(std::string("verify"));
  CHECK(v.k_F == std::vector<double>{0.9});
  CHECK(v.potential == "coulomb:g=1");
  CHECK(v.format == OutputFormat::json);
  CHECK(v.suite == "all");

  const RunConfig e =
      parse_run_config(std::string("energy --kf 2 --kcut 5"));
  CHECK(e.potential == "none");
  CHECK(e.format == OutputFormat::csv);
  CHECK(e.ksum_policy().mode == KSumPolicy::Mode::exhaustive);
  CHECK(e.ksum_policy().radius == 5.0);
  CHECK(parse_run_config(std::string("energy --kf 2")).ksum_policy().mode ==
        KSumPolicy::Mode::adaptive);
  CHECK(e.quadrature().rel_tol == 1e-10);
  CHECK(parse_run_config(std::string("energy --kf 1 --threads 3"))
            .effective_threads() == 3);

  for (const std::string bad : {
           "energy",                          // missing k_F
           "energy --kf -1",                  // nonpositive k_F
           "energy --kf 1 --kf-list 2",       // mutually exclusive
           "energy --kf 1 --threads -2",      // negative pool
           "verify --suite bogus",            // unknown suite
           "verify --kf 1 --kf-list 1,2",     // exclusive again
           "scan",                            // empty k_F list
           "bogus --kf 1",                    // unknown command
           "energy --kf 1 --format yaml",     // unknown format
       }) {
    CAPTURE(bad);
    CHECK_THROWS_AS((void)parse_run_config(bad), std::invalid_argument);
  }
}

TEST_CASE("run_command maps exceptions to exit codes") {
  RunConfig cfg = parse_run_config(std::string("energy --kf 1"));
  cfg.quad_tol = 1e-3;  // outside the (0, 1e-4] contract
  std::ostringstream out, err;
  CHECK(run_command(cfg, out, err) == 2);
  CHECK(err.str().find("rel_tol") != std::string::npos);

  RunConfig unknown;
  unknown.command = "frobnicate";
  std::ostringstream out2, err2;
  CHECK(run_command(unknown, out2, err2) == 2);
}

TEST_CASE("energy: unit-mode table row and the zero potential") {
  const std::string table = "table:" + data_path("unit-mode.json");
  const RunResult r = run_cli("energy --kf 1 --potential " + table);
  REQUIRE(r.exit_code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].size() == 9);
  CHECK(rows[0][0] == "1");   // k_F
  CHECK(rows[0][1] == "7");   // N
  CHECK(rows[0][2] == "6");   // e_fs_kin
  CHECK(rows[0][3] == "-2");  // interaction sum over the two table momenta
  CHECK(std::stod(rows[0][4]) < 0.0);  // e_corr_bos <= 0
  CHECK(std::stod(rows[0][5]) > 0.0);  // e_corr_ex >= 0
  CHECK(lines_of(r.out).at(0) == "# seed=0");

  const RunResult z = run_cli("energy --kf 1 --potential none --seed 5");
  REQUIRE(z.exit_code == 0);
  CHECK(lines_of(z.out).at(0) == "# seed=5");
  const auto zr = csv_rows(z.out);
  REQUIRE(zr.size() == 1);
  CHECK(zr[0][2] == "6");
  for (std::size_t i = 3; i < zr[0].size(); ++i) CHECK(zr[0][i] == "0");
}

TEST_CASE("exit codes: success, numerical failure, configuration error") {
  const std::string table = "table:" + data_path("unit-mode.json");
  CHECK(run_cli("energy --kf 1 --potential " + table).exit_code == 0);

  // An unattainable quadrature target is a numerical failure, reported
  // with diagnostics.
  const RunResult num =
      run_cli("energy --kf 1 --potential " + table + " --quad-tol 1e-300");
  CHECK(num.exit_code == 1);
  CHECK(num.err.find("quadrature") != std::string::npos);

  CHECK(run_cli("energy").exit_code == 2);                    // missing --kf
  CHECK(run_cli("verify --suite nope").exit_code == 2);       // unknown suite
  CHECK(run_cli("energy --kf 1 --bad-flag 3").exit_code == 2);
  CHECK(run_cli("energy --kf 1 --potential coulomb:g=1 --kcut 1").exit_code ==
        2);  // radius below 2 k_F
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("scan: per-row output, duplicate warning, and the fit line") {
  const std::string table = " --potential table:" + data_path("unit-mode.json");
  const RunResult r = run_cli("scan --kf-list 0.9,1,1.1,0.9" + table);
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("duplicate k_F 0.9 dropped") != std::string::npos);
  CHECK(csv_rows(r.out).size() == 3);
  CHECK(r.out.find("# fit: e_corr_bos ~ a*k_F*log(k_F) + b*k_F;") !=
        std::string::npos);

  const RunResult one = run_cli("scan --kf 1" + table);
  REQUIRE(one.exit_code == 0);
  CHECK(csv_rows(one.out).size() == 1);
  CHECK(one.out.find("# fit") == std::string::npos);

  const RunResult two = run_cli("scan --kf-list 0.9,1.1" + table);
  REQUIRE(two.exit_code == 0);
  CHECK(csv_rows(two.out).size() == 2);
  CHECK(two.out.find("# fit") == std::string::npos);
}

TEST_CASE("scan: coulomb sweep fits a negative leading coefficient") {
  const RunResult r = run_cli(
      "scan --kf-list 3,4,5 --potential coulomb:g=1 --kcut 10 --format json");
  REQUIRE(r.exit_code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  REQUIRE(doc["reports"].size() == 3);
  REQUIRE(!doc["fit"].is_null());
  CHECK(doc["fit"]["a"].get<double>() < 0.0);
  for (const auto& rep : doc["reports"]) {
    CHECK(rep["e_corr_bos"].get<double>() <= 0.0);
    CHECK(rep["e_corr_ex"].get<double>() >= 0.0);
  }
}

TEST_CASE("verify: seeded suites pass and aggregate as JSON") {
  const RunResult ob = run_cli("verify --suite onebody --seed 7");
  REQUIRE(ob.exit_code == 0);
  const auto doc = nlohmann::json::parse(ob.out);
  CHECK(doc["passed"].get<bool>());
  CHECK(doc["seed"].get<std::uint64_t>() == 7);
  REQUIRE(doc["suites"].size() == 1);
  CHECK(doc["suites"][0]["suite"] == "onebody");
  for (const auto& c : doc["suites"][0]["checks"]) {
    CHECK(c["status"].get<std::string>() != "fail");
  }

  const RunResult all = run_cli("verify --suite all --kf 0.9 --seed 3");
  REQUIRE(all.exit_code == 0);
  const auto alldoc = nlohmann::json::parse(all.out);
  CHECK(alldoc["passed"].get<bool>());
  std::vector<std::string> suites;
  for (const auto& s : alldoc["suites"]) suites.push_back(s["suite"]);
  for (const std::string want :
       {"onebody", "fock-algebra", "fock-estimates", "fock-diag",
        "fock-exchange", "fock-nb", "energy-identities"}) {
    CAPTURE(want);
    CHECK(std::count(suites.begin(), suites.end(), want) >= 1);
  }
  // Both Fock mode-set configurations ran.
  CHECK(std::count_if(alldoc["suites"].begin(), alldoc["suites"].end(),
                      [](const nlohmann::json& s) {
                        return s["config"] == "3-mode";
                      }) == 5);
  CHECK(std::count_if(alldoc["suites"].begin(), alldoc["suites"].end(),
                      [](const nlohmann::json& s) {
                        return s["config"] == "5-mode";
                      }) == 5);
}

TEST_CASE("lune: row range, plateau above 2 k_F, and the power-sum column") {
  const RunResult r = run_cli("lune --kf 1 --beta -1");
  REQUIRE(r.exit_code == 0);
  const auto rows = csv_rows(r.out);
  CHECK(rows.size() == 256);  // 0 < |k|^2 <= 16
  for (const auto& row : rows) {
    REQUIRE(row.size() == 7);
    const long norm2 = std::stol(row[3]);
    CHECK(norm2 >= 1);
    CHECK(norm2 <= 16);
    if (norm2 > 4) CHECK(row[4] == row[5]);  // |L_k| = N beyond 2 k_F
    if (row[0] == "1" && row[1] == "0" && row[2] == "0") {
      // L_{e1} = {2 e1} u {e1 +- e2, e1 +- e3}: lambdas 3/2 and 1/2 x4.
      CHECK(row[4] == "5");
      CHECK(std::stod(row[6]) == doctest::Approx(26.0 / 3.0).epsilon(1e-14));
    }
  }
  // JSON mirror carries the same rows.
  const RunResult j = run_cli("lune --kf 1 --beta -1 --format json");
  REQUIRE(j.exit_code == 0);
  const auto doc = nlohmann::json::parse(j.out);
  CHECK(doc["N"].get<long>() == 7);
  CHECK(doc["rows"].size() == 256);
}

TEST_CASE("lune: cache mirror writes, reloads, and honors FERMICORR_CACHE") {
  const auto dir1 = scratch_dir() / "cache1";
  const auto dir2 = scratch_dir() / "cache2";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);

  const RunResult first = run_cli("lune --kf 0.9 --cache-dir " + dir1.string());
  REQUIRE(first.exit_code == 0);
  CHECK(first.err.find("cache: wrote") != std::string::npos);
  CHECK(std::filesystem::exists(dir1 / "lunes_kf_0.9.csv"));

  const RunResult second =
      run_cli("lune --kf 0.9 --cache-dir " + dir1.string());
  REQUIRE(second.exit_code == 0);
  CHECK(second.err.find("cache: loaded") != std::string::npos);
  CHECK(second.out == first.out);

  // The environment variable wins over the flag.
  const RunResult env = run_cli("lune --kf 0.9 --cache-dir " + dir1.string(),
                                "FERMICORR_CACHE=" + dir2.string());
  REQUIRE(env.exit_code == 0);
  CHECK(std::filesystem::exists(dir2 / "lunes_kf_0.9.csv"));
}

TEST_CASE("determinism: output is bit-exact across thread counts") {
  const std::string base =
      "energy --kf 2 --potential coulomb:g=1 --kcut 8 --seed 42 --threads ";
  const RunResult one = run_cli(base + "1");
  const RunResult four = run_cli(base + "4");
  REQUIRE(one.exit_code == 0);
  REQUIRE(four.exit_code == 0);
  CHECK(one.out == four.out);

  const std::string scan =
      "scan --kf-list 1,1.5,2 --potential coulomb:g=1 --kcut 6 --seed 9 "
      "--format json --threads ";
  const RunResult s1 = run_cli(scan + "1");
  const RunResult s3 = run_cli(scan + "3");
  REQUIRE(s1.exit_code == 0);
  REQUIRE(s3.exit_code == 0);
  CHECK(s1.out == s3.out);

  const std::string ver = "verify --suite fock-algebra --kf 0.9 --seed 12";
  CHECK(run_cli(ver).out == run_cli(ver).out);
}

TEST_CASE("--out writes the report to a file") {
  const auto path = scratch_dir() / "report.csv";
  std::filesystem::remove(path);
  const RunResult r =
      run_cli("energy --kf 1 --potential none --seed 9 --out " + path.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.empty());
  const std::string content = slurp(path);
  CHECK(lines_of(content).at(0) == "# seed=9");
  CHECK(csv_rows(content).size() == 1);

  CHECK(run_cli("energy --kf 1 --potential none --out /nonexistent/x.csv")
            .exit_code == 2);
}
