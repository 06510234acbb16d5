#pragma once
//
// Batch front end: one binary, four subcommands.
//
//   energy  — one correlation-energy report for a single k_F
//   scan    — one report per k_F in a list, plus the least-squares
//             a·k_F·log k_F + b·k_F fit once three or more rows exist
//   verify  — the library's verification suites, aggregated into one
//             JSON document (exit 1 if any check fails)
//   lune    — lune sizes (and an optional power-sum column) over a
//             momentum range, with an optional on-disk cache mirror
//
// Exit codes: 0 success, 1 verification or numerical failure, 2
// configuration error.  All randomness derives from --seed, the seed is
// recorded in every output header, and results do not depend on --threads
// (the thread count only sizes the work pool handed to the energy sums).
//
// Configs round-trip: parse_run_config(serialize_run_config(c)) == c, and
// serialize ∘ parse is idempotent, so serialize(parse(s)) is a canonical
// form for any accepted command line s.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fermicorr/energy.hpp"

namespace fermicorr {

enum class OutputFormat { csv, json };

struct RunConfig {
  std::string command;       // energy | scan | verify | lune | help
  std::vector<double> k_F;   // energy/verify/lune use exactly one entry
  std::string potential;     // mini-grammar spec (see PotentialModel::parse)
  double kcut = 0.0;         // > 0: exhaustive k-sum radius |k| <= kcut
  double tail_tol = 1e-6;    // adaptive k-sum relative tail tolerance
  double quad_tol = 1e-10;   // quadrature relative tolerance
  int threads = 0;           // 0: hardware parallelism
  std::uint64_t seed = 0;
  std::string out;           // output path; empty writes to stdout
  OutputFormat format = OutputFormat::csv;
  std::string suite = "all";   // verify: which suite group to run
  std::string cache_dir;       // lune: on-disk cache mirror directory
  std::optional<double> beta;  // lune: emit sum_p lambda^beta per row

  [[nodiscard]] KSumPolicy ksum_policy() const;
  [[nodiscard]] QuadratureSpec quadrature() const;
  [[nodiscard]] int effective_threads() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Parse a command line (program name excluded).  Per-command defaults are
// applied here: the potential defaults to "none" ("coulomb:g=1" for verify,
// whose suites would otherwise run on empty kernels), the format defaults
// to csv ("json" for verify), and verify alone defaults --kf to 0.9.
// A help request yields command == "help"; errors throw
// std::invalid_argument.
RunConfig parse_run_config(const std::vector<std::string>& args);
RunConfig parse_run_config(const std::string& command_line);

// Canonical command line: fixed flag order, shortest-round-trip number
// formatting, values quoted only when they contain whitespace.
std::string serialize_run_config(const RunConfig& config);

// Subcommand drivers.  Reports go to `out`, warnings and diagnostics to
// `err`; the return value is the process exit code.  Errors are thrown
// (std::invalid_argument, numerical_error, resource_limit_error) and
// mapped to exit codes by run_command.
int cmd_energy(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_scan(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_verify(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_lune(const RunConfig& config, std::ostream& out, std::ostream& err);

// Dispatch on config.command with the exception-to-exit-code mapping:
// std::invalid_argument -> 2, resource_limit_error -> 2, numerical_error
// -> 1 (each with a message on `err`).
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

// Full process entry: parse argv, resolve --out, dispatch.
int cli_main(int argc, char** argv);

}  // namespace fermicorr
