// Command-line front end: run scenarios, verify ledger dumps, inspect the
// attack-distribution null space and list bundled scenarios.
//
// Exit codes: 0 success, 1 validation error, 2 runtime abort.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mgsim/ledger.hpp"
#include "mgsim/output.hpp"
#include "mgsim/scenario.hpp"
#include "mgsim/simulation.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scenario_dir() {
  if (const char* env = std::getenv("MGSIM_SCENARIOS")) return env;
  return MGSIM_SCENARIO_DIR;
}

fs::path resolve_scenario(const std::string& arg) {
  fs::path p(arg);
  if (fs::exists(p)) return p;
  fs::path bundled = scenario_dir() / (arg + ".ini");
  if (fs::exists(bundled)) return bundled;
  throw mgsim::Error(mgsim::ErrorKind::IoError, "no scenario file or bundled scenario named '" + arg + "'");
}

void print_matrix(const mgsim::Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) std::printf("%s%10.6f", c ? " " : "  ", m(r, c));
    std::printf("\n");
  }
}

int cmd_run(const std::string& scenario, const std::string& out, std::optional<std::uint64_t> seed, bool plots) {
  const fs::path path = resolve_scenario(scenario);
  auto cfg = mgsim::load_scenario(path);
  if (seed) {
    cfg.sim.seed = *seed;
    cfg.measurement.seed = *seed;
  }
  for (const auto& n : cfg.notices) std::cerr << "note: " << n << '\n';
  const auto result = mgsim::run_simulation(cfg);
  const auto files = mgsim::export_outputs(result, out, cfg.name, plots || cfg.plots);
  const auto& r = result.report;
  std::printf("scenario        %s\n", cfg.name.c_str());
  std::printf("rounds          %zu (committed %zu, rejected %zu)\n", r.rounds, r.committed, r.rejected);
  std::printf("flags           %zu events, heals %zu, resumes %zu\n", r.flags.size(), r.heals.size(), r.resumes.size());
  std::printf("final |vbar-ref| %.6g V, max |delta| %.6g pu\n", r.max_vbar_error, r.max_abs_delta);
  std::printf("sharing dev     %.4f\n", mgsim::sharing_deviation(result.series.back()));
  std::printf("wall time       %.2f s\n", r.wall_seconds);
  for (const auto& n : r.notes) std::printf("note            %s\n", n.c_str());
  std::printf("csv             %s\n", files.csv.string().c_str());
  std::printf("report          %s\n", files.report.string().c_str());
  for (const auto& d : files.dumps) std::printf("ledger          %s\n", d.string().c_str());
  if (files.plot) std::printf("plot            %s\n", files.plot->string().c_str());
  return 0;
}

int cmd_verify(const std::string& dump) {
  const auto chain = mgsim::read_dump_file(dump);
  if (const auto bad = mgsim::verify_chain(chain)) {
    std::printf("INVALID: first bad block at height %llu (%zu blocks)\n", static_cast<unsigned long long>(*bad),
                chain.size());
    return 1;
  }
  std::printf("valid: %zu blocks\n", chain.size());
  return 0;
}

int cmd_null_space(const std::string& scenario) {
  const auto cfg = mgsim::load_scenario(resolve_scenario(scenario));
  const auto ad = mgsim::attack_distribution_matrix(cfg.graph);
  std::printf("W (%zu x %zu):\n", ad.w.rows(), ad.w.cols());
  print_matrix(ad.w);
  if (ad.null_basis.empty()) {
    std::printf("null space: trivial (W has full rank, no stealth vector exists)\n");
    return 0;
  }
  std::printf("null space basis (%zu vectors):\n", ad.null_basis.size());
  for (const auto& v : ad.null_basis) {
    for (std::size_t i = 0; i < v.size(); ++i) std::printf("%s%10.6f", i ? " " : "  ", v[i]);
    std::printf("\n");
  }
  return 0;
}

int cmd_list() {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(scenario_dir()))
    if (e.path().extension() == ".ini") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string first;
    std::getline(in, first);
    if (first.rfind("# ", 0) == 0) first = first.substr(2);
    std::printf("%-32s %s\n", f.stem().string().c_str(), first.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DC microgrid co-simulator with a hash-chained ledger"};
  app.require_subcommand(1);

  std::string scenario, out, dump;
  std::optional<std::uint64_t> seed;
  bool plots = false;

  auto* run = app.add_subcommand("run", "Run a scenario and export CSV, ledger dumps and report");
  run->add_option("scenario", scenario, "Scenario file or bundled scenario name")->required();
  run->add_option("--out", out, "Output directory")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_flag("--plots", plots, "Write an SVG plot");

  auto* verify = app.add_subcommand("verify-ledger", "Check a ledger dump's hash chain");
  verify->add_option("dump", dump, "Ledger dump (.jsonl)")->required();

  auto* ns = app.add_subcommand("null-space", "Print W and its null-space basis");
  ns->add_option("scenario", scenario, "Scenario file or bundled scenario name")->required();

  app.add_subcommand("list-scenarios", "List bundled scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(scenario, out, seed, plots);
    if (*verify) return cmd_verify(dump);
    if (*ns) return cmd_null_space(scenario);
    return cmd_list();
  } catch (const mgsim::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
