#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "radmarket/cli.hpp"

namespace fs = std::filesystem;
using namespace radmarket;

namespace {

struct RunFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> mechanism;
  std::optional<int> grid_steps;
  std::optional<int> market_steps;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("-c,--config", f.config, "key=value run configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "override a config key, e.g. --set p2p.T=20 (repeatable)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("-o,--out", f.out, "output directory");
  cmd->add_option("--mechanism", f.mechanism, "clearing, p2p or dlmp");
  cmd->add_option("--grid-steps", f.grid_steps, "number of grid steps");
  cmd->add_option("--market-steps", f.market_steps, "market steps per grid step");
}

RunConfig load(const RunFlags& f) {
  RunConfig cfg = read_run_config(f.config);
  const fs::path cwd = fs::current_path();
  for (const auto& s : f.sets) apply_override(cfg, s, cwd);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = fs::path(*f.out);
  if (f.mechanism) apply_setting(cfg, "mechanism", *f.mechanism);
  if (f.grid_steps) apply_setting(cfg, "grid_steps", std::to_string(*f.grid_steps));
  if (f.market_steps) apply_setting(cfg, "market_steps", std::to_string(*f.market_steps));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-grid market simulator"};
  app.require_subcommand(1);

  std::string validate_case;
  auto* validate = app.add_subcommand("validate", "check a case file for radiality and report its size");
  validate->add_option("case", validate_case, "case file")->required();

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run one episode and write its log and summaries");
  add_run_flags(run, run_flags);

  std::string clear_case, clear_bids;
  int segments = 100;
  std::optional<std::string> clear_out;
  auto* clear = app.add_subcommand("clear", "single-shot double-auction clearing");
  clear->add_option("--case", clear_case, "case file")->required();
  clear->add_option("--bids", clear_bids, "bids file")->required();
  clear->add_option("--segments", segments, "blocks per curve in the quantity stage")->capture_default_str();
  clear->add_option("-o,--out", clear_out, "also write the dispatch as JSON lines");

  std::string dlmp_case, dlmp_offers;
  std::optional<double> lmp_source;
  std::optional<std::string> dlmp_out;
  auto* dlmp = app.add_subcommand("dlmp", "single-shot SCOPF; prints the per-bus DLMP table as CSV");
  dlmp->add_option("--case", dlmp_case, "case file")->required();
  dlmp->add_option("--offers", dlmp_offers, "offers file")->required();
  dlmp->add_option("--lmp-source", lmp_source, "override the source price in the offers file");
  dlmp->add_option("-o,--out", dlmp_out, "also write the table to this CSV file");

  RunFlags sweep_flags;
  std::string seeds;
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "run independent episodes over a seed range in parallel");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--seeds", seeds, "inclusive seed range a..b")->required();
  sweep->add_option("-j,--threads", threads, "worker threads (0 = hardware concurrency)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfig;
  }

  try {
    if (*validate) return cli::cmd_validate(validate_case, std::cout, std::cerr);
    if (*run) return cli::cmd_run(load(run_flags), std::cout, std::cerr);
    if (*clear) {
      std::optional<fs::path> out;
      if (clear_out) out = fs::path(*clear_out);
      return cli::cmd_clear(clear_case, clear_bids, segments, out, std::cout, std::cerr);
    }
    if (*dlmp) {
      std::optional<fs::path> out;
      if (dlmp_out) out = fs::path(*dlmp_out);
      return cli::cmd_dlmp(dlmp_case, dlmp_offers, lmp_source, out, std::cout, std::cerr);
    }
    if (*sweep) {
      return cli::cmd_sweep(load(sweep_flags), cli::parse_seed_range(seeds), threads, std::cout, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kRuntime;
  }
  return cli::kConfig;
}
