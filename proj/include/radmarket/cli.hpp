#pragma once

// Subcommand bodies behind the radmarket executable. Each returns an exit
// code: 0 success, 1 runtime failure, 2 configuration or input error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "radmarket/config.hpp"

namespace radmarket::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kConfig = 2 };

/// Prints counts, radiality and a limit summary. Invalid cases exit 1.
int cmd_validate(const std::filesystem::path& case_path, std::ostream& out, std::ostream& err);

/// Writes episode.jsonl, summary.csv and config.txt into out_dir, plus
/// trajectory.csv (p2p) or dlmp.csv (dlmp, last grid step). Files are written
/// as *.partial and renamed on success; a failed run keeps episode.jsonl.partial.
int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int cmd_clear(const std::filesystem::path& case_path, const std::filesystem::path& bids_path, int segments,
              const std::optional<std::filesystem::path>& jsonl_out, std::ostream& out, std::ostream& err);

/// `lmp_source` overrides the `source` line of the offers file.
int cmd_dlmp(const std::filesystem::path& case_path, const std::filesystem::path& offers_path,
             std::optional<double> lmp_source, const std::optional<std::filesystem::path>& csv_out,
             std::ostream& out, std::ostream& err);

struct SeedRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
};

/// `a..b`, inclusive.
SeedRange parse_seed_range(const std::string& text);

/// One cmd_run per seed in out_dir/seed_<s>, on up to `threads` workers,
/// then out_dir/sweep.csv. Returns the worst exit code.
int cmd_sweep(const RunConfig& cfg, SeedRange seeds, unsigned threads, std::ostream& out, std::ostream& err);

}  // namespace radmarket::cli
