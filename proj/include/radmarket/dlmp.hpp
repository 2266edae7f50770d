#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "radmarket/network.hpp"
#include "radmarket/optim.hpp"

namespace radmarket {

/// One step of a piecewise-linear cost: `qty` kW at `price` cents/kWh.
struct CostBlock {
  double qty = 0.0;
  double price = 0.0;
};

struct GenOffer {
  std::string agent;
  BusId bus;
  double pmin = 0.0;
  double pmax = 0.0;
  std::vector<CostBlock> blocks;
};

/// Load with baseline consumption; blocks price successive kW of reduction.
/// An offer without blocks is a fixed load.
struct DrOffer {
  std::string agent;
  BusId bus;
  double baseline = 0.0;
  std::vector<CostBlock> blocks;
};

/// Line limits are taken from the network; infinite limits add no rows.
struct ScopfInput {
  double lmp_source = 0.0;
  std::vector<GenOffer> gens;
  std::vector<DrOffer> drs;
};

enum class DlmpErrc { InvalidOffer, NonConvexCost, InfeasibleBaseline };

class DlmpError : public std::runtime_error {
 public:
  DlmpError(DlmpErrc code, const std::string& message, std::vector<std::string> lines = {});
  DlmpErrc code() const noexcept { return code_; }
  /// Lines over their limit at the baseline (InfeasibleBaseline).
  const std::vector<std::string>& lines() const noexcept { return lines_; }

 private:
  DlmpErrc code_;
  std::vector<std::string> lines_;
};

/// Column and row positions inside the program built by build_scopf.
struct ScopfLayout {
  std::vector<std::vector<std::size_t>> gen_blocks;
  std::vector<std::vector<std::size_t>> dr_blocks;
  std::size_t p_source = 0;
  std::size_t s_source = 0;
  std::vector<std::size_t> flow;        // per line
  std::size_t balance_row = 0;          // eq
  std::vector<std::size_t> flow_row;    // eq, per line
  std::vector<long> limit_plus_row;     // ub, per line; -1 when unlimited
  std::vector<long> limit_minus_row;    // ub, per line; -1 when unlimited
};

struct ScopfProgram {
  LpProblem problem;
  ScopfLayout layout;
};

/// Checks offers and assembles the linear program. Throws DlmpError.
ScopfProgram build_scopf(const Network& network, const ScopfInput& input);

struct DlmpResult {
  /// Per bus index.
  std::vector<double> p_g;
  std::vector<double> p_d;
  std::vector<double> baseline;
  std::vector<double> dlmp;
  /// Per offer, in input order.
  std::vector<double> gen_output;
  std::vector<double> dr_load;
  /// Per line.
  std::vector<double> flows;
  std::vector<double> mu_plus;
  std::vector<double> mu_minus;
  double p_source = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
  std::vector<std::string> binding_lines;
};

DlmpResult solve_dlmp(const Network& network, const ScopfInput& input);

/// `source <lmp>`, `gen <bus> <pmin> <pmax> <qty,price>...` and
/// `dr <bus> <baseline> <qty,price>...` records.
ScopfInput parse_offers(std::istream& in, const std::string& origin = "<memory>");
ScopfInput parse_offers_text(const std::string& text, const std::string& origin = "<memory>");
ScopfInput read_offers_file(const std::filesystem::path& path);
void write_offers(std::ostream& out, const ScopfInput& input);

struct DlmpRow {
  BusId bus;
  double dlmp = 0.0;
  double p_g = 0.0;
  double p_d = 0.0;
};

/// CSV with header `bus,dlmp,P_g,P_d`, one row per bus.
void write_dlmp_csv(std::ostream& out, const Network& network, const DlmpResult& result);
std::vector<DlmpRow> read_dlmp_csv(std::istream& in);

}  // namespace radmarket
