#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "radmarket/curves.hpp"
#include "radmarket/network.hpp"

namespace radmarket {

/// Price cap used for inelastic demand bids (cents/kWh).
inline constexpr double kPriceCap = 100.0;

struct Order {
  std::string agent;
  BusId bus;
  Curve curve;
};

/// Bids carry demand curves, offers carry supply curves.
struct MarketInput {
  std::vector<Order> bids;
  std::vector<Order> offers;
};

enum class ClearingErrc { InvalidInput, SettlementInfeasible };

class ClearingError : public std::runtime_error {
 public:
  ClearingError(ClearingErrc code, const std::string& message, std::vector<std::string> agents = {});
  ClearingErrc code() const noexcept { return code_; }
  /// Agents whose constraints could not be met (SettlementInfeasible).
  const std::vector<std::string>& agents() const noexcept { return agents_; }

 private:
  ClearingErrc code_;
  std::vector<std::string> agents_;
};

/// Rejects duplicate agents, wrong-sided curves and buses missing from the network.
void validate_market(const Network& network, const MarketInput& input);

struct ClearOptions {
  int segments = 100;
};

struct AgentDispatch {
  std::string agent;
  BusId bus;
  Side side = Side::Demand;
  double q = 0.0;
  double p = 0.0;
};

struct Dispatch {
  /// Bids first, then offers, each in input order.
  std::vector<AgentDispatch> entries;
  /// Indexed like Network::lines().
  std::vector<double> line_flows;
  std::vector<std::string> binding_lines;
  /// Per bus index: marginal value of one more kW consumed there.
  std::vector<double> nodal_prices;
  /// Value of traded energy under the exact curves (demand integrals minus supply integrals).
  double total_surplus = 0.0;
  /// Stage-1 objective under the block discretization.
  double block_surplus = 0.0;
  /// Demand-side multiplier applied during settlement.
  double lambda = 1.0;
  /// True when nothing trades; the dispatch is then all zero.
  bool no_trade = false;

  const AgentDispatch* find(const std::string& agent) const;
};

/// Quantity stage only: the surplus-maximizing block LP on the network.
struct QuantityResult {
  std::vector<double> bid_q;
  std::vector<double> offer_q;
  std::vector<double> nodal_prices;
  double block_surplus = 0.0;
};

QuantityResult clear_quantities(const Network& network, const MarketInput& input, const ClearOptions& options = {});

struct Settlement {
  std::vector<double> bid_p;
  std::vector<double> offer_p;
  double lambda = 1.0;
};

/// Settles with each agent's own curve price at its quantity as the provisional price.
Settlement settle_prices(const MarketInput& input, const std::vector<double>& bid_q, const std::vector<double>& offer_q);

/// Settles from caller-supplied provisional prices. Demand prices are scaled by
/// lambda = supplier revenue / provisional demand payment; any shortfall created
/// by capping at a consumer's curve price is spread over the remaining
/// headroom. Throws ClearingError(SettlementInfeasible) naming the consumers
/// at their cap, or the suppliers paid below their curve.
Settlement settle_prices(const MarketInput& input, const std::vector<double>& bid_q, const std::vector<double>& offer_q,
                         const std::vector<double>& bid_provisional, const std::vector<double>& offer_provisional);

/// Stage 1 then stage 2. Provisional prices are nodal prices clamped into each
/// agent's acceptable region.
Dispatch clear(const Network& network, const MarketInput& input, const ClearOptions& options = {});

/// `bid <agent> <bus> <S|D> <p_max> <p_min> <q_max> <q_min>` records.
MarketInput parse_bids(std::istream& in, const std::string& origin = "<memory>");
MarketInput parse_bids_text(const std::string& text, const std::string& origin = "<memory>");
MarketInput read_bids_file(const std::filesystem::path& path);
void write_bids(std::ostream& out, const MarketInput& input);

/// One JSON object per agent, then a summary object.
void write_dispatch_jsonl(std::ostream& out, const Network& network, const Dispatch& dispatch);
Dispatch read_dispatch_jsonl(std::istream& in);

}  // namespace radmarket
