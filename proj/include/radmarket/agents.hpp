#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "radmarket/curves.hpp"
#include "radmarket/dlmp.hpp"
#include "radmarket/network.hpp"

namespace radmarket {

class AgentContext;

enum class Role { Producer, Consumer, Prosumer, DrProvider };
enum class Mechanism { Clearing, P2p, Dlmp };

const char* to_string(Role role);
const char* to_string(Mechanism mechanism);
Role parse_role(const std::string& name);
Mechanism parse_mechanism(const std::string& name);

/// Piecewise-linear function through the origin: a sequence of (width, slope)
/// blocks, at most four. Beyond the last block the last slope continues.
class PiecewiseLinear {
 public:
  struct Block {
    double width = 0.0;
    double slope = 0.0;
  };

  static constexpr std::size_t kMaxBlocks = 4;

  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<Block> blocks);
  static PiecewiseLinear linear(double slope);

  const std::vector<Block>& blocks() const { return blocks_; }
  double operator()(double q) const;
  bool convex() const;
  bool concave() const;

 private:
  std::vector<Block> blocks_;
};

/// Parses `width:slope,width:slope`; width may be `inf`.
PiecewiseLinear parse_piecewise(const std::string& text);
std::string format_piecewise(const PiecewiseLinear& f);

/// p*q - cost(q)
double supply_reward(double p, double q, const PiecewiseLinear& cost);
/// utility(q) - p*q
double demand_reward(double p, double q, const PiecewiseLinear& utility);

struct BanditState {
  std::vector<double> arms;
  std::vector<std::uint64_t> counts;
  std::vector<double> means;
  double delta = 0.01;

  BanditState() = default;
  BanditState(std::vector<double> arm_prices, double delta_ = 0.01);

  std::uint64_t pulls() const;
  /// Throws std::invalid_argument unless there is at least one arm and delta is in (0, 1).
  void validate() const;
};

/// +inf for an unsampled arm, else mean + sqrt(2 log(1/delta) / count).
double ucb_index(const BanditState& state, std::size_t arm, std::uint64_t t);
/// Highest index; the lowest arm wins ties.
std::size_t ucb_select(const BanditState& state);
void ucb_update(BanditState& state, std::size_t arm, double reward);
/// Select, observe the reward through `feed`, update.
std::size_t ucb_select_and_update(BanditState& state, const std::function<double(std::size_t)>& feed);

/// Evenly spaced arms lo, lo+step, ..., up to hi inclusive.
std::vector<double> arm_grid(double lo, double hi, double step);
/// `lo:hi:step` or a comma-separated list.
std::vector<double> parse_arms(const std::string& text);

class AgentConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base for all participants. The environment calls the action hooks in
/// roster order; every submission goes through the AgentContext of the
/// current phase.
class Agent {
 public:
  Agent(std::string id, BusId bus, Role role);
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  const std::string& id() const { return id_; }
  BusId bus() const { return bus_; }
  Role role() const { return role_; }

  virtual std::string strategy() const = 0;
  virtual bool supports(Mechanism mechanism) const = 0;
  /// False for agents that only act on the grid.
  virtual bool in_market() const { return true; }

  virtual void reset(std::uint64_t seed);
  virtual void set_market_actions(AgentContext& ctx);
  /// Called after every market step so learners can observe outcomes.
  virtual void market_feedback(AgentContext& ctx);
  /// Default: the dispatched or traded quantity at the agent's own bus.
  virtual void set_grid_actions(AgentContext& ctx);
  /// Reward for the grid step that just cleared.
  virtual double reward(const AgentContext& ctx) const;

  /// Hidden cost when supplying and utility when consuming.
  void set_private_value(PiecewiseLinear f) { private_ = std::move(f); }
  const std::optional<PiecewiseLinear>& private_value() const { return private_; }
  virtual double supply_cost(double q) const;
  virtual double demand_utility(double q) const;

  /// Text capturing all mutable state; feeds the environment fingerprint.
  virtual std::string state_digest() const;

 private:
  std::string id_;
  BusId bus_;
  Role role_;
  std::optional<PiecewiseLinear> private_;
};

/// Near-vertical demand at the price cap; the scenario load overrides `q`.
class InelasticConsumer : public Agent {
 public:
  InelasticConsumer(std::string id, BusId bus, double q_kw, double cap = 100.0);
  std::string strategy() const override { return "inelastic"; }
  bool supports(Mechanism m) const override { return m == Mechanism::Clearing || m == Mechanism::Dlmp; }
  void set_market_actions(AgentContext& ctx) override;
  double demand_utility(double q) const override;

  Curve bid(double q_kw) const;
  double quantity(const AgentContext& ctx) const;

 private:
  double q_kw_, cap_;
};

/// Fixed affine curve. A scenario load rescales both quantities.
class ElasticTrader : public Agent {
 public:
  ElasticTrader(std::string id, BusId bus, Role role, Curve curve);
  std::string strategy() const override { return "elastic"; }
  bool supports(Mechanism m) const override { return m == Mechanism::Clearing; }
  void set_market_actions(AgentContext& ctx) override;
  double supply_cost(double q) const override;
  double demand_utility(double q) const override;

  const Curve& curve() const { return curve_; }
  Curve curve_at(const AgentContext& ctx) const;

 private:
  Curve curve_;
};

/// Horizontal supply curve, e.g. the feeder at the wholesale price.
class FlatSupplier : public Agent {
 public:
  FlatSupplier(std::string id, BusId bus, double price, double q_max);
  std::string strategy() const override { return "flat_supply"; }
  bool supports(Mechanism m) const override { return m == Mechanism::Clearing; }
  void set_market_actions(AgentContext& ctx) override;
  double supply_cost(double q) const override;

  Curve offer() const { return Curve(Side::Supply, price_, price_, q_max_, 0.0); }

 private:
  double price_, q_max_;
};

/// P2P negotiator with one bandit per side. Prosumers sell while available
/// and buy otherwise.
class UcbTrader : public Agent {
 public:
  UcbTrader(std::string id, BusId bus, Role role, std::vector<double> sell_arms, std::vector<double> buy_arms,
            double delta = 0.01);
  std::string strategy() const override { return "ucb"; }
  bool supports(Mechanism m) const override { return m == Mechanism::P2p; }
  void reset(std::uint64_t seed) override;
  void set_market_actions(AgentContext& ctx) override;
  void market_feedback(AgentContext& ctx) override;
  std::string state_digest() const override;

  const BanditState& sell_state() const { return sell_; }
  const BanditState& buy_state() const { return buy_; }

 private:
  BanditState sell_, buy_;
  std::optional<std::pair<Side, std::size_t>> pending_;
};

/// Exogenous load or PV (negative kW) read from a `t,kw` CSV; takes no part
/// in the market. Steps missing from the file act 0 kW.
class ScriptedAgent : public Agent {
 public:
  ScriptedAgent(std::string id, BusId bus, Role role, std::map<int, double> series, std::string source);
  std::string strategy() const override { return "scripted:" + source_; }
  bool supports(Mechanism) const override { return true; }
  bool in_market() const override { return false; }
  void set_grid_actions(AgentContext& ctx) override;
  double reward(const AgentContext& ctx) const override;

  double at(int t) const;

 private:
  std::map<int, double> series_;
  std::string source_;
};

std::map<int, double> parse_series(std::istream& in, const std::string& origin = "<memory>");
std::map<int, double> read_series_file(const std::filesystem::path& path);

/// Dispatchable generator in the SCOPF. Unavailable steps offer nothing.
class GenAgent : public Agent {
 public:
  GenAgent(std::string id, BusId bus, double pmin, double pmax, std::vector<CostBlock> blocks);
  std::string strategy() const override { return "gen"; }
  bool supports(Mechanism m) const override { return m == Mechanism::Dlmp; }
  void set_market_actions(AgentContext& ctx) override;
  double supply_cost(double q) const override;

  GenOffer offer() const { return {id(), bus(), pmin_, pmax_, blocks_}; }

 private:
  double pmin_, pmax_;
  std::vector<CostBlock> blocks_;
};

/// Load offering priced reductions from its baseline; the scenario load
/// overrides the baseline. Reward is payment for reduction less its cost.
class DrAgent : public Agent {
 public:
  DrAgent(std::string id, BusId bus, double baseline, std::vector<CostBlock> blocks);
  std::string strategy() const override { return "dr"; }
  bool supports(Mechanism m) const override { return m == Mechanism::Dlmp; }
  void set_market_actions(AgentContext& ctx) override;
  double supply_cost(double reduction) const override;
  double reward(const AgentContext& ctx) const override;

  double baseline(const AgentContext& ctx) const;

 private:
  double baseline_;
  std::vector<CostBlock> blocks_;
};

/// One roster line: `agent <id> <bus> <role> <strategy> [key=value ...]`.
struct RosterEntry {
  std::string id;
  BusId bus;
  Role role = Role::Consumer;
  std::string strategy;
  std::map<std::string, std::string> params;
  int source_line = 0;
};

std::vector<RosterEntry> parse_roster(std::istream& in, const std::string& origin = "<memory>");
std::vector<RosterEntry> parse_roster_text(const std::string& text, const std::string& origin = "<memory>");
std::vector<RosterEntry> read_roster_file(const std::filesystem::path& path);
void write_roster(std::ostream& out, const std::vector<RosterEntry>& roster);

/// Relative `scripted:` paths resolve against `base_dir`. Throws AgentConfigError.
std::unique_ptr<Agent> make_agent(const RosterEntry& entry, const std::filesystem::path& base_dir = {});
std::vector<std::unique_ptr<Agent>> make_agents(const std::vector<RosterEntry>& roster,
                                                const std::filesystem::path& base_dir = {});

}  // namespace radmarket
