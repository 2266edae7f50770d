#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "radmarket/agents.hpp"
#include "radmarket/clearing.hpp"
#include "radmarket/dlmp.hpp"
#include "radmarket/network.hpp"
#include "radmarket/p2p.hpp"
#include "radmarket/scenario.hpp"

namespace radmarket {

enum class Phase { Idle, Market, Grid };

const char* to_string(Phase phase);

/// An action arrived outside the phase that consumes it, or on behalf of
/// another agent.
class PhaseViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class AccessDenied : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent environment setup (unknown bus, duplicate agent, strategy
/// not usable with the mechanism, bad parameters).
class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvConfig {
  Mechanism mechanism = Mechanism::Clearing;
  std::uint64_t seed = 1;
  int segments = 100;
  P2pConfig p2p;
  double lmp_source = 4.3;
  bool allow_agent_access = false;

  /// 1 for the auctions, T for P2P.
  int default_market_steps() const { return mechanism == Mechanism::P2p ? p2p.T : 1; }
};

/// Binding result of one P2P pair (or of an unmatched agent) for a grid step.
struct P2pTrade {
  std::string producer;
  std::string consumer;
  std::optional<NegotiationOutcome> outcome;
  double delivered_kw = 0.0;
  double demand_kw = 0.0;
  double deficiency_kw = 0.0;
  double deficiency_charge = 0.0;
};

/// The hub through which agents see the grid and the market and submit
/// actions. Everything outside the agent's own submissions is read-only.
class AgentContext {
 public:
  Phase phase() const { return phase_; }
  int t_grid() const { return t_grid_; }
  int t_market() const { return t_market_; }
  Mechanism mechanism() const { return config_->mechanism; }
  const EnvConfig& config() const { return *config_; }
  const Network& network() const { return *network_; }
  const GridState& grid() const { return *grid_; }

  std::optional<ScenarioEntry> scenario(const Agent& agent) const;
  std::optional<double> scenario_load(const Agent& agent) const;
  bool available(const Agent& agent) const;

  void submit_order(const Agent& self, const Curve& curve);
  void submit_p2p_bid(const Agent& self, double price);
  void submit_gen_offer(const Agent& self, const GenOffer& offer);
  void submit_dr_offer(const Agent& self, const DrOffer& offer);
  void submit_grid_action(const Agent& self, double kw);

  /// Side the agent trades on in the current P2P round, if matched.
  std::optional<Side> p2p_side(const Agent& agent) const;
  /// Outcome of the latest market step.
  const NegotiationOutcome* p2p_outcome(const Agent& agent) const;
  /// Binding trade after the market clears.
  const P2pTrade* p2p_trade(const Agent& agent) const;
  const std::vector<std::pair<std::string, std::string>>& p2p_pairs() const { return round_.pairs; }

  const Dispatch* clearing_result() const { return dispatch_ ? &*dispatch_ : nullptr; }
  const DlmpResult* dlmp_result() const { return dlmp_ ? &*dlmp_ : nullptr; }

  /// Market result for the agent in clearing terms: side, kW and price.
  std::optional<AgentDispatch> dispatch(const Agent& agent) const;
  /// kW at the agent's bus implied by the market, consumption positive.
  double dispatched_kw(const Agent& agent) const;

  /// Throws AccessDenied unless agent access is enabled in the config.
  const Agent& peer(const std::string& id) const;

 private:
  friend class Environment;

  void require_market(const Agent& self, const char* what) const;
  void clear_market();

  Phase phase_ = Phase::Idle;
  int t_grid_ = -1;
  int t_market_ = -1;
  const EnvConfig* config_ = nullptr;
  const Network* network_ = nullptr;
  const GridState* grid_ = nullptr;
  const Scenario* scenario_ = nullptr;
  const std::vector<std::unique_ptr<Agent>>* agents_ = nullptr;
  const std::map<std::string, std::size_t>* by_id_ = nullptr;
  const Agent* current_ = nullptr;

  std::map<std::string, Curve> orders_;
  std::map<std::string, double> p2p_bids_;
  std::map<std::string, GenOffer> gen_offers_;
  std::map<std::string, DrOffer> dr_offers_;
  std::vector<GridAction> grid_actions_;

  MatchRound round_;
  std::map<std::string, Side> p2p_pool_;
  std::map<std::string, Side> p2p_side_;
  std::map<std::string, NegotiationOutcome> p2p_last_;
  std::map<std::string, P2pTrade> p2p_trades_;
  std::optional<Dispatch> dispatch_;
  std::optional<DlmpResult> dlmp_;
  std::vector<std::string> dlmp_gens_;
  std::vector<std::string> dlmp_drs_;
};

struct LogRecord {
  std::string phase;
  int t_grid = -1;
  int t_market = -1;
  /// The full JSON object on one line.
  std::string json;
};

/// JSON-lines event log. With a sink attached, every record is written and
/// flushed as it is appended.
class EpisodeLog {
 public:
  void attach(std::ostream* sink) { sink_ = sink; }
  void clear() { records_.clear(); }
  void append(LogRecord record);

  const std::vector<LogRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t count(std::string_view phase) const;
  void write(std::ostream& out) const;

 private:
  std::vector<LogRecord> records_;
  std::ostream* sink_ = nullptr;
};

std::vector<LogRecord> read_episode_log(std::istream& in);

struct StepSummary {
  int t_grid = 0;
  bool feasible = true;
  std::size_t violated_lines = 0;
  double consumption_kw = 0.0;
  double generation_kw = 0.0;
  double feeder_flow_kw = 0.0;
  /// Quantity-weighted over consumer dispatches; NaN when nothing was bought.
  double mean_consumer_price = 0.0;
  double total_reward = 0.0;
  /// P2P only; NaN otherwise.
  double success_rate = 0.0;
};

void write_summary_csv(std::ostream& out, const std::vector<StepSummary>& rows);
std::vector<StepSummary> read_summary_csv(std::istream& in);

/// Per market step averages over the matched pairs.
struct TrajectoryPoint {
  int t_grid = 0;
  int t_market = 0;
  std::size_t pairs = 0;
  double success_rate = 0.0;
  double mean_b_p = 0.0;
  double mean_b_c = 0.0;
  double mean_r_p = 0.0;
  double mean_r_c = 0.0;
};

/// Adds trailing moving averages over `window` steps for every mean column.
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points, std::size_t window = 200);
std::vector<TrajectoryPoint> read_trajectory_csv(std::istream& in);

enum class Hook { PostMarketStep, PostClear, PostGridStep };

const char* to_string(Hook hook);

struct EnvSnapshot {
  Hook hook;
  int t_grid;
  int t_market;
  const AgentContext& hub;
  const LogRecord& record;
};

using Callback = std::function<void(const EnvSnapshot&)>;

/// Two-timescale episode driver: market steps nested inside grid steps.
class Environment {
 public:
  Environment(Network network, std::vector<std::unique_ptr<Agent>> agents, EnvConfig config, Scenario scenario = {});
  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  void reset();
  void reset(std::uint64_t seed);
  /// market_steps <= 0 selects the mechanism default. Requires a reset since
  /// the last episode. Market failures are logged, then rethrown.
  const EpisodeLog& run_episode(int grid_steps, int market_steps = 0);

  /// Callbacks fire in registration order and must not be added mid-episode.
  void register_callback(Hook hook, Callback sink);

  /// Every appended record also goes to `sink` (nullptr detaches).
  void attach_log(std::ostream* sink) { log_.attach(sink); }

  const EpisodeLog& log() const { return log_; }
  const std::vector<StepSummary>& summary() const { return summary_; }
  const std::vector<TrajectoryPoint>& trajectory() const { return trajectory_; }
  const Network& network() const { return grid_.network(); }
  const GridState& grid_state() const { return grid_.state(); }
  const EnvConfig& config() const { return config_; }
  const AgentContext& hub() const { return ctx_; }
  const std::vector<std::unique_ptr<Agent>>& agents() const { return agents_; }
  const Agent& agent(const std::string& id) const;

  /// Hex digest of clock, grid, market bookkeeping and agent state.
  std::string fingerprint() const;

 private:
  void begin_grid_step(int market_steps);
  void market_step();
  void clear_market();
  void grid_step();
  void emit(Hook hook, LogRecord record);

  Grid grid_;
  std::vector<std::unique_ptr<Agent>> agents_;
  std::map<std::string, std::size_t> by_id_;
  EnvConfig config_;
  Scenario scenario_;
  AgentContext ctx_;
  EpisodeLog log_;
  std::vector<StepSummary> summary_;
  std::vector<TrajectoryPoint> trajectory_;
  std::map<Hook, std::vector<Callback>> callbacks_;
  bool ready_ = false;
  bool running_ = false;
};

}  // namespace radmarket
