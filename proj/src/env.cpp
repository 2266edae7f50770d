#include "radmarket/env.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "radmarket/rng.hpp"
#include "radmarket/text.hpp"

namespace radmarket {

using ojson = nlohmann::ordered_json;

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "idle";
    case Phase::Market: return "market";
    case Phase::Grid: return "grid";
  }
  return "?";
}

const char* to_string(Hook hook) {
  switch (hook) {
    case Hook::PostMarketStep: return "post_market_step";
    case Hook::PostClear: return "post_clear";
    case Hook::PostGridStep: return "post_grid_step";
  }
  return "?";
}

// ---- hub

std::optional<ScenarioEntry> AgentContext::scenario(const Agent& agent) const {
  if (!scenario_) return std::nullopt;
  return scenario_->at(t_grid_, agent.id());
}

std::optional<double> AgentContext::scenario_load(const Agent& agent) const {
  auto e = scenario(agent);
  return e ? e->load_kw : std::nullopt;
}

bool AgentContext::available(const Agent& agent) const {
  auto e = scenario(agent);
  return !(e && e->available) || *e->available;
}

void AgentContext::require_market(const Agent& self, const char* what) const {
  if (phase_ != Phase::Market) {
    throw PhaseViolation(std::string(what) + " from agent '" + self.id() + "' outside the market phase (phase " +
                         to_string(phase_) + ", grid step " + std::to_string(t_grid_) + ")");
  }
  if (current_ != &self) throw PhaseViolation("agent '" + self.id() + "' submitted outside its own turn");
}

void AgentContext::submit_order(const Agent& self, const Curve& curve) {
  require_market(self, "order");
  if (mechanism() != Mechanism::Clearing) throw EnvError("orders are only accepted by the clearing market");
  orders_.insert_or_assign(self.id(), curve);
}

void AgentContext::submit_p2p_bid(const Agent& self, double price) {
  require_market(self, "p2p bid");
  if (mechanism() != Mechanism::P2p) throw EnvError("bids are only accepted by the p2p market");
  if (!p2p_side_.count(self.id())) throw EnvError("agent '" + self.id() + "' is not matched this round");
  if (!std::isfinite(price)) throw EnvError("agent '" + self.id() + "' submitted a non-finite bid");
  p2p_bids_[self.id()] = price;
}

void AgentContext::submit_gen_offer(const Agent& self, const GenOffer& offer) {
  require_market(self, "generator offer");
  if (mechanism() != Mechanism::Dlmp) throw EnvError("generator offers are only accepted by the dlmp market");
  GenOffer o = offer;
  o.agent = self.id();
  o.bus = self.bus();
  gen_offers_.insert_or_assign(self.id(), std::move(o));
}

void AgentContext::submit_dr_offer(const Agent& self, const DrOffer& offer) {
  require_market(self, "demand response offer");
  if (mechanism() != Mechanism::Dlmp) throw EnvError("load offers are only accepted by the dlmp market");
  DrOffer o = offer;
  o.agent = self.id();
  o.bus = self.bus();
  dr_offers_.insert_or_assign(self.id(), std::move(o));
}

void AgentContext::submit_grid_action(const Agent& self, double kw) {
  if (phase_ != Phase::Grid) {
    throw PhaseViolation("grid action from agent '" + self.id() + "' during " + to_string(phase_) +
                         " phase (grid step " + std::to_string(t_grid_) + ", market step " +
                         std::to_string(t_market_) + ")");
  }
  if (current_ != &self) throw PhaseViolation("agent '" + self.id() + "' acted outside its own turn");
  if (!std::isfinite(kw)) throw EnvError("agent '" + self.id() + "' submitted a non-finite grid action");
  grid_actions_.push_back({self.id(), self.bus(), kw});
}

std::optional<Side> AgentContext::p2p_side(const Agent& agent) const {
  auto it = p2p_side_.find(agent.id());
  if (it == p2p_side_.end()) return std::nullopt;
  return it->second;
}

const NegotiationOutcome* AgentContext::p2p_outcome(const Agent& agent) const {
  auto it = p2p_last_.find(agent.id());
  return it == p2p_last_.end() ? nullptr : &it->second;
}

const P2pTrade* AgentContext::p2p_trade(const Agent& agent) const {
  auto it = p2p_trades_.find(agent.id());
  return it == p2p_trades_.end() ? nullptr : &it->second;
}

std::optional<AgentDispatch> AgentContext::dispatch(const Agent& agent) const {
  switch (mechanism()) {
    case Mechanism::Clearing:
      if (dispatch_) {
        if (const AgentDispatch* d = dispatch_->find(agent.id())) return *d;
      }
      return std::nullopt;
    case Mechanism::Dlmp:
      if (!dlmp_) return std::nullopt;
      for (std::size_t i = 0; i < dlmp_gens_.size(); ++i) {
        if (dlmp_gens_[i] == agent.id()) {
          const double p = dlmp_->dlmp[network_->require_index(agent.bus())];
          return AgentDispatch{agent.id(), agent.bus(), Side::Supply, dlmp_->gen_output[i], p};
        }
      }
      for (std::size_t i = 0; i < dlmp_drs_.size(); ++i) {
        if (dlmp_drs_[i] == agent.id()) {
          const double p = dlmp_->dlmp[network_->require_index(agent.bus())];
          return AgentDispatch{agent.id(), agent.bus(), Side::Demand, dlmp_->dr_load[i], p};
        }
      }
      return std::nullopt;
    case Mechanism::P2p: {
      const P2pTrade* t = p2p_trade(agent);
      if (!t) return std::nullopt;
      const double p = t->outcome && t->outcome->trade_price ? *t->outcome->trade_price : 0.0;
      const Side side = t->producer == agent.id() ? Side::Supply : Side::Demand;
      return AgentDispatch{agent.id(), agent.bus(), side, t->delivered_kw, p};
    }
  }
  return std::nullopt;
}

double AgentContext::dispatched_kw(const Agent& agent) const {
  if (mechanism() == Mechanism::P2p) {
    const P2pTrade* t = p2p_trade(agent);
    if (!t) return 0.0;
    return t->producer == agent.id() ? -t->delivered_kw : t->demand_kw;
  }
  auto d = dispatch(agent);
  if (!d) return 0.0;
  return d->side == Side::Demand ? d->q : -d->q;
}

const Agent& AgentContext::peer(const std::string& id) const {
  if (!config_->allow_agent_access) throw AccessDenied("agent-to-agent access is disabled (allow_agent_access)");
  auto it = by_id_->find(id);
  if (it == by_id_->end()) throw AccessDenied("no agent '" + id + "'");
  return *(*agents_)[it->second];
}

void AgentContext::clear_market() {
  orders_.clear();
  p2p_bids_.clear();
  gen_offers_.clear();
  dr_offers_.clear();
  grid_actions_.clear();
  round_ = MatchRound{};
  p2p_pool_.clear();
  p2p_side_.clear();
  p2p_last_.clear();
  p2p_trades_.clear();
  dispatch_.reset();
  dlmp_.reset();
  dlmp_gens_.clear();
  dlmp_drs_.clear();
}

// ---- log

void EpisodeLog::append(LogRecord record) {
  if (sink_) {
    *sink_ << record.json << '\n';
    sink_->flush();
  }
  records_.push_back(std::move(record));
}

std::size_t EpisodeLog::count(std::string_view phase) const {
  std::size_t n = 0;
  for (const auto& r : records_) n += r.phase == phase;
  return n;
}

void EpisodeLog::write(std::ostream& out) const {
  for (const auto& r : records_) out << r.json << '\n';
}

std::vector<LogRecord> read_episode_log(std::istream& in) {
  std::vector<LogRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("phase").get<std::string>(), j.at("t_grid").get<int>(), j.at("t_market").get<int>(), line});
    } catch (const nlohmann::json::exception& e) {
      throw text::ParseError("episode log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---- csv outputs

namespace {

std::string cell(double v) { return std::isnan(v) ? std::string() : text::format_double(v); }

double parse_cell(std::string_view s) {
  s = text::trim(s);
  return s.empty() ? std::numeric_limits<double>::quiet_NaN() : text::parse_double(s);
}

std::vector<std::vector<std::string>> read_rows(std::istream& in, const std::string& header, std::size_t width) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int lineno = 0;
  bool seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = text::trim(line);
    if (t.empty()) continue;
    if (!seen) {
      if (t != header) throw text::ParseError("line " + std::to_string(lineno) + ": expected header " + header);
      seen = true;
      continue;
    }
    auto f = text::split(t, ',');
    if (f.size() < width) throw text::ParseError("line " + std::to_string(lineno) + ": too few fields");
    rows.push_back(std::move(f));
  }
  if (!seen) throw text::ParseError("missing header " + header);
  return rows;
}

const char* kSummaryHeader =
    "t_grid,feasible,violated_lines,consumption_kw,generation_kw,feeder_flow_kw,mean_consumer_price,total_reward,"
    "success_rate";
const char* kTrajectoryHeader =
    "t_grid,t_market,pairs,success_rate,mean_b_p,mean_b_c,mean_r_p,mean_r_c,ma_success_rate,ma_b_p,ma_b_c,ma_r_p,"
    "ma_r_c";

// Trailing mean that ignores steps without pairs.
std::vector<double> trailing_mean(const std::vector<double>& v, std::size_t window) {
  std::vector<double> out(v.size());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isnan(v[i])) sum += v[i], ++n;
    if (i >= window && !std::isnan(v[i - window])) sum -= v[i - window], --n;
    out[i] = n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace

void write_summary_csv(std::ostream& out, const std::vector<StepSummary>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.t_grid << ',' << (r.feasible ? 1 : 0) << ',' << r.violated_lines << ',' << cell(r.consumption_kw) << ','
        << cell(r.generation_kw) << ',' << cell(r.feeder_flow_kw) << ',' << cell(r.mean_consumer_price) << ','
        << cell(r.total_reward) << ',' << cell(r.success_rate) << '\n';
  }
}

std::vector<StepSummary> read_summary_csv(std::istream& in) {
  std::vector<StepSummary> out;
  for (const auto& f : read_rows(in, kSummaryHeader, 9)) {
    StepSummary s;
    s.t_grid = text::parse_int(f[0]);
    s.feasible = text::parse_bool(f[1]);
    s.violated_lines = static_cast<std::size_t>(text::parse_int(f[2]));
    s.consumption_kw = parse_cell(f[3]);
    s.generation_kw = parse_cell(f[4]);
    s.feeder_flow_kw = parse_cell(f[5]);
    s.mean_consumer_price = parse_cell(f[6]);
    s.total_reward = parse_cell(f[7]);
    s.success_rate = parse_cell(f[8]);
    out.push_back(s);
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryPoint>& points, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving-average window must be positive");
  std::vector<double> sr, bp, bc, rp, rc;
  for (const auto& p : points) {
    sr.push_back(p.success_rate);
    bp.push_back(p.mean_b_p);
    bc.push_back(p.mean_b_c);
    rp.push_back(p.mean_r_p);
    rc.push_back(p.mean_r_c);
  }
  auto msr = trailing_mean(sr, window), mbp = trailing_mean(bp, window), mbc = trailing_mean(bc, window),
       mrp = trailing_mean(rp, window), mrc = trailing_mean(rc, window);
  out << kTrajectoryHeader << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    out << p.t_grid << ',' << p.t_market << ',' << p.pairs << ',' << cell(p.success_rate) << ',' << cell(p.mean_b_p)
        << ',' << cell(p.mean_b_c) << ',' << cell(p.mean_r_p) << ',' << cell(p.mean_r_c) << ',' << cell(msr[i]) << ','
        << cell(mbp[i]) << ',' << cell(mbc[i]) << ',' << cell(mrp[i]) << ',' << cell(mrc[i]) << '\n';
  }
}

std::vector<TrajectoryPoint> read_trajectory_csv(std::istream& in) {
  std::vector<TrajectoryPoint> out;
  for (const auto& f : read_rows(in, kTrajectoryHeader, 13)) {
    TrajectoryPoint p;
    p.t_grid = text::parse_int(f[0]);
    p.t_market = text::parse_int(f[1]);
    p.pairs = static_cast<std::size_t>(text::parse_int(f[2]));
    p.success_rate = parse_cell(f[3]);
    p.mean_b_p = parse_cell(f[4]);
    p.mean_b_c = parse_cell(f[5]);
    p.mean_r_p = parse_cell(f[6]);
    p.mean_r_c = parse_cell(f[7]);
    out.push_back(p);
  }
  return out;
}

// ---- environment

namespace {

ojson head(const char* phase, int t_grid, int t_market) {
  ojson j;
  j["phase"] = phase;
  j["t_grid"] = t_grid;
  j["t_market"] = t_market;
  return j;
}

LogRecord make_record(const ojson& j) {
  return {j.at("phase").get<std::string>(), j.at("t_grid").get<int>(), j.at("t_market").get<int>(), j.dump()};
}

ojson blocks_json(const std::vector<CostBlock>& blocks) {
  ojson a = ojson::array();
  for (const auto& b : blocks) a.push_back({b.qty, b.price});
  return a;
}

ojson dispatch_json(const AgentDispatch& d) {
  return {{"agent", d.agent}, {"bus", d.bus.value}, {"side", to_string(d.side)}, {"q_kw", d.q},
          {"price_c_per_kwh", d.p}};
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

Environment::Environment(Network network, std::vector<std::unique_ptr<Agent>> agents, EnvConfig config,
                         Scenario scenario)
    : grid_(std::move(network)), agents_(std::move(agents)), config_(config), scenario_(std::move(scenario)) {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Agent& a = *agents_[i];
    if (!by_id_.emplace(a.id(), i).second) throw EnvError("duplicate agent id '" + a.id() + "'");
    if (!grid_.network().index_of(a.bus())) {
      throw EnvError("agent '" + a.id() + "' is placed at unknown bus " + std::to_string(a.bus().value));
    }
    if (!a.supports(config_.mechanism)) {
      throw EnvError("agent '" + a.id() + "' uses strategy " + a.strategy() + ", which the " +
                     to_string(config_.mechanism) + " market does not accept");
    }
  }
  if (config_.segments < 1) throw EnvError("segments must be >= 1");
  if (config_.mechanism == Mechanism::P2p) {
    try {
      config_.p2p.validate();
    } catch (const std::invalid_argument& e) {
      throw EnvError(std::string("p2p: ") + e.what());
    }
    if (!(config_.p2p.trade_quantity > 0.0)) throw EnvError("p2p: trade quantity must be positive");
    if (!(config_.p2p.retail_price >= 0.0)) throw EnvError("p2p: retail price must be >= 0");
  }
  if (config_.mechanism == Mechanism::Dlmp && !(config_.lmp_source >= 0.0 && std::isfinite(config_.lmp_source))) {
    throw EnvError("lmp_source must be finite and >= 0");
  }
  ctx_.config_ = &config_;
  ctx_.network_ = &grid_.network();
  ctx_.grid_ = &grid_.state();
  ctx_.scenario_ = &scenario_;
  ctx_.agents_ = &agents_;
  ctx_.by_id_ = &by_id_;
}

const Agent& Environment::agent(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::out_of_range("no agent '" + id + "'");
  return *agents_[it->second];
}

void Environment::register_callback(Hook hook, Callback sink) {
  if (running_) throw std::logic_error("callbacks cannot be registered during an episode");
  callbacks_[hook].push_back(std::move(sink));
}

void Environment::reset(std::uint64_t seed) {
  config_.seed = seed;
  reset();
}

void Environment::reset() {
  if (running_) throw std::logic_error("reset during an episode");
  grid_.reset();
  ctx_.clear_market();
  ctx_.phase_ = Phase::Idle;
  ctx_.t_grid_ = -1;
  ctx_.t_market_ = -1;
  ctx_.current_ = nullptr;
  for (std::size_t i = 0; i < agents_.size(); ++i) agents_[i]->reset(derive_seed(config_.seed, 1000003u + i));
  log_.clear();
  summary_.clear();
  trajectory_.clear();

  ojson j = head("reset", -1, -1);
  j["mechanism"] = to_string(config_.mechanism);
  j["seed"] = config_.seed;
  j["buses"] = grid_.network().bus_count();
  j["lines"] = grid_.network().line_count();
  ojson roster = ojson::array();
  for (const auto& a : agents_) {
    roster.push_back({{"agent", a->id()}, {"bus", a->bus().value}, {"role", to_string(a->role())},
                      {"strategy", a->strategy()}});
  }
  j["agents"] = roster;
  log_.append(make_record(j));
  ready_ = true;
}

void Environment::emit(Hook hook, LogRecord record) {
  log_.append(std::move(record));
  const LogRecord& stored = log_.records().back();
  auto it = callbacks_.find(hook);
  if (it == callbacks_.end()) return;
  const EnvSnapshot snap{hook, ctx_.t_grid_, ctx_.t_market_, ctx_, stored};
  for (const auto& cb : it->second) cb(snap);
}

const EpisodeLog& Environment::run_episode(int grid_steps, int market_steps) {
  if (running_) throw std::logic_error("episode already running");
  if (!ready_) throw std::logic_error("reset() must be called before run_episode()");
  if (grid_steps < 0) throw std::invalid_argument("grid_steps must be >= 0");
  if (market_steps <= 0) market_steps = config_.default_market_steps();
  ready_ = false;
  running_ = true;
  struct Guard {
    bool& flag;
    AgentContext& ctx;
    ~Guard() {
      flag = false;
      ctx.phase_ = Phase::Idle;
      ctx.current_ = nullptr;
    }
  } guard{running_, ctx_};

  try {
    for (int g = 0; g < grid_steps; ++g) {
      ctx_.t_grid_ = g;
      begin_grid_step(market_steps);
      for (int m = 0; m < market_steps; ++m) {
        ctx_.t_market_ = m;
        market_step();
      }
      clear_market();
      grid_step();
    }
  } catch (const std::exception& e) {
    ojson j = head("error", ctx_.t_grid_, ctx_.t_market_);
    const char* kind = "runtime";
    if (dynamic_cast<const PhaseViolation*>(&e)) kind = "phase_violation";
    if (auto* ce = dynamic_cast<const ClearingError*>(&e)) {
      kind = ce->code() == ClearingErrc::SettlementInfeasible ? "settlement_infeasible" : "invalid_market";
      j["agents"] = ce->agents();
    }
    if (auto* de = dynamic_cast<const DlmpError*>(&e)) {
      kind = "dlmp";
      j["lines"] = de->lines();
    }
    j["kind"] = kind;
    j["message"] = e.what();
    log_.append(make_record(j));
    throw;
  }
  return log_;
}

void Environment::begin_grid_step(int market_steps) {
  ctx_.clear_market();
  if (config_.mechanism != Mechanism::P2p) return;
  std::vector<std::string> producers, consumers;
  for (const auto& a : agents_) {
    if (!a->in_market()) continue;
    const bool sells = (a->role() == Role::Producer || a->role() == Role::Prosumer) && ctx_.available(*a);
    (sells ? producers : consumers).push_back(a->id());
    ctx_.p2p_pool_[a->id()] = sells ? Side::Supply : Side::Demand;
  }
  ctx_.round_ = match(producers, consumers, derive_seed(config_.seed, static_cast<std::uint64_t>(ctx_.t_grid_)),
                      market_steps);
  for (const auto& [p, c] : ctx_.round_.pairs) {
    ctx_.p2p_side_[p] = Side::Supply;
    ctx_.p2p_side_[c] = Side::Demand;
  }
}

void Environment::market_step() {
  ctx_.phase_ = Phase::Market;
  ctx_.orders_.clear();
  ctx_.p2p_bids_.clear();
  ctx_.gen_offers_.clear();
  ctx_.dr_offers_.clear();
  for (const auto& a : agents_) {
    ctx_.current_ = a.get();
    a->set_market_actions(ctx_);
  }
  ctx_.current_ = nullptr;

  ojson j = head("market_step", ctx_.t_grid_, ctx_.t_market_);
  j["mechanism"] = to_string(config_.mechanism);
  switch (config_.mechanism) {
    case Mechanism::Clearing: {
      ojson orders = ojson::array();
      for (const auto& a : agents_) {
        auto it = ctx_.orders_.find(a->id());
        if (it == ctx_.orders_.end()) continue;
        const Curve& c = it->second;
        orders.push_back({{"agent", a->id()}, {"bus", a->bus().value}, {"side", to_string(c.side())},
                          {"p_max", c.p_max()}, {"p_min", c.p_min()}, {"q_max", c.q_max()}, {"q_min", c.q_min()}});
      }
      j["orders"] = orders;
      break;
    }
    case Mechanism::Dlmp: {
      ojson gens = ojson::array(), drs = ojson::array();
      for (const auto& a : agents_) {
        if (auto it = ctx_.gen_offers_.find(a->id()); it != ctx_.gen_offers_.end()) {
          const GenOffer& o = it->second;
          gens.push_back({{"agent", o.agent}, {"bus", o.bus.value}, {"pmin", o.pmin}, {"pmax", o.pmax},
                          {"blocks", blocks_json(o.blocks)}});
        }
        if (auto it = ctx_.dr_offers_.find(a->id()); it != ctx_.dr_offers_.end()) {
          const DrOffer& o = it->second;
          drs.push_back({{"agent", o.agent}, {"bus", o.bus.value}, {"baseline", o.baseline},
                         {"blocks", blocks_json(o.blocks)}});
        }
      }
      j["gen_offers"] = gens;
      j["dr_offers"] = drs;
      break;
    }
    case Mechanism::P2p: {
      ojson pairs = ojson::array();
      TrajectoryPoint tp;
      tp.t_grid = ctx_.t_grid_;
      tp.t_market = ctx_.t_market_;
      tp.pairs = ctx_.round_.pairs.size();
      double succ = 0.0, bp = 0.0, bc = 0.0, rp = 0.0, rc = 0.0;
      for (const auto& [p, c] : ctx_.round_.pairs) {
        auto ip = ctx_.p2p_bids_.find(p), ic = ctx_.p2p_bids_.find(c);
        if (ip == ctx_.p2p_bids_.end()) throw EnvError("matched producer '" + p + "' submitted no bid");
        if (ic == ctx_.p2p_bids_.end()) throw EnvError("matched consumer '" + c + "' submitted no bid");
        const NegotiationOutcome o = negotiate(ip->second, ic->second, config_.p2p);
        ctx_.p2p_last_[p] = o;
        ctx_.p2p_last_[c] = o;
        succ += o.success;
        bp += o.b_p;
        bc += o.b_c;
        rp += o.r_p;
        rc += o.r_c;
        ojson rec = {{"producer", p}, {"consumer", c}, {"b_p", o.b_p}, {"b_c", o.b_c}, {"success", o.success}};
        rec["price"] = o.trade_price ? ojson(*o.trade_price) : ojson(nullptr);
        rec["r_p"] = o.r_p;
        rec["r_c"] = o.r_c;
        pairs.push_back(rec);
      }
      const double n = static_cast<double>(tp.pairs);
      tp.success_rate = tp.pairs ? succ / n : kNaN;
      tp.mean_b_p = tp.pairs ? bp / n : kNaN;
      tp.mean_b_c = tp.pairs ? bc / n : kNaN;
      tp.mean_r_p = tp.pairs ? rp / n : kNaN;
      tp.mean_r_c = tp.pairs ? rc / n : kNaN;
      trajectory_.push_back(tp);
      j["pairs"] = pairs;
      j["unmatched"] = ctx_.round_.unmatched;
      break;
    }
  }

  for (const auto& a : agents_) {
    ctx_.current_ = a.get();
    a->market_feedback(ctx_);
  }
  ctx_.current_ = nullptr;
  emit(Hook::PostMarketStep, make_record(j));
}

void Environment::clear_market() {
  ctx_.phase_ = Phase::Idle;
  const Network& net = grid_.network();
  ojson j = head("clear", ctx_.t_grid_, ctx_.t_market_);
  j["mechanism"] = to_string(config_.mechanism);
  ojson entries = ojson::array();
  switch (config_.mechanism) {
    case Mechanism::Clearing: {
      MarketInput input;
      for (const auto& a : agents_) {
        auto it = ctx_.orders_.find(a->id());
        if (it == ctx_.orders_.end()) continue;
        Order o{a->id(), a->bus(), it->second};
        (it->second.side() == Side::Demand ? input.bids : input.offers).push_back(o);
      }
      ctx_.dispatch_ = clear(net, input, ClearOptions{config_.segments});
      const Dispatch& d = *ctx_.dispatch_;
      for (const auto& e : d.entries) entries.push_back(dispatch_json(e));
      j["dispatch"] = entries;
      j["total_surplus"] = d.total_surplus;
      j["block_surplus"] = d.block_surplus;
      j["lambda"] = d.lambda;
      j["no_trade"] = d.no_trade;
      j["binding_lines"] = d.binding_lines;
      ojson nodal = ojson::array();
      for (std::size_t b = 0; b < d.nodal_prices.size(); ++b) {
        nodal.push_back({{"bus", net.bus_id(b).value}, {"price", d.nodal_prices[b]}});
      }
      j["nodal_prices"] = nodal;
      break;
    }
    case Mechanism::Dlmp: {
      ScopfInput input;
      input.lmp_source = config_.lmp_source;
      for (const auto& a : agents_) {
        if (auto it = ctx_.gen_offers_.find(a->id()); it != ctx_.gen_offers_.end()) {
          input.gens.push_back(it->second);
          ctx_.dlmp_gens_.push_back(a->id());
        }
        if (auto it = ctx_.dr_offers_.find(a->id()); it != ctx_.dr_offers_.end()) {
          input.drs.push_back(it->second);
          ctx_.dlmp_drs_.push_back(a->id());
        }
      }
      ctx_.dlmp_ = solve_dlmp(net, input);
      const DlmpResult& r = *ctx_.dlmp_;
      for (const auto& a : agents_) {
        if (auto d = ctx_.dispatch(*a)) entries.push_back(dispatch_json(*d));
      }
      j["dispatch"] = entries;
      ojson prices = ojson::array();
      for (std::size_t b = 0; b < net.bus_count(); ++b) {
        prices.push_back({{"bus", net.bus_id(b).value}, {"dlmp", r.dlmp[b]}, {"p_g", r.p_g[b]}, {"p_d", r.p_d[b]}});
      }
      j["dlmp"] = prices;
      j["lambda"] = r.lambda;
      j["p_source"] = r.p_source;
      j["objective"] = r.objective;
      j["binding_lines"] = r.binding_lines;
      break;
    }
    case Mechanism::P2p: {
      const P2pConfig& cfg = config_.p2p;
      auto demand_of = [&](const std::string& id) {
        const Agent& a = agent(id);
        return std::max(0.0, ctx_.scenario_load(a).value_or(cfg.trade_quantity));
      };
      std::vector<std::string> order;
      for (const auto& [p, c] : ctx_.round_.pairs) {
        P2pTrade t;
        t.producer = p;
        t.consumer = c;
        t.outcome = ctx_.p2p_last_.at(p);
        t.demand_kw = demand_of(c);
        t.delivered_kw = t.outcome->success ? std::min(cfg.trade_quantity, t.demand_kw) : 0.0;
        t.deficiency_kw = t.demand_kw - t.delivered_kw;
        t.deficiency_charge = settle_deficiency(t.delivered_kw, t.demand_kw, cfg.retail_price);
        ctx_.p2p_trades_[p] = t;
        ctx_.p2p_trades_[c] = t;
        order.push_back(p);
      }
      for (const auto& id : ctx_.round_.unmatched) {
        P2pTrade t;
        if (ctx_.p2p_pool_.at(id) == Side::Supply) {
          t.producer = id;
        } else {
          t.consumer = id;
          t.demand_kw = demand_of(id);
          t.deficiency_kw = t.demand_kw;
          t.deficiency_charge = settle_deficiency(0.0, t.demand_kw, cfg.retail_price);
        }
        ctx_.p2p_trades_[id] = t;
        order.push_back(id);
      }
      ojson trades = ojson::array();
      for (const auto& id : order) {
        const P2pTrade& t = ctx_.p2p_trades_.at(id);
        ojson rec = {{"producer", t.producer.empty() ? ojson(nullptr) : ojson(t.producer)},
                     {"consumer", t.consumer.empty() ? ojson(nullptr) : ojson(t.consumer)}};
        rec["success"] = t.outcome && t.outcome->success;
        rec["price"] = t.outcome && t.outcome->trade_price ? ojson(*t.outcome->trade_price) : ojson(nullptr);
        rec["delivered_kw"] = t.delivered_kw;
        rec["demand_kw"] = t.demand_kw;
        rec["deficiency_kw"] = t.deficiency_kw;
        rec["deficiency_charge"] = t.deficiency_charge;
        trades.push_back(rec);
      }
      j["trades"] = trades;
      break;
    }
  }
  emit(Hook::PostClear, make_record(j));
}

void Environment::grid_step() {
  ctx_.phase_ = Phase::Grid;
  ctx_.grid_actions_.clear();
  for (const auto& a : agents_) {
    ctx_.current_ = a.get();
    a->set_grid_actions(ctx_);
  }
  ctx_.current_ = nullptr;
  const GridState& st = grid_.step(ctx_.grid_actions_);
  const Network& net = grid_.network();

  StepSummary s;
  s.t_grid = ctx_.t_grid_;
  s.feasible = st.feasible;
  auto violated = net.violated_lines(st.flows);
  s.violated_lines = violated.size();
  for (std::size_t b = 1; b < st.injections.size(); ++b) {
    if (st.injections[b] > 0.0) s.consumption_kw += st.injections[b];
    if (st.injections[b] < 0.0) s.generation_kw -= st.injections[b];
  }
  s.feeder_flow_kw = net.feeder_flow(st.flows);

  ojson j = head("grid_step", ctx_.t_grid_, -1);
  j["t"] = st.t;
  ojson actions = ojson::array();
  for (const auto& a : ctx_.grid_actions_) actions.push_back({{"agent", a.agent}, {"bus", a.bus.value}, {"kw", a.kw}});
  j["actions"] = actions;
  ojson inj = ojson::array();
  for (std::size_t b = 0; b < net.bus_count(); ++b) inj.push_back({{"bus", net.bus_id(b).value}, {"kw", st.injections[b]}});
  j["injections"] = inj;
  ojson flows = ojson::array();
  for (std::size_t l = 0; l < net.line_count(); ++l) flows.push_back({{"line", net.line(l).id}, {"flow_kw", st.flows[l]}});
  j["flows"] = flows;
  j["feeder_flow_kw"] = s.feeder_flow_kw;
  j["feasible"] = st.feasible;
  ojson vio = ojson::array();
  for (auto l : violated) vio.push_back(net.line(l).id);
  j["violated_lines"] = vio;

  ojson rewards = ojson::array();
  double paid = 0.0, bought = 0.0;
  for (const auto& a : agents_) {
    if (!a->in_market()) continue;
    const double r = a->reward(ctx_);
    s.total_reward += r;
    rewards.push_back({{"agent", a->id()}, {"reward", r}});
    if (config_.mechanism == Mechanism::P2p) {
      const P2pTrade* t = ctx_.p2p_trade(*a);
      if (t && t->consumer == a->id() && t->demand_kw > 0.0) {
        const double price = t->outcome && t->outcome->trade_price ? *t->outcome->trade_price : 0.0;
        paid += price * t->delivered_kw + t->deficiency_charge;
        bought += t->demand_kw;
      }
    } else if (auto d = ctx_.dispatch(*a); d && d->side == Side::Demand && d->q > 0.0) {
      paid += d->p * d->q;
      bought += d->q;
    }
  }
  j["rewards"] = rewards;
  s.mean_consumer_price = bought > 0.0 ? paid / bought : kNaN;
  if (config_.mechanism == Mechanism::P2p && !ctx_.round_.pairs.empty()) {
    double ok = 0.0;
    for (const auto& [p, c] : ctx_.round_.pairs) ok += ctx_.p2p_trades_.at(p).outcome->success;
    s.success_rate = ok / static_cast<double>(ctx_.round_.pairs.size());
  } else {
    s.success_rate = kNaN;
  }
  summary_.push_back(s);
  emit(Hook::PostGridStep, make_record(j));
  ctx_.phase_ = Phase::Idle;
}

std::string Environment::fingerprint() const {
  std::ostringstream s;
  const GridState& st = grid_.state();
  s << config_.seed << '|' << ctx_.t_grid_ << '|' << ctx_.t_market_ << '|' << to_string(ctx_.phase_) << '|' << st.t
    << '|' << st.feasible << '|';
  for (double v : st.injections) s << text::format_double(v) << ',';
  s << '|';
  for (double v : st.flows) s << text::format_double(v) << ',';
  s << '|';
  for (const auto& [p, c] : ctx_.round_.pairs) s << p << '-' << c << ',';
  s << '|' << ctx_.orders_.size() << ctx_.p2p_bids_.size() << ctx_.p2p_trades_.size() << ctx_.dispatch_.has_value()
    << ctx_.dlmp_.has_value() << '|' << log_.size() << '|' << summary_.size() << '|' << trajectory_.size() << '|';
  for (const auto& a : agents_) s << a->state_digest() << ';';
  const std::string text = s.str();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace radmarket
