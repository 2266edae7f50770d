#include "radmarket/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "radmarket/clearing.hpp"
#include "radmarket/env.hpp"
#include "radmarket/text.hpp"

namespace radmarket {

const char* to_string(Role role) {
  switch (role) {
    case Role::Producer: return "producer";
    case Role::Consumer: return "consumer";
    case Role::Prosumer: return "prosumer";
    case Role::DrProvider: return "dr_provider";
  }
  return "?";
}

const char* to_string(Mechanism mechanism) {
  switch (mechanism) {
    case Mechanism::Clearing: return "clearing";
    case Mechanism::P2p: return "p2p";
    case Mechanism::Dlmp: return "dlmp";
  }
  return "?";
}

Role parse_role(const std::string& name) {
  for (Role r : {Role::Producer, Role::Consumer, Role::Prosumer, Role::DrProvider}) {
    if (name == to_string(r)) return r;
  }
  throw AgentConfigError("unknown role '" + name + "'");
}

Mechanism parse_mechanism(const std::string& name) {
  for (Mechanism m : {Mechanism::Clearing, Mechanism::P2p, Mechanism::Dlmp}) {
    if (name == to_string(m)) return m;
  }
  throw AgentConfigError("unknown mechanism '" + name + "'");
}

// ---- piecewise-linear private values

PiecewiseLinear::PiecewiseLinear(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw AgentConfigError("piecewise-linear function needs at least one block");
  if (blocks_.size() > kMaxBlocks) throw AgentConfigError("piecewise-linear function has more than 4 blocks");
  for (const auto& b : blocks_) {
    if (!(b.width > 0.0)) throw AgentConfigError("block widths must be positive");
    if (!std::isfinite(b.slope)) throw AgentConfigError("block slopes must be finite");
  }
}

PiecewiseLinear PiecewiseLinear::linear(double slope) {
  return PiecewiseLinear({{std::numeric_limits<double>::infinity(), slope}});
}

double PiecewiseLinear::operator()(double q) const {
  if (q < 0.0) throw std::invalid_argument("piecewise-linear function evaluated at negative quantity");
  double value = 0.0, left = q;
  for (const auto& b : blocks_) {
    const double take = std::min(left, b.width);
    value += take * b.slope;
    left -= take;
    if (left <= 0.0) return value;
  }
  return value + left * blocks_.back().slope;
}

bool PiecewiseLinear::convex() const {
  for (std::size_t i = 1; i < blocks_.size(); ++i) {
    if (blocks_[i].slope < blocks_[i - 1].slope) return false;
  }
  return true;
}

bool PiecewiseLinear::concave() const {
  for (std::size_t i = 1; i < blocks_.size(); ++i) {
    if (blocks_[i].slope > blocks_[i - 1].slope) return false;
  }
  return true;
}

PiecewiseLinear parse_piecewise(const std::string& text) {
  std::vector<PiecewiseLinear::Block> blocks;
  for (const auto& part : text::split(text, ',')) {
    auto wp = text::split(text::trim(part), ':');
    if (wp.size() != 2) throw AgentConfigError("expected width:slope in '" + text + "'");
    try {
      blocks.push_back({text::parse_double(text::trim(wp[0])), text::parse_double(text::trim(wp[1]))});
    } catch (const text::ParseError& e) {
      throw AgentConfigError(e.what());
    }
  }
  return PiecewiseLinear(std::move(blocks));
}

std::string format_piecewise(const PiecewiseLinear& f) {
  std::string out;
  for (const auto& b : f.blocks()) {
    if (!out.empty()) out += ',';
    out += text::format_double(b.width) + ":" + text::format_double(b.slope);
  }
  return out;
}

double supply_reward(double p, double q, const PiecewiseLinear& cost) { return p * q - cost(q); }
double demand_reward(double p, double q, const PiecewiseLinear& utility) { return utility(q) - p * q; }

// ---- bandit

BanditState::BanditState(std::vector<double> arm_prices, double delta_)
    : arms(std::move(arm_prices)), counts(arms.size(), 0), means(arms.size(), 0.0), delta(delta_) {
  validate();
}

std::uint64_t BanditState::pulls() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

void BanditState::validate() const {
  if (arms.empty()) throw std::invalid_argument("bandit needs at least one arm");
  if (counts.size() != arms.size() || means.size() != arms.size()) {
    throw std::invalid_argument("bandit counts and means must match the arms");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
}

double ucb_index(const BanditState& state, std::size_t arm, std::uint64_t t) {
  if (t < 1) throw std::invalid_argument("ucb_index requires t >= 1");
  if (arm >= state.arms.size()) throw std::out_of_range("arm index out of range");
  const auto n = state.counts[arm];
  if (n == 0) return std::numeric_limits<double>::infinity();
  return state.means[arm] + std::sqrt(2.0 * std::log(1.0 / state.delta) / static_cast<double>(n));
}

std::size_t ucb_select(const BanditState& state) {
  state.validate();
  const std::uint64_t t = state.pulls() + 1;
  std::size_t best = 0;
  double best_index = ucb_index(state, 0, t);
  for (std::size_t i = 1; i < state.arms.size(); ++i) {
    const double v = ucb_index(state, i, t);
    if (v > best_index) {
      best = i;
      best_index = v;
    }
  }
  return best;
}

void ucb_update(BanditState& state, std::size_t arm, double reward) {
  if (arm >= state.arms.size()) throw std::out_of_range("arm index out of range");
  if (!std::isfinite(reward)) throw std::invalid_argument("reward must be finite");
  const auto n = ++state.counts[arm];
  state.means[arm] += (reward - state.means[arm]) / static_cast<double>(n);
}

std::size_t ucb_select_and_update(BanditState& state, const std::function<double(std::size_t)>& feed) {
  const std::size_t arm = ucb_select(state);
  ucb_update(state, arm, feed(arm));
  return arm;
}

std::vector<double> arm_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw AgentConfigError("arm grid needs finite lo <= hi and step > 0");
  }
  std::vector<double> arms;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) arms.push_back(lo + static_cast<double>(i) * step);
  return arms;
}

std::vector<double> parse_arms(const std::string& text) {
  try {
    auto colon = text::split(text, ':');
    if (colon.size() == 3) {
      return arm_grid(text::parse_double(colon[0]), text::parse_double(colon[1]), text::parse_double(colon[2]));
    }
    if (colon.size() != 1) throw AgentConfigError("arms must be lo:hi:step or a list");
    std::vector<double> arms;
    for (const auto& a : text::split(text, ',')) arms.push_back(text::parse_double(text::trim(a)));
    if (arms.empty()) throw AgentConfigError("empty arm list");
    return arms;
  } catch (const text::ParseError& e) {
    throw AgentConfigError(std::string("bad arms '") + text + "': " + e.what());
  }
}

// ---- base agent

Agent::Agent(std::string id, BusId bus, Role role) : id_(std::move(id)), bus_(bus), role_(role) {
  if (id_.empty()) throw AgentConfigError("agent id must not be empty");
}

void Agent::reset(std::uint64_t) {}
void Agent::set_market_actions(AgentContext&) {}
void Agent::market_feedback(AgentContext&) {}

void Agent::set_grid_actions(AgentContext& ctx) {
  if (!in_market()) return;
  ctx.submit_grid_action(*this, ctx.dispatched_kw(*this));
}

double Agent::reward(const AgentContext& ctx) const {
  if (ctx.mechanism() == Mechanism::P2p) {
    const P2pTrade* t = ctx.p2p_trade(*this);
    if (!t || !t->outcome) return 0.0;
    return t->producer == id() ? t->outcome->r_p : t->outcome->r_c;
  }
  auto d = ctx.dispatch(*this);
  if (!d) return 0.0;
  if (d->side == Side::Supply) return d->p * d->q - supply_cost(d->q);
  return demand_utility(d->q) - d->p * d->q;
}

double Agent::supply_cost(double q) const { return private_ ? (*private_)(q) : 0.0; }
double Agent::demand_utility(double q) const { return private_ ? (*private_)(q) : 0.0; }

std::string Agent::state_digest() const { return id_; }

namespace {

double block_cost(const std::vector<CostBlock>& blocks, double q) {
  double cost = 0.0, left = q;
  for (const auto& b : blocks) {
    const double take = std::min(left, b.qty);
    cost += take * b.price;
    left -= take;
    if (left <= 0.0) return cost;
  }
  if (!blocks.empty()) cost += left * blocks.back().price;
  return cost;
}

}  // namespace

// ---- inelastic

InelasticConsumer::InelasticConsumer(std::string id, BusId bus, double q_kw, double cap)
    : Agent(std::move(id), bus, Role::Consumer), q_kw_(q_kw), cap_(cap) {
  if (!(q_kw >= 0.0) || !std::isfinite(q_kw)) throw AgentConfigError("inelastic q must be finite and >= 0");
  if (!(cap > 0.0) || !std::isfinite(cap)) throw AgentConfigError("inelastic cap must be finite and > 0");
}

Curve InelasticConsumer::bid(double q_kw) const { return Curve(Side::Demand, cap_, cap_ * 0.999, q_kw, q_kw * 0.99); }

double InelasticConsumer::quantity(const AgentContext& ctx) const {
  if (!ctx.available(*this)) return 0.0;
  return ctx.scenario_load(*this).value_or(q_kw_);
}

void InelasticConsumer::set_market_actions(AgentContext& ctx) {
  const double q = quantity(ctx);
  if (ctx.mechanism() == Mechanism::Dlmp) {
    ctx.submit_dr_offer(*this, DrOffer{id(), bus(), std::max(q, 0.0), {}});
  } else if (q > 0.0) {
    ctx.submit_order(*this, bid(q));
  }
}

double InelasticConsumer::demand_utility(double q) const {
  return private_value() ? (*private_value())(q) : cap_ * q;
}

// ---- elastic

ElasticTrader::ElasticTrader(std::string id, BusId bus, Role role, Curve curve)
    : Agent(std::move(id), bus, role), curve_(curve) {
  const Side want = role == Role::Producer ? Side::Supply : Side::Demand;
  if (role != Role::Producer && role != Role::Consumer) throw AgentConfigError("elastic agents are producers or consumers");
  if (curve.side() != want) throw AgentConfigError("elastic curve side does not match the role");
}

Curve ElasticTrader::curve_at(const AgentContext& ctx) const {
  auto load = ctx.scenario_load(*this);
  if (!load) return curve_;
  const double s = *load / curve_.q_max();
  return Curve(curve_.side(), curve_.p_max(), curve_.p_min(), curve_.q_max() * s, curve_.q_min() * s);
}

void ElasticTrader::set_market_actions(AgentContext& ctx) {
  if (!ctx.available(*this)) return;
  auto load = ctx.scenario_load(*this);
  if (load && !(*load > 0.0)) return;
  ctx.submit_order(*this, curve_at(ctx));
}

double ElasticTrader::supply_cost(double q) const {
  return private_value() ? (*private_value())(q) : curve_.integral(std::min(q, curve_.q_max()));
}

double ElasticTrader::demand_utility(double q) const {
  return private_value() ? (*private_value())(q) : curve_.integral(std::min(q, curve_.q_max()));
}

// ---- flat supply

FlatSupplier::FlatSupplier(std::string id, BusId bus, double price, double q_max)
    : Agent(std::move(id), bus, Role::Producer), price_(price), q_max_(q_max) {
  if (!(q_max > 0.0) || !std::isfinite(q_max)) throw AgentConfigError("flat_supply qmax must be finite and > 0");
  if (!std::isfinite(price)) throw AgentConfigError("flat_supply price must be finite");
}

void FlatSupplier::set_market_actions(AgentContext& ctx) {
  if (ctx.available(*this)) ctx.submit_order(*this, offer());
}

double FlatSupplier::supply_cost(double q) const { return private_value() ? (*private_value())(q) : price_ * q; }

// ---- ucb

UcbTrader::UcbTrader(std::string id, BusId bus, Role role, std::vector<double> sell_arms, std::vector<double> buy_arms,
                     double delta)
    : Agent(std::move(id), bus, role) {
  if (role == Role::DrProvider) throw AgentConfigError("ucb agents are producers, consumers or prosumers");
  try {
    sell_ = BanditState(std::move(sell_arms), delta);
    buy_ = BanditState(std::move(buy_arms), delta);
  } catch (const std::invalid_argument& e) {
    throw AgentConfigError(e.what());
  }
}

void UcbTrader::reset(std::uint64_t) {
  sell_ = BanditState(sell_.arms, sell_.delta);
  buy_ = BanditState(buy_.arms, buy_.delta);
  pending_.reset();
}

void UcbTrader::set_market_actions(AgentContext& ctx) {
  pending_.reset();
  auto side = ctx.p2p_side(*this);
  if (!side) return;
  BanditState& s = *side == Side::Supply ? sell_ : buy_;
  const std::size_t arm = ucb_select(s);
  pending_ = {*side, arm};
  ctx.submit_p2p_bid(*this, s.arms[arm]);
}

void UcbTrader::market_feedback(AgentContext& ctx) {
  if (!pending_) return;
  const NegotiationOutcome* o = ctx.p2p_outcome(*this);
  if (!o) return;
  if (pending_->first == Side::Supply) {
    ucb_update(sell_, pending_->second, o->r_p);
  } else {
    ucb_update(buy_, pending_->second, o->r_c);
  }
  pending_.reset();
}

std::string UcbTrader::state_digest() const {
  std::ostringstream s;
  s << id();
  for (const BanditState* b : {&sell_, &buy_}) {
    s << '|';
    for (std::size_t i = 0; i < b->arms.size(); ++i) s << b->counts[i] << ':' << text::format_double(b->means[i]) << ';';
  }
  return s.str();
}

// ---- scripted

ScriptedAgent::ScriptedAgent(std::string id, BusId bus, Role role, std::map<int, double> series, std::string source)
    : Agent(std::move(id), bus, role), series_(std::move(series)), source_(std::move(source)) {}

double ScriptedAgent::at(int t) const {
  auto it = series_.find(t);
  return it == series_.end() ? 0.0 : it->second;
}

void ScriptedAgent::set_grid_actions(AgentContext& ctx) {
  double kw = at(ctx.t_grid());
  if (auto load = ctx.scenario_load(*this)) kw = *load;
  if (!ctx.available(*this)) kw = 0.0;
  ctx.submit_grid_action(*this, kw);
}

double ScriptedAgent::reward(const AgentContext&) const { return 0.0; }

std::map<int, double> parse_series(std::istream& in, const std::string& origin) {
  std::map<int, double> out;
  std::string raw;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = text::trim(text::strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (!header) {
      if (line != "t,kw") throw text::ParseError(where + "expected header t,kw");
      header = true;
      continue;
    }
    auto f = text::split(line, ',');
    if (f.size() != 2) throw text::ParseError(where + "expected t,kw");
    try {
      const int t = text::parse_int(text::trim(f[0]));
      if (!out.emplace(t, text::parse_double(text::trim(f[1]))).second) {
        throw text::ParseError("duplicate step " + std::to_string(t));
      }
    } catch (const std::exception& e) {
      throw text::ParseError(where + e.what());
    }
  }
  return out;
}

std::map<int, double> read_series_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw text::ParseError("cannot open " + path.string());
  return parse_series(in, path.string());
}

// ---- dlmp participants

GenAgent::GenAgent(std::string id, BusId bus, double pmin, double pmax, std::vector<CostBlock> blocks)
    : Agent(std::move(id), bus, Role::Producer), pmin_(pmin), pmax_(pmax), blocks_(std::move(blocks)) {
  if (!(pmin >= 0.0) || !(pmax >= pmin) || !std::isfinite(pmax)) throw AgentConfigError("gen needs 0 <= pmin <= pmax");
}

void GenAgent::set_market_actions(AgentContext& ctx) {
  if (!ctx.available(*this)) return;
  GenOffer o = offer();
  if (auto load = ctx.scenario_load(*this)) {
    o.pmax = std::min(o.pmax, std::abs(*load));
    o.pmin = std::min(o.pmin, o.pmax);
  }
  ctx.submit_gen_offer(*this, o);
}

double GenAgent::supply_cost(double q) const { return private_value() ? (*private_value())(q) : block_cost(blocks_, q); }

DrAgent::DrAgent(std::string id, BusId bus, double baseline, std::vector<CostBlock> blocks)
    : Agent(std::move(id), bus, Role::DrProvider), baseline_(baseline), blocks_(std::move(blocks)) {
  if (!(baseline >= 0.0) || !std::isfinite(baseline)) throw AgentConfigError("dr baseline must be finite and >= 0");
}

double DrAgent::baseline(const AgentContext& ctx) const {
  if (!ctx.available(*this)) return 0.0;
  return std::max(0.0, ctx.scenario_load(*this).value_or(baseline_));
}

void DrAgent::set_market_actions(AgentContext& ctx) {
  ctx.submit_dr_offer(*this, DrOffer{id(), bus(), baseline(ctx), blocks_});
}

double DrAgent::supply_cost(double reduction) const {
  return private_value() ? (*private_value())(reduction) : block_cost(blocks_, reduction);
}

double DrAgent::reward(const AgentContext& ctx) const {
  auto d = ctx.dispatch(*this);
  if (!d) return 0.0;
  const double reduction = std::max(0.0, baseline(ctx) - d->q);
  return d->p * reduction - supply_cost(reduction);
}

// ---- roster

std::vector<RosterEntry> parse_roster(std::istream& in, const std::string& origin) {
  std::vector<RosterEntry> out;
  std::set<std::string> seen;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto tok = text::tokenize(text::strip_comment(raw));
    if (tok.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (tok[0] != "agent") throw text::ParseError(where + "unknown directive '" + tok[0] + "'");
    if (tok.size() < 5) throw text::ParseError(where + "expected agent <id> <bus> <role> <strategy> [key=value...]");
    RosterEntry e;
    e.id = tok[1];
    e.source_line = lineno;
    e.strategy = tok[4];
    try {
      e.bus = BusId{text::parse_int(tok[2])};
      e.role = parse_role(tok[3]);
    } catch (const std::exception& ex) {
      throw text::ParseError(where + ex.what());
    }
    for (std::size_t i = 5; i < tok.size(); ++i) {
      auto eq = tok[i].find('=');
      if (eq == std::string::npos || eq == 0) throw text::ParseError(where + "expected key=value, got '" + tok[i] + "'");
      if (!e.params.emplace(tok[i].substr(0, eq), tok[i].substr(eq + 1)).second) {
        throw text::ParseError(where + "repeated parameter '" + tok[i].substr(0, eq) + "'");
      }
    }
    if (!seen.insert(e.id).second) throw text::ParseError(where + "duplicate agent '" + e.id + "'");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<RosterEntry> parse_roster_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  return parse_roster(in, origin);
}

std::vector<RosterEntry> read_roster_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw text::ParseError("cannot open " + path.string());
  return parse_roster(in, path.string());
}

void write_roster(std::ostream& out, const std::vector<RosterEntry>& roster) {
  for (const auto& e : roster) {
    out << "agent " << e.id << ' ' << e.bus.value << ' ' << to_string(e.role) << ' ' << e.strategy;
    for (const auto& [k, v] : e.params) out << ' ' << k << '=' << v;
    out << '\n';
  }
}

namespace {

class Params {
 public:
  explicit Params(const RosterEntry& e) : e_(e) {}

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    used_.insert(key);
    auto it = e_.params.find(key);
    if (it == e_.params.end()) {
      if (fallback) return *fallback;
      throw AgentConfigError(where() + "missing parameter '" + key + "'");
    }
    try {
      return text::parse_double(it->second);
    } catch (const text::ParseError& ex) {
      throw AgentConfigError(where() + key + ": " + ex.what());
    }
  }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    auto it = e_.params.find(key);
    if (it == e_.params.end()) return std::nullopt;
    return it->second;
  }

  std::vector<CostBlock> blocks(const std::string& key) {
    std::vector<CostBlock> out;
    auto v = raw(key);
    if (!v) return out;
    for (const auto& part : text::split(*v, ',')) {
      auto qp = text::split(text::trim(part), ':');
      if (qp.size() != 2) throw AgentConfigError(where() + key + ": expected qty:price blocks");
      try {
        out.push_back({text::parse_double(qp[0]), text::parse_double(qp[1])});
      } catch (const text::ParseError& ex) {
        throw AgentConfigError(where() + key + ": " + ex.what());
      }
    }
    return out;
  }

  void finish() const {
    for (const auto& [k, v] : e_.params) {
      if (!used_.count(k)) throw AgentConfigError(where() + "unknown parameter '" + k + "' for " + e_.strategy);
    }
  }

  std::string where() const { return "agent " + e_.id + " (line " + std::to_string(e_.source_line) + "): "; }

 private:
  const RosterEntry& e_;
  std::set<std::string> used_;
};

void require_role(const RosterEntry& e, std::initializer_list<Role> roles, const Params& p) {
  for (Role r : roles) {
    if (e.role == r) return;
  }
  throw AgentConfigError(p.where() + "role " + to_string(e.role) + " cannot use strategy " + e.strategy);
}

}  // namespace

std::unique_ptr<Agent> make_agent(const RosterEntry& e, const std::filesystem::path& base_dir) {
  Params p(e);
  std::unique_ptr<Agent> agent;
  try {
    if (e.strategy == "inelastic") {
      require_role(e, {Role::Consumer}, p);
      agent = std::make_unique<InelasticConsumer>(e.id, e.bus, p.number("q"), p.number("cap", kPriceCap));
    } else if (e.strategy == "elastic") {
      require_role(e, {Role::Producer, Role::Consumer}, p);
      const Side side = e.role == Role::Producer ? Side::Supply : Side::Demand;
      Curve c(side, p.number("pmax"), p.number("pmin"), p.number("qmax"), p.number("qmin", 0.0));
      agent = std::make_unique<ElasticTrader>(e.id, e.bus, e.role, c);
    } else if (e.strategy == "flat_supply") {
      require_role(e, {Role::Producer}, p);
      agent = std::make_unique<FlatSupplier>(e.id, e.bus, p.number("price"), p.number("qmax", 1e4));
    } else if (e.strategy == "ucb") {
      require_role(e, {Role::Producer, Role::Consumer, Role::Prosumer}, p);
      auto both = p.raw("arms");
      auto sell = p.raw("sell_arms"), buy = p.raw("buy_arms");
      if (!sell) sell = both;
      if (!buy) buy = both;
      if (!sell || !buy) throw AgentConfigError(p.where() + "ucb needs arms= (or sell_arms= and buy_arms=)");
      agent = std::make_unique<UcbTrader>(e.id, e.bus, e.role, parse_arms(*sell), parse_arms(*buy),
                                          p.number("delta", 0.01));
    } else if (e.strategy.rfind("scripted:", 0) == 0) {
      std::filesystem::path src = e.strategy.substr(9);
      if (src.empty()) throw AgentConfigError(p.where() + "scripted strategy needs a file");
      const auto full = src.is_relative() ? base_dir / src : src;
      std::map<int, double> series;
      try {
        series = read_series_file(full);
      } catch (const text::ParseError& ex) {
        throw AgentConfigError(p.where() + ex.what());
      }
      agent = std::make_unique<ScriptedAgent>(e.id, e.bus, e.role, std::move(series), src.string());
    } else if (e.strategy == "gen") {
      require_role(e, {Role::Producer}, p);
      agent = std::make_unique<GenAgent>(e.id, e.bus, p.number("pmin", 0.0), p.number("pmax"), p.blocks("blocks"));
    } else if (e.strategy == "dr") {
      require_role(e, {Role::DrProvider}, p);
      agent = std::make_unique<DrAgent>(e.id, e.bus, p.number("baseline"), p.blocks("blocks"));
    } else {
      throw AgentConfigError(p.where() + "unknown strategy '" + e.strategy + "'");
    }
    if (auto v = p.raw("value")) {
      auto f = parse_piecewise(*v);
      const bool sells = e.role == Role::Producer || e.role == Role::DrProvider;
      if (sells && !f.convex()) throw AgentConfigError(p.where() + "hidden cost must be convex");
      if (e.role == Role::Consumer && !f.concave()) throw AgentConfigError(p.where() + "hidden utility must be concave");
      agent->set_private_value(std::move(f));
    }
  } catch (const CurveError& ex) {
    throw AgentConfigError(p.where() + ex.what());
  } catch (const AgentConfigError& ex) {
    const std::string msg = ex.what();
    if (msg.rfind("agent ", 0) == 0) throw;
    throw AgentConfigError(p.where() + msg);
  }
  p.finish();
  return agent;
}

std::vector<std::unique_ptr<Agent>> make_agents(const std::vector<RosterEntry>& roster,
                                                const std::filesystem::path& base_dir) {
  std::vector<std::unique_ptr<Agent>> out;
  out.reserve(roster.size());
  for (const auto& e : roster) out.push_back(make_agent(e, base_dir));
  return out;
}

}  // namespace radmarket
