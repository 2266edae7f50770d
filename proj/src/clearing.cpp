#include "radmarket/clearing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "radmarket/optim.hpp"
#include "radmarket/text.hpp"

namespace radmarket {

namespace {

const char* errc_name(ClearingErrc code) {
  switch (code) {
    case ClearingErrc::InvalidInput: return "InvalidInput";
    case ClearingErrc::SettlementInfeasible: return "SettlementInfeasible";
  }
  return "Unknown";
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

double quantity_eps(const Curve& c) { return 1e-9 * std::max(1.0, c.q_max()); }

double price_tol(double p) { return 1e-9 * std::max(1.0, std::abs(p)); }

}  // namespace

ClearingError::ClearingError(ClearingErrc code, const std::string& message, std::vector<std::string> agents)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), agents_(std::move(agents)) {}

const AgentDispatch* Dispatch::find(const std::string& agent) const {
  for (const auto& e : entries) {
    if (e.agent == agent) return &e;
  }
  return nullptr;
}

void validate_market(const Network& network, const MarketInput& input) {
  std::set<std::string> seen;
  auto check = [&](const Order& o, Side expected) {
    if (o.agent.empty()) throw ClearingError(ClearingErrc::InvalidInput, "order with empty agent id");
    if (!seen.insert(o.agent).second) {
      throw ClearingError(ClearingErrc::InvalidInput, "agent " + o.agent + " appears more than once", {o.agent});
    }
    if (o.curve.side() != expected) {
      throw ClearingError(ClearingErrc::InvalidInput,
                          "agent " + o.agent + " submitted a curve on the wrong side", {o.agent});
    }
    if (!network.index_of(o.bus)) {
      throw ClearingError(ClearingErrc::InvalidInput,
                          "agent " + o.agent + " references unknown bus " + std::to_string(o.bus.value), {o.agent});
    }
  };
  for (const auto& o : input.bids) check(o, Side::Demand);
  for (const auto& o : input.offers) check(o, Side::Supply);
}

QuantityResult clear_quantities(const Network& network, const MarketInput& input, const ClearOptions& options) {
  validate_market(network, input);
  if (options.segments < 1) throw ClearingError(ClearingErrc::InvalidInput, "segments must be >= 1");

  struct Column {
    bool bid;
    std::size_t order;
  };
  std::vector<std::pair<std::string, Column>> ordered;
  for (std::size_t i = 0; i < input.bids.size(); ++i) ordered.push_back({input.bids[i].agent, {true, i}});
  for (std::size_t i = 0; i < input.offers.size(); ++i) ordered.push_back({input.offers[i].agent, {false, i}});
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  LpBuilder lp;
  LpBuilder::Terms balance_terms;

  // Flow rows only for lines with a finite limit.
  std::vector<bool> flow_row(network.line_count());
  std::vector<LpBuilder::Terms> flow_terms(network.line_count());
  for (std::size_t l = 0; l < network.line_count(); ++l) {
    const double lim = network.line(l).limit_kw;
    if (!std::isfinite(lim)) continue;
    flow_row[l] = true;
    auto f = lp.add_variable(0.0, -lim, lim);
    flow_terms[l].push_back({f, 1.0});
  }

  struct Span {
    std::size_t first = 0;
    std::size_t count = 0;
  };
  std::vector<Span> bid_cols(input.bids.size()), offer_cols(input.offers.size());

  for (const auto& [agent, col] : ordered) {
    const Order& o = col.bid ? input.bids[col.order] : input.offers[col.order];
    const Curve& c = o.curve;
    const double sign = col.bid ? 1.0 : -1.0;
    const std::size_t bus = network.require_index(o.bus);

    // Each block is priced at its far end: the lowest value on a demand
    // segment, the highest cost on a supply segment.
    std::vector<std::pair<double, double>> blocks;  // width, price
    if (c.q_min() > 0.0) blocks.push_back({c.q_min(), c.price_at(c.q_min())});
    const double w = (c.q_max() - c.q_min()) / options.segments;
    for (int k = 0; k < options.segments; ++k) {
      const double end = k + 1 == options.segments ? c.q_max() : c.q_min() + (k + 1) * w;
      blocks.push_back({w, c.price_at(end)});
    }

    Span span{lp.variable_count(), blocks.size()};
    for (auto [width, price] : blocks) {
      auto x = lp.add_variable(col.bid ? -price : price, 0.0, width);
      balance_terms.push_back({x, sign});
      for (std::size_t b = bus; b != 0; b = *network.parent(b)) {
        const std::size_t l = network.parent_line(b);
        if (flow_row[l]) flow_terms[l].push_back({x, -sign});
      }
    }
    (col.bid ? bid_cols[col.order] : offer_cols[col.order]) = span;
  }

  // Balance first, then flow rows in line order.
  lp.add_eq(balance_terms, 0.0);
  std::vector<std::size_t> eq_of_line(network.line_count(), 0);
  for (std::size_t l = 0; l < network.line_count(); ++l) {
    if (flow_row[l]) eq_of_line[l] = lp.add_eq(flow_terms[l], 0.0);
  }

  LpSolution sol = solve_lp(lp.build());
  if (sol.status != LpStatus::Optimal) {
    throw std::runtime_error(std::string("clearing LP ended ") + to_string(sol.status));
  }

  QuantityResult out;
  auto total = [&](const Span& s, const Curve& c) {
    double q = 0.0;
    for (std::size_t j = s.first; j < s.first + s.count; ++j) q += sol.x(static_cast<Eigen::Index>(j));
    if (q <= quantity_eps(c)) return 0.0;
    return std::min(q, c.q_max());
  };
  for (std::size_t i = 0; i < input.bids.size(); ++i) out.bid_q.push_back(total(bid_cols[i], input.bids[i].curve));
  for (std::size_t i = 0; i < input.offers.size(); ++i) {
    out.offer_q.push_back(total(offer_cols[i], input.offers[i].curve));
  }

  const double y_bal = sol.duals_eq(0);
  out.nodal_prices.assign(network.bus_count(), -y_bal);
  for (std::size_t b : network.topological_order()) {
    if (b == 0) continue;
    const std::size_t l = network.parent_line(b);
    double up = out.nodal_prices[*network.parent(b)];
    if (flow_row[l]) up += sol.duals_eq(static_cast<Eigen::Index>(eq_of_line[l]));
    out.nodal_prices[b] = up;
  }
  out.block_surplus = -sol.objective;
  return out;
}

Settlement settle_prices(const MarketInput& input, const std::vector<double>& bid_q, const std::vector<double>& offer_q,
                         const std::vector<double>& bid_prov, const std::vector<double>& offer_prov) {
  if (bid_q.size() != input.bids.size() || bid_prov.size() != input.bids.size() ||
      offer_q.size() != input.offers.size() || offer_prov.size() != input.offers.size()) {
    throw ClearingError(ClearingErrc::InvalidInput, "settlement vectors do not match the order book");
  }
  Settlement s;
  s.offer_p = offer_prov;

  std::vector<std::string> underpaid;
  double revenue = 0.0;
  for (std::size_t i = 0; i < input.offers.size(); ++i) {
    const Curve& c = input.offers[i].curve;
    if (offer_q[i] > 0.0) {
      const double floor = c.extended_price(offer_q[i]);
      if (offer_prov[i] < floor - price_tol(floor)) underpaid.push_back(input.offers[i].agent);
    }
    revenue += offer_prov[i] * offer_q[i];
  }
  if (!underpaid.empty()) {
    throw ClearingError(ClearingErrc::SettlementInfeasible, "suppliers paid below their offer: " + join(underpaid),
                        underpaid);
  }

  double payment = 0.0;
  for (std::size_t i = 0; i < input.bids.size(); ++i) payment += bid_prov[i] * bid_q[i];
  s.lambda = payment > 0.0 ? revenue / payment : 1.0;

  const std::size_t n = input.bids.size();
  std::vector<double> cap(n), p1(n);
  double collected = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cap[i] = bid_q[i] > 0.0 ? input.bids[i].curve.extended_price(bid_q[i]) : kInf;
    p1[i] = std::min(s.lambda * bid_prov[i], cap[i]);
    collected += p1[i] * bid_q[i];
  }

  const double residual = revenue - collected;
  s.bid_p = p1;
  if (residual > price_tol(revenue) * 1e-3) {
    double headroom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (bid_q[i] > 0.0) headroom += (cap[i] - p1[i]) * bid_q[i];
    }
    if (residual > headroom) {
      std::vector<std::string> capped;
      for (std::size_t i = 0; i < n; ++i) {
        if (bid_q[i] > 0.0 && cap[i] - p1[i] <= price_tol(cap[i])) capped.push_back(input.bids[i].agent);
      }
      throw ClearingError(ClearingErrc::SettlementInfeasible,
                          "consumers cannot cover supplier revenue within their bids: " + join(capped), capped);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (bid_q[i] > 0.0) s.bid_p[i] = p1[i] + residual * (cap[i] - p1[i]) / headroom;
    }
  }
  return s;
}

Settlement settle_prices(const MarketInput& input, const std::vector<double>& bid_q, const std::vector<double>& offer_q) {
  std::vector<double> bid_prov, offer_prov;
  for (std::size_t i = 0; i < input.bids.size(); ++i) bid_prov.push_back(input.bids[i].curve.extended_price(bid_q.at(i)));
  for (std::size_t i = 0; i < input.offers.size(); ++i) {
    offer_prov.push_back(input.offers[i].curve.extended_price(offer_q.at(i)));
  }
  return settle_prices(input, bid_q, offer_q, bid_prov, offer_prov);
}

Dispatch clear(const Network& network, const MarketInput& input, const ClearOptions& options) {
  QuantityResult qr = clear_quantities(network, input, options);

  Dispatch d;
  d.nodal_prices = qr.nodal_prices;
  d.block_surplus = qr.block_surplus;
  const bool traded = std::any_of(qr.bid_q.begin(), qr.bid_q.end(), [](double q) { return q > 0.0; });

  std::vector<double> injections(network.bus_count(), 0.0);
  if (!traded) {
    d.no_trade = true;
    for (const auto& o : input.bids) d.entries.push_back({o.agent, o.bus, Side::Demand, 0.0, 0.0});
    for (const auto& o : input.offers) d.entries.push_back({o.agent, o.bus, Side::Supply, 0.0, 0.0});
    d.line_flows = network.line_flows(injections);
    return d;
  }

  std::vector<double> bid_prov, offer_prov;
  for (std::size_t i = 0; i < input.bids.size(); ++i) {
    const double pi = qr.nodal_prices[network.require_index(input.bids[i].bus)];
    const double q = qr.bid_q[i];
    bid_prov.push_back(q > 0.0 ? std::min(pi, input.bids[i].curve.extended_price(q)) : pi);
  }
  for (std::size_t i = 0; i < input.offers.size(); ++i) {
    const double pi = qr.nodal_prices[network.require_index(input.offers[i].bus)];
    const double q = qr.offer_q[i];
    offer_prov.push_back(q > 0.0 ? std::max(pi, input.offers[i].curve.extended_price(q)) : pi);
  }
  Settlement s = settle_prices(input, qr.bid_q, qr.offer_q, bid_prov, offer_prov);
  d.lambda = s.lambda;

  for (std::size_t i = 0; i < input.bids.size(); ++i) {
    const auto& o = input.bids[i];
    d.entries.push_back({o.agent, o.bus, Side::Demand, qr.bid_q[i], s.bid_p[i]});
    injections[network.require_index(o.bus)] += qr.bid_q[i];
    d.total_surplus += o.curve.integral(qr.bid_q[i]);
  }
  for (std::size_t i = 0; i < input.offers.size(); ++i) {
    const auto& o = input.offers[i];
    d.entries.push_back({o.agent, o.bus, Side::Supply, qr.offer_q[i], s.offer_p[i]});
    injections[network.require_index(o.bus)] -= qr.offer_q[i];
    d.total_surplus -= o.curve.integral(qr.offer_q[i]);
  }
  d.line_flows = network.line_flows(injections);
  for (std::size_t l = 0; l < network.line_count(); ++l) {
    const double lim = network.line(l).limit_kw;
    if (std::isfinite(lim) && std::abs(d.line_flows[l]) >= lim - kFlowTolerance) {
      d.binding_lines.push_back(network.line(l).id);
    }
  }
  return d;
}

MarketInput parse_bids(std::istream& in, const std::string& origin) {
  MarketInput out;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto toks = text::tokenize(text::strip_comment(raw));
    if (toks.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (toks[0] != "bid") throw text::ParseError(where + "unknown directive '" + toks[0] + "'");
    if (toks.size() != 8) throw text::ParseError(where + "bid needs 7 fields");
    try {
      Side side;
      if (toks[3] == "S") {
        side = Side::Supply;
      } else if (toks[3] == "D") {
        side = Side::Demand;
      } else {
        throw text::ParseError("side must be S or D");
      }
      Order o{toks[1], BusId{text::parse_int(toks[2])},
              Curve(side, text::parse_double(toks[4]), text::parse_double(toks[5]), text::parse_double(toks[6]),
                    text::parse_double(toks[7]))};
      (side == Side::Demand ? out.bids : out.offers).push_back(std::move(o));
    } catch (const std::exception& e) {
      throw text::ParseError(where + e.what());
    }
  }
  return out;
}

MarketInput parse_bids_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  return parse_bids(in, origin);
}

MarketInput read_bids_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw text::ParseError("cannot open " + path.string());
  return parse_bids(in, path.string());
}

void write_bids(std::ostream& out, const MarketInput& input) {
  auto emit = [&](const Order& o) {
    const Curve& c = o.curve;
    out << "bid " << o.agent << ' ' << o.bus.value << ' ' << to_string(c.side()) << ' '
        << text::format_double(c.p_max()) << ' ' << text::format_double(c.p_min()) << ' '
        << text::format_double(c.q_max()) << ' ' << text::format_double(c.q_min()) << '\n';
  };
  for (const auto& o : input.bids) emit(o);
  for (const auto& o : input.offers) emit(o);
}

void write_dispatch_jsonl(std::ostream& out, const Network& network, const Dispatch& d) {
  using nlohmann::json;
  for (const auto& e : d.entries) {
    json rec = {{"record", "dispatch"}, {"agent", e.agent},   {"bus", e.bus.value},
                {"side", to_string(e.side)}, {"q_kw", e.q}, {"price_c_per_kwh", e.p}};
    out << rec.dump() << '\n';
  }
  json flows = json::array();
  for (std::size_t l = 0; l < d.line_flows.size(); ++l) {
    flows.push_back({{"line", network.line(l).id}, {"flow_kw", d.line_flows[l]}});
  }
  json nodal = json::array();
  for (std::size_t b = 0; b < d.nodal_prices.size(); ++b) {
    nodal.push_back({{"bus", network.bus_id(b).value}, {"price", d.nodal_prices[b]}});
  }
  json summary = {{"record", "summary"},       {"total_surplus", d.total_surplus},
                  {"block_surplus", d.block_surplus}, {"lambda", d.lambda},
                  {"no_trade", d.no_trade},     {"binding_lines", d.binding_lines},
                  {"line_flows", flows},        {"nodal_prices", nodal}};
  out << summary.dump() << '\n';
}

Dispatch read_dispatch_jsonl(std::istream& in) {
  using nlohmann::json;
  Dispatch d;
  std::string raw;
  bool have_summary = false;
  while (std::getline(in, raw)) {
    if (text::trim(raw).empty()) continue;
    json rec = json::parse(raw);
    const std::string kind = rec.at("record");
    if (kind == "dispatch") {
      AgentDispatch e;
      e.agent = rec.at("agent");
      e.bus = BusId{rec.at("bus").get<int>()};
      e.side = rec.at("side") == "S" ? Side::Supply : Side::Demand;
      e.q = rec.at("q_kw");
      e.p = rec.at("price_c_per_kwh");
      d.entries.push_back(e);
    } else if (kind == "summary") {
      have_summary = true;
      d.total_surplus = rec.at("total_surplus");
      d.block_surplus = rec.at("block_surplus");
      d.lambda = rec.at("lambda");
      d.no_trade = rec.at("no_trade");
      d.binding_lines = rec.at("binding_lines").get<std::vector<std::string>>();
      for (const auto& f : rec.at("line_flows")) d.line_flows.push_back(f.at("flow_kw"));
      for (const auto& p : rec.at("nodal_prices")) d.nodal_prices.push_back(p.at("price"));
    } else {
      throw text::ParseError("unknown dispatch record '" + kind + "'");
    }
  }
  if (!have_summary) throw text::ParseError("dispatch stream has no summary record");
  return d;
}

}  // namespace radmarket
