#include "radmarket/dlmp.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "radmarket/text.hpp"

namespace radmarket {

namespace {

const char* errc_name(DlmpErrc code) {
  switch (code) {
    case DlmpErrc::InvalidOffer: return "InvalidOffer";
    case DlmpErrc::NonConvexCost: return "NonConvexCost";
    case DlmpErrc::InfeasibleBaseline: return "InfeasibleBaseline";
  }
  return "Unknown";
}

void check_blocks(const std::string& who, const std::vector<CostBlock>& blocks) {
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (!(blocks[k].qty > 0.0) || !std::isfinite(blocks[k].qty) || !std::isfinite(blocks[k].price)) {
      throw DlmpError(DlmpErrc::InvalidOffer, who + ": block " + std::to_string(k) + " needs finite qty > 0 and price");
    }
    if (k > 0 && blocks[k].price < blocks[k - 1].price) {
      throw DlmpError(DlmpErrc::NonConvexCost, who + ": block prices decrease at block " + std::to_string(k));
    }
  }
}

std::string gen_name(const GenOffer& g, std::size_t i) {
  return g.agent.empty() ? "gen #" + std::to_string(i) + " at bus " + std::to_string(g.bus.value) : g.agent;
}

std::string dr_name(const DrOffer& d, std::size_t i) {
  return d.agent.empty() ? "dr #" + std::to_string(i) + " at bus " + std::to_string(d.bus.value) : d.agent;
}

// Adds `var` to the flow row of every line between the feeder and `bus`.
void add_path(const Network& network, std::size_t bus, std::size_t var, std::vector<LpBuilder::Terms>& rows) {
  for (std::size_t b = bus; b != 0; b = *network.parent(b)) rows[network.parent_line(b)].push_back({var, 1.0});
}

}  // namespace

DlmpError::DlmpError(DlmpErrc code, const std::string& message, std::vector<std::string> lines)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), lines_(std::move(lines)) {}

ScopfProgram build_scopf(const Network& network, const ScopfInput& input) {
  if (!std::isfinite(input.lmp_source) || input.lmp_source < 0.0) {
    throw DlmpError(DlmpErrc::InvalidOffer, "lmp_source must be finite and >= 0");
  }
  ScopfProgram prog;
  ScopfLayout& lay = prog.layout;
  LpBuilder lp;

  const std::size_t lines = network.line_count();
  std::vector<LpBuilder::Terms> flow_terms(lines);
  std::vector<double> flow_rhs(lines, 0.0);
  LpBuilder::Terms balance;
  double total_baseline = 0.0;
  std::vector<std::pair<LpBuilder::Terms, double>> extra_ub;

  for (std::size_t i = 0; i < input.gens.size(); ++i) {
    const GenOffer& g = input.gens[i];
    const std::string who = gen_name(g, i);
    auto bus = network.index_of(g.bus);
    if (!bus) throw DlmpError(DlmpErrc::InvalidOffer, who + ": unknown bus " + std::to_string(g.bus.value));
    if (!(g.pmin >= 0.0) || !(g.pmax >= g.pmin) || !std::isfinite(g.pmax)) {
      throw DlmpError(DlmpErrc::InvalidOffer, who + ": limits must satisfy 0 <= pmin <= pmax < inf");
    }
    check_blocks(who, g.blocks);
    double covered = 0.0;
    for (const auto& b : g.blocks) covered += b.qty;
    if (covered < g.pmax * (1.0 - 1e-12)) {
      throw DlmpError(DlmpErrc::InvalidOffer, who + ": cost blocks cover less than pmax");
    }
    std::vector<std::size_t> vars;
    LpBuilder::Terms sum;
    double left = g.pmax;
    for (const auto& b : g.blocks) {
      if (left <= 0.0) break;
      const double width = std::min(b.qty, left);
      left -= width;
      auto x = lp.add_variable(b.price, 0.0, width);
      vars.push_back(x);
      sum.push_back({x, -1.0});
      balance.push_back({x, 1.0});
      add_path(network, *bus, x, flow_terms);
    }
    if (g.pmin > 0.0) extra_ub.push_back({sum, -g.pmin});
    lay.gen_blocks.push_back(std::move(vars));
  }

  for (std::size_t i = 0; i < input.drs.size(); ++i) {
    const DrOffer& d = input.drs[i];
    const std::string who = dr_name(d, i);
    auto bus = network.index_of(d.bus);
    if (!bus) throw DlmpError(DlmpErrc::InvalidOffer, who + ": unknown bus " + std::to_string(d.bus.value));
    if (!(d.baseline >= 0.0) || !std::isfinite(d.baseline)) {
      throw DlmpError(DlmpErrc::InvalidOffer, who + ": baseline must be finite and >= 0");
    }
    check_blocks(who, d.blocks);
    total_baseline += d.baseline;
    for (std::size_t b = *bus; b != 0; b = *network.parent(b)) flow_rhs[network.parent_line(b)] += d.baseline;

    std::vector<std::size_t> vars;
    LpBuilder::Terms sum;
    double offered = 0.0;
    for (const auto& blk : d.blocks) {
      auto x = lp.add_variable(blk.price, 0.0, blk.qty);
      vars.push_back(x);
      sum.push_back({x, 1.0});
      balance.push_back({x, 1.0});
      add_path(network, *bus, x, flow_terms);
      offered += blk.qty;
    }
    // Reduction cannot exceed the baseline: 0 <= P^d.
    if (offered > d.baseline) extra_ub.push_back({sum, d.baseline});
    lay.dr_blocks.push_back(std::move(vars));
  }

  lay.p_source = lp.add_variable(0.0, -kInf, kInf);
  balance.push_back({lay.p_source, 1.0});
  for (std::size_t l = 0; l < lines; ++l) {
    auto f = lp.add_variable(0.0, -kInf, kInf);
    lay.flow.push_back(f);
    flow_terms[l].push_back({f, 1.0});
  }

  lay.balance_row = lp.add_eq(balance, total_baseline);
  for (std::size_t l = 0; l < lines; ++l) lay.flow_row.push_back(lp.add_eq(flow_terms[l], flow_rhs[l]));
  for (std::size_t l = 0; l < lines; ++l) {
    const double lim = network.line(l).limit_kw;
    if (!std::isfinite(lim)) {
      lay.limit_plus_row.push_back(-1);
      lay.limit_minus_row.push_back(-1);
      continue;
    }
    lay.limit_plus_row.push_back(static_cast<long>(lp.add_ub({{lay.flow[l], 1.0}}, lim)));
    lay.limit_minus_row.push_back(static_cast<long>(lp.add_ub({{lay.flow[l], -1.0}}, lim)));
  }
  for (const auto& [terms, rhs] : extra_ub) lp.add_ub(terms, rhs);

  EpigraphResult epi = epigraph_max0(lp.build(), lay.p_source);
  lay.s_source = epi.aux_index;
  epi.problem.c(static_cast<Eigen::Index>(lay.s_source)) = input.lmp_source;
  prog.problem = std::move(epi.problem);
  return prog;
}

DlmpResult solve_dlmp(const Network& network, const ScopfInput& input) {
  ScopfProgram prog = build_scopf(network, input);
  const ScopfLayout& lay = prog.layout;
  LpSolution sol = solve_lp(prog.problem);

  if (sol.status == LpStatus::Infeasible) {
    std::vector<double> inj(network.bus_count(), 0.0);
    for (const auto& d : input.drs) inj[network.require_index(d.bus)] += d.baseline;
    for (const auto& g : input.gens) inj[network.require_index(g.bus)] -= g.pmin;
    auto flows = network.line_flows(inj);
    std::vector<std::string> over;
    for (std::size_t l : network.violated_lines(flows)) over.push_back(network.line(l).id);
    std::string msg = "no dispatch satisfies the line limits";
    if (!over.empty()) {
      msg += "; over limit at baseline:";
      for (const auto& id : over) msg += " " + id;
    }
    throw DlmpError(DlmpErrc::InfeasibleBaseline, msg, over);
  }
  if (sol.status != LpStatus::Optimal) {
    throw std::runtime_error(std::string("SCOPF program ended ") + to_string(sol.status));
  }

  DlmpResult r;
  const std::size_t n = network.bus_count();
  r.p_g.assign(n, 0.0);
  r.p_d.assign(n, 0.0);
  r.baseline.assign(n, 0.0);
  auto x = [&](std::size_t j) { return sol.x(static_cast<Eigen::Index>(j)); };

  for (std::size_t i = 0; i < input.gens.size(); ++i) {
    double out = 0.0;
    for (auto j : lay.gen_blocks[i]) out += x(j);
    r.gen_output.push_back(out);
    r.p_g[network.require_index(input.gens[i].bus)] += out;
  }
  for (std::size_t i = 0; i < input.drs.size(); ++i) {
    double cut = 0.0;
    for (auto j : lay.dr_blocks[i]) cut += x(j);
    const double load = input.drs[i].baseline - cut;
    r.dr_load.push_back(load);
    const std::size_t b = network.require_index(input.drs[i].bus);
    r.p_d[b] += load;
    r.baseline[b] += input.drs[i].baseline;
  }
  r.p_source = x(lay.p_source);
  r.objective = sol.objective;
  r.lambda = sol.duals_eq(static_cast<Eigen::Index>(lay.balance_row));

  const std::size_t lines = network.line_count();
  r.mu_plus.assign(lines, 0.0);
  r.mu_minus.assign(lines, 0.0);
  for (std::size_t l = 0; l < lines; ++l) {
    r.flows.push_back(x(lay.flow[l]));
    if (lay.limit_plus_row[l] >= 0) {
      r.mu_plus[l] = sol.duals_ub(lay.limit_plus_row[l]);
      r.mu_minus[l] = sol.duals_ub(lay.limit_minus_row[l]);
      if (std::abs(r.flows[l]) >= network.line(l).limit_kw - kFlowTolerance) r.binding_lines.push_back(network.line(l).id);
    }
  }

  r.dlmp.assign(n, r.lambda);
  for (std::size_t b : network.topological_order()) {
    if (b == 0) continue;
    const std::size_t l = network.parent_line(b);
    r.dlmp[b] = r.dlmp[*network.parent(b)] + (r.mu_plus[l] - r.mu_minus[l]);
  }
  return r;
}

namespace {

std::vector<CostBlock> parse_blocks(const std::vector<std::string>& toks, std::size_t first) {
  std::vector<CostBlock> out;
  for (std::size_t k = first; k < toks.size(); ++k) {
    auto parts = text::split(toks[k], ',');
    if (parts.size() != 2) throw text::ParseError("block '" + toks[k] + "' must be qty,price");
    out.push_back({text::parse_double(parts[0]), text::parse_double(parts[1])});
  }
  return out;
}

void write_blocks(std::ostream& out, const std::vector<CostBlock>& blocks) {
  for (const auto& b : blocks) out << ' ' << text::format_double(b.qty) << ',' << text::format_double(b.price);
}

}  // namespace

ScopfInput parse_offers(std::istream& in, const std::string& origin) {
  ScopfInput out;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto toks = text::tokenize(text::strip_comment(raw));
    if (toks.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    try {
      if (toks[0] == "source") {
        if (toks.size() != 2) throw text::ParseError("source needs one price");
        out.lmp_source = text::parse_double(toks[1]);
      } else if (toks[0] == "gen") {
        if (toks.size() < 4) throw text::ParseError("gen needs bus, pmin, pmax and blocks");
        GenOffer g;
        g.bus = BusId{text::parse_int(toks[1])};
        g.agent = "gen" + std::to_string(out.gens.size());
        g.pmin = text::parse_double(toks[2]);
        g.pmax = text::parse_double(toks[3]);
        g.blocks = parse_blocks(toks, 4);
        out.gens.push_back(std::move(g));
      } else if (toks[0] == "dr") {
        if (toks.size() < 3) throw text::ParseError("dr needs bus and baseline");
        DrOffer d;
        d.bus = BusId{text::parse_int(toks[1])};
        d.agent = "dr" + std::to_string(out.drs.size());
        d.baseline = text::parse_double(toks[2]);
        d.blocks = parse_blocks(toks, 3);
        out.drs.push_back(std::move(d));
      } else {
        throw text::ParseError("unknown directive '" + toks[0] + "'");
      }
    } catch (const std::exception& e) {
      throw text::ParseError(where + e.what());
    }
  }
  return out;
}

ScopfInput parse_offers_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  return parse_offers(in, origin);
}

ScopfInput read_offers_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw text::ParseError("cannot open " + path.string());
  return parse_offers(in, path.string());
}

void write_offers(std::ostream& out, const ScopfInput& input) {
  out << "source " << text::format_double(input.lmp_source) << '\n';
  for (const auto& g : input.gens) {
    out << "gen " << g.bus.value << ' ' << text::format_double(g.pmin) << ' ' << text::format_double(g.pmax);
    write_blocks(out, g.blocks);
    out << '\n';
  }
  for (const auto& d : input.drs) {
    out << "dr " << d.bus.value << ' ' << text::format_double(d.baseline);
    write_blocks(out, d.blocks);
    out << '\n';
  }
}

void write_dlmp_csv(std::ostream& out, const Network& network, const DlmpResult& r) {
  out << "bus,dlmp,P_g,P_d\n";
  for (std::size_t b = 0; b < network.bus_count(); ++b) {
    out << network.bus_id(b).value << ',' << text::format_double(r.dlmp[b]) << ',' << text::format_double(r.p_g[b])
        << ',' << text::format_double(r.p_d[b]) << '\n';
  }
}

std::vector<DlmpRow> read_dlmp_csv(std::istream& in) {
  std::vector<DlmpRow> rows;
  std::string raw;
  if (!std::getline(in, raw) || text::trim(raw) != "bus,dlmp,P_g,P_d") {
    throw text::ParseError("DLMP table must start with header bus,dlmp,P_g,P_d");
  }
  int lineno = 1;
  while (std::getline(in, raw)) {
    ++lineno;
    if (text::trim(raw).empty()) continue;
    auto f = text::split(text::trim(raw), ',');
    if (f.size() != 4) throw text::ParseError("line " + std::to_string(lineno) + ": expected 4 fields");
    rows.push_back({BusId{text::parse_int(f[0])}, text::parse_double(f[1]), text::parse_double(f[2]),
                    text::parse_double(f[3])});
  }
  return rows;
}

}  // namespace radmarket
