#include "radmarket/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "radmarket/text.hpp"

namespace radmarket {

const char* to_string(NetworkErrc code) {
  switch (code) {
    case NetworkErrc::Parse: return "Parse";
    case NetworkErrc::MissingRoot: return "MissingRoot";
    case NetworkErrc::DuplicateBus: return "DuplicateBus";
    case NetworkErrc::UnknownBus: return "UnknownBus";
    case NetworkErrc::SelfLoop: return "SelfLoop";
    case NetworkErrc::InvalidLimit: return "InvalidLimit";
    case NetworkErrc::DuplicateLine: return "DuplicateLine";
    case NetworkErrc::CyclicTopology: return "CyclicTopology";
    case NetworkErrc::Disconnected: return "Disconnected";
  }
  return "Unknown";
}

NetworkError::NetworkError(NetworkErrc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

// ---------------------------------------------------------------------------
// Case file

CaseFile parse_case(std::istream& in, const std::string& origin) {
  CaseFile cf;
  cf.origin = origin;
  std::string raw;
  int lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw NetworkError(NetworkErrc::Parse, origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++lineno;
    auto tokens = text::tokenize(text::strip_comment(raw));
    if (tokens.empty()) continue;
    const auto& directive = tokens[0];
    try {
      if (directive == "bus") {
        if (tokens.size() != 2) fail("expected 'bus <id>'");
        int id = text::parse_int(tokens[1]);
        if (id < 0) fail("bus id must be non-negative");
        cf.buses.push_back(BusId{id});
      } else if (directive == "line") {
        if (tokens.size() != 5) fail("expected 'line <id> <from> <to> <limit_kw>'");
        LineSpec ls;
        ls.id = tokens[1];
        ls.from = BusId{text::parse_int(tokens[2])};
        ls.to = BusId{text::parse_int(tokens[3])};
        ls.limit_kw = text::parse_double(tokens[4]);
        ls.source_line = lineno;
        cf.lines.push_back(std::move(ls));
      } else {
        fail("unknown directive '" + directive + "'");
      }
    } catch (const text::ParseError& e) {
      fail(e.what());
    }
  }
  return cf;
}

CaseFile parse_case_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  return parse_case(in, origin);
}

CaseFile read_case_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError(NetworkErrc::Parse, "cannot open case file " + path.string());
  return parse_case(in, path.string());
}

void write_case(std::ostream& out, const CaseFile& cf) {
  for (const auto& b : cf.buses) out << "bus " << b.value << '\n';
  for (const auto& l : cf.lines) {
    out << "line " << l.id << ' ' << l.from.value << ' ' << l.to.value << ' '
        << text::format_double(l.limit_kw) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Topology

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

std::string describe_line(const LineSpec& l) {
  return "line '" + l.id + "' (" + std::to_string(l.from.value) + "-" + std::to_string(l.to.value) +
         (l.source_line > 0 ? ", line " + std::to_string(l.source_line) : std::string()) + ")";
}

// Path between two buses over the already-accepted (acyclic) edges.
std::vector<std::size_t> forest_path(const std::vector<std::vector<std::size_t>>& adj, std::size_t from,
                                     std::size_t to) {
  std::vector<std::optional<std::size_t>> prev(adj.size());
  std::vector<bool> seen(adj.size(), false);
  std::queue<std::size_t> q;
  q.push(from);
  seen[from] = true;
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    if (u == to) break;
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        prev[v] = u;
        q.push(v);
      }
    }
  }
  std::vector<std::size_t> path;
  for (std::optional<std::size_t> cur = to; cur; cur = prev[*cur]) path.push_back(*cur);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace

Network Network::build(const CaseFile& cf) {
  Network net;
  // Root first, then buses in file order.
  bool has_root = false;
  for (const auto& b : cf.buses) {
    if (net.index_.contains(b)) {
      throw NetworkError(NetworkErrc::DuplicateBus, "bus " + std::to_string(b.value) + " declared twice");
    }
    net.index_[b] = 0;
    has_root = has_root || b == kFeederBus;
  }
  if (!has_root) throw NetworkError(NetworkErrc::MissingRoot, "case has no bus 0 (feeder)");
  net.bus_ids_.push_back(kFeederBus);
  for (const auto& b : cf.buses) {
    if (b != kFeederBus) net.bus_ids_.push_back(b);
  }
  for (std::size_t i = 0; i < net.bus_ids_.size(); ++i) net.index_[net.bus_ids_[i]] = i;

  const std::size_t n = net.bus_ids_.size();
  std::set<std::string> line_ids;
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& l : cf.lines) {
    for (BusId end : {l.from, l.to}) {
      if (!net.index_.contains(end)) {
        throw NetworkError(NetworkErrc::UnknownBus,
                           describe_line(l) + " references unknown bus " + std::to_string(end.value));
      }
    }
    if (l.from == l.to) throw NetworkError(NetworkErrc::SelfLoop, describe_line(l) + " is a self-loop");
    if (!(l.limit_kw > 0.0)) {
      throw NetworkError(NetworkErrc::InvalidLimit, describe_line(l) + " has non-positive flow limit");
    }
    auto a = net.index_.at(l.from);
    auto b = net.index_.at(l.to);
    if (!line_ids.insert(l.id).second) {
      throw NetworkError(NetworkErrc::DuplicateLine, describe_line(l) + " reuses an existing line id");
    }
    if (!pairs.insert({std::min(a, b), std::max(a, b)}).second) {
      throw NetworkError(NetworkErrc::DuplicateLine, describe_line(l) + " duplicates another line between the same buses");
    }
  }

  DisjointSets sets(n);
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& l : cf.lines) {
    auto a = net.index_.at(l.from);
    auto b = net.index_.at(l.to);
    if (sets.find(a) == sets.find(b)) {
      auto path = forest_path(adj, b, a);
      std::string cycle;
      for (auto v : path) cycle += std::to_string(net.bus_ids_[v].value) + " -> ";
      cycle += std::to_string(l.to.value);
      throw NetworkError(NetworkErrc::CyclicTopology, describe_line(l) + " closes cycle " + cycle);
    }
    sets.parent[sets.find(a)] = sets.find(b);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (std::size_t v = 1; v < n; ++v) {
    if (sets.find(v) != sets.find(0)) {
      throw NetworkError(NetworkErrc::Disconnected,
                         "bus " + std::to_string(net.bus_ids_[v].value) + " is not connected to the feeder");
    }
  }

  // Orient lines away from the root by BFS.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> incident(n);  // (neighbor, line index)
  for (std::size_t k = 0; k < cf.lines.size(); ++k) {
    auto a = net.index_.at(cf.lines[k].from);
    auto b = net.index_.at(cf.lines[k].to);
    incident[a].push_back({b, k});
    incident[b].push_back({a, k});
  }
  net.parent_.assign(n, std::nullopt);
  net.parent_line_.assign(n, 0);
  net.children_.assign(n, {});
  net.lines_.resize(cf.lines.size());
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    net.order_.push_back(u);
    for (auto [v, k] : incident[u]) {
      if (seen[v]) continue;
      seen[v] = true;
      net.parent_[v] = u;
      net.parent_line_[v] = k;
      net.children_[u].push_back(v);
      net.lines_[k] = Line{cf.lines[k].id, u, v, cf.lines[k].limit_kw};
      q.push(v);
    }
  }
  for (auto& c : net.children_) std::sort(c.begin(), c.end());
  return net;
}

std::optional<std::size_t> Network::index_of(BusId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Network::require_index(BusId id) const {
  auto idx = index_of(id);
  if (!idx) throw NetworkError(NetworkErrc::UnknownBus, "bus " + std::to_string(id.value) + " does not exist");
  return *idx;
}

std::optional<std::size_t> Network::line_index(const std::string& id) const {
  for (std::size_t k = 0; k < lines_.size(); ++k) {
    if (lines_[k].id == id) return k;
  }
  return std::nullopt;
}

std::optional<std::size_t> Network::parent(std::size_t bus) const { return parent_.at(bus); }

std::size_t Network::parent_line(std::size_t bus) const {
  if (!parent_.at(bus)) throw std::out_of_range("feeder bus has no parent line");
  return parent_line_[bus];
}

std::vector<double> Network::line_flows(std::span<const double> injections) const {
  std::vector<double> subtree(bus_count(), 0.0);
  for (std::size_t i = 1; i < bus_count() && i < injections.size(); ++i) subtree[i] = injections[i];
  std::vector<double> flows(line_count(), 0.0);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto bus = *it;
    if (bus == 0) continue;
    flows[parent_line_[bus]] = subtree[bus];
    subtree[*parent_[bus]] += subtree[bus];
  }
  return flows;
}

std::vector<double> Network::line_flows(const std::map<BusId, double>& injections) const {
  std::vector<double> dense(bus_count(), 0.0);
  for (const auto& [bus, kw] : injections) dense[require_index(bus)] += kw;
  return line_flows(dense);
}

PtdfMatrix Network::ptdf() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(line_count()),
                                            static_cast<Eigen::Index>(bus_count() - 1));
  for (std::size_t bus = 1; bus < bus_count(); ++bus) {
    for (auto cur = bus; parent_[cur]; cur = *parent_[cur]) {
      h(static_cast<Eigen::Index>(parent_line_[cur]), static_cast<Eigen::Index>(bus - 1)) = 1.0;
    }
  }
  return PtdfMatrix(std::move(h));
}

double Network::feeder_flow(std::span<const double> flows) const {
  double total = 0.0;
  for (auto child : children_[0]) total += flows[parent_line_[child]];
  return total;
}

std::vector<std::size_t> Network::violated_lines(std::span<const double> flows, double tol) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < lines_.size(); ++k) {
    if (std::abs(flows[k]) > lines_[k].limit_kw + tol) out.push_back(k);
  }
  return out;
}

Network Network::with_line_limit(std::size_t line, double limit_kw) const {
  if (!(limit_kw > 0.0)) throw NetworkError(NetworkErrc::InvalidLimit, "line limit must be positive");
  Network copy = *this;
  copy.lines_.at(line).limit_kw = limit_kw;
  return copy;
}

Network Network::with_unlimited_lines() const {
  Network copy = *this;
  for (auto& l : copy.lines_) l.limit_kw = std::numeric_limits<double>::infinity();
  return copy;
}

CaseFile Network::to_case() const {
  CaseFile cf;
  for (auto b : bus_ids_) cf.buses.push_back(b);
  for (const auto& l : lines_) {
    cf.lines.push_back(LineSpec{l.id, bus_ids_[l.upstream], bus_ids_[l.downstream], l.limit_kw, 0});
  }
  return cf;
}

// ---------------------------------------------------------------------------

double PtdfMatrix::at(std::size_t line, std::size_t bus_index) const {
  if (bus_index == 0) return 0.0;
  return h_(static_cast<Eigen::Index>(line), static_cast<Eigen::Index>(bus_index - 1));
}

std::vector<double> PtdfMatrix::apply(std::span<const double> injections) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(h_.cols());
  for (Eigen::Index k = 0; k < h_.cols(); ++k) {
    auto idx = static_cast<std::size_t>(k + 1);
    if (idx < injections.size()) x(k) = injections[idx];
  }
  Eigen::VectorXd f = h_ * x;
  return {f.data(), f.data() + f.size()};
}

// ---------------------------------------------------------------------------

Grid::Grid(Network network) : network_(std::move(network)) { reset(); }

void Grid::reset() {
  state_.t = -1;
  state_.injections.assign(network_.bus_count(), 0.0);
  state_.flows.assign(network_.line_count(), 0.0);
  state_.feasible = true;
}

const GridState& Grid::step(std::span<const GridAction> actions) {
  std::vector<double> injections(network_.bus_count(), 0.0);
  for (const auto& a : actions) {
    auto idx = network_.index_of(a.bus);
    if (!idx) {
      throw NetworkError(NetworkErrc::UnknownBus,
                         "agent '" + a.agent + "' targets unknown bus " + std::to_string(a.bus.value));
    }
    injections[*idx] += a.kw;
  }
  state_.injections = std::move(injections);
  state_.flows = network_.line_flows(state_.injections);
  state_.feasible = network_.violated_lines(state_.flows).empty();
  ++state_.t;
  return state_;
}

}  // namespace radmarket
