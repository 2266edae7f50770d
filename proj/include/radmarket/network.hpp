#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace radmarket {

/// Identifier of a bus as written in a case file. Bus 0 is the feeder.
struct BusId {
  int value = 0;
  friend auto operator<=>(const BusId&, const BusId&) = default;
};

inline constexpr BusId kFeederBus{0};

/// Flow overshoot tolerated before a line is reported as violated (kW).
inline constexpr double kFlowTolerance = 1e-6;

enum class NetworkErrc {
  Parse,
  MissingRoot,
  DuplicateBus,
  UnknownBus,
  SelfLoop,
  InvalidLimit,
  DuplicateLine,
  CyclicTopology,
  Disconnected,
};

const char* to_string(NetworkErrc code);

class NetworkError : public std::runtime_error {
 public:
  NetworkError(NetworkErrc code, const std::string& message);
  NetworkErrc code() const noexcept { return code_; }

 private:
  NetworkErrc code_;
};

struct LineSpec {
  std::string id;
  BusId from;
  BusId to;
  double limit_kw = 0.0;
  int source_line = 0;
};

/// Raw contents of a case file, before topology validation.
struct CaseFile {
  std::vector<BusId> buses;
  std::vector<LineSpec> lines;
  std::string origin = "<memory>";
};

CaseFile parse_case(std::istream& in, const std::string& origin = "<memory>");
CaseFile parse_case_text(const std::string& text, const std::string& origin = "<memory>");
CaseFile read_case_file(const std::filesystem::path& path);
void write_case(std::ostream& out, const CaseFile& cf);

/// A line oriented away from the feeder.
struct Line {
  std::string id;
  std::size_t upstream = 0;
  std::size_t downstream = 0;
  double limit_kw = 0.0;
};

class PtdfMatrix;

/// Radial network. Buses are addressed by dense index; index 0 is the feeder.
/// Line flows are positive in the parent-to-child direction and injections
/// count consumption as positive.
class Network {
 public:
  static Network build(const CaseFile& cf);

  std::size_t bus_count() const { return bus_ids_.size(); }
  std::size_t line_count() const { return lines_.size(); }

  BusId bus_id(std::size_t index) const { return bus_ids_.at(index); }
  std::optional<std::size_t> index_of(BusId id) const;
  /// Throws NetworkError(UnknownBus).
  std::size_t require_index(BusId id) const;
  std::optional<std::size_t> line_index(const std::string& id) const;

  const Line& line(std::size_t index) const { return lines_.at(index); }
  std::span<const Line> lines() const { return lines_; }

  std::optional<std::size_t> parent(std::size_t bus) const;
  /// Line connecting a non-root bus to its parent.
  std::size_t parent_line(std::size_t bus) const;
  std::span<const std::size_t> children(std::size_t bus) const { return children_.at(bus); }
  /// Root first; every bus appears after its parent.
  std::span<const std::size_t> topological_order() const { return order_; }

  /// Flow recursion in one reverse-topological pass. `injections` is indexed
  /// by bus; the root entry is ignored and missing trailing entries count as 0.
  std::vector<double> line_flows(std::span<const double> injections) const;
  std::vector<double> line_flows(const std::map<BusId, double>& injections) const;

  PtdfMatrix ptdf() const;

  /// Sum of flows on lines leaving the feeder.
  double feeder_flow(std::span<const double> flows) const;
  /// Lines whose |flow| exceeds the limit by more than `tol`.
  std::vector<std::size_t> violated_lines(std::span<const double> flows,
                                          double tol = kFlowTolerance) const;

  Network with_line_limit(std::size_t line, double limit_kw) const;
  Network with_unlimited_lines() const;

  CaseFile to_case() const;

 private:
  std::vector<BusId> bus_ids_;
  std::map<BusId, std::size_t> index_;
  std::vector<Line> lines_;
  std::vector<std::optional<std::size_t>> parent_;
  std::vector<std::size_t> parent_line_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> order_;
};

inline Network build_network(const CaseFile& cf) { return Network::build(cf); }

/// Path-indicator matrix: rows are lines, columns are non-root buses
/// (column k is bus index k + 1). H(l, k) = 1 iff line l lies on the path
/// from the feeder to that bus.
class PtdfMatrix {
 public:
  explicit PtdfMatrix(Eigen::MatrixXd entries) : h_(std::move(entries)) {}

  const Eigen::MatrixXd& matrix() const { return h_; }
  double at(std::size_t line, std::size_t bus_index) const;
  /// Flows for a per-bus injection vector (root entry ignored).
  std::vector<double> apply(std::span<const double> injections) const;

 private:
  Eigen::MatrixXd h_;
};

struct GridAction {
  std::string agent;
  BusId bus;
  double kw = 0.0;
};

struct GridState {
  int t = -1;
  std::vector<double> injections;
  std::vector<double> flows;
  bool feasible = true;
};

/// Physical grid: lossless single-phase model stepped once per market clearing.
class Grid {
 public:
  explicit Grid(Network network);

  const Network& network() const { return network_; }
  const GridState& state() const { return state_; }

  void reset();
  /// Sums actions per bus, recomputes flows and the feasibility flag. Throws
  /// NetworkError(UnknownBus) before mutating anything.
  const GridState& step(std::span<const GridAction> actions);

 private:
  Network network_;
  GridState state_;
};

}  // namespace radmarket
