#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace oracle {

using radmarket::BusId;
using radmarket::CaseFile;
using radmarket::LineSpec;
using radmarket::LpProblem;

CaseFile random_tree(std::mt19937_64& rng, int buses, double lo, double hi) {
  CaseFile cf;
  std::vector<int> ids(static_cast<std::size_t>(buses));
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin() + 1, ids.end(), rng);
  for (int b : ids) cf.buses.push_back(BusId{b});
  std::uniform_real_distribution<double> limit(lo, hi);
  std::bernoulli_distribution flip(0.5);
  for (int i = 1; i < buses; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    int parent = ids[static_cast<std::size_t>(pick(rng))];
    int child = ids[static_cast<std::size_t>(i)];
    LineSpec l{"L" + std::to_string(i), BusId{parent}, BusId{child}, limit(rng), 0};
    if (flip(rng)) std::swap(l.from, l.to);
    cf.lines.push_back(l);
  }
  std::shuffle(cf.lines.begin(), cf.lines.end(), rng);
  return cf;
}

std::vector<double> subtree_sum_flows(const CaseFile& cf, const std::vector<double>& inj) {
  std::map<int, std::vector<std::pair<int, std::size_t>>> adj;
  for (std::size_t k = 0; k < cf.lines.size(); ++k) {
    adj[cf.lines[k].from.value].push_back({cf.lines[k].to.value, k});
    adj[cf.lines[k].to.value].push_back({cf.lines[k].from.value, k});
  }
  std::vector<double> flows(cf.lines.size(), 0.0);
  for (std::size_t k = 0; k < cf.lines.size(); ++k) {
    // Walk each side of line k; the side without bus 0 is downstream.
    auto side = [&](int start) {
      std::vector<int> seen{start};
      std::vector<int> stack{start};
      bool has_root = false;
      double sum = 0.0;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        if (u == 0) has_root = true;
        sum += u == 0 ? 0.0 : inj.at(static_cast<std::size_t>(u));
        for (auto [v, e] : adj[u]) {
          if (e == k || std::find(seen.begin(), seen.end(), v) != seen.end()) continue;
          seen.push_back(v);
          stack.push_back(v);
        }
      }
      return std::pair{has_root, sum};
    };
    auto a = side(cf.lines[k].from.value);
    auto b = side(cf.lines[k].to.value);
    flows[k] = a.first ? b.second : a.second;
  }
  return flows;
}

LpProblem random_lp(std::mt19937_64& rng, int n, int m_eq, int m_ub, bool integral) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto coef = [&]() {
    if (integral) return std::floor(u01(rng) * 11.0) - 5.0;
    return u01(rng) * 10.0 - 5.0;
  };
  LpProblem p;
  p.c.resize(n);
  for (int j = 0; j < n; ++j) p.c(j) = coef();
  Eigen::VectorXd x0(n);
  for (int j = 0; j < n; ++j) x0(j) = integral ? std::floor(u01(rng) * 4.0) : u01(rng) * 3.0;

  p.a_eq = Eigen::MatrixXd::Zero(m_eq, n);
  for (int i = 0; i < m_eq; ++i)
    for (int j = 0; j < n; ++j) p.a_eq(i, j) = coef();
  p.b_eq = p.a_eq * x0;

  // The last ub row is a sum bound that keeps the region bounded.
  p.a_ub = Eigen::MatrixXd::Zero(m_ub, n);
  for (int i = 0; i + 1 < m_ub; ++i)
    for (int j = 0; j < n; ++j) p.a_ub(i, j) = coef();
  if (m_ub > 0) p.a_ub.row(m_ub - 1).setOnes();
  p.b_ub = p.a_ub * x0;
  for (int i = 0; i < m_ub; ++i) p.b_ub(i) += integral ? std::floor(u01(rng) * 3.0) : u01(rng) * 2.0;

  p.lower = Eigen::VectorXd::Zero(n);
  p.upper = Eigen::VectorXd::Constant(n, radmarket::kInf);
  return p;
}

std::optional<double> vertex_enumeration_min(const LpProblem& p) {
  constexpr int kMaxRows = 16;
  const int n = static_cast<int>(p.c.size());
  const int m_eq = static_cast<int>(p.b_eq.size());
  const int m_ub = static_cast<int>(p.b_ub.size());
  const int m = m_eq + m_ub;
  const int cols = n + m_ub;
  for (int j = 0; j < n; ++j) {
    if (p.lower(j) != 0.0 || std::isfinite(p.upper(j))) {
      throw std::invalid_argument("vertex enumeration expects x >= 0 only");
    }
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, cols);
  Eigen::VectorXd b(m);
  if (m_eq > 0) {
    a.topLeftCorner(m_eq, n) = p.a_eq;
    b.head(m_eq) = p.b_eq;
  }
  if (m_ub > 0) {
    a.bottomLeftCorner(m_ub, n) = p.a_ub;
    a.bottomRightCorner(m_ub, m_ub).setIdentity();
    b.tail(m_ub) = p.b_ub;
  }
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(cols);
  cost.head(n) = p.c;

  if (m == 0) {
    if ((p.c.array() < 0.0).any()) return std::nullopt;
    return 0.0;
  }
  if (m > kMaxRows) throw std::invalid_argument("vertex enumeration supports at most 16 rows");
  std::optional<double> best;
  std::vector<int> pick(static_cast<std::size_t>(m));
  std::iota(pick.begin(), pick.end(), 0);
  // Fixed capacity keeps the inner loop free of allocations.
  using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxRows, kMaxRows>;
  using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxRows, 1>;
  Small basis(m, m);
  SmallVec cb(m), rhs = b;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  Eigen::PartialPivLU<Small> lu(m);
  while (true) {
    for (int r = 0; r < m; ++r) {
      basis.col(r) = a.col(pick[static_cast<std::size_t>(r)]);
      cb(r) = cost(pick[static_cast<std::size_t>(r)]);
    }
    lu.compute(basis);
    // Partial pivoting puts the smallest pivot on the diagonal of U when the basis is singular.
    if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 1e-10 * scale) {
      SmallVec xb = lu.solve(rhs);
      if ((xb.array() >= -1e-9).all()) {
        double obj = cb.dot(xb);
        if (!best || obj < *best) best = obj;
      }
    }
    // Next combination in lexicographic order.
    int i = m - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == cols - m + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < m; ++k) pick[static_cast<std::size_t>(k)] = pick[static_cast<std::size_t>(k - 1)] + 1;
  }
  return best;
}

}  // namespace oracle

namespace oracle {

double KktResidual::worst() const {
  return std::max({primal, dual_sign, stationarity, complementarity, gap});
}

KktResidual kkt_residual(const LpProblem& p, const radmarket::LpSolution& s) {
  KktResidual r;
  const Eigen::VectorXd& x = s.x;
  const Eigen::Index n = p.c.size();
  if (p.b_eq.size() > 0) r.primal = std::max(r.primal, (p.a_eq * x - p.b_eq).cwiseAbs().maxCoeff());
  Eigen::VectorXd slack_ub;
  if (p.b_ub.size() > 0) {
    slack_ub = p.b_ub - p.a_ub * x;
    r.primal = std::max(r.primal, std::max(0.0, -slack_ub.minCoeff()));
    r.dual_sign = std::max(r.dual_sign, std::max(0.0, -s.duals_ub.minCoeff()));
    r.complementarity = std::max(r.complementarity, (slack_ub.cwiseProduct(s.duals_ub)).cwiseAbs().maxCoeff());
  }
  // Reduced costs rebuilt from the duals rather than taken from the solver.
  Eigen::VectorXd red = p.c;
  if (p.b_eq.size() > 0) red -= p.a_eq.transpose() * s.duals_eq;
  if (p.b_ub.size() > 0) red += p.a_ub.transpose() * s.duals_ub;
  double dual_obj = 0.0;
  if (p.b_eq.size() > 0) dual_obj += p.b_eq.dot(s.duals_eq);
  if (p.b_ub.size() > 0) dual_obj -= p.b_ub.dot(s.duals_ub);
  for (Eigen::Index j = 0; j < n; ++j) {
    r.primal = std::max(r.primal, std::max(0.0, p.lower(j) - x(j)));
    r.primal = std::max(r.primal, std::max(0.0, x(j) - p.upper(j)));
    double rj = red(j);
    // rj > 0 needs an active finite lower bound, rj < 0 an active upper bound.
    if (rj > 0.0) {
      if (!std::isfinite(p.lower(j))) {
        r.dual_sign = std::max(r.dual_sign, rj);
      } else {
        r.complementarity = std::max(r.complementarity, std::abs(rj * (x(j) - p.lower(j))));
        dual_obj += rj * p.lower(j);
      }
    } else if (rj < 0.0) {
      if (!std::isfinite(p.upper(j))) {
        r.dual_sign = std::max(r.dual_sign, -rj);
      } else {
        r.complementarity = std::max(r.complementarity, std::abs(rj * (p.upper(j) - x(j))));
        dual_obj += rj * p.upper(j);
      }
    }
  }
  r.stationarity = (red - s.reduced_costs).cwiseAbs().maxCoeff();
  double primal_obj = p.c.dot(x);
  r.gap = std::abs(primal_obj - dual_obj) / std::max(1.0, std::abs(primal_obj));
  r.gap = std::max(r.gap, std::abs(primal_obj - s.objective) / std::max(1.0, std::abs(primal_obj)));
  return r;
}

}  // namespace oracle

namespace oracle {

double brute_force_surplus(const radmarket::Network& network, const radmarket::MarketInput& input, int points) {
  struct Agent {
    const radmarket::Order* order;
    double sign;  // +1 demand
  };
  std::vector<Agent> agents;
  for (const auto& o : input.bids) agents.push_back({&o, 1.0});
  for (const auto& o : input.offers) agents.push_back({&o, -1.0});
  if (agents.size() < 2) return 0.0;

  // The implied agent is the lone member of one side.
  std::size_t implied = input.offers.size() == 1 ? input.bids.size() : 0;
  std::vector<std::size_t> free;
  for (std::size_t a = 0; a < agents.size(); ++a)
    if (a != implied) free.push_back(a);

  double best = 0.0;  // no trade is always feasible
  std::vector<int> idx(free.size(), 0);
  std::vector<double> q(agents.size(), 0.0);
  std::vector<double> by_index(network.bus_count(), 0.0);
  while (true) {
    double net = 0.0;
    for (std::size_t k = 0; k < free.size(); ++k) {
      const auto& c = agents[free[k]].order->curve;
      q[free[k]] = c.q_max() * idx[k] / (points - 1);
      net += agents[free[k]].sign * q[free[k]];
    }
    // Balance: sum of signed quantities is zero.
    const double qi = -net / agents[implied].sign;
    const auto& ci = agents[implied].order->curve;
    if (qi >= -1e-12 && qi <= ci.q_max() + 1e-12) {
      q[implied] = std::clamp(qi, 0.0, ci.q_max());
      std::fill(by_index.begin(), by_index.end(), 0.0);
      double surplus = 0.0;
      for (std::size_t a = 0; a < agents.size(); ++a) {
        by_index[network.require_index(agents[a].order->bus)] += agents[a].sign * q[a];
        surplus += agents[a].sign * agents[a].order->curve.integral(q[a]);
      }
      auto flows = network.line_flows(by_index);
      bool ok = true;
      for (std::size_t l = 0; l < flows.size(); ++l)
        if (std::abs(flows[l]) > network.line(l).limit_kw + 1e-9) ok = false;
      if (ok) best = std::max(best, surplus);
    }
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == points) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return best;
}

}  // namespace oracle
