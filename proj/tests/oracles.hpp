#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the code path it is used to check.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "radmarket/clearing.hpp"
#include "radmarket/network.hpp"
#include "radmarket/optim.hpp"

namespace oracle {

/// Random radial tree over buses 0..n-1 with shuffled line order and
/// orientation. Limits drawn from [lo, hi].
radmarket::CaseFile random_tree(std::mt19937_64& rng, int buses, double lo = 5.0, double hi = 50.0);

/// Line flows by summing injections over the far side of each line, found by
/// a DFS over the raw case edges with that line removed.
std::vector<double> subtree_sum_flows(const radmarket::CaseFile& cf, const std::vector<double>& injections_by_id);

/// Random feasible, bounded LP in the form
///   min c'x  s.t.  a_eq x = b_eq, a_ub x <= b_ub, x >= 0.
/// `integral` draws small integer data (more degenerate vertices).
radmarket::LpProblem random_lp(std::mt19937_64& rng, int n, int m_eq, int m_ub, bool integral);

/// Minimum objective over all basic feasible solutions of an LP with x >= 0,
/// found by exhaustive enumeration of column bases of [a_eq; a_ub | 0; I].
std::optional<double> vertex_enumeration_min(const radmarket::LpProblem& p);

/// Largest violation among primal feasibility, dual sign, stationarity,
/// complementary slackness, and the primal/dual objective gap, recomputed from
/// the problem data and the returned vectors.
struct KktResidual {
  double primal = 0.0;
  double dual_sign = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double gap = 0.0;
  double worst() const;
};
KktResidual kkt_residual(const radmarket::LpProblem& p, const radmarket::LpSolution& s);

/// Best exact surplus over a lattice of `points` quantities in [0, q_max] per
/// agent (one agent's quantity is implied by balance), subject to the line
/// limits. Intended for <= 3 agents.
double brute_force_surplus(const radmarket::Network& network, const radmarket::MarketInput& input, int points = 200);

}  // namespace oracle
