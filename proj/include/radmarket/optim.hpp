#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace radmarket {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// minimize c'x  subject to  a_eq x = b_eq,  a_ub x <= b_ub,  lower <= x <= upper.
struct LpProblem {
  Eigen::VectorXd c;
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd a_ub;
  Eigen::VectorXd b_ub;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  std::size_t variable_count() const { return static_cast<std::size_t>(c.size()); }
  /// Throws std::invalid_argument on inconsistent dimensions or bounds.
  void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus status);

/// Dual conventions: duals_eq[i] = d(objective)/d(b_eq[i]); duals_ub[i] =
/// -d(objective)/d(b_ub[i]) >= 0. With these, c = a_eq' y_eq - a_ub' y_ub + r,
/// where r (reduced_costs) is >= 0 at active lower bounds and <= 0 at upper.
struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd duals_eq;
  Eigen::VectorXd duals_ub;
  Eigen::VectorXd reduced_costs;
  /// Infeasible: Farkas multipliers over (eq rows, ub rows). Unbounded: ray in x.
  Eigen::VectorXd certificate;
  int iterations = 0;
};

class LpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LpOptions {
  double feasibility_tol = 1e-8;
  double pivot_tol = 1e-10;
  double optimality_tol = 1e-9;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_streak = 50;
  int max_iterations = 0;  // 0 selects a bound from the problem size
};

/// Dense two-phase bounded-variable primal simplex. Throws LpError when the
/// iteration bound is exhausted.
LpSolution solve_lp(const LpProblem& problem, const LpOptions& options = {});

/// b_eq'y_eq - b_ub'y_ub plus the bound terms of the reduced costs.
double dual_objective(const LpProblem& problem, const LpSolution& solution);

struct EpigraphResult {
  LpProblem problem;
  std::size_t aux_index = 0;
};

/// Adds s >= 0 with s >= x[var_index]. The caller prices s; with a positive
/// cost, s = max(0, x[var_index]) at the optimum.
EpigraphResult epigraph_max0(LpProblem problem, std::size_t var_index);

/// Row-by-row construction of an LpProblem.
class LpBuilder {
 public:
  using Terms = std::vector<std::pair<std::size_t, double>>;

  std::size_t add_variable(double cost, double lower = 0.0, double upper = kInf);
  std::size_t add_eq(const Terms& terms, double rhs);
  std::size_t add_ub(const Terms& terms, double rhs);

  std::size_t variable_count() const { return cost_.size(); }
  std::size_t eq_count() const { return eq_rhs_.size(); }
  std::size_t ub_count() const { return ub_rhs_.size(); }

  void set_cost(std::size_t var, double cost) { cost_.at(var) = cost; }

  LpProblem build() const;

 private:
  std::vector<double> cost_, lower_, upper_;
  std::vector<Terms> eq_rows_, ub_rows_;
  std::vector<double> eq_rhs_, ub_rhs_;
};

/// Plain-text dump: header line "lp <n> <m_eq> <m_ub>", then "c", "bounds",
/// "eq" and "ub" sections with one row per line (coefficients then rhs).
void write_lp_text(std::ostream& out, const LpProblem& problem);

}  // namespace radmarket
