#include "radmarket/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>

#include "radmarket/text.hpp"

namespace radmarket {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "Unknown";
}

void LpProblem::validate() const {
  const auto n = c.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("bound vectors must match c");
  if (a_eq.rows() != b_eq.size() || (a_eq.rows() > 0 && a_eq.cols() != n)) {
    throw std::invalid_argument("a_eq/b_eq dimensions are inconsistent");
  }
  if (a_ub.rows() != b_ub.size() || (a_ub.rows() > 0 && a_ub.cols() != n)) {
    throw std::invalid_argument("a_ub/b_ub dimensions are inconsistent");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j)) || lower(j) > upper(j)) {
      throw std::invalid_argument("variable " + std::to_string(j) + " has lower > upper");
    }
    if (!std::isfinite(c(j))) throw std::invalid_argument("cost vector must be finite");
    if (lower(j) == kInf || upper(j) == -kInf) throw std::invalid_argument("bounds exclude every finite value");
  }
  if (!a_eq.allFinite() || !b_eq.allFinite() || !a_ub.allFinite() || !b_ub.allFinite()) {
    throw std::invalid_argument("constraint data must be finite");
  }
}

namespace {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class VarKind : std::uint8_t { Shift, Mirror, Split };
enum class ColState : std::uint8_t { Basic, Lower, Upper };

// Original variable j expressed through standard columns z >= 0.
struct VarMap {
  VarKind kind;
  double offset;
  Index col;
};

struct Phase {
  bool optimal = true;
  Index ray_col = -1;
  double ray_dir = 0.0;
};

class Simplex {
 public:
  Simplex(Index rows, Index cols, const LpOptions& opt, int max_iter)
      : m_(rows), n_(cols), t_(RowMatrix::Zero(rows, cols + 1)), ub_(static_cast<std::size_t>(cols), kInf),
        state_(static_cast<std::size_t>(cols), ColState::Lower), banned_(static_cast<std::size_t>(cols), 0),
        basis_(static_cast<std::size_t>(rows), 0), beta_(Eigen::VectorXd::Zero(rows)),
        cost_(Eigen::VectorXd::Zero(cols)), d_(Eigen::VectorXd::Zero(cols)), opt_(opt), max_iter_(max_iter) {}

  RowMatrix& tableau() { return t_; }
  const RowMatrix& tableau() const { return t_; }
  double& upper(Index j) { return ub_[static_cast<std::size_t>(j)]; }
  void ban(Index j) { banned_[static_cast<std::size_t>(j)] = 1; }
  void set_basic(Index row, Index col) {
    basis_[static_cast<std::size_t>(row)] = col;
    state_[static_cast<std::size_t>(col)] = ColState::Basic;
  }
  Index basic(Index row) const { return basis_[static_cast<std::size_t>(row)]; }
  ColState state(Index j) const { return state_[static_cast<std::size_t>(j)]; }
  double basic_value(Index row) const { return beta_(row); }
  int iterations() const { return iterations_; }

  void set_cost(Eigen::VectorXd cost) {
    cost_ = std::move(cost);
    d_ = cost_;
    for (Index r = 0; r < m_; ++r) {
      const double cb = cost_(basic(r));
      if (cb != 0.0) d_ -= cb * t_.row(r).head(n_).transpose();
    }
  }

  void recompute_values() {
    beta_ = t_.col(n_);
    for (Index j = 0; j < n_; ++j) {
      if (state(j) == ColState::Upper) beta_ -= ub_[static_cast<std::size_t>(j)] * t_.col(j);
    }
  }

  double value(Index j) const {
    switch (state(j)) {
      case ColState::Lower: return 0.0;
      case ColState::Upper: return ub_[static_cast<std::size_t>(j)];
      case ColState::Basic: break;
    }
    for (Index r = 0; r < m_; ++r) {
      if (basic(r) == j) return beta_(r);
    }
    return 0.0;
  }

  // Row duals c_B' B^{-1}; columns [first, first + m) hold B^{-1}.
  Eigen::VectorXd row_duals(Index first) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m_);
    for (Index r = 0; r < m_; ++r) {
      const double cb = cost_(basic(r));
      if (cb != 0.0) y += cb * t_.row(r).segment(first, m_).transpose();
    }
    return y;
  }

  void pivot(Index row, Index col) {
    const double piv = t_(row, col);
    t_.row(row) /= piv;
    for (Index i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    const double fd = d_(col);
    if (fd != 0.0) d_ -= fd * t_.row(row).head(n_).transpose();
    d_(col) = 0.0;
    state_[static_cast<std::size_t>(basic(row))] = ColState::Lower;
    set_basic(row, col);
  }

  // Pivot a zero-valued basic column out of `row` in favour of any usable
  // nonbasic column outside [skip_from, n). Returns false if the row is empty.
  bool pivot_out(Index row, Index skip_from) {
    Index best = -1;
    double best_abs = 1e-9;
    for (Index j = 0; j < skip_from; ++j) {
      if (state(j) == ColState::Basic) continue;
      const double a = std::abs(t_(row, j));
      if (a > best_abs) {
        best_abs = a;
        best = j;
      }
    }
    if (best < 0) return false;
    const double v = value(best);
    const auto leaving = basic(row);
    pivot(row, best);
    state_[static_cast<std::size_t>(leaving)] = ColState::Lower;
    beta_(row) = v;
    return true;
  }

  Phase run() {
    Phase result;
    int degenerate = 0;
    bool bland = false;
    while (true) {
      if (++iterations_ > max_iter_) {
        throw LpError("NumericalFailure: simplex exceeded " + std::to_string(max_iter_) + " iterations");
      }
      if (iterations_ % 64 == 0) recompute_values();

      Index enter = -1;
      double best = 0.0;
      for (Index j = 0; j < n_; ++j) {
        const auto sj = state(j);
        if (sj == ColState::Basic || banned_[static_cast<std::size_t>(j)]) continue;
        if (ub_[static_cast<std::size_t>(j)] <= 0.0) continue;
        const double dj = d_(j);
        double score = 0.0;
        if (sj == ColState::Lower && dj < -opt_.optimality_tol) {
          score = -dj;
        } else if (sj == ColState::Upper && dj > opt_.optimality_tol) {
          score = dj;
        } else {
          continue;
        }
        if (bland) {
          enter = j;
          break;
        }
        if (score > best) {
          best = score;
          enter = j;
        }
      }
      if (enter < 0) return result;

      const double dir = state(enter) == ColState::Lower ? 1.0 : -1.0;
      double theta = ub_[static_cast<std::size_t>(enter)];
      Index leave = -1;
      bool leave_upper = false;
      double leave_alpha = 0.0;
      for (Index r = 0; r < m_; ++r) {
        const double a = dir * t_(r, enter);
        double lim;
        bool to_upper;
        if (a > opt_.pivot_tol) {
          lim = std::max(0.0, beta_(r)) / a;
          to_upper = false;
        } else if (a < -opt_.pivot_tol) {
          const double u = ub_[static_cast<std::size_t>(basic(r))];
          if (!std::isfinite(u)) continue;
          lim = std::max(0.0, u - beta_(r)) / (-a);
          to_upper = true;
        } else {
          continue;
        }
        const double tie = 1e-12 * (1.0 + std::abs(lim));
        bool take = false;
        if (lim < theta - tie) {
          take = true;
        } else if (leave >= 0 && std::abs(lim - theta) <= tie) {
          take = bland ? basic(r) < basic(leave) : std::abs(a) > leave_alpha;
        }
        if (take) {
          theta = lim;
          leave = r;
          leave_upper = to_upper;
          leave_alpha = std::abs(a);
        }
      }

      if (leave < 0) {
        if (!std::isfinite(theta)) {
          result.optimal = false;
          result.ray_col = enter;
          result.ray_dir = dir;
          return result;
        }
        beta_ -= dir * theta * t_.col(enter);
        state_[static_cast<std::size_t>(enter)] =
            state(enter) == ColState::Lower ? ColState::Upper : ColState::Lower;
        degenerate = 0;
        bland = false;
        continue;
      }

      const double entering_value = state(enter) == ColState::Lower ? theta : ub_[static_cast<std::size_t>(enter)] - theta;
      beta_ -= dir * theta * t_.col(enter);
      const Index leaving = basic(leave);
      pivot(leave, enter);
      state_[static_cast<std::size_t>(leaving)] = leave_upper ? ColState::Upper : ColState::Lower;
      beta_(leave) = entering_value;

      if (theta <= 1e-12) {
        if (++degenerate > opt_.degenerate_streak) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }
  }

 private:
  Index m_, n_;
  RowMatrix t_;
  std::vector<double> ub_;
  std::vector<ColState> state_;
  std::vector<char> banned_;
  std::vector<Index> basis_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd cost_, d_;
  const LpOptions& opt_;
  int max_iter_;
  int iterations_ = 0;
};

}  // namespace

LpSolution solve_lp(const LpProblem& p, const LpOptions& opt) {
  p.validate();
  const Index n = p.c.size();
  const Index m_eq = p.b_eq.size();
  const Index m_ub = p.b_ub.size();
  const Index m = m_eq + m_ub;

  // Column layout: transformed structurals, one slack per ub row, one
  // artificial per row.
  std::vector<VarMap> vars(static_cast<std::size_t>(n));
  Index cols = 0;
  for (Index j = 0; j < n; ++j) {
    const double lo = p.lower(j), hi = p.upper(j);
    if (std::isfinite(lo)) {
      vars[static_cast<std::size_t>(j)] = {VarKind::Shift, lo, cols++};
    } else if (std::isfinite(hi)) {
      vars[static_cast<std::size_t>(j)] = {VarKind::Mirror, hi, cols++};
    } else {
      vars[static_cast<std::size_t>(j)] = {VarKind::Split, 0.0, cols};
      cols += 2;
    }
  }
  const Index n_struct = cols;
  const Index slack0 = n_struct;
  const Index art0 = slack0 + m_ub;
  const Index total = art0 + m;

  int max_iter = opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(50 * (m + total) + 1000);
  Simplex sx(m, total, opt, max_iter);
  auto& t = sx.tableau();

  std::vector<double> row_sign(static_cast<std::size_t>(m), 1.0);
  Eigen::VectorXd cost2 = Eigen::VectorXd::Zero(total);
  for (Index j = 0; j < n; ++j) {
    const auto& vm = vars[static_cast<std::size_t>(j)];
    switch (vm.kind) {
      case VarKind::Shift:
        cost2(vm.col) = p.c(j);
        sx.upper(vm.col) = p.upper(j) - p.lower(j);
        break;
      case VarKind::Mirror:
        cost2(vm.col) = -p.c(j);
        break;
      case VarKind::Split:
        cost2(vm.col) = p.c(j);
        cost2(vm.col + 1) = -p.c(j);
        break;
    }
  }

  for (Index i = 0; i < m; ++i) {
    const bool is_eq = i < m_eq;
    double rhs = is_eq ? p.b_eq(i) : p.b_ub(i - m_eq);
    for (Index j = 0; j < n; ++j) {
      const double a = is_eq ? p.a_eq(i, j) : p.a_ub(i - m_eq, j);
      if (a == 0.0) continue;
      const auto& vm = vars[static_cast<std::size_t>(j)];
      switch (vm.kind) {
        case VarKind::Shift:
          t(i, vm.col) = a;
          rhs -= a * vm.offset;
          break;
        case VarKind::Mirror:
          t(i, vm.col) = -a;
          rhs -= a * vm.offset;
          break;
        case VarKind::Split:
          t(i, vm.col) = a;
          t(i, vm.col + 1) = -a;
          break;
      }
    }
    if (!is_eq) t(i, slack0 + (i - m_eq)) = 1.0;
    t(i, total) = rhs;
    if (rhs < 0.0) {
      t.row(i) *= -1.0;
      row_sign[static_cast<std::size_t>(i)] = -1.0;
    }
    t(i, art0 + i) = 1.0;
    sx.set_basic(i, art0 + i);
  }
  const double b_scale = std::max(1.0, m > 0 ? t.col(total).cwiseAbs().maxCoeff() : 0.0);
  sx.recompute_values();

  LpSolution sol;
  sol.duals_eq = Eigen::VectorXd::Zero(m_eq);
  sol.duals_ub = Eigen::VectorXd::Zero(m_ub);

  auto orig_row_duals = [&](const Eigen::VectorXd& y_std) {
    Eigen::VectorXd y(m);
    for (Index i = 0; i < m; ++i) y(i) = row_sign[static_cast<std::size_t>(i)] * y_std(i);
    return y;
  };

  // Phase 1: minimise the sum of artificials.
  if (m > 0) {
    Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(total);
    cost1.tail(m).setOnes();
    sx.set_cost(cost1);
    sx.run();
    sx.recompute_values();
    double infeasibility = 0.0;
    for (Index r = 0; r < m; ++r) {
      if (sx.basic(r) >= art0) infeasibility += std::max(0.0, sx.basic_value(r));
    }
    if (infeasibility > opt.feasibility_tol * b_scale) {
      sol.status = LpStatus::Infeasible;
      sol.certificate = orig_row_duals(sx.row_duals(art0));
      sol.iterations = sx.iterations();
      sol.x = Eigen::VectorXd::Zero(n);
      return sol;
    }
    for (Index r = 0; r < m; ++r) {
      if (sx.basic(r) >= art0) sx.pivot_out(r, art0);
    }
    sx.recompute_values();
  }
  for (Index i = 0; i < m; ++i) {
    sx.ban(art0 + i);
    sx.upper(art0 + i) = 0.0;
  }

  // Phase 2.
  sx.set_cost(cost2);
  Phase phase2 = sx.run();
  sx.recompute_values();
  sol.iterations = sx.iterations();

  auto to_original = [&](auto&& zval) {
    Eigen::VectorXd x(n);
    for (Index j = 0; j < n; ++j) {
      const auto& vm = vars[static_cast<std::size_t>(j)];
      switch (vm.kind) {
        case VarKind::Shift: x(j) = vm.offset + zval(vm.col); break;
        case VarKind::Mirror: x(j) = vm.offset - zval(vm.col); break;
        case VarKind::Split: x(j) = zval(vm.col) - zval(vm.col + 1); break;
      }
    }
    return x;
  };

  if (!phase2.optimal) {
    sol.status = LpStatus::Unbounded;
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(total);
    dz(phase2.ray_col) = phase2.ray_dir;
    for (Index r = 0; r < m; ++r) dz(sx.basic(r)) -= phase2.ray_dir * t(r, phase2.ray_col);
    // Ray in x: offsets do not apply to directions.
    Eigen::VectorXd ray(n);
    for (Index j = 0; j < n; ++j) {
      const auto& vm = vars[static_cast<std::size_t>(j)];
      switch (vm.kind) {
        case VarKind::Shift: ray(j) = dz(vm.col); break;
        case VarKind::Mirror: ray(j) = -dz(vm.col); break;
        case VarKind::Split: ray(j) = dz(vm.col) - dz(vm.col + 1); break;
      }
    }
    sol.certificate = ray;
    sol.x = to_original([&](Index c) { return sx.value(c); });
    return sol;
  }

  sol.status = LpStatus::Optimal;
  sol.x = to_original([&](Index c) { return sx.value(c); });
  sol.objective = p.c.dot(sol.x);
  if (m > 0) {
    Eigen::VectorXd y = orig_row_duals(sx.row_duals(art0));
    sol.duals_eq = y.head(m_eq);
    sol.duals_ub = -y.tail(m_ub);
  }
  sol.reduced_costs = p.c;
  if (m_eq > 0) sol.reduced_costs -= p.a_eq.transpose() * sol.duals_eq;
  if (m_ub > 0) sol.reduced_costs += p.a_ub.transpose() * sol.duals_ub;
  return sol;
}

double dual_objective(const LpProblem& p, const LpSolution& s) {
  double obj = 0.0;
  if (p.b_eq.size() > 0) obj += p.b_eq.dot(s.duals_eq);
  if (p.b_ub.size() > 0) obj -= p.b_ub.dot(s.duals_ub);
  for (Eigen::Index j = 0; j < p.c.size(); ++j) {
    const double r = s.reduced_costs(j);
    if (std::abs(r) < 1e-12) continue;
    const double bound = r > 0.0 ? p.lower(j) : p.upper(j);
    if (std::isfinite(bound)) obj += r * bound;
  }
  return obj;
}

EpigraphResult epigraph_max0(LpProblem p, std::size_t var_index) {
  const auto n = p.c.size();
  if (var_index >= static_cast<std::size_t>(n)) throw std::out_of_range("epigraph variable index out of range");
  auto grow = [](Eigen::VectorXd& v, double fill) {
    v.conservativeResize(v.size() + 1);
    v(v.size() - 1) = fill;
  };
  grow(p.c, 0.0);
  grow(p.lower, 0.0);
  grow(p.upper, kInf);
  if (p.a_eq.rows() > 0) {
    p.a_eq.conservativeResize(p.a_eq.rows(), n + 1);
    p.a_eq.col(n).setZero();
  } else {
    p.a_eq.resize(0, n + 1);
  }
  const auto rows = p.a_ub.rows();
  Eigen::MatrixXd a_ub = Eigen::MatrixXd::Zero(rows + 1, n + 1);
  if (rows > 0) a_ub.topLeftCorner(rows, n) = p.a_ub;
  a_ub(rows, static_cast<Eigen::Index>(var_index)) = 1.0;
  a_ub(rows, n) = -1.0;
  p.a_ub = std::move(a_ub);
  grow(p.b_ub, 0.0);
  return {std::move(p), static_cast<std::size_t>(n)};
}

std::size_t LpBuilder::add_variable(double cost, double lower, double upper) {
  cost_.push_back(cost);
  lower_.push_back(lower);
  upper_.push_back(upper);
  return cost_.size() - 1;
}

std::size_t LpBuilder::add_eq(const Terms& terms, double rhs) {
  eq_rows_.push_back(terms);
  eq_rhs_.push_back(rhs);
  return eq_rhs_.size() - 1;
}

std::size_t LpBuilder::add_ub(const Terms& terms, double rhs) {
  ub_rows_.push_back(terms);
  ub_rhs_.push_back(rhs);
  return ub_rhs_.size() - 1;
}

LpProblem LpBuilder::build() const {
  const auto n = static_cast<Eigen::Index>(cost_.size());
  LpProblem p;
  p.c = Eigen::Map<const Eigen::VectorXd>(cost_.data(), n);
  p.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
  p.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
  auto dense = [n](const std::vector<Terms>& rows, const std::vector<double>& rhs, Eigen::MatrixXd& a,
                   Eigen::VectorXd& b) {
    a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), n);
    b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (auto [j, v] : rows[i]) {
        if (j >= static_cast<std::size_t>(n)) throw std::out_of_range("row references unknown variable");
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += v;
      }
    }
  };
  dense(eq_rows_, eq_rhs_, p.a_eq, p.b_eq);
  dense(ub_rows_, ub_rhs_, p.a_ub, p.b_ub);
  return p;
}

void write_lp_text(std::ostream& out, const LpProblem& p) {
  auto row = [&](auto&& vec) {
    for (Eigen::Index j = 0; j < vec.size(); ++j) out << (j ? " " : "") << text::format_double(vec(j));
  };
  out << "lp " << p.c.size() << ' ' << p.b_eq.size() << ' ' << p.b_ub.size() << '\n';
  out << "c ";
  row(p.c);
  out << "\nbounds\n";
  for (Eigen::Index j = 0; j < p.c.size(); ++j) {
    out << text::format_double(p.lower(j)) << ' ' << text::format_double(p.upper(j)) << '\n';
  }
  out << "eq\n";
  for (Eigen::Index i = 0; i < p.b_eq.size(); ++i) {
    row(p.a_eq.row(i));
    out << " = " << text::format_double(p.b_eq(i)) << '\n';
  }
  out << "ub\n";
  for (Eigen::Index i = 0; i < p.b_ub.size(); ++i) {
    row(p.a_ub.row(i));
    out << " <= " << text::format_double(p.b_ub(i)) << '\n';
  }
}

}  // namespace radmarket
