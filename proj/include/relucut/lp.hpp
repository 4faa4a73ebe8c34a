#pragma once

#include <algorithm>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "relucut/model.hpp"

namespace relucut {

enum class LpStatus { optimal, infeasible, unbounded };
enum class RowSense : char { le, ge, eq };

inline constexpr double kLpInfinity = std::numeric_limits<double>::infinity();

/// Dense LP: minimize objective·v subject to rows and variable bounds.
struct LinearProgram {
  Vec objective;
  std::vector<Vec> rows;
  std::vector<RowSense> sense;
  std::vector<double> rhs;
  Vec var_lo, var_hi;
  double objective_offset = 0.0;

  explicit LinearProgram(int num_vars = 0)
      : objective(Vec::Zero(num_vars)),
        var_lo(Vec::Constant(num_vars, -kLpInfinity)),
        var_hi(Vec::Constant(num_vars, kLpInfinity)) {}

  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }

  void add_row(Vec coeffs, RowSense s, double b) {
    if (coeffs.size() != objective.size()) throw std::invalid_argument("LP row has wrong length");
    rows.push_back(std::move(coeffs));
    sense.push_back(s);
    rhs.push_back(b);
  }
};

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  double objective = 0.0;
  Vec x;
};

namespace detail {

inline constexpr double kPivotTol = 1e-9;
inline constexpr double kFeasTol = 1e-7;

// Two-phase dense tableau simplex over the standard form min c'y, Ay = b,
// y >= 0. Dantzig pricing with a permanent switch to Bland's rule after a
// run of degenerate pivots, so cycling cannot occur.
class Tableau {
 public:
  Tableau(Mat A, Vec b, Vec cost_phase2)
      : m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())), cost2_(std::move(cost_phase2)) {
    for (int i = 0; i < m_; ++i)
      if (b(i) < 0) {
        A.row(i) = -A.row(i);
        b(i) = -b(i);
      }
    T_.resize(m_, n_ + m_ + 1);
    T_.leftCols(n_) = A;
    T_.middleCols(n_, m_) = Mat::Identity(m_, m_);
    T_.col(n_ + m_) = b;
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;  // artificials
  }

  LpStatus run(double& objective, Vec& y) {
    if (m_ > 0) {
      Vec c1 = Vec::Zero(n_ + m_);
      c1.tail(m_).setOnes();
      build_cost_row(c1);
      iterate(/*allow_artificial=*/true);
      if (cost_row_(n_ + m_) < -kFeasTol) return LpStatus::infeasible;  // phase-1 obj is -row value
      expel_artificials();
    }
    Vec c2 = Vec::Zero(n_ + m_);
    c2.head(n_) = cost2_;
    build_cost_row(c2);
    if (!iterate(/*allow_artificial=*/false)) return LpStatus::unbounded;
    y = Vec::Zero(n_);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) y(basis_[i]) = T_(i, n_ + m_);
    objective = cost2_.dot(y);
    return LpStatus::optimal;
  }

 private:
  void build_cost_row(const Vec& c) {
    cost_row_ = Vec::Zero(n_ + m_ + 1);
    cost_row_.head(n_ + m_) = c;
    for (int i = 0; i < m_; ++i) {
      const double cb = c(basis_[i]);
      if (cb != 0.0) cost_row_ -= cb * T_.row(i).transpose();
    }
  }

  // Returns false on detected unboundedness.
  bool iterate(bool allow_artificial) {
    bool bland = false;
    int degenerate_run = 0;
    const long max_iters = 4000L + 400L * (static_cast<long>(m_) + n_);
    for (long it = 0; it < max_iters; ++it) {
      const int enter = pick_entering(allow_artificial, bland);
      if (enter < 0) return true;  // optimal for this phase
      const int leave = pick_leaving(enter, bland);
      if (leave < 0) return false;  // unbounded direction
      if (T_(leave, n_ + m_) < kPivotTol) {
        if (++degenerate_run > 64) bland = true;
      } else {
        degenerate_run = 0;
      }
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex iteration limit exceeded");
  }

  int pick_entering(bool allow_artificial, bool bland) const {
    const int cols = allow_artificial ? n_ + m_ : n_;
    int best = -1;
    double best_rc = -kPivotTol;
    for (int j = 0; j < cols; ++j) {
      const double rc = cost_row_(j);
      if (rc < best_rc) {
        if (bland) return j;
        best_rc = rc;
        best = j;
      }
    }
    return best;
  }

  int pick_leaving(int enter, bool bland) const {
    int best = -1;
    double best_ratio = kLpInfinity;
    for (int i = 0; i < m_; ++i) {
      const double a = T_(i, enter);
      if (a <= kPivotTol) continue;
      const double ratio = T_(i, n_ + m_) / a;
      if (ratio < best_ratio - 1e-12) {
        best_ratio = ratio;
        best = i;
      } else if (best >= 0 && ratio < best_ratio + 1e-12 && basis_[i] < basis_[best]) {
        // Tie: take the row whose basic variable has the least index.
        best = i;
      }
    }
    return best;
  }

  void pivot(int row, int col) {
    T_.row(row) /= T_(row, col);
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    const double fc = cost_row_(col);
    if (fc != 0.0) cost_row_ -= fc * T_.row(row).transpose();
    basis_[row] = col;
  }

  // After phase 1, pivot remaining basic artificials onto any structural
  // column in their row; rows with none are redundant and stay parked at 0.
  void expel_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      int col = -1;
      for (int j = 0; j < n_; ++j)
        if (std::abs(T_(i, j)) > kPivotTol) {
          col = j;
          break;
        }
      if (col >= 0) pivot(i, col);
    }
  }

  int m_, n_;
  Vec cost2_;
  Mat T_;
  Vec cost_row_;
  std::vector<int> basis_;
};

}  // namespace detail

/// Deterministic two-phase dense simplex. Feasibility tolerance 1e-7.
inline LpSolution simplex_solve(const LinearProgram& lp) {
  const int n = lp.num_vars();

  // Map to standard form: shift finite lower bounds, negate upper-bounded-only
  // variables, split free variables, substitute fixed ones.
  struct VarMap {
    int col = -1;       // first standard column, -1 if substituted
    int neg_col = -1;   // second column for split free variables
    double shift = 0.0;
    double scale = 1.0;  // -1 for negated vars
  };
  std::vector<VarMap> vmap(n);
  int cols = 0;
  std::vector<std::pair<int, double>> upper_rows;  // (var, bound on shifted column)
  for (int k = 0; k < n; ++k) {
    const double lo = lp.var_lo(k), hi = lp.var_hi(k);
    if (lo > hi) return {LpStatus::infeasible, 0.0, Vec()};
    if (lo == hi) {
      vmap[k].shift = lo;
      continue;
    }
    if (std::isfinite(lo)) {
      vmap[k] = {cols++, -1, lo, 1.0};
      if (std::isfinite(hi)) upper_rows.push_back({k, hi - lo});
    } else if (std::isfinite(hi)) {
      vmap[k] = {cols++, -1, hi, -1.0};  // v = hi - y
    } else {
      vmap[k] = {cols, cols + 1, 0.0, 1.0};
      cols += 2;
    }
  }

  const int m_rows = lp.num_rows();
  const int m = m_rows + static_cast<int>(upper_rows.size());
  Mat A = Mat::Zero(m, cols);
  Vec b = Vec::Zero(m);
  Vec cost = Vec::Zero(cols);
  double offset = lp.objective_offset;

  auto scatter = [&](int row, const Vec& coeffs, double rhs_val) {
    double rb = rhs_val;
    for (int k = 0; k < n; ++k) {
      const double a = coeffs(k);
      if (a == 0.0) continue;
      rb -= a * vmap[k].shift;
      if (vmap[k].col >= 0) {
        A(row, vmap[k].col) += a * vmap[k].scale;
        if (vmap[k].neg_col >= 0) A(row, vmap[k].neg_col) -= a;
      }
    }
    b(row) = rb;
  };

  int slack_count = 0;
  for (int r = 0; r < m_rows; ++r)
    if (lp.sense[r] != RowSense::eq) ++slack_count;
  slack_count += static_cast<int>(upper_rows.size());

  Mat Afull = Mat::Zero(m, cols + slack_count);
  {
    int next_slack = cols;
    for (int r = 0; r < m_rows; ++r) {
      scatter(r, lp.rows[r], lp.rhs[r]);
      if (lp.sense[r] == RowSense::le)
        Afull(r, next_slack++) = 1.0;
      else if (lp.sense[r] == RowSense::ge)
        Afull(r, next_slack++) = -1.0;
    }
    for (size_t i = 0; i < upper_rows.size(); ++i) {
      const int r = m_rows + static_cast<int>(i);
      const auto& [k, bound] = upper_rows[i];
      A(r, vmap[k].col) = 1.0;
      b(r) = bound;
      Afull(r, next_slack++) = 1.0;
    }
    Afull.leftCols(cols) = A;
  }

  for (int k = 0; k < n; ++k) {
    const double ck = lp.objective(k);
    if (ck == 0.0) continue;
    offset += ck * vmap[k].shift;
    if (vmap[k].col >= 0) {
      cost(vmap[k].col) += ck * vmap[k].scale;
    }
  }
  Vec cost_full = Vec::Zero(cols + slack_count);
  cost_full.head(cols) = cost;
  for (int k = 0; k < n; ++k)
    if (vmap[k].neg_col >= 0) cost_full(vmap[k].neg_col) = -lp.objective(k);

  detail::Tableau tab(std::move(Afull), std::move(b), std::move(cost_full));
  double obj = 0.0;
  Vec y;
  const LpStatus status = tab.run(obj, y);
  LpSolution out;
  out.status = status;
  if (status != LpStatus::optimal) return out;
  out.objective = obj + offset;
  out.x = Vec::Zero(n);
  for (int k = 0; k < n; ++k) {
    double v = vmap[k].shift;
    if (vmap[k].col >= 0) v += vmap[k].scale * y(vmap[k].col);
    if (vmap[k].neg_col >= 0) v -= y(vmap[k].neg_col);
    out.x(k) = v;
  }
  return out;
}

/// Plain-text tableau dump for cross-checking against external solvers.
inline std::string lp_to_text(const LinearProgram& lp) {
  std::ostringstream os;
  os.precision(17);
  os << "minimize";
  for (int k = 0; k < lp.num_vars(); ++k) os << ' ' << lp.objective(k);
  os << "\noffset " << lp.objective_offset << '\n';
  for (int r = 0; r < lp.num_rows(); ++r) {
    os << "row";
    for (int k = 0; k < lp.num_vars(); ++k) os << ' ' << lp.rows[r](k);
    os << (lp.sense[r] == RowSense::le ? " <= " : lp.sense[r] == RowSense::ge ? " >= " : " == ")
       << lp.rhs[r] << '\n';
  }
  os << "bounds";
  for (int k = 0; k < lp.num_vars(); ++k) os << " [" << lp.var_lo(k) << ',' << lp.var_hi(k) << ']';
  os << '\n';
  return os.str();
}

}  // namespace relucut
