#pragma once

#include "model.hpp"

namespace parampc {
namespace qp {

enum class Status { optimal, infeasible, max_iterations };

/// Strictly convex QP  min 1/2 z'Hz + f'z  s.t.  Gz <= rhs.
/// Construct through make() which symmetrizes H and, when the Cholesky
/// factorization fails, adds scale-aware diagonal regularization.
struct DenseQp {
  Matrix h;
  Vector f;
  Matrix g;     // nc x nz, may have 0 rows
  Vector rhs;   // nc
  double applied_regularization = 0.0;

  int nz() const { return static_cast<int>(h.rows()); }
  int nc() const { return static_cast<int>(g.rows()); }

  static DenseQp make(Matrix h, Vector f, Matrix g, Vector rhs);

  double objective(const Vector& z) const { return 0.5 * z.dot(h * z) + f.dot(z); }
};

struct QpSolution {
  Status status = Status::max_iterations;
  Vector z;
  std::vector<int> active_set;  // sorted constraint indices defining the optimum
  Vector multipliers;           // nc, nonnegative, zero off the active set
  Vector farkas;                // infeasibility certificate (empty unless infeasible)
  int most_violated_row = -1;
  int iterations = 0;
};

Matrix regularize(const Matrix& h, double eps_reg);

/// Primal active-set solve. A feasible start is found by an internal
/// phase-1 problem unless z0_hint already satisfies the constraints.
/// Ties (blocking and dropped constraints) break toward the lowest index,
/// so identical inputs give identical active sets.
QpSolution solve(const DenseQp& qp);
QpSolution solve(const DenseQp& qp, const Vector& z0_hint);

/// Max of the stationarity, primal-feasibility and complementarity
/// infinity-norm residuals for an optimal solution.
double kkt_residual(const DenseQp& qp, const QpSolution& sol);

}  // namespace qp
}  // namespace parampc
