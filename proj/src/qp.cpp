#include "qp.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace parampc {
namespace qp {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kStepTol = 1e-9;
constexpr double kDualTol = 1e-10;
constexpr double kPhase1AcceptTol = 1e-7;

struct EqpResult {
  Vector p;       // step direction
  Vector lambda;  // multipliers for the working set rows
  bool ok = true;
};

// KKT solve for the working set: H p + Gw' lambda = -grad, Gw p = h_vec.
EqpResult solve_eqp(const Eigen::LLT<Matrix>& h_llt, const Matrix& g, const Vector& grad,
                    const Vector& h_vec, const std::vector<int>& work) {
  EqpResult out;
  const Vector hinv_grad = h_llt.solve(grad);
  if (work.empty()) {
    out.p = -hinv_grad;
    out.lambda = Vector(0);
    return out;
  }
  const int nw = static_cast<int>(work.size());
  Matrix gw(nw, g.cols());
  for (int i = 0; i < nw; ++i) gw.row(i) = g.row(work[i]);
  const Matrix hinv_gwt = h_llt.solve(gw.transpose());
  const Matrix schur = gw * hinv_gwt;
  Eigen::LDLT<Matrix> schur_ldlt(schur);
  if (schur_ldlt.info() != Eigen::Success) {
    out.ok = false;
    return out;
  }
  out.lambda = schur_ldlt.solve(-(gw * hinv_grad + h_vec));
  out.p = -hinv_grad - hinv_gwt * out.lambda;
  return out;
}

// Core primal active-set iteration from a feasible start.
QpSolution active_set_iterate(const DenseQp& qp, const Vector& z_start) {
  const int nz = qp.nz();
  const int nc = qp.nc();
  const int max_iter = 50 * (nz + nc);

  Eigen::LLT<Matrix> h_llt(qp.h);
  if (h_llt.info() != Eigen::Success) {
    throw std::runtime_error("qp::solve: Hessian is not positive definite");
  }

  Vector z = z_start;
  std::vector<int> work;  // insertion-ordered working set
  std::vector<char> in_work(nc, 0);

  QpSolution sol;
  for (int iter = 0; iter < max_iter; ++iter) {
    sol.iterations = iter + 1;
    const Vector grad = qp.h * z + qp.f;
    Vector h_vec(work.size());
    for (size_t i = 0; i < work.size(); ++i) h_vec(i) = qp.rhs(work[i]) - qp.g.row(work[i]).dot(z);

    EqpResult eqp = solve_eqp(h_llt, qp.g, grad, h_vec, work);
    if (!eqp.ok) {
      // Dependent working set; drop the most recently added row.
      in_work[work.back()] = 0;
      work.pop_back();
      continue;
    }

    // Stationary when the step vanishes or the full step cannot improve the
    // objective beyond rounding. Along an EQP step the available decrease is
    // p'Hp/2, which stays clean where grad'p would drown in rounding noise.
    const double step_norm = eqp.p.size() > 0 ? eqp.p.lpNorm<Eigen::Infinity>() : 0.0;
    const double decrease = 0.5 * eqp.p.dot(qp.h * eqp.p);
    const double obj_scale = 1.0 + std::abs(qp.objective(z));
    if (step_norm <= kStepTol * std::max(1.0, z.lpNorm<Eigen::Infinity>()) ||
        decrease <= 1e-14 * obj_scale) {
      // Stationary on the working set; Bland rule for dual infeasibility:
      // drop the lowest constraint index with a negative multiplier.
      int drop_row = -1;
      size_t drop_pos = 0;
      for (size_t i = 0; i < work.size(); ++i) {
        if (eqp.lambda(i) < -kDualTol && (drop_row < 0 || work[i] < drop_row)) {
          drop_row = work[i];
          drop_pos = i;
        }
      }
      if (drop_row < 0) {
        sol.status = Status::optimal;
        sol.z = z;
        sol.multipliers = Vector::Zero(nc);
        for (size_t i = 0; i < work.size(); ++i) {
          sol.multipliers(work[i]) = std::max(0.0, eqp.lambda(i));
        }
        sol.active_set = work;
        std::sort(sol.active_set.begin(), sol.active_set.end());
        return sol;
      }
      in_work[drop_row] = 0;
      work.erase(work.begin() + static_cast<long>(drop_pos));
      continue;
    }

    // Ratio test over rows not in the working set. The direction threshold is
    // relative to the step size so rounding noise in directions the working
    // set already pins (e.g. paired +/- rows) never reads as blocking.
    double alpha = 1.0;
    int blocker = -1;
    for (int i = 0; i < nc; ++i) {
      if (in_work[i]) continue;
      const double dir = qp.g.row(i).dot(eqp.p);
      const double dir_floor =
          1e-10 * qp.g.row(i).lpNorm<Eigen::Infinity>() * std::max(1.0, step_norm);
      if (dir <= dir_floor) continue;
      const double slack = qp.rhs(i) - qp.g.row(i).dot(z);
      const double a = std::max(0.0, slack / dir);
      if (a < alpha - 1e-12) {
        alpha = a;
        blocker = i;
      } else if (blocker >= 0 && a < alpha + 1e-12 && i < blocker) {
        blocker = i;  // lowest-index tie break
      }
    }

    if (std::getenv("QP_TRACE")) {
      std::fprintf(stderr, "iter %d |W|=%zu step=%.3e alpha=%.3e blocker=%d z0=%.6e\n", iter,
                   work.size(), step_norm, alpha, blocker, z(0));
    }
    z += alpha * eqp.p;
    if (blocker >= 0 && alpha < 1.0) {
      work.push_back(blocker);
      in_work[blocker] = 1;
    }
  }

  sol.status = Status::max_iterations;
  sol.z = z;
  sol.multipliers = Vector::Zero(nc);
  sol.active_set = work;
  std::sort(sol.active_set.begin(), sol.active_set.end());
  return sol;
}

double max_violation(const DenseQp& qp, const Vector& z, int* worst_row = nullptr) {
  double worst = 0.0;
  if (worst_row) *worst_row = -1;
  for (int i = 0; i < qp.nc(); ++i) {
    const double v = qp.g.row(i).dot(z) - qp.rhs(i);
    if (v > worst) {
      worst = v;
      if (worst_row) *worst_row = i;
    }
  }
  return worst;
}

// Minimize the worst constraint violation through an elastic variable s:
//   min eps/2 (|z|^2 + s^2) + s   s.t.  Gz - 1 s <= rhs,  s >= -1.
// Strictly feasible start (z0, max violation + 1); the lower bound on s keeps
// the near-linear objective from driving the iterates far away.
QpSolution phase1_start(const DenseQp& qp, const Vector& z0, Vector* z_feasible) {
  const int nz = qp.nz();
  const int nc = qp.nc();
  const double eps = 1e-6;

  Matrix h1 = Matrix::Identity(nz + 1, nz + 1) * eps;
  Vector f1 = Vector::Zero(nz + 1);
  f1(nz) = 1.0;
  Matrix g1(nc + 1, nz + 1);
  g1.setZero();
  g1.block(0, 0, nc, nz) = qp.g;
  g1.col(nz).head(nc).setConstant(-1.0);
  g1(nc, nz) = -1.0;
  Vector rhs1(nc + 1);
  rhs1.head(nc) = qp.rhs;
  rhs1(nc) = 1.0;

  DenseQp aux;
  aux.h = std::move(h1);
  aux.f = std::move(f1);
  aux.g = std::move(g1);
  aux.rhs = std::move(rhs1);

  Vector start(nz + 1);
  start.head(nz) = z0;
  start(nz) = max_violation(qp, z0) + 1.0;

  QpSolution aux_sol = active_set_iterate(aux, start);
  QpSolution out;
  const double s_opt = aux_sol.z(nz);
  if (aux_sol.status == Status::optimal && s_opt <= kPhase1AcceptTol) {
    *z_feasible = aux_sol.z.head(nz);
    out.status = Status::optimal;
    return out;
  }

  out.status = aux_sol.status == Status::optimal ? Status::infeasible : aux_sol.status;
  out.z = aux_sol.z.head(nz);
  int worst = -1;
  max_violation(qp, out.z, &worst);
  out.most_violated_row = worst;
  if (out.status == Status::infeasible) {
    Vector y = aux_sol.multipliers.head(nc);
    const double total = y.sum();
    if (total > 0) y /= total;
    out.farkas = y;
  }
  out.multipliers = Vector::Zero(nc);
  return out;
}

}  // namespace

DenseQp DenseQp::make(Matrix h, Vector f, Matrix g, Vector rhs) {
  if (h.rows() != h.cols()) throw std::invalid_argument("DenseQp: H must be square");
  if (f.size() != h.rows()) throw std::invalid_argument("DenseQp: f size must match H");
  if (g.rows() != rhs.size()) throw std::invalid_argument("DenseQp: G rows must match rhs");
  if (g.rows() > 0 && g.cols() != h.rows()) {
    throw std::invalid_argument("DenseQp: G columns must match H");
  }

  DenseQp out;
  out.h = 0.5 * (h + h.transpose());
  out.f = std::move(f);
  out.g = std::move(g);
  out.rhs = std::move(rhs);

  Eigen::LLT<Matrix> llt(out.h);
  if (llt.info() != Eigen::Success) {
    const int nz = static_cast<int>(out.h.rows());
    double eps = 1e-8 * std::max(out.h.trace() / nz, 1e-8);
    for (int attempt = 0; attempt < 60; ++attempt) {
      Matrix candidate = regularize(out.h, eps);
      llt.compute(candidate);
      if (llt.info() == Eigen::Success) {
        out.h = std::move(candidate);
        out.applied_regularization = eps;
        break;
      }
      eps *= 2.0;
    }
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("DenseQp: Hessian could not be regularized to positive definite");
    }
  }
  return out;
}

Matrix regularize(const Matrix& h, double eps_reg) {
  if (h.rows() != h.cols()) throw std::invalid_argument("regularize: H must be square");
  if (eps_reg < 0) throw std::invalid_argument("regularize: eps_reg must be nonnegative");
  return h + eps_reg * Matrix::Identity(h.rows(), h.cols());
}

QpSolution solve(const DenseQp& qp) { return solve(qp, Vector::Zero(qp.nz())); }

QpSolution solve(const DenseQp& qp, const Vector& z0_hint) {
  if (z0_hint.size() != qp.nz()) throw std::invalid_argument("qp::solve: hint size mismatch");

  Vector z0 = z0_hint;
  if (qp.nc() > 0 && max_violation(qp, z0) > kFeasTol) {
    Vector z_feasible;
    QpSolution phase1 = phase1_start(qp, z0, &z_feasible);
    if (phase1.status != Status::optimal) return phase1;
    z0 = z_feasible;
  }
  return active_set_iterate(qp, z0);
}

double kkt_residual(const DenseQp& qp, const QpSolution& sol) {
  if (sol.status != Status::optimal) {
    throw std::invalid_argument("kkt_residual: solution is not optimal");
  }
  Vector stationarity = qp.h * sol.z + qp.f;
  if (qp.nc() > 0) stationarity += qp.g.transpose() * sol.multipliers;
  double res = stationarity.lpNorm<Eigen::Infinity>();
  for (int i = 0; i < qp.nc(); ++i) {
    const double slack = qp.g.row(i).dot(sol.z) - qp.rhs(i);
    res = std::max(res, slack);                              // primal feasibility
    res = std::max(res, std::abs(sol.multipliers(i) * slack));  // complementarity
  }
  return res;
}

}  // namespace qp
}  // namespace parampc
