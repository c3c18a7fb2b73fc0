#include "frechet.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <stdexcept>

namespace parampc {
namespace frechet {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Matrix ParametricQpCost::h_of(double theta) const {
  Matrix h = h0 + theta * dh;
  if (truncation >= 2) h += theta * theta * dh2;
  return h;
}

Vector ParametricQpCost::f_of(double theta, const Vector& w) const {
  require(w.size() == nw(), "f_of: stacked affine vector has wrong size");
  Vector f = f0_map * w + theta * (df_map * w);
  if (truncation >= 2) f += theta * theta * (df2_map * w);
  return f;
}

double ParametricQpCost::c_of(double theta, const Vector& w) const {
  require(w.size() == nw(), "c_of: stacked affine vector has wrong size");
  const Vector x0 = w.head(n);
  const Vector x_ref = w.segment(n, horizon * n);
  const Vector d = w.tail(r);
  const Vector t_nom = s_x_nom * x0 + s_d_nom * d - x_ref;
  const Vector t_delta = ds_x * x0 + ds_d * d;
  double c = t_nom.dot(q_bar * t_nom) + 2.0 * theta * t_nom.dot(q_bar * t_delta);
  if (truncation >= 2) c += theta * theta * t_delta.dot(q_bar * t_delta);
  return c;
}

Vector ParametricQpCost::stack_w(const Vector& x0, const Vector& x_ref_stacked,
                                 const Vector& d) const {
  require(x0.size() == n, "stack_w: x0 size mismatch");
  require(x_ref_stacked.size() == horizon * n, "stack_w: reference size mismatch");
  require(d.size() == r, "stack_w: disturbance size mismatch");
  Vector w(nw());
  w << x0, x_ref_stacked, d;
  return w;
}

ParametricQpCost build_parametric_cost(const CondensedSystem& nominal, const Matrix& q_bar,
                                       const Matrix& r_bar, int truncation) {
  require(nominal.has_sensitivities(), "build_parametric_cost: sensitivities missing");
  require(nominal.delta_s_x.size() == 1,
          "build_parametric_cost: expansion requires a single parameter component");
  require(truncation == 1 || truncation == 2, "build_parametric_cost: truncation must be 1 or 2");

  ParametricQpCost cost;
  cost.horizon = nominal.horizon;
  cost.n = nominal.n;
  cost.m = nominal.m;
  cost.r = nominal.r;
  cost.truncation = truncation;
  cost.s_x_nom = nominal.s_x;
  cost.s_u_nom = nominal.s_u;
  cost.s_d_nom = nominal.s_d;
  cost.ds_x = nominal.delta_s_x[0];
  cost.ds_u = nominal.delta_s_u[0];
  cost.ds_d = nominal.delta_s_d[0];
  cost.q_bar = q_bar;

  const Matrix& su = cost.s_u_nom;
  const Matrix& dsu = cost.ds_u;
  cost.h0 = 2.0 * (su.transpose() * q_bar * su + r_bar);
  cost.dh = 2.0 * (su.transpose() * q_bar * dsu + dsu.transpose() * q_bar * su);
  cost.dh2 = 2.0 * (dsu.transpose() * q_bar * dsu);

  // Affine columns [x0 | X_ref | d] of the linear term.
  const int nn = cost.horizon * cost.n;
  auto columns = [&](const Matrix& sx, const Matrix& sd) {
    Matrix cols(nn, cost.nw());
    cols.leftCols(cost.n) = sx;
    cols.middleCols(cost.n, nn) = -Matrix::Identity(nn, nn);
    if (cost.r > 0) cols.rightCols(cost.r) = sd;
    return cols;
  };
  const Matrix cols_nom = columns(cost.s_x_nom, cost.s_d_nom);
  Matrix cols_delta(nn, cost.nw());
  cols_delta.setZero();
  cols_delta.leftCols(cost.n) = cost.ds_x;
  if (cost.r > 0) cols_delta.rightCols(cost.r) = cost.ds_d;

  cost.f0_map = 2.0 * su.transpose() * q_bar * cols_nom;
  cost.df_map = 2.0 * (su.transpose() * q_bar * cols_delta +
                       dsu.transpose() * q_bar * cols_nom);
  cost.df2_map = 2.0 * dsu.transpose() * q_bar * cols_delta;
  return cost;
}

InverseExpansion approx_inverse(const Matrix& h0, const Matrix& dh, double theta) {
  require(h0.rows() == h0.cols(), "approx_inverse: h0 must be square");
  require(dh.rows() == h0.rows() && dh.cols() == h0.cols(),
          "approx_inverse: dh shape must match h0");
  Eigen::LLT<Matrix> llt(h0);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("approx_inverse: h0 is not positive definite");
  }
  const Matrix h0_inv = llt.solve(Matrix::Identity(h0.rows(), h0.cols()));
  InverseExpansion out;
  out.m = h0_inv - theta * (h0_inv * dh * h0_inv);
  out.growth = Eigen::JacobiSVD<Matrix>(theta * (h0_inv * dh)).singularValues()(0);
  out.reliable = out.growth < 0.5;
  return out;
}

Vector explicit_optimizer_unconstrained(const ParametricQpCost& cost, const Vector& x0,
                                        double theta, const Vector& x_ref_stacked,
                                        const Vector& d) {
  const Vector w = cost.stack_w(x0, x_ref_stacked, d);
  Eigen::LLT<Matrix> llt(cost.h0);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("explicit_optimizer_unconstrained: h0 not positive definite");
  }
  const Vector f0 = cost.f0_map * w;
  const Vector df = cost.df_map * w;
  const Vector u0 = -llt.solve(f0);
  return u0 - theta * llt.solve(cost.dh * u0 + df);
}

namespace {

struct ConstraintData {
  Matrix g;
  Vector rhs;
};

ConstraintData assemble_constraints(const ParametricQpCost& cost, const ParametricModel& model,
                                    const Vector& x0, double theta, const Vector& d,
                                    const Method2Options& opts) {
  Matrix g_u;
  Vector rhs_u;
  input_box_rows(model, cost.horizon, &g_u, &rhs_u);

  ConstraintData out{std::move(g_u), std::move(rhs_u)};
  if (opts.enforce_state_bounds) {
    Matrix f_x;
    Vector f_x_rhs;
    state_box_rows(model, cost.horizon, &f_x, &f_x_rhs);
    const Matrix s_u = cost.s_u_of(theta);
    const Vector free_response = cost.s_x_of(theta) * x0 + cost.s_d_of(theta) * d;

    const int rows_u = static_cast<int>(out.g.rows());
    const int rows_x = static_cast<int>(f_x.rows());
    Matrix g_all = Matrix::Zero(rows_u + rows_x, cost.horizon * cost.m);
    Vector rhs_all = Vector::Zero(rows_u + rows_x);
    g_all.topRows(rows_u) = out.g;
    rhs_all.head(rows_u) = out.rhs;
    g_all.bottomRows(rows_x) = f_x * s_u;
    rhs_all.tail(rows_x) = f_x_rhs - f_x * free_response;
    out.g = std::move(g_all);
    out.rhs = std::move(rhs_all);
  }

  if (opts.inject_infeasible) {
    const int rows = static_cast<int>(out.g.rows());
    Matrix g_all = Matrix::Zero(rows + 2, cost.horizon * cost.m);
    Vector rhs_all = Vector::Zero(rows + 2);
    g_all.topRows(rows) = out.g;
    rhs_all.head(rows) = out.rhs;
    g_all(rows, 0) = 1.0;
    rhs_all(rows) = -1.0;       // u_0 <= -1
    g_all(rows + 1, 0) = -1.0;
    rhs_all(rows + 1) = -1.0;   // u_0 >= 1
    out.g = std::move(g_all);
    out.rhs = std::move(rhs_all);
  }
  return out;
}

// Evaluation of the working-set KKT system with every H(theta) inverse
// replaced by the Neumann expansion m_approx: the explicit per-region law of
// the inverse-approx variant. Agrees with explicit_optimizer_unconstrained to
// first order in theta when no constraint is active.
struct ApproxResult {
  Vector u;
  bool converged = false;
};

ApproxResult approx_region_evaluate(const Matrix& m_approx, const Vector& f, const Matrix& g,
                                    const Vector& rhs, const std::vector<int>& active) {
  ApproxResult out;
  if (active.empty()) {
    out.u = -(m_approx * f);
    out.converged = out.u.allFinite();
    return out;
  }
  const int nw = static_cast<int>(active.size());
  Matrix gw(nw, g.cols());
  Vector bw(nw);
  for (int i = 0; i < nw; ++i) {
    gw.row(i) = g.row(active[i]);
    bw(i) = rhs(active[i]);
  }
  const Matrix mg = m_approx * gw.transpose();
  Eigen::LDLT<Matrix> kkt(gw * mg);
  if (kkt.info() != Eigen::Success) return out;
  const Vector lambda = kkt.solve(-(bw + gw * (m_approx * f)));
  Vector u = -(m_approx * (f + gw.transpose() * lambda));
  if (!u.allFinite() || !lambda.allFinite()) return out;
  // A singular working-set system leaves its own rows unsatisfied; treat
  // that as solver failure (the caller falls back).
  if ((gw * u - bw).lpNorm<Eigen::Infinity>() > 1e-6 * (1.0 + bw.lpNorm<Eigen::Infinity>())) {
    return out;
  }
  out.u = std::move(u);
  out.converged = true;
  return out;
}

}  // namespace

Method2Solution solve_method2(const ParametricQpCost& cost, const ParametricModel& model,
                              const Vector& x0, double theta, const Matrix& ref_window,
                              ControllerState& state, Variant variant,
                              const Method2Options& opts) {
  const Vector d = model.d_const;
  const Vector x_ref = stacked_reference(model, ref_window);
  const Vector w = cost.stack_w(x0, x_ref, d);
  const Vector f = cost.f_of(theta, w);
  const ConstraintData con = assemble_constraints(cost, model, x0, theta, d, opts);

  auto fallback = [&]() -> Method2Solution {
    if (!state.last_u0.has_value()) {
      throw std::runtime_error("solve_method2: solver failed with no previous solution");
    }
    ++state.fallback_count;
    Method2Solution out;
    out.u0 = *state.last_u0;
    out.u_seq = state.last_u_seq.value_or(Vector());
    out.used_fallback = true;
    return out;
  };

  Method2Solution out;
  if (variant == Variant::direct) {
    qp::QpSolution sol;
    bool solver_error = false;
    try {
      qp::DenseQp dense = qp::DenseQp::make(cost.h_of(theta), f, con.g, con.rhs);
      Vector hint = state.last_u_seq.value_or(Vector::Zero(cost.horizon * cost.m));
      if (hint.size() != cost.horizon * cost.m) hint = Vector::Zero(cost.horizon * cost.m);
      sol = qp::solve(dense, hint);
    } catch (const std::exception&) {
      solver_error = true;
    }
    if (solver_error || sol.status != qp::Status::optimal) return fallback();
    out.u_seq = sol.z;
    out.u0 = sol.z.head(cost.m);
    state.last_active_set = sol.active_set;
  } else {
    // Identify the working active set from the truncated QP, then evaluate
    // that region's KKT system with the expansion in place of H(theta)^{-1}.
    qp::QpSolution sol;
    bool solver_error = false;
    try {
      qp::DenseQp dense = qp::DenseQp::make(cost.h_of(theta), f, con.g, con.rhs);
      Vector hint = state.last_u_seq.value_or(Vector::Zero(cost.horizon * cost.m));
      if (hint.size() != cost.horizon * cost.m) hint = Vector::Zero(cost.horizon * cost.m);
      sol = qp::solve(dense, hint);
    } catch (const std::exception&) {
      solver_error = true;
    }
    if (solver_error || sol.status != qp::Status::optimal) return fallback();

    InverseExpansion inv = approx_inverse(cost.h0, cost.dh, theta);
    ApproxResult res = approx_region_evaluate(inv.m, f, con.g, con.rhs, sol.active_set);
    if (!res.converged) return fallback();
    out.u_seq = res.u;
    // The distorted gain may leave non-working rows violated; the applied
    // input is clipped to the box like a physical actuator.
    out.u0 = res.u.head(cost.m);
    for (int j = 0; j < cost.m; ++j) {
      out.u0(j) = std::min(model.input_box[j].hi, std::max(model.input_box[j].lo, out.u0(j)));
    }
    state.last_active_set = sol.active_set;
  }

  state.last_u0 = out.u0;
  state.last_u_seq = out.u_seq;
  return out;
}

}  // namespace frechet
}  // namespace parampc
