#include "mccormick.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace parampc {
namespace mccormick {

namespace {

Interval product_bounds(const Interval& a, const Interval& b) {
  const double corners[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
  Interval out{corners[0], corners[0]};
  for (double c : corners) {
    out.lo = std::min(out.lo, c);
    out.hi = std::max(out.hi, c);
  }
  return out;
}

}  // namespace

EnvelopeRows mccormick_rows(const Interval& theta_box, const Interval& u_box) {
  if (!std::isfinite(theta_box.lo) || !std::isfinite(theta_box.hi) ||
      !std::isfinite(u_box.lo) || !std::isfinite(u_box.hi)) {
    throw std::invalid_argument("mccormick_rows: envelopes require bounded intervals");
  }
  const double tl = theta_box.lo, th = theta_box.hi;
  const double ul = u_box.lo, uh = u_box.hi;

  EnvelopeRows rows;
  // v >= tl*u + theta*ul - tl*ul
  rows.coeff_u(0) = tl;  rows.coeff_v(0) = -1.0; rows.b(0) = tl * ul;  rows.coeff_theta(0) = -ul;
  // v >= th*u + theta*uh - th*uh
  rows.coeff_u(1) = th;  rows.coeff_v(1) = -1.0; rows.b(1) = th * uh;  rows.coeff_theta(1) = -uh;
  // v <= th*u + theta*ul - th*ul
  rows.coeff_u(2) = -th; rows.coeff_v(2) = 1.0;  rows.b(2) = -th * ul; rows.coeff_theta(2) = ul;
  // v <= tl*u + theta*uh - tl*uh
  rows.coeff_u(3) = -tl; rows.coeff_v(3) = 1.0;  rows.b(3) = -tl * uh; rows.coeff_theta(3) = uh;
  return rows;
}

LiftedSensitivities build_lifted_sensitivities(const CondensedSystem& cond,
                                               const ParametricModel& model) {
  LiftedSensitivities out;
  out.s_theta_x0.reserve(model.n_theta());
  out.s_theta_u.reserve(model.n_theta());
  for (const auto& delta : model.a.deltas) {
    SensitivityBlocks blocks =
        condense_sensitivity(model.a.base, delta, model.b, model.e, cond.horizon);
    out.s_theta_x0.push_back(std::move(blocks.delta_s_x));
    out.s_theta_u.push_back(std::move(blocks.delta_s_u));
  }
  return out;
}

AugmentedQp build_method1_qp(const ParametricModel& model, int horizon,
                             const Method1Options& opts) {
  model.validate();
  if (horizon < 1) throw std::invalid_argument("build_method1_qp: horizon must be >= 1");
  if (!(opts.weights.r_scale > 0)) {
    throw std::invalid_argument("build_method1_qp: r_scale must be positive");
  }

  const int n = model.n_states();
  const int m = model.n_inputs();
  const int nt = model.n_theta();
  const int nm = horizon * m;
  const int nn = horizon * n;
  const int nz = (1 + nt) * nm;
  const int nxi = n + nt * n + nt;

  const CondensedSystem cond = condense_model(model, horizon);
  const LiftedSensitivities sens = build_lifted_sensitivities(cond, model);

  AugmentedQp aqp;
  aqp.horizon = horizon;
  aqp.n = n;
  aqp.m = m;
  aqp.n_theta = nt;

  // Parameter-to-state map: x0 through s_x, the products theta_p*x0 through
  // the power sensitivities, and raw theta through the disturbance sensitivity.
  aqp.phi = Matrix::Zero(nn, nxi);
  aqp.phi.leftCols(n) = cond.s_x;
  for (int p = 0; p < nt; ++p) {
    aqp.phi.block(0, n + p * n, nn, n) = sens.s_theta_x0[p];
    if (model.n_dist() > 0) {
      aqp.phi.col(n + nt * n + p) = cond.delta_s_d[p] * model.d_const;
    }
  }
  aqp.d_offset = model.n_dist() > 0 ? Vector(cond.s_d * model.d_const) : Vector::Zero(nn);

  aqp.gamma = Matrix::Zero(nn, nz);
  aqp.gamma.leftCols(nm) = cond.s_u;
  for (int p = 0; p < nt; ++p) aqp.gamma.block(0, (1 + p) * nm, nn, nm) = sens.s_theta_u[p];

  const Matrix q_bar = stacked_state_weight(model, opts.weights, horizon);
  const Matrix r_bar = stacked_input_weight(model, opts.weights, horizon);

  aqp.h = 2.0 * (aqp.gamma.transpose() * q_bar * aqp.gamma);
  aqp.h.topLeftCorner(nm, nm) += 2.0 * r_bar;
  // The cost cannot see V directions outside gamma's range; a curvature floor
  // on the V block keeps H positive definite without touching the U block.
  aqp.v_curvature_floor = 1e-8 * std::max(1.0, aqp.h.trace() / nz);
  for (int i = nm; i < nz; ++i) aqp.h(i, i) += aqp.v_curvature_floor;

  aqp.ref_gain = 2.0 * aqp.gamma.transpose() * q_bar;
  aqp.f_map = aqp.ref_gain * aqp.phi;

  // Constraint rows, in order: input box, V implied boxes, envelope rows,
  // optional state-box rows.
  const int n_mc = 4 * nt * nm;
  const int n_state_rows = opts.enforce_state_bounds ? 2 * nn : 0;
  const int nc = 2 * nm + 2 * nt * nm + n_mc + n_state_rows;
  aqp.g = Matrix::Zero(nc, nz);
  aqp.b = Vector::Zero(nc);
  aqp.e_mat = Matrix::Zero(nc, nxi);

  Matrix g_u;
  Vector rhs_u;
  input_box_rows(model, horizon, &g_u, &rhs_u);
  aqp.g.block(0, 0, 2 * nm, nm) = g_u;
  aqp.b.head(2 * nm) = rhs_u;

  int row = 2 * nm;
  for (int p = 0; p < nt; ++p) {
    for (int k = 0; k < horizon; ++k) {
      for (int j = 0; j < m; ++j) {
        const Interval vb = product_bounds(model.theta_box[p], model.input_box[j]);
        const int v_col = (1 + p) * nm + k * m + j;
        aqp.g(row, v_col) = 1.0;
        aqp.b(row) = vb.hi;
        ++row;
        aqp.g(row, v_col) = -1.0;
        aqp.b(row) = -vb.lo;
        ++row;
      }
    }
  }

  for (int p = 0; p < nt; ++p) {
    const int theta_col = n + nt * n + p;
    for (int k = 0; k < horizon; ++k) {
      for (int j = 0; j < m; ++j) {
        const EnvelopeRows rows = mccormick_rows(model.theta_box[p], model.input_box[j]);
        const int u_col = k * m + j;
        const int v_col = (1 + p) * nm + k * m + j;
        for (int i = 0; i < 4; ++i) {
          aqp.g(row, u_col) = rows.coeff_u(i);
          aqp.g(row, v_col) = rows.coeff_v(i);
          aqp.b(row) = rows.b(i);
          aqp.e_mat(row, theta_col) = rows.coeff_theta(i);
          ++row;
        }
      }
    }
  }

  if (opts.enforce_state_bounds) {
    Matrix f_x;
    Vector f_x_rhs;
    state_box_rows(model, horizon, &f_x, &f_x_rhs);
    aqp.g.block(row, 0, 2 * nn, nz) = f_x * aqp.gamma;
    aqp.b.segment(row, 2 * nn) = f_x_rhs - f_x * aqp.d_offset;
    aqp.e_mat.block(row, 0, 2 * nn, nxi) = -f_x * aqp.phi;
    row += 2 * nn;
  }

  // Box on xi: state box, per-parameter product hulls, theta box.
  aqp.xi_box.reserve(nxi);
  for (int j = 0; j < n; ++j) aqp.xi_box.push_back(model.state_box[j]);
  for (int p = 0; p < nt; ++p) {
    for (int j = 0; j < n; ++j) {
      aqp.xi_box.push_back(product_bounds(model.theta_box[p], model.state_box[j]));
    }
  }
  for (int p = 0; p < nt; ++p) aqp.xi_box.push_back(model.theta_box[p]);

  return aqp;
}

Vector AugmentedQp::assemble_xi(const Vector& x0, const Vector& theta) const {
  if (x0.size() != n || theta.size() != n_theta) {
    throw std::invalid_argument("assemble_xi: dimension mismatch");
  }
  Vector xi(nxi());
  xi.head(n) = x0;
  for (int p = 0; p < n_theta; ++p) xi.segment(n + p * n, n) = theta(p) * x0;
  xi.tail(n_theta) = theta;
  return xi;
}

Vector AugmentedQp::linear_term(const Vector& xi, const Vector& x_ref_stacked) const {
  return f_map * xi + ref_gain * (d_offset - x_ref_stacked);
}

Method1Solution solve_method1(const AugmentedQp& aqp, const ParametricModel& model,
                              const Vector& x0, const Vector& theta,
                              const Matrix& ref_window) {
  const Vector xi = aqp.assemble_xi(x0, theta);
  const Vector x_ref = stacked_reference(model, ref_window);
  const Vector f = aqp.linear_term(xi, x_ref);
  const Vector rhs = aqp.b + aqp.e_mat * xi;

  // Center of the input box with the true products is always inside the hull.
  const int nm = aqp.n_u_block();
  Vector hint = Vector::Zero(aqp.nz());
  for (int k = 0; k < aqp.horizon; ++k) {
    for (int j = 0; j < aqp.m; ++j) hint(k * aqp.m + j) = model.input_box[j].center();
  }
  for (int p = 0; p < aqp.n_theta; ++p) {
    hint.segment((1 + p) * nm, nm) = theta(p) * hint.head(nm);
  }

  qp::DenseQp dense = qp::DenseQp::make(aqp.h, f, aqp.g, rhs);
  Method1Solution out;
  out.qp_solution = qp::solve(dense, hint);
  if (out.qp_solution.status == qp::Status::infeasible) {
    std::ostringstream msg;
    msg << "solve_method1: QP infeasible (most violated row "
        << out.qp_solution.most_violated_row << ")";
    throw std::runtime_error(msg.str());
  }
  if (out.qp_solution.status == qp::Status::max_iterations) {
    throw std::runtime_error("solve_method1: QP iteration cap exceeded");
  }
  out.u_seq = out.qp_solution.z.head(nm);
  out.v_seq = out.qp_solution.z.tail(aqp.nz() - nm);
  out.u0 = out.u_seq.head(aqp.m);
  return out;
}

}  // namespace mccormick
}  // namespace parampc
