#pragma once

#include "condense.hpp"
#include "cost.hpp"
#include "qp.hpp"

namespace parampc {
namespace mccormick {

/// Four affine rows forming the convex hull of the product v = theta * u over
/// the box theta_box x u_box, written as
///   coeff_u * u + coeff_v * v <= b + coeff_theta * theta.
/// Exact (the rows pin v = theta * u) when theta sits at either bound.
struct EnvelopeRows {
  Eigen::Matrix<double, 4, 1> coeff_u;
  Eigen::Matrix<double, 4, 1> coeff_v;
  Eigen::Matrix<double, 4, 1> coeff_theta;
  Eigen::Matrix<double, 4, 1> b;
};

EnvelopeRows mccormick_rows(const Interval& theta_box, const Interval& u_box);

/// Per-parameter sensitivities of the stacked prediction maps used by the
/// lifted model: block i of s_theta_x0 is the derivative of A^i, block (i,j)
/// of s_theta_u the derivative of the corresponding input-map block.
struct LiftedSensitivities {
  std::vector<Matrix> s_theta_x0;  // per parameter, Nn x n
  std::vector<Matrix> s_theta_u;   // per parameter, Nn x Nm
};

LiftedSensitivities build_lifted_sensitivities(const CondensedSystem& cond,
                                               const ParametricModel& model);

/// QP over z = [U; V_1; ...; V_ntheta] with parameter
/// xi = [x0; theta_1*x0; ...; theta_ntheta*x0; theta], constraints
/// G z <= b + E xi, and cost 1/2 z'Hz + f(xi)'z where
/// f(xi) = f_map * xi + ref_gain * (d_offset - X_ref).
struct AugmentedQp {
  int horizon = 0;
  int n = 0, m = 0, n_theta = 0;
  Matrix phi;       // Nn x nxi, parameter-to-state map (includes disturbance sensitivity)
  Matrix gamma;     // Nn x nz, decision-to-state map
  Matrix h;         // nz x nz, positive definite
  Matrix f_map;     // nz x nxi
  Matrix ref_gain;  // nz x Nn, applied to (d_offset - X_ref)
  Vector d_offset;  // Nn, nominal disturbance contribution to the prediction
  Matrix g;         // nc x nz
  Vector b;         // nc
  Matrix e_mat;     // nc x nxi
  Box xi_box;       // bounds explored by the region enumerator
  double v_curvature_floor = 0.0;  // diagonal added to the V block of h

  int nz() const { return static_cast<int>(h.rows()); }
  int nxi() const { return static_cast<int>(f_map.cols()); }
  int n_u_block() const { return horizon * m; }

  Vector assemble_xi(const Vector& x0, const Vector& theta) const;
  Vector linear_term(const Vector& xi, const Vector& x_ref_stacked) const;
};

struct Method1Options {
  CostWeights weights;
  bool enforce_state_bounds = false;
};

AugmentedQp build_method1_qp(const ParametricModel& model, int horizon,
                             const Method1Options& opts);

struct Method1Solution {
  Vector u0;
  Vector u_seq;   // Nm
  Vector v_seq;   // n_theta * Nm auxiliary products
  qp::QpSolution qp_solution;
};

/// Assembles xi and the linear term for the given state/parameter/reference,
/// solves the augmented QP and extracts the input sequence. Throws on an
/// infeasible QP, carrying the most violated row in the message.
Method1Solution solve_method1(const AugmentedQp& aqp, const ParametricModel& model,
                              const Vector& x0, const Vector& theta,
                              const Matrix& ref_window);

}  // namespace mccormick
}  // namespace parampc
