#pragma once

#include <optional>

#include "condense.hpp"
#include "cost.hpp"
#include "qp.hpp"

namespace parampc {
namespace frechet {

/// Quadratic tracking cost with the condensed matrices expanded to first
/// order in a single scalar parameter:
///   H(t) = h0 + t*dh (+ t^2*dh2 with truncation = 2)
///   f(t) = (f0_map + t*df_map (+ t^2*df2_map)) * w
/// where w stacks [x0; X_ref; d]. At t = 0 the cost is the exact nominal
/// condensed cost.
struct ParametricQpCost {
  int horizon = 0;
  int n = 0, m = 0, r = 0;
  int truncation = 1;  // 1 drops the quadratic-in-parameter terms

  Matrix h0, dh, dh2;
  Matrix f0_map, df_map, df2_map;  // Nm x (n + Nn + r)

  // Condensed matrices kept for constraints and constant-term queries.
  Matrix s_x_nom, s_u_nom, s_d_nom;
  Matrix ds_x, ds_u, ds_d;
  Matrix q_bar;

  int nw() const { return n + horizon * n + r; }

  Matrix h_of(double theta) const;
  Vector f_of(double theta, const Vector& w) const;
  double c_of(double theta, const Vector& w) const;
  Vector stack_w(const Vector& x0, const Vector& x_ref_stacked, const Vector& d) const;

  Matrix s_x_of(double theta) const { return s_x_nom + theta * ds_x; }
  Matrix s_u_of(double theta) const { return s_u_nom + theta * ds_u; }
  Matrix s_d_of(double theta) const { return s_d_nom + theta * ds_d; }
};

/// Requires sensitivities for exactly one parameter component in `nominal`.
ParametricQpCost build_parametric_cost(const CondensedSystem& nominal, const Matrix& q_bar,
                                       const Matrix& r_bar, int truncation);

struct InverseExpansion {
  Matrix m;        // h0^{-1} - theta * h0^{-1} dh h0^{-1}
  double growth;   // ||theta * h0^{-1} dh|| (spectral-norm estimate)
  bool reliable;   // growth < 0.5
};

/// Two-term Neumann expansion of H(theta)^{-1}. Throws when h0 is singular.
InverseExpansion approx_inverse(const Matrix& h0, const Matrix& dh, double theta);

/// First-order expansion of the unconstrained optimizer around theta = 0:
///   U(theta) = U0 - theta * h0^{-1} (dh U0 + df),  U0 = -h0^{-1} f0.
Vector explicit_optimizer_unconstrained(const ParametricQpCost& cost, const Vector& x0,
                                        double theta, const Vector& x_ref_stacked,
                                        const Vector& d);

enum class Variant {
  inverse_approx,  // active-set scheme with the Neumann inverse expansion
  direct,          // solve the truncated parameter-dependent QP exactly
};

struct ControllerState {
  std::optional<Vector> last_u0;
  std::optional<Vector> last_u_seq;
  std::vector<int> last_active_set;
  int fallback_count = 0;
};

struct Method2Options {
  bool enforce_state_bounds = false;
  bool inject_infeasible = false;  // fault-injection hook: append contradictory rows
};

struct Method2Solution {
  Vector u0;
  Vector u_seq;
  bool used_fallback = false;
};

/// One controller step. Constraint rows are assembled from the first-order
/// condensed matrices at theta. On solver failure the previous solution is
/// replayed and fallback_count incremented; failure on the very first step
/// throws.
Method2Solution solve_method2(const ParametricQpCost& cost, const ParametricModel& model,
                              const Vector& x0, double theta, const Matrix& ref_window,
                              ControllerState& state, Variant variant,
                              const Method2Options& opts = {});

}  // namespace frechet
}  // namespace parampc
