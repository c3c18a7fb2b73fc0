#pragma once

#include "model.hpp"

namespace parampc {

/// Stacked prediction matrices over a horizon N, so that
///   X = s_x * x0 + s_u * U + s_d * d
/// reproduces x_{k+1} = A x_k + B u_k + E d for k = 0..N-1, with
/// X = [x_1; ...; x_N] and U = [u_0; ...; u_{N-1}].
///
/// When built from a parametric model the per-parameter first-order
/// sensitivities delta_s_* are filled in as well:
///   s_*(theta) ~ s_* + sum_p theta[p] * delta_s_*[p].
struct CondensedSystem {
  int horizon = 0;
  int n = 0, m = 0, r = 0;
  Matrix s_x;  // Nn x n
  Matrix s_u;  // Nn x Nm, lower block-triangular
  Matrix s_d;  // Nn x r
  std::vector<Matrix> delta_s_x;  // per parameter component, Nn x n
  std::vector<Matrix> delta_s_u;  // per parameter component, Nn x Nm
  std::vector<Matrix> delta_s_d;  // per parameter component, Nn x r

  bool has_sensitivities() const { return !delta_s_x.empty(); }
};

/// Directional derivative of M -> M^p at a_tilde along delta_a:
///   sum_{r=0}^{p-1} a_tilde^r * delta_a * a_tilde^{p-1-r}.
/// p = 0 returns the zero matrix.
Matrix frechet_power(const Matrix& a_tilde, const Matrix& delta_a, int p);

CondensedSystem condense_exact(const Matrix& a, const Matrix& b, const Matrix& e, int horizon);

struct SensitivityBlocks {
  Matrix delta_s_x;
  Matrix delta_s_u;
  Matrix delta_s_d;
};

/// First-order sensitivities of the condensed blocks with respect to the
/// parameter scaling delta_a. By default block k of delta_s_x is the exact
/// derivative of a^k (so block 1 equals delta_a); with paper_indexing the
/// first block is zeroed and block k carries the derivative of a^{k-1}.
SensitivityBlocks condense_sensitivity(const Matrix& a_tilde, const Matrix& delta_a,
                                       const Matrix& b, const Matrix& e, int horizon,
                                       bool paper_indexing = false);

/// Nominal condensed system at theta = 0 plus sensitivities for every
/// parameter component of the model.
CondensedSystem condense_model(const ParametricModel& model, int horizon,
                               bool paper_indexing = false);

}  // namespace parampc
