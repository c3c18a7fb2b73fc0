#pragma once

#include <Eigen/Dense>
#include <vector>

namespace parampc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

using Box = std::vector<Interval>;

/// Square matrix with affine dependence on a parameter vector:
/// A(theta) = base + sum_p theta[p] * deltas[p].
struct ParametricMatrix {
  Matrix base;
  std::vector<Matrix> deltas;

  ParametricMatrix() = default;
  ParametricMatrix(Matrix base_in, std::vector<Matrix> deltas_in);

  int dim() const { return static_cast<int>(base.rows()); }
  int n_theta() const { return static_cast<int>(deltas.size()); }

  Matrix eval(const Vector& theta) const;
  Matrix eval(double theta) const;
};

/// Discrete-time state-space model x+ = A(theta) x + B u + E d, y = C x + D u.
/// theta is constant over a trajectory; d is a constant exogenous input.
struct ParametricModel {
  ParametricMatrix a;
  Matrix b;       // n x m
  Matrix c;       // q x n
  Matrix d;       // q x m
  Matrix e;       // n x r (r may be 0)
  Vector d_const; // r, default value of the exogenous input
  double ts = 0.0;
  Box theta_box;
  Box state_box;
  Box input_box;

  int n_states() const { return static_cast<int>(a.base.rows()); }
  int n_inputs() const { return static_cast<int>(b.cols()); }
  int n_outputs() const { return static_cast<int>(c.rows()); }
  int n_dist() const { return static_cast<int>(e.cols()); }
  int n_theta() const { return a.n_theta(); }

  Matrix eval_a(const Vector& theta) const { return a.eval(theta); }
  Matrix eval_a(double theta) const { return a.eval(theta); }

  /// Throws std::invalid_argument when dimensions or boxes are inconsistent.
  void validate() const;
};

/// base = a_at_min, single delta = a_at_max - a_at_min, so theta in [0,1]
/// interpolates between the two endpoint matrices.
ParametricMatrix decompose_from_endpoints(const Matrix& a_at_min, const Matrix& a_at_max);

struct DiscretizedSystem {
  ParametricMatrix a;
  Matrix b;
  Matrix e;
};

/// Forward Euler: A_d = I + ts*A_c (per affine term), B_d = ts*B_c, E_d = ts*E_c.
DiscretizedSystem discretize_euler(const ParametricMatrix& a_c, const Matrix& b_c,
                                   const Matrix& e_c, double ts);

struct HexParams {
  double volume = 1000.0;           // L
  double heat_capacity = 1.0;       // kJ/(L.degC)
  double flow_hot = 2.5;            // L/s
  double flow_cold = 2.0;           // L/s
  double transfer_coeff = 1.0;      // kJ/(s.m^2.degC)
  double area_min = 2.0;            // m^2
  double area_max = 5.0;            // m^2
  Interval t_hot_box{45.0, 70.0};   // degC
  Interval t_cold_box{25.0, 45.0};  // degC
  Interval t_hot_in_box{60.0, 80.0};// degC, manipulated inflow
  double t_cold_in = 25.0;          // degC, constant disturbance
  double ts = 10.0;                 // s

  void validate() const;
};

struct MsdParams {
  double mass = 2.0;                // kg
  double damping = 3.109;           // N.s/m
  double stiffness_min = 500.0;     // N/m
  double stiffness_max = 2000.0;    // N/m
  double input_gain = 3.717;        // N/V
  Interval disp_box{-0.1, 0.1};     // m
  Interval vel_box{-0.5, 0.5};      // m/s
  Interval input_box{-5.0, 5.0};    // V
  double ts = 0.01;                 // s

  void validate() const;
};

/// Two-state heat exchanger, states [T_h, T_c], input T_h_in, disturbance T_c_in.
/// The heat-transfer area varies affinely with theta in [0,1]; output is T_c.
ParametricModel build_hex(const HexParams& p);

/// Mass-spring-damper, states [z, z_dot], stiffness affine in theta in [0,1].
/// Output is the displacement z. No exogenous input.
ParametricModel build_msd(const MsdParams& p);

}  // namespace parampc
