#include "model.hpp"

#include <sstream>
#include <stdexcept>

namespace parampc {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_box(const Box& box, const std::string& name, int expected_size) {
  if (static_cast<int>(box.size()) != expected_size) {
    std::ostringstream msg;
    msg << name << " has " << box.size() << " intervals, expected " << expected_size;
    throw std::invalid_argument(msg.str());
  }
  for (const auto& iv : box) {
    if (!(iv.lo <= iv.hi)) {
      throw std::invalid_argument(name + ": interval with lo > hi");
    }
  }
}

}  // namespace

ParametricMatrix::ParametricMatrix(Matrix base_in, std::vector<Matrix> deltas_in)
    : base(std::move(base_in)), deltas(std::move(deltas_in)) {
  require(base.rows() == base.cols(), "ParametricMatrix: base must be square");
  require(!deltas.empty(), "ParametricMatrix: at least one delta required");
  for (const auto& d : deltas) {
    require(d.rows() == base.rows() && d.cols() == base.cols(),
            "ParametricMatrix: delta dimensions must match base");
  }
}

Matrix ParametricMatrix::eval(const Vector& theta) const {
  if (theta.size() != n_theta()) {
    std::ostringstream msg;
    msg << "eval: theta has " << theta.size() << " components, expected " << n_theta();
    throw std::invalid_argument(msg.str());
  }
  Matrix out = base;
  for (int p = 0; p < n_theta(); ++p) out += theta(p) * deltas[p];
  return out;
}

Matrix ParametricMatrix::eval(double theta) const {
  Vector t(1);
  t(0) = theta;
  return eval(t);
}

void ParametricModel::validate() const {
  const int n = n_states();
  require(a.base.rows() == n && a.base.cols() == n, "model: A must be n x n");
  require(b.rows() == n, "model: B must have n rows");
  require(c.cols() == n, "model: C must have n columns");
  require(d.rows() == c.rows() && d.cols() == b.cols(), "model: D must be q x m");
  require(e.rows() == n, "model: E must have n rows");
  require(d_const.size() == e.cols(), "model: d_const must have one entry per E column");
  require(ts > 0.0, "model: ts must be positive");
  check_box(theta_box, "theta_box", n_theta());
  check_box(state_box, "state_box", n);
  check_box(input_box, "input_box", n_inputs());
}

ParametricMatrix decompose_from_endpoints(const Matrix& a_at_min, const Matrix& a_at_max) {
  require(a_at_min.rows() == a_at_min.cols(), "decompose_from_endpoints: matrices must be square");
  require(a_at_min.rows() == a_at_max.rows() && a_at_min.cols() == a_at_max.cols(),
          "decompose_from_endpoints: endpoint shapes differ");
  return ParametricMatrix(a_at_min, {a_at_max - a_at_min});
}

DiscretizedSystem discretize_euler(const ParametricMatrix& a_c, const Matrix& b_c,
                                   const Matrix& e_c, double ts) {
  require(ts > 0.0, "discretize_euler: ts must be positive");
  require(b_c.rows() == a_c.dim(), "discretize_euler: B rows must match A");
  require(e_c.rows() == a_c.dim() || e_c.size() == 0, "discretize_euler: E rows must match A");

  DiscretizedSystem out;
  const int n = a_c.dim();
  std::vector<Matrix> deltas;
  deltas.reserve(a_c.deltas.size());
  for (const auto& d : a_c.deltas) deltas.push_back(ts * d);
  out.a = ParametricMatrix(Matrix::Identity(n, n) + ts * a_c.base, std::move(deltas));
  out.b = ts * b_c;
  out.e = e_c.size() == 0 ? Matrix(n, 0) : Matrix(ts * e_c);
  return out;
}

void HexParams::validate() const {
  require(area_min < area_max, "HexParams: area_min must be < area_max");
  require(volume > 0 && heat_capacity > 0 && flow_hot > 0 && flow_cold > 0 &&
              transfer_coeff > 0 && area_min > 0,
          "HexParams: physical constants must be positive");
  require(ts > 0, "HexParams: ts must be positive");
}

void MsdParams::validate() const {
  require(stiffness_min < stiffness_max, "MsdParams: stiffness_min must be < stiffness_max");
  require(mass > 0, "MsdParams: mass must be positive");
  require(ts > 0, "MsdParams: ts must be positive");
}

namespace {

// Continuous-time HEX dynamics matrix for a fixed heat-transfer area.
Matrix hex_a_continuous(const HexParams& p, double area) {
  const double alpha = p.transfer_coeff * area / (p.heat_capacity * p.volume);
  Matrix a(2, 2);
  a << -p.flow_hot / p.volume - alpha, alpha,
       alpha, -p.flow_cold / p.volume - alpha;
  return a;
}

}  // namespace

ParametricModel build_hex(const HexParams& p) {
  p.validate();

  const ParametricMatrix a_c =
      decompose_from_endpoints(hex_a_continuous(p, p.area_min), hex_a_continuous(p, p.area_max));
  Matrix b_c(2, 1);
  b_c << p.flow_hot / p.volume, 0.0;
  Matrix e_c(2, 1);
  e_c << 0.0, p.flow_cold / p.volume;

  DiscretizedSystem disc = discretize_euler(a_c, b_c, e_c, p.ts);

  ParametricModel model;
  model.a = std::move(disc.a);
  model.b = std::move(disc.b);
  model.e = std::move(disc.e);
  model.c = Matrix(1, 2);
  model.c << 0.0, 1.0;
  model.d = Matrix::Zero(1, 1);
  model.d_const = Vector::Constant(1, p.t_cold_in);
  model.ts = p.ts;
  model.theta_box = {{0.0, 1.0}};
  model.state_box = {p.t_hot_box, p.t_cold_box};
  model.input_box = {p.t_hot_in_box};
  model.validate();
  return model;
}

ParametricModel build_msd(const MsdParams& p) {
  p.validate();

  Matrix a_base(2, 2);
  a_base << 1.0, p.ts,
      -p.stiffness_min * p.ts / p.mass, 1.0 - p.damping * p.ts / p.mass;
  Matrix delta = Matrix::Zero(2, 2);
  delta(1, 0) = -(p.stiffness_max - p.stiffness_min) * p.ts / p.mass;

  ParametricModel model;
  model.a = ParametricMatrix(a_base, {delta});
  model.b = Matrix(2, 1);
  model.b << 0.0, p.ts * p.input_gain / p.mass;
  model.c = Matrix(1, 2);
  model.c << 1.0, 0.0;
  model.d = Matrix::Zero(1, 1);
  model.e = Matrix(2, 0);
  model.d_const = Vector(0);
  model.ts = p.ts;
  model.theta_box = {{0.0, 1.0}};
  model.state_box = {p.disp_box, p.vel_box};
  model.input_box = {p.input_box};
  model.validate();
  return model;
}

}  // namespace parampc
