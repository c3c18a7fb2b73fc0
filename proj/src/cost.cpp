#include "cost.hpp"

#include <stdexcept>

namespace parampc {

Matrix stage_state_weight(const ParametricModel& model, const CostWeights& w) {
  const int n = model.n_states();
  if (w.weight_all_states) return w.q_scale * Matrix::Identity(n, n);
  return w.q_scale * (model.c.transpose() * model.c);
}

Matrix stacked_state_weight(const ParametricModel& model, const CostWeights& w, int horizon) {
  const int n = model.n_states();
  const Matrix q = stage_state_weight(model, w);
  Matrix out = Matrix::Zero(horizon * n, horizon * n);
  for (int k = 0; k < horizon; ++k) out.block(k * n, k * n, n, n) = q;
  return out;
}

Matrix stacked_input_weight(const ParametricModel& model, const CostWeights& w, int horizon) {
  const int nm = horizon * model.n_inputs();
  return w.r_scale * Matrix::Identity(nm, nm);
}

Vector stacked_reference(const ParametricModel& model, const Matrix& ref_window) {
  const int n = model.n_states();
  const int q = model.n_outputs();
  if (ref_window.cols() != q) {
    throw std::invalid_argument("stacked_reference: window columns must match output count");
  }
  const int horizon = static_cast<int>(ref_window.rows());
  Vector out = Vector::Zero(horizon * n);
  for (int k = 0; k < horizon; ++k) {
    out.segment(k * n, n) = model.c.transpose() * ref_window.row(k).transpose();
  }
  return out;
}

void input_box_rows(const ParametricModel& model, int horizon, Matrix* g, Vector* rhs) {
  const int m = model.n_inputs();
  const int nm = horizon * m;
  *g = Matrix::Zero(2 * nm, nm);
  *rhs = Vector::Zero(2 * nm);
  g->topRows(nm) = Matrix::Identity(nm, nm);
  g->bottomRows(nm) = -Matrix::Identity(nm, nm);
  for (int k = 0; k < horizon; ++k) {
    for (int j = 0; j < m; ++j) {
      (*rhs)(k * m + j) = model.input_box[j].hi;
      (*rhs)(nm + k * m + j) = -model.input_box[j].lo;
    }
  }
}

void state_box_rows(const ParametricModel& model, int horizon, Matrix* f_x, Vector* f_x_rhs) {
  const int n = model.n_states();
  const int nn = horizon * n;
  *f_x = Matrix::Zero(2 * nn, nn);
  *f_x_rhs = Vector::Zero(2 * nn);
  f_x->topRows(nn) = Matrix::Identity(nn, nn);
  f_x->bottomRows(nn) = -Matrix::Identity(nn, nn);
  for (int k = 0; k < horizon; ++k) {
    for (int j = 0; j < n; ++j) {
      (*f_x_rhs)(k * n + j) = model.state_box[j].hi;
      (*f_x_rhs)(nn + k * n + j) = -model.state_box[j].lo;
    }
  }
}

}  // namespace parampc
