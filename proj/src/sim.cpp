#include "sim.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "condense.hpp"

namespace parampc {
namespace sim {

ReferenceProfile ReferenceProfile::steps(const std::vector<std::pair<double, double>>& points) {
  ReferenceProfile out;
  out.segments.reserve(points.size());
  for (const auto& [t, v] : points) {
    Segment seg;
    seg.start_time = t;
    seg.value = Vector::Constant(1, v);
    out.segments.push_back(std::move(seg));
  }
  return out;
}

void ReferenceProfile::validate(int n_outputs) const {
  if (segments.empty()) throw std::invalid_argument("reference: at least one segment required");
  if (segments.front().start_time != 0.0) {
    throw std::invalid_argument("reference: first segment must start at t = 0");
  }
  for (size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].value.size() != n_outputs) {
      throw std::invalid_argument("reference: segment value size must match output count");
    }
    if (i > 0 && !(segments[i].start_time > segments[i - 1].start_time)) {
      throw std::invalid_argument("reference: start times must be strictly increasing");
    }
  }
}

Vector ReferenceProfile::value_at(double t) const {
  const Segment* current = &segments.front();
  for (const auto& seg : segments) {
    if (seg.start_time <= t) current = &seg;
  }
  return current->value;
}

Matrix ReferenceProfile::window(int step, int horizon, double ts) const {
  const int q = static_cast<int>(segments.front().value.size());
  Matrix out(horizon, q);
  for (int j = 1; j <= horizon; ++j) {
    out.row(j - 1) = value_at((step + j) * ts).transpose();
  }
  return out;
}

namespace {

void check_run_inputs(const ParametricModel& model, const Vector& theta_true, const Vector& x0) {
  if (theta_true.size() != model.n_theta()) {
    throw std::invalid_argument("run_closed_loop: theta size mismatch");
  }
  if (x0.size() != model.n_states()) {
    throw std::invalid_argument("run_closed_loop: x0 size mismatch");
  }
  for (int p = 0; p < model.n_theta(); ++p) {
    if (!model.theta_box[p].contains(theta_true(p), 1e-12)) {
      throw std::invalid_argument("run_closed_loop: theta outside theta_box");
    }
  }
  for (int j = 0; j < model.n_states(); ++j) {
    if (!model.state_box[j].contains(x0(j), 1e-12)) {
      throw std::invalid_argument("run_closed_loop: x0 outside state_box");
    }
  }
}

class ExactController final : public Controller {
 public:
  ExactController(const ParametricModel& model, Vector theta, const ControllerOptions& opts)
      : model_(model), theta_(std::move(theta)), opts_(opts) {
    if (theta_.size() != model_.n_theta()) {
      throw std::invalid_argument("exact controller: theta size mismatch");
    }
  }

  Step step(const Vector& x, const Matrix& ref_window) override {
    const int horizon = opts_.horizon;
    const Matrix a = model_.eval_a(theta_);
    const CondensedSystem cond = condense_exact(a, model_.b, model_.e, horizon);
    const Matrix q_bar = stacked_state_weight(model_, opts_.weights, horizon);
    const Matrix r_bar = stacked_input_weight(model_, opts_.weights, horizon);

    const Vector x_ref = stacked_reference(model_, ref_window);
    const Vector free_resp = cond.s_x * x + cond.s_d * model_.d_const;
    const Matrix h = 2.0 * (cond.s_u.transpose() * q_bar * cond.s_u + r_bar);
    const Vector f = 2.0 * cond.s_u.transpose() * (q_bar * (free_resp - x_ref));

    Matrix g;
    Vector rhs;
    input_box_rows(model_, horizon, &g, &rhs);
    if (opts_.enforce_state_bounds) {
      Matrix f_x;
      Vector f_x_rhs;
      state_box_rows(model_, horizon, &f_x, &f_x_rhs);
      const int rows_u = static_cast<int>(g.rows());
      const int rows_x = static_cast<int>(f_x.rows());
      Matrix g_all = Matrix::Zero(rows_u + rows_x, horizon * model_.n_inputs());
      Vector rhs_all = Vector::Zero(rows_u + rows_x);
      g_all.topRows(rows_u) = g;
      rhs_all.head(rows_u) = rhs;
      g_all.bottomRows(rows_x) = f_x * cond.s_u;
      rhs_all.tail(rows_x) = f_x_rhs - f_x * free_resp;
      g = std::move(g_all);
      rhs = std::move(rhs_all);
    }

    qp::DenseQp dense = qp::DenseQp::make(h, f, g, rhs);
    Vector hint = last_u_seq_.size() == horizon * model_.n_inputs()
                      ? last_u_seq_
                      : Vector::Zero(horizon * model_.n_inputs());
    qp::QpSolution sol = qp::solve(dense, hint);
    if (sol.status != qp::Status::optimal) {
      throw std::runtime_error("exact controller: QP solve failed");
    }
    last_u_seq_ = sol.z;
    Step out;
    out.u = sol.z.head(model_.n_inputs());
    return out;
  }

  int horizon() const override { return opts_.horizon; }

 private:
  ParametricModel model_;
  Vector theta_;
  ControllerOptions opts_;
  Vector last_u_seq_;
};

class McCormickController final : public Controller {
 public:
  McCormickController(const ParametricModel& model, Vector theta, const ControllerOptions& opts)
      : model_(model), theta_(std::move(theta)) {
    mccormick::Method1Options m1;
    m1.weights = opts.weights;
    m1.enforce_state_bounds = opts.enforce_state_bounds;
    aqp_ = mccormick::build_method1_qp(model_, opts.horizon, m1);
  }

  Step step(const Vector& x, const Matrix& ref_window) override {
    const auto sol = mccormick::solve_method1(aqp_, model_, x, theta_, ref_window);
    Step out;
    out.u = sol.u0;
    return out;
  }

  int horizon() const override { return aqp_.horizon; }

 private:
  ParametricModel model_;
  Vector theta_;
  mccormick::AugmentedQp aqp_;
};

class ExpansionController final : public Controller {
 public:
  ExpansionController(const ParametricModel& model, double theta, const ControllerOptions& opts,
                      frechet::Variant variant)
      : model_(model), theta_(theta), variant_(variant) {
    if (model_.n_theta() != 1) {
      throw std::invalid_argument("expansion controller: single-parameter models only");
    }
    const CondensedSystem cond = condense_model(model_, opts.horizon);
    const Matrix q_bar = stacked_state_weight(model_, opts.weights, opts.horizon);
    const Matrix r_bar = stacked_input_weight(model_, opts.weights, opts.horizon);
    cost_ = frechet::build_parametric_cost(cond, q_bar, r_bar, opts.truncation);
    m2_opts_.enforce_state_bounds = opts.enforce_state_bounds;
    inject_step_ = opts.inject_infeasible_step;
  }

  Step step(const Vector& x, const Matrix& ref_window) override {
    frechet::Method2Options opts = m2_opts_;
    opts.inject_infeasible = step_index_ == inject_step_;
    ++step_index_;
    const auto sol =
        frechet::solve_method2(cost_, model_, x, theta_, ref_window, state_, variant_, opts);
    Step out;
    out.u = sol.u0;
    out.used_fallback = sol.used_fallback;
    return out;
  }

  int horizon() const override { return cost_.horizon; }
  int fallback_count() const override { return state_.fallback_count; }

 private:
  ParametricModel model_;
  double theta_;
  frechet::Variant variant_;
  frechet::ParametricQpCost cost_;
  frechet::ControllerState state_;
  frechet::Method2Options m2_opts_;
  int inject_step_ = -1;
  int step_index_ = 0;
};

}  // namespace

std::unique_ptr<Controller> make_exact_controller(const ParametricModel& model,
                                                  const Vector& theta,
                                                  const ControllerOptions& opts) {
  return std::make_unique<ExactController>(model, theta, opts);
}

std::unique_ptr<Controller> make_mccormick_controller(const ParametricModel& model,
                                                      const Vector& theta,
                                                      const ControllerOptions& opts) {
  return std::make_unique<McCormickController>(model, theta, opts);
}

std::unique_ptr<Controller> make_expansion_controller(const ParametricModel& model,
                                                      double theta,
                                                      const ControllerOptions& opts,
                                                      frechet::Variant variant) {
  return std::make_unique<ExpansionController>(model, theta, opts, variant);
}

SimulationTrace run_closed_loop(const ParametricModel& model, Controller& controller,
                                const Vector& theta_true, const Vector& x0,
                                const ReferenceProfile& ref, int t_steps) {
  check_run_inputs(model, theta_true, x0);
  ref.validate(model.n_outputs());
  if (t_steps < 1) throw std::invalid_argument("run_closed_loop: t_steps must be >= 1");

  const int n = model.n_states();
  const int m = model.n_inputs();
  const int q = model.n_outputs();
  const Matrix a = model.eval_a(theta_true);
  const Vector dist = model.e * model.d_const;

  SimulationTrace trace;
  trace.times = Vector::Zero(t_steps);
  trace.states = Matrix::Zero(t_steps, n);
  trace.inputs = Matrix::Zero(t_steps, m);
  trace.outputs = Matrix::Zero(t_steps, q);
  trace.references = Matrix::Zero(t_steps, q);

  Vector x = x0;
  for (int k = 0; k < t_steps; ++k) {
    const double t = k * model.ts;
    const Matrix ref_window = ref.window(k, controller.horizon(), model.ts);
    Controller::Step s;
    try {
      s = controller.step(x, ref_window);
    } catch (const std::exception& err) {
      if (k == 0) {
        throw std::runtime_error(std::string("run_closed_loop: controller failed at step 0: ") +
                                 err.what());
      }
      throw;
    }
    trace.times(k) = t;
    trace.states.row(k) = x.transpose();
    trace.inputs.row(k) = s.u.transpose();
    trace.outputs.row(k) = (model.c * x + model.d * s.u).transpose();
    trace.references.row(k) = ref.value_at(t).transpose();
    if (s.used_fallback) trace.fallback_steps.push_back(k);
    x = a * x + model.b * s.u + dist;
  }
  return trace;
}

ErrorMetrics compute_metrics(const SimulationTrace& trace, const SimulationTrace& baseline) {
  if (trace.length() != baseline.length() || trace.outputs.cols() != baseline.outputs.cols()) {
    throw std::invalid_argument("compute_metrics: traces must have equal shape");
  }
  const Matrix diff = trace.outputs - baseline.outputs;
  ErrorMetrics out;
  out.rmse = std::sqrt(diff.array().square().mean());
  out.maxae = diff.array().abs().maxCoeff();
  const double range = baseline.outputs.maxCoeff() - baseline.outputs.minCoeff();
  if (!(range > 0)) {
    throw std::invalid_argument("compute_metrics: baseline output range is zero");
  }
  out.nrmse = out.rmse / range;
  return out;
}

double total_variation(const SimulationTrace& trace) {
  double tv = 0.0;
  for (int k = 0; k + 1 < trace.length(); ++k) {
    tv += (trace.inputs.row(k + 1) - trace.inputs.row(k)).cwiseAbs().sum();
  }
  return tv;
}

}  // namespace sim
}  // namespace parampc
