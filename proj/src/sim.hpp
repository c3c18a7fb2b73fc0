#pragma once

#include <memory>

#include "frechet.hpp"
#include "mccormick.hpp"
#include "model.hpp"

namespace parampc {
namespace sim {

/// Piecewise-constant output reference given as step segments. The preview
/// window for step k covers the predicted outputs k+1 .. k+N.
struct ReferenceProfile {
  struct Segment {
    double start_time = 0.0;
    Vector value;  // q entries
  };
  std::vector<Segment> segments;

  static ReferenceProfile steps(const std::vector<std::pair<double, double>>& points);

  void validate(int n_outputs) const;
  Vector value_at(double t) const;
  Matrix window(int step, int horizon, double ts) const;  // horizon x q
};

struct SimulationTrace {
  Vector times;
  Matrix states;      // T x n
  Matrix inputs;      // T x m
  Matrix outputs;     // T x q
  Matrix references;  // T x q
  std::vector<int> fallback_steps;

  int length() const { return static_cast<int>(times.size()); }
};

struct ErrorMetrics {
  double rmse = 0.0;
  double maxae = 0.0;
  double nrmse = 0.0;
};

class Controller {
 public:
  virtual ~Controller() = default;

  struct Step {
    Vector u;
    bool used_fallback = false;
  };

  virtual Step step(const Vector& x, const Matrix& ref_window) = 0;
  virtual int horizon() const = 0;
  virtual int fallback_count() const { return 0; }
};

struct ControllerOptions {
  int horizon = 4;
  CostWeights weights;
  bool enforce_state_bounds = false;
  int truncation = 1;               // expansion order for the parametric cost
  int inject_infeasible_step = -1;  // fault-injection hook (expansion methods)
};

/// Per-step condensed QP at the true parameter; no fallback, failures throw.
std::unique_ptr<Controller> make_exact_controller(const ParametricModel& model,
                                                  const Vector& theta,
                                                  const ControllerOptions& opts);

/// Envelope-convexified augmented QP, built once and re-solved per step.
std::unique_ptr<Controller> make_mccormick_controller(const ParametricModel& model,
                                                      const Vector& theta,
                                                      const ControllerOptions& opts);

/// First-order-expansion controller (scalar parameter), either variant.
std::unique_ptr<Controller> make_expansion_controller(const ParametricModel& model,
                                                      double theta,
                                                      const ControllerOptions& opts,
                                                      frechet::Variant variant);

/// Steps the true plant x+ = A(theta_true) x + B u + E d under the controller.
/// Throws when the controller fails at the very first step.
SimulationTrace run_closed_loop(const ParametricModel& model, Controller& controller,
                                const Vector& theta_true, const Vector& x0,
                                const ReferenceProfile& ref, int t_steps);

/// Output-error metrics against a baseline trace of equal shape; nrmse is
/// normalized by the baseline output range.
ErrorMetrics compute_metrics(const SimulationTrace& trace, const SimulationTrace& baseline);

/// Sum over steps of |u_{k+1} - u_k|, summed across input channels.
double total_variation(const SimulationTrace& trace);

}  // namespace sim
}  // namespace parampc
