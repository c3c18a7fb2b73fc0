#pragma once

#include "model.hpp"

namespace parampc {

/// Tracking-cost configuration shared by every controller flavor.
/// By default only the tracked output channels (rows of C) are weighted;
/// weight_all_states switches to a full-state penalty with the reference
/// lifted into the tracked channel and zero elsewhere.
struct CostWeights {
  double q_scale = 1.0;
  double r_scale = 1e-3;
  bool weight_all_states = false;
};

/// Per-stage state weight: q_scale * C'C (selector outputs) or q_scale * I.
Matrix stage_state_weight(const ParametricModel& model, const CostWeights& w);

/// I_N (kron) stage weight.
Matrix stacked_state_weight(const ParametricModel& model, const CostWeights& w, int horizon);

/// r_scale * I_{Nm}.
Matrix stacked_input_weight(const ParametricModel& model, const CostWeights& w, int horizon);

/// Lift an output-reference window (horizon x q) into stacked state space:
/// block k = C' * r_k. Assumes C selects states, which both case studies do.
Vector stacked_reference(const ParametricModel& model, const Matrix& ref_window);

/// Input box rows over the stacked input vector:
/// first Nm rows are u <= hi, next Nm rows are -u <= -lo.
void input_box_rows(const ParametricModel& model, int horizon, Matrix* g, Vector* rhs);

/// State box rows over the stacked state vector (hi rows then lo rows per step).
void state_box_rows(const ParametricModel& model, int horizon, Matrix* f_x, Vector* f_x_rhs);

}  // namespace parampc
