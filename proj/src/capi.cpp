#include "parampc/parampc.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "csv_io.hpp"
#include "empc.hpp"
#include "json_io.hpp"
#include "sim.hpp"

using namespace parampc;

namespace {

thread_local std::string g_last_error;

parampc_status fail(parampc_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

parampc_status from_exception() {
  try {
    throw;
  } catch (const std::invalid_argument& e) {
    return fail(PARAMPC_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PARAMPC_ERR_FAILURE, "out of memory");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    if (what.find("infeasible") != std::string::npos) {
      return fail(PARAMPC_ERR_INFEASIBLE, what);
    }
    if (what.find("iteration cap") != std::string::npos) {
      return fail(PARAMPC_ERR_MAX_ITERATIONS, what);
    }
    return fail(PARAMPC_ERR_NUMERICAL, what);
  } catch (...) {
    return fail(PARAMPC_ERR_FAILURE, "unknown error");
  }
}

parampc_status require_c(bool cond, const char* msg) {
  return cond ? PARAMPC_OK : fail(PARAMPC_ERR_INVALID_ARGUMENT, msg);
}

Vector to_vector(const double* data, int size) {
  Vector out(size);
  for (int i = 0; i < size; ++i) out(i) = data[i];
  return out;
}

}  // namespace

struct parampc_model {
  ParametricModel model;
};

struct parampc_controller {
  std::unique_ptr<sim::Controller> impl;
  int horizon = 0;
  int n = 0, m = 0, q = 0;
};

struct parampc_reference {
  sim::ReferenceProfile profile;
};

struct parampc_trace {
  sim::SimulationTrace trace;
};

struct parampc_law {
  empc::PwaLaw law;
};

extern "C" {

const char* parampc_last_error(void) { return g_last_error.c_str(); }

const char* parampc_version(void) { return "0.1.0"; }

void parampc_hex_params_default(parampc_hex_params* out) {
  if (!out) return;
  const HexParams p;
  out->volume = p.volume;
  out->heat_capacity = p.heat_capacity;
  out->flow_hot = p.flow_hot;
  out->flow_cold = p.flow_cold;
  out->transfer_coeff = p.transfer_coeff;
  out->area_min = p.area_min;
  out->area_max = p.area_max;
  out->t_hot_lo = p.t_hot_box.lo;
  out->t_hot_hi = p.t_hot_box.hi;
  out->t_cold_lo = p.t_cold_box.lo;
  out->t_cold_hi = p.t_cold_box.hi;
  out->t_hot_in_lo = p.t_hot_in_box.lo;
  out->t_hot_in_hi = p.t_hot_in_box.hi;
  out->t_cold_in = p.t_cold_in;
  out->ts = p.ts;
}

void parampc_msd_params_default(parampc_msd_params* out) {
  if (!out) return;
  const MsdParams p;
  out->mass = p.mass;
  out->damping = p.damping;
  out->stiffness_min = p.stiffness_min;
  out->stiffness_max = p.stiffness_max;
  out->input_gain = p.input_gain;
  out->disp_lo = p.disp_box.lo;
  out->disp_hi = p.disp_box.hi;
  out->vel_lo = p.vel_box.lo;
  out->vel_hi = p.vel_box.hi;
  out->input_lo = p.input_box.lo;
  out->input_hi = p.input_box.hi;
  out->ts = p.ts;
}

parampc_status parampc_model_hex(const parampc_hex_params* params, parampc_model** out) {
  if (auto s = require_c(params && out, "null argument")) return s;
  try {
    HexParams p;
    p.volume = params->volume;
    p.heat_capacity = params->heat_capacity;
    p.flow_hot = params->flow_hot;
    p.flow_cold = params->flow_cold;
    p.transfer_coeff = params->transfer_coeff;
    p.area_min = params->area_min;
    p.area_max = params->area_max;
    p.t_hot_box = {params->t_hot_lo, params->t_hot_hi};
    p.t_cold_box = {params->t_cold_lo, params->t_cold_hi};
    p.t_hot_in_box = {params->t_hot_in_lo, params->t_hot_in_hi};
    p.t_cold_in = params->t_cold_in;
    p.ts = params->ts;
    *out = new parampc_model{build_hex(p)};
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

parampc_status parampc_model_msd(const parampc_msd_params* params, parampc_model** out) {
  if (auto s = require_c(params && out, "null argument")) return s;
  try {
    MsdParams p;
    p.mass = params->mass;
    p.damping = params->damping;
    p.stiffness_min = params->stiffness_min;
    p.stiffness_max = params->stiffness_max;
    p.input_gain = params->input_gain;
    p.disp_box = {params->disp_lo, params->disp_hi};
    p.vel_box = {params->vel_lo, params->vel_hi};
    p.input_box = {params->input_lo, params->input_hi};
    p.ts = params->ts;
    *out = new parampc_model{build_msd(p)};
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

parampc_status parampc_model_from_json(const char* json_text, parampc_model** out) {
  if (auto s = require_c(json_text && out, "null argument")) return s;
  try {
    *out = new parampc_model{jsonio::model_from_json(json_text)};
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

parampc_status parampc_model_to_json(const parampc_model* model, char** out_text) {
  if (auto s = require_c(model && out_text, "null argument")) return s;
  try {
    const std::string text = jsonio::model_to_json(model->model);
    char* buf = static_cast<char*>(::operator new(text.size() + 1));
    std::memcpy(buf, text.c_str(), text.size() + 1);
    *out_text = buf;
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

void parampc_model_free(parampc_model* model) { delete model; }

void parampc_string_free(char* text) { ::operator delete(text); }

parampc_status parampc_model_dims(const parampc_model* model, int* n, int* m, int* q, int* r,
                                  int* n_theta) {
  if (auto s = require_c(model != nullptr, "null model")) return s;
  if (n) *n = model->model.n_states();
  if (m) *m = model->model.n_inputs();
  if (q) *q = model->model.n_outputs();
  if (r) *r = model->model.n_dist();
  if (n_theta) *n_theta = model->model.n_theta();
  return PARAMPC_OK;
}

parampc_status parampc_model_ts(const parampc_model* model, double* ts) {
  if (auto s = require_c(model && ts, "null argument")) return s;
  *ts = model->model.ts;
  return PARAMPC_OK;
}

parampc_status parampc_model_eval_a(const parampc_model* model, const double* theta,
                                    int n_theta, double* a_out) {
  if (auto s = require_c(model && theta && a_out, "null argument")) return s;
  try {
    const Matrix a = model->model.eval_a(to_vector(theta, n_theta));
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) a_out[i * a.cols() + j] = a(i, j);
    }
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

void parampc_controller_options_default(parampc_controller_options* out) {
  if (!out) return;
  out->horizon = 4;
  out->q_scale = 1.0;
  out->r_scale = 1e-3;
  out->weight_all_states = 0;
  out->enforce_state_bounds = 0;
  out->truncation_order = 1;
}

namespace {

sim::ControllerOptions to_core_options(const parampc_controller_options& o) {
  sim::ControllerOptions out;
  out.horizon = o.horizon;
  out.weights.q_scale = o.q_scale;
  out.weights.r_scale = o.r_scale;
  out.weights.weight_all_states = o.weight_all_states != 0;
  out.enforce_state_bounds = o.enforce_state_bounds != 0;
  out.truncation = o.truncation_order;
  return out;
}

}  // namespace

parampc_status parampc_controller_create(const parampc_model* model, parampc_method method,
                                         const double* theta, int n_theta,
                                         const parampc_controller_options* options,
                                         parampc_controller** out) {
  if (auto s = require_c(model && theta && options && out, "null argument")) return s;
  try {
    const Vector th = to_vector(theta, n_theta);
    const sim::ControllerOptions core = to_core_options(*options);
    auto handle = std::make_unique<parampc_controller>();
    switch (method) {
      case PARAMPC_METHOD_EXACT:
        handle->impl = sim::make_exact_controller(model->model, th, core);
        break;
      case PARAMPC_METHOD_MCCORMICK:
        handle->impl = sim::make_mccormick_controller(model->model, th, core);
        break;
      case PARAMPC_METHOD_EXPANSION_INV:
      case PARAMPC_METHOD_EXPANSION_NI: {
        if (n_theta != 1) {
          return fail(PARAMPC_ERR_INVALID_ARGUMENT,
                      "expansion methods require a single parameter component");
        }
        const auto variant = method == PARAMPC_METHOD_EXPANSION_INV
                                 ? frechet::Variant::inverse_approx
                                 : frechet::Variant::direct;
        handle->impl = sim::make_expansion_controller(model->model, th(0), core, variant);
        break;
      }
      default:
        return fail(PARAMPC_ERR_INVALID_ARGUMENT, "unknown method");
    }
    handle->horizon = core.horizon;
    handle->n = model->model.n_states();
    handle->m = model->model.n_inputs();
    handle->q = model->model.n_outputs();
    *out = handle.release();
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

void parampc_controller_free(parampc_controller* controller) { delete controller; }

parampc_status parampc_controller_fallback_count(const parampc_controller* controller,
                                                 int* count) {
  if (auto s = require_c(controller && count, "null argument")) return s;
  *count = controller->impl->fallback_count();
  return PARAMPC_OK;
}

parampc_status parampc_controller_step(parampc_controller* controller, const double* x,
                                       const double* ref_window, double* u_out,
                                       int* used_fallback) {
  if (auto s = require_c(controller && x && ref_window && u_out, "null argument")) return s;
  try {
    Matrix window(controller->horizon, controller->q);
    for (int i = 0; i < controller->horizon; ++i) {
      for (int j = 0; j < controller->q; ++j) window(i, j) = ref_window[i * controller->q + j];
    }
    const auto step = controller->impl->step(to_vector(x, controller->n), window);
    for (int j = 0; j < controller->m; ++j) u_out[j] = step.u(j);
    if (used_fallback) *used_fallback = step.used_fallback ? 1 : 0;
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

parampc_status parampc_reference_create(const double* start_times, const double* values,
                                        int n_segments, int q, parampc_reference** out) {
  if (auto s = require_c(start_times && values && out, "null argument")) return s;
  if (auto s = require_c(n_segments >= 1 && q >= 1, "need at least one segment and output")) {
    return s;
  }
  try {
    sim::ReferenceProfile profile;
    profile.segments.reserve(n_segments);
    for (int i = 0; i < n_segments; ++i) {
      sim::ReferenceProfile::Segment seg;
      seg.start_time = start_times[i];
      seg.value = to_vector(values + i * q, q);
      profile.segments.push_back(std::move(seg));
    }
    profile.validate(q);
    *out = new parampc_reference{std::move(profile)};
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

void parampc_reference_free(parampc_reference* ref) { delete ref; }

parampc_status parampc_simulate(const parampc_model* model, parampc_controller* controller,
                                const double* theta, int n_theta, const double* x0,
                                const parampc_reference* ref, int steps, parampc_trace** out) {
  if (auto s = require_c(model && controller && theta && x0 && ref && out, "null argument")) {
    return s;
  }
  try {
    auto trace = std::make_unique<parampc_trace>();
    trace->trace = sim::run_closed_loop(model->model, *controller->impl,
                                        to_vector(theta, n_theta),
                                        to_vector(x0, model->model.n_states()),
                                        ref->profile, steps);
    *out = trace.release();
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

void parampc_trace_free(parampc_trace* trace) { delete trace; }

parampc_status parampc_trace_length(const parampc_trace* trace, int* length) {
  if (auto s = require_c(trace && length, "null argument")) return s;
  *length = trace->trace.length();
  return PARAMPC_OK;
}

parampc_status parampc_trace_data(const parampc_trace* trace, double* times, double* states,
                                  double* inputs, double* outputs, double* references,
                                  int* fallback) {
  if (auto s = require_c(trace != nullptr, "null trace")) return s;
  const auto& t = trace->trace;
  const int len = t.length();
  auto copy_matrix = [len](const Matrix& m, double* dst) {
    if (!dst) return;
    for (int i = 0; i < len; ++i) {
      for (int j = 0; j < m.cols(); ++j) dst[i * m.cols() + j] = m(i, j);
    }
  };
  if (times) {
    for (int i = 0; i < len; ++i) times[i] = t.times(i);
  }
  copy_matrix(t.states, states);
  copy_matrix(t.inputs, inputs);
  copy_matrix(t.outputs, outputs);
  copy_matrix(t.references, references);
  if (fallback) {
    for (int i = 0; i < len; ++i) fallback[i] = 0;
    for (int k : t.fallback_steps) {
      if (k >= 0 && k < len) fallback[k] = 1;
    }
  }
  return PARAMPC_OK;
}

parampc_status parampc_trace_save_csv(const parampc_trace* trace, const char* path) {
  if (auto s = require_c(trace && path, "null argument")) return s;
  try {
    csvio::save_trace_csv(trace->trace, path);
    return PARAMPC_OK;
  } catch (const std::exception& e) {
    return fail(PARAMPC_ERR_IO, e.what());
  }
}

parampc_status parampc_trace_total_variation(const parampc_trace* trace, double* tv) {
  if (auto s = require_c(trace && tv, "null argument")) return s;
  *tv = sim::total_variation(trace->trace);
  return PARAMPC_OK;
}

parampc_status parampc_metrics(const parampc_trace* trace, const parampc_trace* baseline,
                               double* rmse, double* maxae, double* nrmse) {
  if (auto s = require_c(trace && baseline, "null argument")) return s;
  try {
    const sim::ErrorMetrics m = sim::compute_metrics(trace->trace, baseline->trace);
    if (rmse) *rmse = m.rmse;
    if (maxae) *maxae = m.maxae;
    if (nrmse) *nrmse = m.nrmse;
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

parampc_status parampc_regions_build(const parampc_model* model, parampc_method method,
                                     const double* theta, int n_theta,
                                     const parampc_controller_options* options,
                                     const double* ref_value, int region_cap,
                                     unsigned long long seed, parampc_law** out) {
  if (auto s = require_c(model && options && ref_value && out, "null argument")) return s;
  try {
    const ParametricModel& m = model->model;
    const sim::ControllerOptions core = to_core_options(*options);
    const int horizon = core.horizon;

    Matrix ref_window(horizon, m.n_outputs());
    for (int k = 0; k < horizon; ++k) {
      for (int j = 0; j < m.n_outputs(); ++j) ref_window(k, j) = ref_value[j];
    }
    const Vector x_ref = stacked_reference(m, ref_window);

    empc::MpQp problem;
    if (method == PARAMPC_METHOD_MCCORMICK) {
      mccormick::Method1Options m1;
      m1.weights = core.weights;
      m1.enforce_state_bounds = core.enforce_state_bounds;
      const mccormick::AugmentedQp aqp = mccormick::build_method1_qp(m, horizon, m1);
      problem.h = aqp.h;
      problem.f_map = aqp.f_map;
      problem.f0 = aqp.ref_gain * (aqp.d_offset - x_ref);
      problem.g = aqp.g;
      problem.b = aqp.b;
      problem.e_mat = aqp.e_mat;
      problem.param_box = aqp.xi_box;
    } else if (method == PARAMPC_METHOD_EXPANSION_NI) {
      if (auto s = require_c(theta && n_theta == 1,
                             "expansion regions require a single theta value")) {
        return s;
      }
      const double th = theta[0];
      const CondensedSystem cond = condense_model(m, horizon);
      const Matrix q_bar = stacked_state_weight(m, core.weights, horizon);
      const Matrix r_bar = stacked_input_weight(m, core.weights, horizon);
      const frechet::ParametricQpCost cost =
          frechet::build_parametric_cost(cond, q_bar, r_bar, core.truncation);

      Matrix combined = cost.f0_map + th * cost.df_map;
      if (core.truncation >= 2) combined += th * th * cost.df2_map;
      Vector w_rest = Vector::Zero(cost.nw());
      w_rest.segment(cost.n, horizon * cost.n) = x_ref;
      w_rest.tail(cost.r) = m.d_const;

      Matrix g_u;
      Vector rhs_u;
      input_box_rows(m, horizon, &g_u, &rhs_u);

      problem.f_map = combined.leftCols(cost.n);
      problem.f0 = combined * w_rest;
      if (core.enforce_state_bounds) {
        Matrix f_x;
        Vector f_x_rhs;
        state_box_rows(m, horizon, &f_x, &f_x_rhs);
        const int rows_u = static_cast<int>(g_u.rows());
        const int rows_x = static_cast<int>(f_x.rows());
        problem.g = Matrix::Zero(rows_u + rows_x, horizon * m.n_inputs());
        problem.b = Vector::Zero(rows_u + rows_x);
        problem.e_mat = Matrix::Zero(rows_u + rows_x, m.n_states());
        problem.g.topRows(rows_u) = g_u;
        problem.b.head(rows_u) = rhs_u;
        problem.g.bottomRows(rows_x) = f_x * cost.s_u_of(th);
        problem.b.tail(rows_x) = f_x_rhs - f_x * (cost.s_d_of(th) * m.d_const);
        problem.e_mat.bottomRows(rows_x) = -f_x * cost.s_x_of(th);
      } else {
        problem.g = g_u;
        problem.b = rhs_u;
        problem.e_mat = Matrix::Zero(g_u.rows(), m.n_states());
      }
      // Run the Hessian through the same construction the online solver uses.
      const qp::DenseQp dense = qp::DenseQp::make(
          cost.h_of(th), Vector::Zero(horizon * m.n_inputs()), problem.g, problem.b);
      problem.h = dense.h;
      problem.param_box = m.state_box;
    } else {
      return fail(PARAMPC_ERR_INVALID_ARGUMENT,
                  "regions are available for the envelope and direct-expansion methods");
    }

    empc::EnumerationOptions opts;
    opts.region_cap = region_cap > 0 ? region_cap : 5000;
    opts.seed = seed;
    auto law = std::make_unique<parampc_law>();
    law->law = empc::enumerate_regions(problem, opts);
    *out = law.release();
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

void parampc_law_free(parampc_law* law) { delete law; }

parampc_status parampc_law_count(const parampc_law* law, int* count) {
  if (auto s = require_c(law && count, "null argument")) return s;
  *count = static_cast<int>(law->law.regions.size());
  return PARAMPC_OK;
}

parampc_status parampc_law_complete(const parampc_law* law, int* complete) {
  if (auto s = require_c(law && complete, "null argument")) return s;
  *complete = law->law.complete ? 1 : 0;
  return PARAMPC_OK;
}

parampc_status parampc_law_dim(const parampc_law* law, int* n_param, int* n_z) {
  if (auto s = require_c(law != nullptr, "null law")) return s;
  if (n_param) *n_param = law->law.problem.nxi();
  if (n_z) *n_z = law->law.problem.nz();
  return PARAMPC_OK;
}

parampc_status parampc_law_export_json(const parampc_law* law, const char* path) {
  if (auto s = require_c(law && path, "null argument")) return s;
  try {
    csvio::write_file_atomic(path, jsonio::law_to_json(law->law));
    return PARAMPC_OK;
  } catch (const std::exception& e) {
    return fail(PARAMPC_ERR_IO, e.what());
  }
}

parampc_status parampc_law_point_locate(const parampc_law* law, const double* xi, int n_param,
                                        int* region_index, double* z_out) {
  if (auto s = require_c(law && xi && region_index, "null argument")) return s;
  if (auto s = require_c(n_param == law->law.problem.nxi(), "parameter size mismatch")) return s;
  const empc::LocateResult res = empc::point_locate(law->law, to_vector(xi, n_param));
  *region_index = res.region_index;
  if (res.region_index >= 0 && z_out) {
    for (int i = 0; i < res.z.size(); ++i) z_out[i] = res.z(i);
  }
  return PARAMPC_OK;
}

parampc_status parampc_law_coverage(const parampc_law* law, int samples,
                                    unsigned long long seed, double* hit_fraction,
                                    double* infeasible_fraction, double* miss_fraction) {
  if (auto s = require_c(law != nullptr, "null law")) return s;
  try {
    const empc::CoverageReport rep = empc::coverage_report(law->law, samples, seed);
    if (hit_fraction) *hit_fraction = rep.hit_fraction;
    if (infeasible_fraction) *infeasible_fraction = rep.infeasible_fraction;
    if (miss_fraction) *miss_fraction = rep.miss_fraction;
    return PARAMPC_OK;
  } catch (...) {
    return from_exception();
  }
}

parampc_status parampc_condensed_dump_csv(const parampc_model* model, int horizon,
                                          const char* dir) {
  if (auto s = require_c(model && dir, "null argument")) return s;
  try {
    std::filesystem::create_directories(dir);
    const CondensedSystem cond = condense_model(model->model, horizon);
    const std::filesystem::path base(dir);
    csvio::save_matrix_csv(cond.s_x, (base / "s_x.csv").string());
    csvio::save_matrix_csv(cond.s_u, (base / "s_u.csv").string());
    csvio::save_matrix_csv(cond.s_d, (base / "s_d.csv").string());
    for (size_t p = 0; p < cond.delta_s_x.size(); ++p) {
      const std::string suffix = std::to_string(p + 1) + ".csv";
      csvio::save_matrix_csv(cond.delta_s_x[p], (base / ("delta_s_x_" + suffix)).string());
      csvio::save_matrix_csv(cond.delta_s_u[p], (base / ("delta_s_u_" + suffix)).string());
      csvio::save_matrix_csv(cond.delta_s_d[p], (base / ("delta_s_d_" + suffix)).string());
    }
    return PARAMPC_OK;
  } catch (const std::exception& e) {
    return fail(PARAMPC_ERR_IO, e.what());
  }
}

}  // extern "C"
