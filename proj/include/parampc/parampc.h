/* parampc - parameter-dependent linear MPC toolkit.
 *
 * C API over the C++ core: opaque handles, integer status codes, and a
 * per-thread error message. Every object returned through an out-pointer is
 * owned by the caller and released with the matching *_free function.
 * Handles are immutable after creation except parampc_controller, which
 * carries per-run solver state; use one controller per concurrent run.
 */
#ifndef PARAMPC_H
#define PARAMPC_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum parampc_status {
  PARAMPC_OK = 0,
  PARAMPC_ERR_INVALID_ARGUMENT = 1,
  PARAMPC_ERR_INFEASIBLE = 2,
  PARAMPC_ERR_MAX_ITERATIONS = 3,
  PARAMPC_ERR_NUMERICAL = 4,
  PARAMPC_ERR_IO = 5,
  PARAMPC_ERR_FAILURE = 6
} parampc_status;

typedef enum parampc_method {
  PARAMPC_METHOD_EXACT = 0,
  PARAMPC_METHOD_MCCORMICK = 1,      /* envelope-convexified augmented QP */
  PARAMPC_METHOD_EXPANSION_INV = 2,  /* first-order expansion, approximate inverse */
  PARAMPC_METHOD_EXPANSION_NI = 3    /* first-order expansion, direct QP solve */
} parampc_method;

typedef struct parampc_model parampc_model;
typedef struct parampc_controller parampc_controller;
typedef struct parampc_reference parampc_reference;
typedef struct parampc_trace parampc_trace;
typedef struct parampc_law parampc_law;

/* Message describing the most recent failure on this thread. */
const char* parampc_last_error(void);
const char* parampc_version(void);

/* ---- models ---- */

typedef struct parampc_hex_params {
  double volume;          /* L */
  double heat_capacity;   /* kJ/(L.degC) */
  double flow_hot;        /* L/s */
  double flow_cold;       /* L/s */
  double transfer_coeff;  /* kJ/(s.m^2.degC) */
  double area_min;        /* m^2 */
  double area_max;        /* m^2 */
  double t_hot_lo, t_hot_hi;
  double t_cold_lo, t_cold_hi;
  double t_hot_in_lo, t_hot_in_hi;
  double t_cold_in;
  double ts;              /* s */
} parampc_hex_params;

typedef struct parampc_msd_params {
  double mass;            /* kg */
  double damping;         /* N.s/m */
  double stiffness_min;   /* N/m */
  double stiffness_max;   /* N/m */
  double input_gain;      /* N/V */
  double disp_lo, disp_hi;
  double vel_lo, vel_hi;
  double input_lo, input_hi;
  double ts;              /* s */
} parampc_msd_params;

void parampc_hex_params_default(parampc_hex_params* out);
void parampc_msd_params_default(parampc_msd_params* out);

parampc_status parampc_model_hex(const parampc_hex_params* params, parampc_model** out);
parampc_status parampc_model_msd(const parampc_msd_params* params, parampc_model** out);
parampc_status parampc_model_from_json(const char* json_text, parampc_model** out);
parampc_status parampc_model_to_json(const parampc_model* model, char** out_text);
void parampc_model_free(parampc_model* model);
void parampc_string_free(char* text);

parampc_status parampc_model_dims(const parampc_model* model, int* n, int* m, int* q, int* r,
                                  int* n_theta);
parampc_status parampc_model_ts(const parampc_model* model, double* ts);
/* a_out: n*n doubles, row-major */
parampc_status parampc_model_eval_a(const parampc_model* model, const double* theta,
                                    int n_theta, double* a_out);

/* ---- controllers ---- */

typedef struct parampc_controller_options {
  int horizon;              /* prediction horizon N >= 1 */
  double q_scale;           /* tracking-error weight */
  double r_scale;           /* input weight, > 0 */
  int weight_all_states;    /* nonzero: penalize all states, not just outputs */
  int enforce_state_bounds; /* nonzero: state box enforced over the horizon */
  int truncation_order;     /* 1 or 2, expansion methods only */
} parampc_controller_options;

void parampc_controller_options_default(parampc_controller_options* out);

/* theta: n_theta entries (expansion methods require n_theta == 1). */
parampc_status parampc_controller_create(const parampc_model* model, parampc_method method,
                                         const double* theta, int n_theta,
                                         const parampc_controller_options* options,
                                         parampc_controller** out);
void parampc_controller_free(parampc_controller* controller);
parampc_status parampc_controller_fallback_count(const parampc_controller* controller,
                                                 int* count);
/* Single step: x (n), ref_window (horizon*q, row-major), u_out (m). */
parampc_status parampc_controller_step(parampc_controller* controller, const double* x,
                                       const double* ref_window, double* u_out,
                                       int* used_fallback);

/* ---- references ---- */

/* Piecewise-constant output reference; start_times strictly increasing and
 * starting at 0; values has n_segments * q entries (row-major). */
parampc_status parampc_reference_create(const double* start_times, const double* values,
                                        int n_segments, int q, parampc_reference** out);
void parampc_reference_free(parampc_reference* ref);

/* ---- closed-loop simulation ---- */

parampc_status parampc_simulate(const parampc_model* model, parampc_controller* controller,
                                const double* theta, int n_theta, const double* x0,
                                const parampc_reference* ref, int steps, parampc_trace** out);
void parampc_trace_free(parampc_trace* trace);
parampc_status parampc_trace_length(const parampc_trace* trace, int* length);
/* Column counts follow the model: times (T), states (T*n), inputs (T*m),
 * outputs (T*q), references (T*q), fallback flags (T). Any pointer may be
 * NULL to skip that block. */
parampc_status parampc_trace_data(const parampc_trace* trace, double* times, double* states,
                                  double* inputs, double* outputs, double* references,
                                  int* fallback);
parampc_status parampc_trace_save_csv(const parampc_trace* trace, const char* path);
parampc_status parampc_trace_total_variation(const parampc_trace* trace, double* tv);

/* rmse/maxae over outputs vs the baseline; nrmse normalized by the baseline
 * output range (error when that range is zero). */
parampc_status parampc_metrics(const parampc_trace* trace, const parampc_trace* baseline,
                               double* rmse, double* maxae, double* nrmse);

/* ---- explicit region laws ---- */

/* method must be PARAMPC_METHOD_MCCORMICK (parameter = [x0; theta*x0; theta])
 * or PARAMPC_METHOD_EXPANSION_NI (fixed theta, parameter = x0).
 * ref_value: constant output reference the law is built for (q entries). */
parampc_status parampc_regions_build(const parampc_model* model, parampc_method method,
                                     const double* theta, int n_theta,
                                     const parampc_controller_options* options,
                                     const double* ref_value, int region_cap,
                                     unsigned long long seed, parampc_law** out);
void parampc_law_free(parampc_law* law);
parampc_status parampc_law_count(const parampc_law* law, int* count);
parampc_status parampc_law_complete(const parampc_law* law, int* complete);
parampc_status parampc_law_dim(const parampc_law* law, int* n_param, int* n_z);
parampc_status parampc_law_export_json(const parampc_law* law, const char* path);
/* region_index: -1 when no region contains xi (caller falls back to an
 * online solve); z_out has n_z entries. */
parampc_status parampc_law_point_locate(const parampc_law* law, const double* xi, int n_param,
                                        int* region_index, double* z_out);
parampc_status parampc_law_coverage(const parampc_law* law, int samples,
                                    unsigned long long seed, double* hit_fraction,
                                    double* infeasible_fraction, double* miss_fraction);

/* ---- debug dumps ---- */

/* Writes s_x.csv, s_u.csv, s_d.csv and delta_s_*.csv under dir. */
parampc_status parampc_condensed_dump_csv(const parampc_model* model, int horizon,
                                          const char* dir);

#ifdef __cplusplus
}
#endif

#endif /* PARAMPC_H */
