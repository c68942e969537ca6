#ifndef CONFLICT_GATE_H
#define CONFLICT_GATE_H

/* Generated by cbindgen from conflict-gate-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum CgStatus {
  CG_STATUS_OK = 0,
  CG_STATUS_NULL_POINTER = 1,
  CG_STATUS_INVALID_ARGUMENT = 2,
  CG_STATUS_NUMERICAL_ERROR = 3,
  CG_STATUS_IO_ERROR = 4,
  CG_STATUS_PARSE_ERROR = 5,
  CG_STATUS_CHECK_FAILED = 6,
  CG_STATUS_INTERNAL_ERROR = 7,
} CgStatus;

/**
 * Weighting strategy selector.
 */
typedef enum CgStrategy {
  CG_STRATEGY_FIXED = 0,
  CG_STRATEGY_LRA = 1,
  CG_STRATEGY_CGGS = 2,
} CgStrategy;

/**
 * Opaque training-configuration handle.
 */
typedef struct CgConfig CgConfig;

/**
 * Opaque dataset handle.
 */
typedef struct CgDataset CgDataset;

/**
 * Opaque training-trace handle.
 */
typedef struct CgTrace CgTrace;

/**
 * Opaque RK4 trajectory handle.
 */
typedef struct CgTrajectory CgTrajectory;

/**
 * Epidemiological rates; population in persons, rates in 1/day.
 */
typedef struct CgSeirParams {
  double population;
  double beta;
  double sigma;
  double gamma;
} CgSeirParams;

/**
 * One trajectory state in normalized fractions.
 */
typedef struct CgSeirState {
  double t;
  double s;
  double e;
  double i;
  double r;
} CgSeirState;

/**
 * One trace row; field meanings match the CSV columns.
 */
typedef struct CgTraceRecord {
  uint64_t step;
  double l_data;
  double l_ode;
  double l_logic;
  double lambda_hat;
  double s_cos;
  double norm_data;
  double norm_phy;
  double descent_inner;
  double d_norm;
} CgTraceRecord;

/**
 * Descent constants of the gate: the worst-case interference maximum, its
 * location, and c = 1 - m_kappa.
 */
typedef struct CgDescentConstants {
  double kappa;
  double m_kappa;
  double s_star;
  double c;
} CgDescentConstants;

/**
 * Numeric summary of the anti-parallel deadlock construction.
 */
typedef struct CgDeadlockSummary {
  double lambda_std;
  double fixed_update_ratio;
  double pareto_alpha;
  double pareto_residual_ratio;
  double cggs_direction_ratio;
  double cggs_deviation_ratio;
  bool pass;
} CgDeadlockSummary;

/**
 * Descent-check summary over a trace.
 */
typedef struct CgVerifySummary {
  size_t checked;
  size_t passed;
  double pass_rate;
  bool pass;
} CgVerifySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library, static storage.
 */
const char *cg_version(void);

/**
 * Message describing the last failure on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *cg_last_error_message(void);

/**
 * Integrates the ground-truth dynamics. On success writes a trajectory
 * handle to `out`.
 */
enum CgStatus cg_seir_simulate(struct CgSeirParams params,
                               struct CgSeirState init,
                               double t_end,
                               double dt,
                               struct CgTrajectory **out);

size_t cg_trajectory_len(const struct CgTrajectory *traj);

enum CgStatus cg_trajectory_state(const struct CgTrajectory *traj,
                                  size_t index,
                                  struct CgSeirState *out);

void cg_trajectory_free(struct CgTrajectory *traj);

/**
 * Samples noisy observations of the infected fraction from a trajectory.
 */
enum CgStatus cg_dataset_generate(const struct CgTrajectory *traj,
                                  size_t n_points,
                                  double noise_sigma,
                                  uint64_t seed,
                                  struct CgDataset **out);

size_t cg_dataset_len(const struct CgDataset *ds);

/**
 * Reads observation `index` as (t, i_obs).
 */
enum CgStatus cg_dataset_observation(const struct CgDataset *ds,
                                     size_t index,
                                     double *t_out,
                                     double *i_out);

/**
 * Writes the dataset as CSV (`t,i_obs` with a provenance comment line).
 */
enum CgStatus cg_dataset_save_csv(const struct CgDataset *ds, const char *path);

/**
 * Parses and validates a dataset CSV; times must be sorted and within
 * [0, t_horizon].
 */
enum CgStatus cg_dataset_load_csv(const char *path, double t_horizon, struct CgDataset **out);

void cg_dataset_free(struct CgDataset *ds);

/**
 * Fresh configuration with the library defaults (CGGS, Adam 1e-3,
 * 2000 steps, layers 1-32-32-4, 200 collocation points, 100-day horizon).
 */
struct CgConfig *cg_config_default(void);

void cg_config_free(struct CgConfig *cfg);

/**
 * Selects the weighting strategy; `lambda_phy` applies to `Fixed` only.
 */
enum CgStatus cg_config_set_strategy(struct CgConfig *cfg,
                                     enum CgStrategy strategy,
                                     double lambda_phy);

enum CgStatus cg_config_set_optimizer_gd(struct CgConfig *cfg, double eta);

enum CgStatus cg_config_set_optimizer_adam(struct CgConfig *cfg,
                                           double eta,
                                           double beta1,
                                           double beta2,
                                           double eps);

enum CgStatus cg_config_set_steps(struct CgConfig *cfg, size_t steps);

enum CgStatus cg_config_set_seed(struct CgConfig *cfg, uint64_t seed);

/**
 * Hidden/output widths of the network; must start with 1 and end with 4.
 */
enum CgStatus cg_config_set_layers(struct CgConfig *cfg, const uint32_t *widths, size_t len);

enum CgStatus cg_config_set_grid(struct CgConfig *cfg, size_t points, double t_horizon);

/**
 * EMA momentum, gate sharpness, regularizer, and the fixed logical weight.
 */
enum CgStatus cg_config_set_gate(struct CgConfig *cfg,
                                 double alpha,
                                 double kappa,
                                 double epsilon,
                                 double lambda_logic);

enum CgStatus cg_config_set_inverse_mode(struct CgConfig *cfg, bool enabled);

/**
 * Runs the configured training loop on the dataset. Deterministic under
 * (config, dataset).
 */
enum CgStatus cg_train(const struct CgConfig *cfg,
                       const struct CgDataset *dataset,
                       struct CgSeirParams seir,
                       struct CgTrace **out);

size_t cg_trace_len(const struct CgTrace *trace);

enum CgStatus cg_trace_record(const struct CgTrace *trace, size_t index, struct CgTraceRecord *out);

/**
 * Number of trained parameters (flat theta length).
 */
size_t cg_trace_theta_len(const struct CgTrace *trace);

/**
 * Copies the final flat parameter vector into `buf` (capacity `len`).
 */
enum CgStatus cg_trace_final_theta(const struct CgTrace *trace, double *buf, size_t len);

/**
 * Recovered (beta, sigma, gamma) of an inverse-mode run.
 */
enum CgStatus cg_trace_recovered_rates(const struct CgTrace *trace,
                                       double *beta,
                                       double *sigma,
                                       double *gamma);

/**
 * Writes the trace in the standard 10-column CSV layout.
 */
enum CgStatus cg_trace_save_csv(const struct CgTrace *trace, const char *path);

void cg_trace_free(struct CgTrace *trace);

enum CgStatus cg_compute_m_kappa(double kappa, struct CgDescentConstants *out);

/**
 * Builds g_data = -c * g_phy and reports how the fixed-weight and gated
 * updates behave. Returns `CheckFailed` when the construction's
 * expectations do not hold.
 */
enum CgStatus cg_deadlock_demo(double c,
                               double kappa,
                               size_t dim,
                               uint64_t seed,
                               struct CgDeadlockSummary *out);

/**
 * Replays the per-step sufficient-descent check on a trace at gate
 * sharpness `kappa`.
 */
enum CgStatus cg_verify_descent(const struct CgTrace *trace,
                                double kappa,
                                struct CgVerifySummary *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CONFLICT_GATE_H */
