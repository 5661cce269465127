#ifndef BOLTROM_H
#define BOLTROM_H

/* Generated by cbindgen from the boltrom-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum BoltromStatus {
  BOLTROM_STATUS_OK = 0,
  BOLTROM_STATUS_NULL_ARGUMENT = 1,
  BOLTROM_STATUS_INVALID_ARGUMENT = 2,
  BOLTROM_STATUS_PARSE_ERROR = 3,
  BOLTROM_STATUS_SOLVER_FAILURE = 4,
  BOLTROM_STATUS_IDENTIFY_FAILURE = 5,
  BOLTROM_STATUS_INTERNAL_ERROR = 6,
} BoltromStatus;

// Trajectory columns for `boltrom_trajectory_column`.
typedef enum BoltromColumn {
  BOLTROM_COLUMN_TIME = 0,
  BOLTROM_COLUMN_DISPLACEMENT_LO = 1,
  BOLTROM_COLUMN_VELOCITY_LO = 2,
  BOLTROM_COLUMN_DISPLACEMENT_SO = 3,
  BOLTROM_COLUMN_VELOCITY_SO = 4,
  BOLTROM_COLUMN_TENSION = 5,
} BoltromColumn;

// Opaque system model handle.
typedef struct BoltromModel BoltromModel;

// Opaque simulation trajectory handle.
typedef struct BoltromTrajectory BoltromTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *boltrom_version(void);

// Message describing the most recent failure on this thread. The pointer
// stays valid until the next failing call on the same thread.
const char *boltrom_last_error_message(void);

// Build a model from configuration TOML (the same format the command-line
// tool reads and writes). The loosening law is used when the config carries
// one; otherwise the tension is frozen.
//
// # Safety
// `toml_text` must be a valid NUL-terminated string and `out_model` a valid
// pointer; the returned handle must be freed with `boltrom_model_free`.
enum BoltromStatus boltrom_model_from_toml(const char *toml_text, struct BoltromModel **out_model);

// Build a model directly from its parameters. `gamma_d`, `gamma_i`, `rho`
// are ignored unless `with_loosening` is true.
//
// # Safety
// `out_model` must be a valid pointer; free the handle with
// `boltrom_model_free`.
enum BoltromStatus boltrom_model_new(double mass_lo,
                                     double stiffness_lo,
                                     double damping_lo,
                                     double mass_so,
                                     double stiffness_so,
                                     double damping_so,
                                     double k_i,
                                     double alpha,
                                     double beta,
                                     double c_d,
                                     double c_i,
                                     double eta,
                                     bool with_loosening,
                                     double gamma_d,
                                     double gamma_i,
                                     double rho,
                                     struct BoltromModel **out_model);

// Release a model handle. NULL is ignored.
//
// # Safety
// `model` must have been returned by a model constructor and not yet freed.
void boltrom_model_free(struct BoltromModel *model);

// Coupling stiffness k_c(T) in N/m; NaN for a NULL model.
//
// # Safety
// `model` must be a live handle or NULL.
double boltrom_model_stiffness(const struct BoltromModel *model, double tension);

// Coupling damping c_c(T) in Ns/m; NaN for a NULL model.
//
// # Safety
// `model` must be a live handle or NULL.
double boltrom_model_damping(const struct BoltromModel *model, double tension);

// Loosening-rate coefficient gamma(T); zero when the model's tension is
// frozen, the constant when one is set, NaN for a NULL model.
//
// # Safety
// `model` must be a live handle or NULL.
double boltrom_model_loosening_rate(const struct BoltromModel *model, double tension);

// Simulate the coupled system from zero motion and initial tension
// `preload` over `[t_start, t_end]` under a sampled force record
// (`force_len` zero means no forcing), sampling the output every
// `output_dt` seconds.
//
// # Safety
// `force_times`/`force_values` must point to `force_len` doubles (or be
// NULL when `force_len` is zero); `out_trajectory` must be valid and the
// returned handle freed with `boltrom_trajectory_free`.
enum BoltromStatus boltrom_simulate(const struct BoltromModel *model,
                                    const double *force_times,
                                    const double *force_values,
                                    size_t force_len,
                                    double preload,
                                    double t_start,
                                    double t_end,
                                    double output_dt,
                                    double rel_tol,
                                    double abs_tol,
                                    struct BoltromTrajectory **out_trajectory);

// Number of samples in a trajectory; zero for NULL.
//
// # Safety
// `trajectory` must be a live handle or NULL.
size_t boltrom_trajectory_len(const struct BoltromTrajectory *trajectory);

// Copy one trajectory column into `out` (up to `capacity` values); the
// number of copied values is written to `out_written`.
//
// # Safety
// `out` must point to at least `capacity` writable doubles; `out_written`
// must be valid.
enum BoltromStatus boltrom_trajectory_column(const struct BoltromTrajectory *trajectory,
                                             enum BoltromColumn column,
                                             double *out,
                                             size_t capacity,
                                             size_t *out_written);

// Initial-window mean, final-window mean, and change of the trajectory
// tension (negative change = loosening).
//
// # Safety
// `trajectory` must be a live handle; the out-pointers must be valid.
enum BoltromStatus boltrom_trajectory_tension_change(const struct BoltromTrajectory *trajectory,
                                                     double initial_start,
                                                     double initial_end,
                                                     double final_start,
                                                     double final_end,
                                                     double *out_initial,
                                                     double *out_final,
                                                     double *out_delta);

// Release a trajectory handle. NULL is ignored.
//
// # Safety
// `trajectory` must have been returned by `boltrom_simulate` and not yet
// freed.
void boltrom_trajectory_free(struct BoltromTrajectory *trajectory);

// Identify the constant loosening rate that reproduces a measured final
// tension: pattern search over gamma in `[gamma_lower, gamma_upper]` from
// `gamma_initial`, simulating the model under the given force record with
// initial tension `t0_tension` and matching the final-window tension mean
// to `target_final_tension`.
//
// # Safety
// Array and out-pointer requirements as in `boltrom_simulate`.
enum BoltromStatus boltrom_identify_gamma(const struct BoltromModel *model,
                                          const double *force_times,
                                          const double *force_values,
                                          size_t force_len,
                                          double t0_tension,
                                          double target_final_tension,
                                          double gamma_initial,
                                          double gamma_lower,
                                          double gamma_upper,
                                          double rel_tol,
                                          double abs_tol,
                                          double *out_gamma,
                                          double *out_objective,
                                          uint64_t *out_evaluations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOLTROM_H */
