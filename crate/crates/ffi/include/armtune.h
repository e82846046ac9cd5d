#ifndef ARMTUNE_H
#define ARMTUNE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Number of doubles per trajectory row: `t, q1, q2, qd1, qd2, e1, e2, tau1, tau2`.
#define ARMTUNE_TRAJECTORY_COLUMNS 9

typedef enum ArmtuneStatus {
  ARMTUNE_STATUS_OK = 0,
  ARMTUNE_STATUS_NULL_POINTER = 1,
  ARMTUNE_STATUS_INVALID_ARGUMENT = 2,
  ARMTUNE_STATUS_CONFIG = 3,
  ARMTUNE_STATUS_IO = 4,
  ARMTUNE_STATUS_SIMULATION = 5,
  ARMTUNE_STATUS_BUFFER_TOO_SMALL = 6,
  ARMTUNE_STATUS_PANIC = 7,
} ArmtuneStatus;

// Opaque experiment configuration.
typedef struct ArmtuneExperiment ArmtuneExperiment;

// Opaque result of one closed-loop simulation.
typedef struct ArmtuneSimulation ArmtuneSimulation;

// Per-joint step-response metrics. Unsettled joints report NaN settling time.
typedef struct ArmtuneMetrics {
  double overshoot_pct[2];
  double settling_time[2];
  double steady_state_error[2];
} ArmtuneMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *armtune_last_error(void);

// New experiment with the default two-link configuration. Free with
// [`armtune_experiment_free`].
struct ArmtuneExperiment *armtune_experiment_new_default(void);

// Loads a TOML experiment configuration.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ArmtuneStatus armtune_experiment_load(const char *path, struct ArmtuneExperiment **out);

// # Safety
// `exp` must be NULL or a handle from this library not yet freed.
void armtune_experiment_free(struct ArmtuneExperiment *exp);

// # Safety
// `exp` must be a live experiment handle.
enum ArmtuneStatus armtune_experiment_set_seed(struct ArmtuneExperiment *exp, uint64_t seed);

// # Safety
// `exp` must be a live experiment handle.
enum ArmtuneStatus armtune_experiment_set_max_generations(struct ArmtuneExperiment *exp,
                                                          uintptr_t max_generations);

// Sets the integration step and horizon (seconds).
//
// # Safety
// `exp` must be a live experiment handle.
enum ArmtuneStatus armtune_experiment_set_horizon(struct ArmtuneExperiment *exp,
                                                  double dt,
                                                  double t_final);

// Copies the configured baseline gains into `out_gains[0..6]`.
//
// # Safety
// `exp` must be a live handle; `out_gains` must hold six doubles.
enum ArmtuneStatus armtune_experiment_baseline_gains(const struct ArmtuneExperiment *exp,
                                                     double *out_gains);

// Joint accelerations of the experiment's arm for the given state and torque.
//
// # Safety
// `exp` must be a live handle; `q`, `qdot`, `tau` must each point to two
// doubles and `out_acc` must hold two doubles.
enum ArmtuneStatus armtune_forward_dynamics(const struct ArmtuneExperiment *exp,
                                            const double *q,
                                            const double *qdot,
                                            const double *tau,
                                            double *out_acc);

// Runs one closed-loop simulation. A diverged run still succeeds; query it
// with [`armtune_simulation_diverged`].
//
// # Safety
// `exp` must be a live handle, `gains` must point to six doubles and `out`
// must be writable.
enum ArmtuneStatus armtune_simulate(const struct ArmtuneExperiment *exp,
                                    const double *gains,
                                    struct ArmtuneSimulation **out);

// # Safety
// `sim` must be NULL or a handle from this library not yet freed.
void armtune_simulation_free(struct ArmtuneSimulation *sim);

// Integral of squared error (the divergence penalty for diverged runs);
// NaN for a NULL handle.
//
// # Safety
// `sim` must be NULL or a live simulation handle.
double armtune_simulation_ise(const struct ArmtuneSimulation *sim);

// # Safety
// `sim` must be NULL or a live simulation handle.
bool armtune_simulation_diverged(const struct ArmtuneSimulation *sim);

// # Safety
// `sim` must be NULL or a live simulation handle.
uintptr_t armtune_simulation_sample_count(const struct ArmtuneSimulation *sim);

// Copies the recorded trajectory as row-major
// `sample_count × ARMTUNE_TRAJECTORY_COLUMNS` doubles into `buf`.
//
// # Safety
// `sim` must be a live handle and `buf` must hold `len` doubles.
enum ArmtuneStatus armtune_simulation_samples(const struct ArmtuneSimulation *sim,
                                              double *buf,
                                              uintptr_t len);

// Step-response metrics; fails with `SIMULATION` for a diverged run.
//
// # Safety
// `sim` must be a live handle and `out` writable.
enum ArmtuneStatus armtune_simulation_metrics(const struct ArmtuneSimulation *sim,
                                              struct ArmtuneMetrics *out);

// Runs the genetic algorithm. Writes the best gains (six doubles), its
// fitness and the number of generations run. `out_fitness` and
// `out_generations` may be NULL.
//
// # Safety
// `exp` must be a live handle and `out_gains` must hold six doubles.
enum ArmtuneStatus armtune_tune(const struct ArmtuneExperiment *exp,
                                double *out_gains,
                                double *out_fitness,
                                uintptr_t *out_generations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARMTUNE_H */
