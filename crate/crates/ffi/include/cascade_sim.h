#ifndef CASCADE_SIM_H
#define CASCADE_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CascadeStatus {
  CASCADE_STATUS_OK = 0,
  CASCADE_STATUS_NULL_POINTER = 1,
  CASCADE_STATUS_INVALID_CONFIG = 2,
  CASCADE_STATUS_IO = 3,
  CASCADE_STATUS_TOO_MANY_DISCARDED = 4,
  CASCADE_STATUS_OBSERVABLE = 5,
  CASCADE_STATUS_INVALID_ARGUMENT = 6,
  CASCADE_STATUS_BUFFER_TOO_SMALL = 7,
  CASCADE_STATUS_PANIC = 8,
} CascadeStatus;

// Run configuration.
typedef struct CascadeConfig CascadeConfig;

// Finished ensemble statistics.
typedef struct CascadeEnsemble CascadeEnsemble;

// Exponential fit of the correlation section.
typedef struct CascadeFit {
  double t_f_ns;
  double ci_low_ns;
  double ci_high_ns;
  double t_m_ns;
  size_t points;
  // Nonzero when a non-positive value cut the window short.
  uint8_t window_shrunk;
} CascadeFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or null. Valid until
// the next failing call on the same thread.
const char *cascade_last_error(void);

// Library version as a static NUL-terminated string.
const char *cascade_version(void);

// Parses a TOML configuration.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum CascadeStatus cascade_config_from_toml(const char *toml, struct CascadeConfig **out);

// Reads a TOML configuration file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CascadeStatus cascade_config_from_file(const char *path, struct CascadeConfig **out);

// The rubidium operating point at `density_cm3` on a 101 × 42 grid over
// 140 ns.
//
// # Safety
// `out` must be a valid pointer.
enum CascadeStatus cascade_config_operating_point(double density_cm3, struct CascadeConfig **out);

// Replaces the grid resolution and window.
//
// # Safety
// `config` must be a live handle.
enum CascadeStatus cascade_config_set_grid(struct CascadeConfig *config,
                                           size_t time_points,
                                           size_t space_points,
                                           double total_time_ns);

// Atomic density of the configuration in cm⁻³.
//
// # Safety
// `config` must be a live handle or null.
double cascade_config_density(const struct CascadeConfig *config);

// # Safety
// `config` must be null or a handle not yet freed.
void cascade_config_free(struct CascadeConfig *config);

// Runs `trajectories` trajectories in memory on `workers` threads.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum CascadeStatus cascade_ensemble_run(const struct CascadeConfig *config,
                                        uint64_t trajectories,
                                        uint64_t seed,
                                        uint32_t workers,
                                        struct CascadeEnsemble **out);

// # Safety
// `ensemble` must be null or a handle not yet freed.
void cascade_ensemble_free(struct CascadeEnsemble *ensemble);

// Number of time samples in every series of the ensemble.
//
// # Safety
// `ensemble` must be a live handle or null (returns 0).
size_t cascade_ensemble_time_points(const struct CascadeEnsemble *ensemble);

// Completed and discarded trajectory counts.
//
// # Safety
// All pointers must be valid.
enum CascadeStatus cascade_ensemble_counts(const struct CascadeEnsemble *ensemble,
                                           uint64_t *completed,
                                           uint64_t *discarded);

// Copies the mean intensities (units of E_c²) into five caller arrays of
// length `len`, which must be at least [`cascade_ensemble_time_points`].
//
// # Safety
// Each array must hold `len` doubles.
enum CascadeStatus cascade_ensemble_intensities(const struct CascadeEnsemble *ensemble,
                                                double *time_ns,
                                                double *signal_re,
                                                double *signal_im,
                                                double *idler_re,
                                                double *idler_im,
                                                size_t len);

// Fits `e^{-τ/T_f}` to the correlation section from its peak down to
// `end_fraction` of the peak.
//
// # Safety
// `ensemble` must be a live handle and `out` a valid pointer.
enum CascadeStatus cascade_ensemble_fit(const struct CascadeEnsemble *ensemble,
                                        double end_fraction,
                                        struct CascadeFit *out);

// Runs a checkpointed ensemble and writes all artifacts into `out_dir`.
//
// # Safety
// `config` must be a live handle and `out_dir` a NUL-terminated string.
enum CascadeStatus cascade_simulate_to_dir(const struct CascadeConfig *config,
                                           uint64_t trajectories,
                                           uint64_t seed,
                                           uint32_t workers,
                                           uint64_t checkpoint_every,
                                           const char *out_dir);

// Dicke reference time `γ03⁻¹ / (Nμ + 1)` in ns.
//
// # Safety
// `out_ns` must be a valid pointer.
enum CascadeStatus cascade_dicke_reference(double gamma03_per_s, double n_mu, double *out_ns);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASCADE_SIM_H */
