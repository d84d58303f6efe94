#ifndef ADAOS_H
#define ADAOS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdaosStatus {
  ADAOS_STATUS_OK = 0,
  ADAOS_STATUS_NULL_POINTER = 1,
  ADAOS_STATUS_INVALID_INPUT = 2,
  ADAOS_STATUS_INVALID_CONFIG = 3,
  ADAOS_STATUS_NUMERICAL = 4,
  ADAOS_STATUS_PANIC = 5,
} AdaosStatus;

/**
 * Opaque engine handle.
 */
typedef struct AdaosEngine AdaosEngine;

/**
 * Engine settings. Start from `adaos_engine_config_default`.
 */
typedef struct AdaosEngineConfig {
  /**
   * Glucose reference, mmol/L.
   */
  double reference;
  double max_score;
  double kp0;
  double ks0;
  /**
   * Nonzero keeps `k_s` at `ks0`.
   */
  uint8_t freeze_ks;
  double forgetting_factor;
  double eps_phi;
  double dither_amplitude;
  double initial_dose;
  double alpha;
  double beta1;
  double beta2;
  double eps;
} AdaosEngineConfig;

/**
 * One titration day as seen from C.
 */
typedef struct AdaosDayResult {
  uint64_t day;
  double dose;
  double dose_change;
  double k_p_hat;
  double k_s_hat;
  double k_p_applied;
  double k_s_applied;
  double cost_total;
  double cond_p;
} AdaosDayResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none failed.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *adaos_last_error_message(void);

struct AdaosEngineConfig adaos_engine_config_default(void);

/**
 * Creates an engine. On success `*out` owns a handle for
 * `adaos_engine_free`; on failure it is set to null.
 *
 * # Safety
 * `config` must be null or point to a valid config; `out` must be null or
 * writable.
 */
enum AdaosStatus adaos_engine_new(const struct AdaosEngineConfig *config, struct AdaosEngine **out);

/**
 * Feeds one day's SMBG value (mmol/L) and PHG score and writes the new dose.
 * Invalid measurements are rejected without touching the engine; after a
 * numerical failure its state is unspecified.
 *
 * # Safety
 * `engine` must come from `adaos_engine_new`; `out` must be null or writable.
 */
enum AdaosStatus adaos_engine_step(struct AdaosEngine *engine,
                                   double y_g,
                                   double y_s,
                                   struct AdaosDayResult *out);

/**
 * Current dose in units.
 *
 * # Safety
 * `engine` must come from `adaos_engine_new`; `out` must be null or writable.
 */
enum AdaosStatus adaos_engine_dose(const struct AdaosEngine *engine, double *out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must be null or come from `adaos_engine_new`, and must not be
 * used afterwards.
 */
void adaos_engine_free(struct AdaosEngine *engine);

/**
 * Dose change `k_p / (1 + k_s e_s) e_g` for one measurement pair.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum AdaosStatus adaos_control_law(double k_p,
                                   double k_s,
                                   double y_g,
                                   double y_s,
                                   double reference,
                                   double max_score,
                                   double *out);

double adaos_softmin(double x1, double x2, double a);

/**
 * SMBG error standard deviation at glucose `x_g` with the default meter.
 */
double adaos_smbg_sigma(double x_g);

double adaos_phg_sigmoid(double x, double rho, double d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADAOS_H */
