#ifndef TLR_ESC_H
#define TLR_ESC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum TlrStatus {
  TLR_STATUS_OK = 0,
  TLR_STATUS_NULL_POINTER = 1,
  TLR_STATUS_INVALID_PARAM = 2,
  TLR_STATUS_INPUT_DOMAIN = 3,
  TLR_STATUS_STRUCTURAL = 4,
  TLR_STATUS_ESTIMATION = 5,
  TLR_STATUS_IO = 6,
  TLR_STATUS_FORMAT = 7,
  TLR_STATUS_SCENARIO = 8,
  TLR_STATUS_INVALID_UTF8 = 9,
  TLR_STATUS_OUT_OF_RANGE = 10,
  TLR_STATUS_PANIC = 11,
} TlrStatus;

// Opaque detrending ESC controller.
typedef struct TlrDetrendEsc TlrDetrendEsc;

// Opaque surrogate reactor.
typedef struct TlrPlant TlrPlant;

// Opaque closed-loop run log.
typedef struct TlrRunLog TlrRunLog;

// Step output of the detrending ESC.
typedef struct TlrDetrendOutput {
  double q_cmd;
  double q_raw;
  double q_ff;
  double theta_hat;
  double zeta_hat;
  double residual;
  bool saturated;
  bool fault;
} TlrDetrendOutput;

// One log row. Controller internals the controller does not have are NaN.
typedef struct TlrLogRow {
  double t;
  double irradiance;
  double ph;
  double q_cmd;
  double q_applied;
  double theta_hat;
  double zeta_hat;
  double trend_or_eta;
  double q_ff;
  bool active;
  bool fault;
} TlrLogRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *tlr_last_error_message(void);

// Static, NUL-terminated library version.
const char *tlr_version(void);

// One on-off hysteresis step. Writes the new injecting flag and the flow.
// A non-finite `ph` holds the previous flag and reports `TLR_STATUS_INPUT_DOMAIN`
// after still writing the held outputs.
//
// # Safety
// `out_injecting` and `out_q` must be valid for writes.
enum TlrStatus tlr_onoff_step(bool injecting,
                              double ph,
                              double ph_sp,
                              double band,
                              double q_on,
                              bool *out_injecting,
                              double *out_q);

// One irradiance activation step.
//
// # Safety
// `out_active` must be valid for writes.
enum TlrStatus tlr_activation_step(bool active,
                                   double irradiance,
                                   double i_on,
                                   double i_off,
                                   bool *out_active);

// Create a controller from JSON parameters (null or `"{}"` for defaults).
// The JSON object uses the same fields as the scenario `controller` entry
// without its `type` tag.
//
// # Safety
// `params_json` must be null or a NUL-terminated string; `out` must be
// valid for writes.
enum TlrStatus tlr_detrend_new(const char *params_json, struct TlrDetrendEsc **out);

// # Safety
// `handle` must be null or come from [`tlr_detrend_new`] and not be used afterwards.
void tlr_detrend_free(struct TlrDetrendEsc *handle);

// Advance one sample with the measured pH and irradiance.
//
// # Safety
// `handle` must be a live controller; `out` must be valid for writes.
enum TlrStatus tlr_detrend_step(struct TlrDetrendEsc *handle,
                                double ph,
                                double irradiance,
                                struct TlrDetrendOutput *out);

// Reset for an inactive-to-active transition.
//
// # Safety
// `handle` must be a live controller.
enum TlrStatus tlr_detrend_activation_reset(struct TlrDetrendEsc *handle);

// Advance the controller clock while inactive.
//
// # Safety
// `handle` must be a live controller.
enum TlrStatus tlr_detrend_idle(struct TlrDetrendEsc *handle);

// Create a plant from JSON parameters (null for defaults) and an initial state.
//
// # Safety
// `params_json` must be null or a NUL-terminated string; `out` must be
// valid for writes.
enum TlrStatus tlr_plant_new(const char *params_json,
                             double ph,
                             double biomass,
                             struct TlrPlant **out);

// # Safety
// `handle` must be null or come from [`tlr_plant_new`] and not be used afterwards.
void tlr_plant_free(struct TlrPlant *handle);

// Advance the plant by `dt` seconds under constant flow and irradiance.
//
// # Safety
// `handle` must be a live plant.
enum TlrStatus tlr_plant_step(struct TlrPlant *handle, double q_co2, double irradiance, double dt);

// Noisy sensor reading of the current pH.
//
// # Safety
// `handle` must be a live plant; `out_ph` must be valid for writes.
enum TlrStatus tlr_plant_measure(struct TlrPlant *handle, double *out_ph);

// Noise-free state: pH, biomass [g/L] and time [s].
//
// # Safety
// `handle` must be a live plant; the out-pointers must be valid for writes.
enum TlrStatus tlr_plant_state(const struct TlrPlant *handle,
                               double *out_ph,
                               double *out_biomass,
                               double *out_t);

// Remove `fraction` of the culture and refill with fresh medium.
//
// # Safety
// `handle` must be a live plant.
enum TlrStatus tlr_plant_dilute(struct TlrPlant *handle, double fraction);

// Start (`failed = true`) or end an actuator communication failure.
//
// # Safety
// `handle` must be a live plant.
enum TlrStatus tlr_plant_set_comms_failed(struct TlrPlant *handle, bool failed);

// Run a scenario given as JSON text. Trace irradiance files resolve
// relative to the working directory.
//
// # Safety
// `scenario_json` must be a NUL-terminated string; `out` must be valid for writes.
enum TlrStatus tlr_run_scenario_json(const char *scenario_json, struct TlrRunLog **out);

// Run a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
enum TlrStatus tlr_run_scenario_file(const char *path, struct TlrRunLog **out);

// # Safety
// `handle` must be null or come from a run function and not be used afterwards.
void tlr_runlog_free(struct TlrRunLog *handle);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `handle` must be null or a live run log.
size_t tlr_runlog_len(const struct TlrRunLog *handle);

// Copy row `index` into `out`.
//
// # Safety
// `handle` must be a live run log; `out` must be valid for writes.
enum TlrStatus tlr_runlog_row(const struct TlrRunLog *handle, size_t index, struct TlrLogRow *out);

// Write the log as CSV, in the same format as the command-line tool.
//
// # Safety
// `handle` must be a live run log; `path` must be a NUL-terminated string.
enum TlrStatus tlr_runlog_write_csv(const struct TlrRunLog *handle, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TLR_ESC_H */
