#ifndef TWOSTREAM_H
#define TWOSTREAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  /*
   Invalid input: parse errors, violated invariants, bad arguments.
   */
  TS_STATUS_INVALID = 2,
  /*
   The computation failed (nonlinear or linear solver, extraction).
   */
  TS_STATUS_SOLVER_FAILURE = 3,
  TS_STATUS_IO = 4,
  /*
   Caller buffer too small.
   */
  TS_STATUS_BUFFER_TOO_SMALL = 5,
  TS_STATUS_PANIC = 6,
} TsStatus;

typedef enum TsMethod {
  /*
   Method named in the scenario.
   */
  TS_METHOD_SCENARIO = 0,
  TS_METHOD_NEWTON = 1,
  TS_METHOD_NASH_MOSER = 2,
} TsMethod;

typedef enum TsField {
  TS_FIELD_F = 0,
  TS_FIELD_G = 1,
  TS_FIELD_V1 = 2,
  TS_FIELD_V2 = 3,
  TS_FIELD_V3 = 4,
  TS_FIELD_P = 5,
} TsField;

/*
 Parsed and validated scenario.
 */
typedef struct TsScenario TsScenario;

/*
 A converged solve.
 */
typedef struct TsSolution TsSolution;

/*
 Health metrics of a solved state.
 */
typedef struct TsVerification {
  double max_v_sq;
  double euler_interior;
  double divergence_interior;
  double beltrami_interior;
  double rot_max;
  double wall_flux_min;
  double wall_flux_max;
} TsVerification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length in bytes.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t ts_last_error(char *buf, uintptr_t len);

/*
 Version string, static and NUL-terminated.
 */
const char *ts_version(void);

/*
 Parses a scenario file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TsStatus ts_scenario_from_file(const char *path, struct TsScenario **out);

/*
 Parses scenario TOML text. Relative dump paths resolve against the
 current directory.

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum TsStatus ts_scenario_from_str(const char *text, struct TsScenario **out);

/*
 # Safety
 `sc` must be null or a handle from `ts_scenario_from_*` not yet freed.
 */
void ts_scenario_free(struct TsScenario *sc);

/*
 Writes (Nx, Ny, Nz) into `dims`.

 # Safety
 `sc` must be a live handle and `dims` must point to 3 writable entries.
 */
enum TsStatus ts_scenario_grid(const struct TsScenario *sc, uintptr_t *dims);

/*
 Solves the scenario. On solver failure `*out` stays null and the status
 is `SolverFailure`.

 # Safety
 `sc` must be a live handle; `out` must be writable.
 */
enum TsStatus ts_solve(const struct TsScenario *sc, enum TsMethod method, struct TsSolution **out);

/*
 # Safety
 `sol` must be null or a handle from `ts_solve` not yet freed.
 */
void ts_solution_free(struct TsSolution *sol);

/*
 Number of samples of each field, Nx Ny Nz.

 # Safety
 `sol` must be a live handle or null (returns 0).
 */
uintptr_t ts_solution_len(const struct TsSolution *sol);

/*
 Outer iterations taken and final L^2 residual.

 # Safety
 `sol` must be a live handle; the outputs must be writable.
 */
enum TsStatus ts_solution_stats(const struct TsSolution *sol,
                                uintptr_t *iterations,
                                double *residual);

/*
 Copies one field (x slowest, z fastest) into `buf` of length `len`.

 # Safety
 `sol` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum TsStatus ts_solution_copy_field(const struct TsSolution *sol,
                                     enum TsField which,
                                     double *buf,
                                     uintptr_t len);

/*
 # Safety
 `sol` must be a live handle; `out` must be writable.
 */
enum TsStatus ts_solution_verify(const struct TsSolution *sol, struct TsVerification *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWOSTREAM_H */
