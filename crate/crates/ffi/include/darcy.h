#ifndef DARCY_H
#define DARCY_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum DarcyStatus {
  DARCY_STATUS_OK = 0,
  DARCY_STATUS_NULL_POINTER = 1,
  DARCY_STATUS_INVALID_ARGUMENT = 2,
  DARCY_STATUS_UNKNOWN_NAME = 3,
  DARCY_STATUS_MESH_ERROR = 4,
  DARCY_STATUS_INTERFACE_ERROR = 5,
  DARCY_STATUS_SOLVER_FAILURE = 6,
  DARCY_STATUS_NO_EXACT_SOLUTION = 7,
  DARCY_STATUS_IO_ERROR = 8,
  DARCY_STATUS_BUFFER_TOO_SMALL = 9,
  DARCY_STATUS_PANIC = 10,
} DarcyStatus;

/**
 * Opaque convergence report.
 */
typedef struct DarcyReport DarcyReport;

/**
 * Opaque solution of one run.
 */
typedef struct DarcySolution DarcySolution;

/**
 * Method parameters. Obtain defaults from [`darcy_options_default`].
 */
typedef struct DarcyOptions {
  double delta1;
  double delta2;
  double gpp_delta;
  double gpp_alpha;
  uint32_t macro_x;
  uint32_t macro_y;
} DarcyOptions;

/**
 * Errors against the exact solution on one mesh.
 */
typedef struct DarcyErrors {
  uint32_t nx;
  uint32_t ny;
  double h;
  double l2_p;
  double h1_p;
  double l2_u;
  double l2_div;
  double grad_sc;
} DarcyErrors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *darcy_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *darcy_last_error(void);

struct DarcyOptions darcy_options_default(void);

/**
 * Solves a built-in problem. `opts` may be null for defaults. On success
 * `*out` receives a handle to release with [`darcy_solution_free`].
 *
 * # Safety
 * `problem` and `method` must be NUL-terminated strings, `opts` null or
 * valid, `out` a valid pointer.
 */
enum DarcyStatus darcy_run(const char *problem,
                           const char *method,
                           uint32_t degree_order,
                           uint32_t nx,
                           uint32_t ny,
                           const struct DarcyOptions *opts,
                           struct DarcySolution **out);

/**
 * # Safety
 * `solution` must come from [`darcy_run`] and not be freed twice. Null is ignored.
 */
void darcy_solution_free(struct DarcySolution *solution);

/**
 * Node and element counts of the solution mesh.
 *
 * # Safety
 * `solution` must be a live handle; `nodes` and `elements` valid pointers.
 */
enum DarcyStatus darcy_solution_counts(const struct DarcySolution *solution,
                                       size_t *nodes,
                                       size_t *elements);

/**
 * Copies the nodal potential into `buffer` of `len` doubles.
 *
 * # Safety
 * `solution` must be a live handle; `buffer` valid for `len` writes.
 */
enum DarcyStatus darcy_solution_potential(const struct DarcySolution *solution,
                                          double *buffer,
                                          size_t len);

/**
 * Velocity of `element` at reference point `(xi, eta)` in `[-1,1]^2`,
 * written to `out[0..2]`.
 *
 * # Safety
 * `solution` must be a live handle; `out` valid for two writes.
 */
enum DarcyStatus darcy_solution_velocity_at(const struct DarcySolution *solution,
                                            size_t element,
                                            double xi,
                                            double eta,
                                            double *out);

/**
 * Errors against the exact solution, when the problem has one.
 *
 * # Safety
 * `solution` must be a live handle; `out` a valid pointer.
 */
enum DarcyStatus darcy_solution_errors(const struct DarcySolution *solution,
                                       struct DarcyErrors *out);

/**
 * Writes the mesh, potential and velocity as legacy ASCII VTK.
 *
 * # Safety
 * `solution` must be a live handle; `path` a NUL-terminated string.
 */
enum DarcyStatus darcy_solution_write_vtk(const struct DarcySolution *solution, const char *path);

/**
 * Refinement study over `count` square meshes `meshes[i] x meshes[i]`.
 *
 * # Safety
 * Strings NUL-terminated, `meshes` valid for `count` reads, `opts` null
 * or valid, `out` a valid pointer.
 */
enum DarcyStatus darcy_converge(const char *problem,
                                const char *method,
                                uint32_t degree_order,
                                const uint32_t *meshes,
                                size_t count,
                                const struct DarcyOptions *opts,
                                struct DarcyReport **out);

/**
 * # Safety
 * `report` must come from [`darcy_converge`] and not be freed twice. Null is ignored.
 */
void darcy_report_free(struct DarcyReport *report);

/**
 * Number of meshes in the report, 0 for null.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t darcy_report_len(const struct DarcyReport *report);

/**
 * Row `index`, coarsest mesh first.
 *
 * # Safety
 * `report` must be a live handle; `out` a valid pointer.
 */
enum DarcyStatus darcy_report_row(const struct DarcyReport *report,
                                  size_t index,
                                  struct DarcyErrors *out);

/**
 * Least-squares rate over the finest three meshes of one error column
 * (`l2_p`, `h1_p`, `l2_u`, `l2_div` or `grad_sc`).
 *
 * # Safety
 * `report` must be a live handle; `column` NUL-terminated; `out` valid.
 */
enum DarcyStatus darcy_report_ls_rate(const struct DarcyReport *report,
                                      const char *column,
                                      double *out);

/**
 * Writes the report as CSV.
 *
 * # Safety
 * `report` must be a live handle; `path` NUL-terminated.
 */
enum DarcyStatus darcy_report_write_csv(const struct DarcyReport *report, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DARCY_H */
