#ifndef BSDIB_H
#define BSDIB_H

/* Generated by cbindgen from the bsdib-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Mirrors the CLI exit codes.
 */
typedef enum BsdibStatus {
  BSDIB_STATUS_OK = 0,
  /**
   * Unexpected internal failure (including a caught panic).
   */
  BSDIB_STATUS_INTERNAL = 1,
  /**
   * Invalid configuration, parameters, or arguments.
   */
  BSDIB_STATUS_CONFIG = 2,
  /**
   * The simulation left the admissible range and was aborted.
   */
  BSDIB_STATUS_DIVERGED = 3,
  /**
   * File could not be read or written.
   */
  BSDIB_STATUS_IO = 4,
} BsdibStatus;

/**
 * A polyhedral mesh handle.
 */
typedef struct BsdibMesh BsdibMesh;

/**
 * Result summary of a finished run; the heavyweight output lives in the
 * run directory.
 */
typedef struct BsdibRunSummary BsdibRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bsdib_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bsdib_version(void);

/**
 * Builds the bottom-graded mesh of `[0,L]^3`: `fine_layers` layers of
 * `nx * nx` cubes, then `coarse_levels` coarsening levels.
 */
enum BsdibStatus bsdib_mesh_build_graded(double domain_edge,
                                         uint32_t nx,
                                         uint32_t fine_layers,
                                         uint32_t coarse_levels,
                                         struct BsdibMesh **out);

/**
 * Builds the uniform mesh of `[0,L]^3` with `nx` cubes per side.
 */
enum BsdibStatus bsdib_mesh_build_uniform(double domain_edge, uint32_t nx, struct BsdibMesh **out);

/**
 * Reads a mesh from its binary file format.
 *
 * # Safety
 * `path` must be null or a valid NUL-terminated string.
 */
enum BsdibStatus bsdib_mesh_load(const char *path, struct BsdibMesh **out);

/**
 * Writes a mesh in its binary file format.
 *
 * # Safety
 * `mesh` must be a live handle; `path` must be null or a valid
 * NUL-terminated string.
 */
enum BsdibStatus bsdib_mesh_save(const struct BsdibMesh *mesh, const char *path);

/**
 * Entity counts of a mesh. Null out-pointers are skipped.
 *
 * # Safety
 * `mesh` must be a live handle.
 */
enum BsdibStatus bsdib_mesh_counts(const struct BsdibMesh *mesh,
                                   size_t *out_vertices,
                                   size_t *out_faces,
                                   size_t *out_cells,
                                   size_t *out_surface_vertices);

/**
 * Frees a mesh handle.
 *
 * # Safety
 * `mesh` must be null or a handle not freed before.
 */
void bsdib_mesh_free(struct BsdibMesh *mesh);

/**
 * Runs a simulation from a config file into `out_dir`, like the CLI `run`
 * subcommand. `mode` is `"3d"` or `"2d"`. When `out_summary` is non-null
 * it receives a summary handle on success.
 *
 * # Safety
 * String arguments must be null or valid NUL-terminated strings.
 */
enum BsdibStatus bsdib_run(const char *config_path,
                           const char *mode,
                           const char *out_dir,
                           struct BsdibRunSummary **out_summary);

/**
 * Number of time steps the run took.
 *
 * # Safety
 * `summary` must be a live handle.
 */
size_t bsdib_run_summary_n_steps(const struct BsdibRunSummary *summary);

/**
 * Last per-step increment of the surface field `eta`.
 *
 * # Safety
 * `summary` must be a live handle.
 */
double bsdib_run_summary_final_increment(const struct BsdibRunSummary *summary);

/**
 * Number of surface nodes (length of the field arrays).
 *
 * # Safety
 * `summary` must be a live handle.
 */
size_t bsdib_run_summary_surface_len(const struct BsdibRunSummary *summary);

/**
 * Final surface field `eta`, one value per surface node. Valid until the
 * summary is freed.
 *
 * # Safety
 * `summary` must be a live handle.
 */
const double *bsdib_run_summary_eta(const struct BsdibRunSummary *summary);

/**
 * Final surface field `theta`, one value per surface node. Valid until the
 * summary is freed.
 *
 * # Safety
 * `summary` must be a live handle.
 */
const double *bsdib_run_summary_theta(const struct BsdibRunSummary *summary);

/**
 * Frees a run summary handle.
 *
 * # Safety
 * `summary` must be null or a handle not freed before.
 */
void bsdib_run_summary_free(struct BsdibRunSummary *summary);

/**
 * Linear stability of the spatially homogeneous equilibrium at bifurcation
 * point `(B, C)` with the standard fixed constants and `gamma = 0`.
 * Writes 1 into `out_stable` when all eigenvalues have negative real part,
 * and the largest real part into `out_max_real_part` (null skips either).
 */
enum BsdibStatus bsdib_stability_check(double b_coef,
                                       double c_coef,
                                       int32_t *out_stable,
                                       double *out_max_real_part);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSDIB_H */
