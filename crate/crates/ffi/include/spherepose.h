#ifndef SPHEREPOSE_H
#define SPHEREPOSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum SpStatus {
  SP_STATUS_OK = 0,
  // A required pointer argument was null.
  SP_STATUS_NULL_POINTER = 1,
  // An argument or configuration failed validation.
  SP_STATUS_INVALID_ARGUMENT = 2,
  // Reading or writing a file failed.
  SP_STATUS_IO = 3,
  // A file had the wrong magic, version or layout.
  SP_STATUS_FORMAT = 4,
  // The output buffer is too small; the required length was stored.
  SP_STATUS_BUFFER_TOO_SMALL = 5,
  // Any other runtime failure.
  SP_STATUS_RUNTIME = 6,
  // The library panicked; this is a bug.
  SP_STATUS_PANIC = 7,
} SpStatus;

// Opaque dataset.
typedef struct SpDataset SpDataset;

// Opaque SO(3) grid.
typedef struct SpGrid SpGrid;

// Opaque trained model.
typedef struct SpModel SpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of this thread into `buf` (NUL-terminated,
// truncated to `cap` bytes). Returns the full message length in bytes.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t sp_last_error(char *buf, size_t cap);

// Library version as a static NUL-terminated string.
const char *sp_version(void);

// Geodesic distance in radians between two rotations.
//
// # Safety
// `q1` and `q2` must point to 4 doubles; `out_rad` to one.
enum SpStatus sp_geodesic_distance(const double *q1, const double *q2, double *out_rad);

// Real-basis Wigner matrix of degree `l` (row-major, `(2l+1)^2` values).
//
// # Safety
// `q` must point to 4 doubles and `buf` to `cap` doubles; `len_out` may be
// null.
enum SpStatus sp_wigner_matrix(size_t l, const double *q, double *buf, size_t cap, size_t *len_out);

// Build the HEALPix SO(3) grid of the given recursion level
// (`72 * 8^recursion` rotations).
//
// # Safety
// `grid_out` must be a valid pointer.
enum SpStatus sp_grid_new(uint32_t recursion, struct SpGrid **grid_out);

// # Safety
// `grid` must be null or a handle from [`sp_grid_new`] not yet freed.
void sp_grid_free(struct SpGrid *grid);

// Number of rotations in a grid, 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t sp_grid_len(const struct SpGrid *grid);

// Quaternion of grid rotation `index`.
//
// # Safety
// `grid` must be a live handle and `q_out` point to 4 doubles.
enum SpStatus sp_grid_rotation(const struct SpGrid *grid, size_t index, double *q_out);

// Index of the grid rotation closest to `q`.
//
// # Safety
// `grid` must be a live handle, `q` point to 4 doubles and `index_out` to
// one `size_t`.
enum SpStatus sp_grid_nearest(const struct SpGrid *grid, const double *q, size_t *index_out);

// Render `n` samples of the named shape (`tet`, `cube`, `ico`, `cone`,
// `cyl`, `tetX`, `cylO`, `sphX`). `test_split` nonzero stores the full
// equivalent set of each pose.
//
// # Safety
// `shape` must be a NUL-terminated string and `dataset_out` valid.
enum SpStatus sp_dataset_generate(const char *shape,
                                  size_t n,
                                  uint64_t seed,
                                  int32_t test_split,
                                  struct SpDataset **dataset_out);

// # Safety
// `path` must be a NUL-terminated string and `dataset_out` valid.
enum SpStatus sp_dataset_load(const char *path, struct SpDataset **dataset_out);

// # Safety
// `dataset` must be a live handle and `path` a NUL-terminated string.
enum SpStatus sp_dataset_save(const struct SpDataset *dataset, const char *path);

// # Safety
// `dataset` must be null or a live handle.
void sp_dataset_free(struct SpDataset *dataset);

// Number of samples, 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t sp_dataset_len(const struct SpDataset *dataset);

// Pixels of sample `index` as channel, row, column.
//
// # Safety
// `dataset` must be a live handle and `buf` point to `cap` doubles;
// `len_out` may be null.
enum SpStatus sp_dataset_image(const struct SpDataset *dataset,
                               size_t index,
                               double *buf,
                               size_t cap,
                               size_t *len_out);

// Label quaternion of sample `index`.
//
// # Safety
// `dataset` must be a live handle and `q_out` point to 4 doubles.
enum SpStatus sp_dataset_label(const struct SpDataset *dataset, size_t index, double *q_out);

// Load a model checkpoint.
//
// # Safety
// `path` must be a NUL-terminated string and `model_out` valid.
enum SpStatus sp_model_load(const char *path, struct SpModel **model_out);

// # Safety
// `model` must be null or a live handle.
void sp_model_free(struct SpModel *model);

// Probability of every rotation of `grid` for sample `index` of
// `dataset`. `buf` receives `sp_grid_len(grid)` values summing to one.
//
// # Safety
// All handles must be live and `buf` point to `cap` doubles; `len_out`
// may be null.
enum SpStatus sp_model_predict(const struct SpModel *model,
                               const struct SpGrid *grid,
                               const struct SpDataset *dataset,
                               size_t index,
                               double *buf,
                               size_t cap,
                               size_t *len_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPHEREPOSE_H */
