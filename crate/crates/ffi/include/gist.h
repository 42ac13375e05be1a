#ifndef GIST_H
#define GIST_H

/* auto-generated by cbindgen from gist-ffi; do not edit */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
typedef enum GistStatus {
  GistStatus_Ok = 0,
  GistStatus_NullPointer = 1,
  GistStatus_InvalidArgument = 2,
  GistStatus_ParseError = 3,
  GistStatus_IndexError = 4,
  GistStatus_SizeError = 5,
  GistStatus_IoError = 6,
  GistStatus_Utf8Error = 7,
  GistStatus_InternalError = 8,
} GistStatus;

/**
 * Opaque embedding handle.
 */
typedef struct GistEmbedding GistEmbedding;

/**
 * Opaque mesh handle.
 */
typedef struct GistMesh GistMesh;

/**
 * Opaque trained-model handle.
 */
typedef struct GistModel GistModel;

/**
 * Wind-frame aerodynamic coefficients, units of square meters.
 */
typedef struct GistAeroCoefficients {
  double cxs;
  double cys;
  double czs;
  double cmxs;
  double cmys;
  double cmzs;
} GistAeroCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message into `buf` (truncated to `cap` bytes
 * including the terminator) and returns the full message length.
 */
size_t gist_last_error_message(char *buf, size_t cap);

/**
 * Parses mesh text (`v`/`g`/`f` lines) into a new mesh handle.
 */
enum GistStatus gist_mesh_from_text(const char *text, struct GistMesh **out);

/**
 * Loads a mesh file from disk.
 */
enum GistStatus gist_mesh_load(const char *path, struct GistMesh **out);

/**
 * Unit-sphere triangulation at the given subdivision level.
 */
enum GistStatus gist_mesh_icosphere(size_t level, struct GistMesh **out);

/**
 * Closed two-sided wing with a flap rotated by `alpha_deg`.
 */
enum GistStatus gist_mesh_wing_flap(double alpha_deg, size_t resolution, struct GistMesh **out);

/**
 * Two sheets separated by `gap`, joined along one edge.
 */
enum GistStatus gist_mesh_thin_plate(double gap, size_t nx, size_t ny, struct GistMesh **out);

enum GistStatus gist_mesh_vertex_count(const struct GistMesh *mesh, size_t *out);

enum GistStatus gist_mesh_face_count(const struct GistMesh *mesh, size_t *out);

/**
 * Copies vertex positions into `buf` (x,y,z per vertex; `len` must be at
 * least 3 * vertex count).
 */
enum GistStatus gist_mesh_vertices(const struct GistMesh *mesh, double *buf, size_t len);

/**
 * Frees a mesh handle; a null pointer is ignored.
 */
void gist_mesh_free(struct GistMesh *mesh);

/**
 * Computes the spectral embedding of a mesh: filter coefficients
 * `coeffs[0..n_coeffs]`, embedding dimension `r`, RNG `seed`.
 */
enum GistStatus gist_embedding_compute(const struct GistMesh *mesh,
                                       const double *coeffs,
                                       size_t n_coeffs,
                                       size_t r,
                                       uint64_t seed,
                                       struct GistEmbedding **out);

enum GistStatus gist_embedding_dims(const struct GistEmbedding *emb, size_t *out_n, size_t *out_r);

/**
 * Inner product of embedding rows i and j: the kernel estimate K(i, j).
 */
enum GistStatus gist_embedding_kernel_estimate(const struct GistEmbedding *emb,
                                               size_t i,
                                               size_t j,
                                               double *out);

/**
 * Copies the embedding row-major into `buf` (`len` >= N * r values).
 */
enum GistStatus gist_embedding_copy(const struct GistEmbedding *emb, double *buf, size_t len);

void gist_embedding_free(struct GistEmbedding *emb);

/**
 * Dense exact kernel K = f(P) f(P)^T, written row-major into `buf`
 * (`len` >= N * N). Subject to the library's dense-size cap.
 */
enum GistStatus gist_exact_kernel(const struct GistMesh *mesh,
                                  const double *coeffs,
                                  size_t n_coeffs,
                                  double *buf,
                                  size_t len);

/**
 * Loads a trained checkpoint from disk.
 */
enum GistStatus gist_model_load(const char *path, struct GistModel **out);

/**
 * Predicts surface fields for a mesh at a map point
 * (heave, pitch, yaw, roll, steer). Fields are written row-major
 * (p, taux, tauy, tauz per vertex); `len` must be at least 4 * N.
 */
enum GistStatus gist_model_predict(const struct GistModel *model,
                                   const struct GistMesh *mesh,
                                   const double *map,
                                   double *buf,
                                   size_t len);

void gist_model_free(struct GistModel *model);

/**
 * Integrates per-vertex fields (row-major p, taux, tauy, tauz; `len` =
 * 4 * N) into wind-frame coefficients. The wind frame is the body frame
 * yawed by `yaw_deg`.
 */
enum GistStatus gist_integrate(const struct GistMesh *mesh,
                               const double *fields,
                               size_t len,
                               double yaw_deg,
                               struct GistAeroCoefficients *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GIST_H */
