#ifndef CSC_H
#define CSC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum CscStatus {
  CSC_STATUS_OK = 0,
  CSC_STATUS_NULL_POINTER = 1,
  CSC_STATUS_INVALID_ARGUMENT = 2,
  CSC_STATUS_SHAPE_MISMATCH = 3,
  CSC_STATUS_IO = 4,
  CSC_STATUS_FORMAT = 5,
  CSC_STATUS_NUMERICAL = 6,
  CSC_STATUS_PANIC = 7,
} CscStatus;

typedef enum CscMethod {
  CSC_METHOD_BPDN = 0,
  CSC_METHOD_CBPDN = 1,
  CSC_METHOD_GRD = 2,
  CSC_METHOD_STV = 3,
  CSC_METHOD_VTV = 4,
  CSC_METHOD_RTV = 5,
} CscMethod;

// Opaque filter dictionary.
typedef struct CscDictionary CscDictionary;

// Opaque single-channel image.
typedef struct CscImage CscImage;

// Denoising parameters. `rho <= 0` selects the default penalty.
typedef struct CscParams {
  enum CscMethod method;
  double lambda;
  double mu;
  double rho;
  uint32_t max_iter;
  double tol;
  double lambda_l;
  uint32_t stride;
} CscParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *csc_version(void);

// Message of the last failed call on this thread, or NULL when the last
// call succeeded. Valid until the next call on the same thread.
const char *csc_last_error_message(void);

// Creates a `height × width` image from `height * width` row-major values,
// or a zero image when `data` is NULL.
//
// # Safety
// `data` is NULL or points to `height * width` readable doubles; `out` is
// a valid pointer.
enum CscStatus csc_image_new(uintptr_t height,
                             uintptr_t width,
                             const double *data,
                             struct CscImage **out);

// # Safety
// `image` is NULL or a handle not yet freed.
void csc_image_free(struct CscImage *image);

// # Safety
// `image` is a live handle; `height` and `width` are valid pointers.
enum CscStatus csc_image_dims(const struct CscImage *image, uintptr_t *height, uintptr_t *width);

// Copies the row-major pixels into `buffer`, which holds `len` doubles;
// `len` must equal `height * width`.
//
// # Safety
// `image` is a live handle; `buffer` points to `len` writable doubles.
enum CscStatus csc_image_copy_data(const struct CscImage *image, double *buffer, uintptr_t len);

// Reads a PGM or tensor image.
//
// # Safety
// `path` is a NUL-terminated string; `out` is a valid pointer.
enum CscStatus csc_image_read(const char *path, struct CscImage **out);

// Writes a tensor file when `path` ends in `.csct`, 8-bit PGM otherwise.
//
// # Safety
// `image` is a live handle; `path` is a NUL-terminated string.
enum CscStatus csc_image_write(const struct CscImage *image, const char *path);

// Loads a dictionary tensor with dims M × P × P.
//
// # Safety
// `path` is a NUL-terminated string; `out` is a valid pointer.
enum CscStatus csc_dictionary_load(const char *path, struct CscDictionary **out);

// The seeded random fallback dictionary of zero-mean unit-norm filters.
//
// # Safety
// `out` is a valid pointer.
enum CscStatus csc_dictionary_fallback(uintptr_t num_filters,
                                       uintptr_t size,
                                       uint64_t seed,
                                       struct CscDictionary **out);

// # Safety
// `dict` is NULL or a handle not yet freed.
void csc_dictionary_free(struct CscDictionary *dict);

// # Safety
// `dict` is a live handle; `num_filters` and `filter_size` are valid pointers.
enum CscStatus csc_dictionary_dims(const struct CscDictionary *dict,
                                   uintptr_t *num_filters,
                                   uintptr_t *filter_size);

// Adds seeded Gaussian noise of standard deviation `sigma`.
//
// # Safety
// `image` is a live handle; `out` is a valid pointer.
enum CscStatus csc_add_noise(const struct CscImage *image,
                             double sigma,
                             uint64_t seed,
                             struct CscImage **out);

// PSNR in dB for peak 1; infinite for identical images.
//
// # Safety
// Both images are live handles; `out` is a valid pointer.
enum CscStatus csc_psnr(const struct CscImage *reference,
                        const struct CscImage *image,
                        double *out);

// Default parameters for `method`.
struct CscParams csc_params_default(enum CscMethod method);

// Tikhonov split, sparse coding of the highpass and recombination.
//
// # Safety
// `image` and `dict` are live handles; `params` and `out` are valid pointers.
enum CscStatus csc_denoise(const struct CscImage *image,
                           const struct CscDictionary *dict,
                           const struct CscParams *params,
                           struct CscImage **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSC_H */
