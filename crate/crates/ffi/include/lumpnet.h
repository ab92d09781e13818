#ifndef LUMPNET_H
#define LUMPNET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LumpnetMode {
  LUMPNET_MODE_EXACT = 0,
  LUMPNET_MODE_PROPORTIONAL = 1,
} LumpnetMode;

typedef enum LumpnetStatus {
  LUMPNET_STATUS_OK = 0,
  LUMPNET_STATUS_VERIFICATION_FAILED = 1,
  LUMPNET_STATUS_INPUT_ERROR = 2,
  LUMPNET_STATUS_INTERNAL_ERROR = 3,
  LUMPNET_STATUS_NULL_POINTER = 4,
  LUMPNET_STATUS_PANIC = 5,
} LumpnetStatus;

/**
 * Opaque lumping handle.
 */
typedef struct LumpnetLumping LumpnetLumping;

/**
 * Opaque network handle.
 */
typedef struct LumpnetNetwork LumpnetNetwork;

/**
 * Message describing the last failure on this thread, or null. The
 * pointer stays valid until the next lumpnet call on the same thread.
 */
const char *lumpnet_last_error(void);

/**
 * Loads a network document.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LumpnetStatus lumpnet_network_load(const char *path, struct LumpnetNetwork **out);

/**
 * Writes a network document.
 *
 * # Safety
 * `net` must come from this library; `path` must be NUL-terminated.
 */
enum LumpnetStatus lumpnet_network_save(const struct LumpnetNetwork *net, const char *path);

/**
 * # Safety
 * `net` must be null or a handle from this library not yet freed.
 */
void lumpnet_network_free(struct LumpnetNetwork *net);

/**
 * Number of layers, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t lumpnet_network_depth(const struct LumpnetNetwork *net);

/**
 * Width of layer `l` (0 is the input), or 0 when out of range.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t lumpnet_network_width(const struct LumpnetNetwork *net, size_t l);

/**
 * Evaluates the network on `x` (length `x_len`) into `y` (length
 * `y_len`, at least the output width).
 *
 * # Safety
 * `x` and `y` must point to `x_len` and `y_len` doubles.
 */
enum LumpnetStatus lumpnet_network_forward(const struct LumpnetNetwork *net,
                                           const double *x,
                                           size_t x_len,
                                           double *y,
                                           size_t y_len);

/**
 * Computes the maximal lumping of `net`.
 *
 * # Safety
 * `net` must be a live handle and `out` a valid pointer.
 */
enum LumpnetStatus lumpnet_max_lumpability(const struct LumpnetNetwork *net,
                                           enum LumpnetMode mode,
                                           double tol,
                                           struct LumpnetLumping **out);

/**
 * # Safety
 * `lump` must be null or a handle from this library not yet freed.
 */
void lumpnet_lumping_free(struct LumpnetLumping *lump);

/**
 * Number of blocks in layer `l`, or 0 when out of range.
 *
 * # Safety
 * `lump` must be null or a live handle.
 */
size_t lumpnet_lumping_block_count(const struct LumpnetLumping *lump, size_t l);

/**
 * Builds the reduced network.
 *
 * # Safety
 * `net` and `lump` must be live handles and `out` a valid pointer.
 */
enum LumpnetStatus lumpnet_reduce(const struct LumpnetNetwork *net,
                                  const struct LumpnetLumping *lump,
                                  struct LumpnetNetwork **out);

/**
 * Checks every lumpability equation of `lump` on `net`. Returns
 * `VerificationFailed` on violated equations and `InputError` when the
 * lumping does not fit the network.
 *
 * # Safety
 * `net` and `lump` must be live handles.
 */
enum LumpnetStatus lumpnet_check(const struct LumpnetNetwork *net,
                                 const struct LumpnetLumping *lump,
                                 double tol);

#endif  /* LUMPNET_H */
