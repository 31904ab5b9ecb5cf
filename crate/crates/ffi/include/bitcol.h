/* SPDX-License-Identifier: Apache-2.0 */

#ifndef BITCOL_H
#define BITCOL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum BitcolStatus {
  BITCOL_STATUS_OK = 0,
  BITCOL_STATUS_NULL_POINTER = 1,
  BITCOL_STATUS_INVALID_ARGUMENT = 2,
  BITCOL_STATUS_IO = 3,
  BITCOL_STATUS_FORMAT = 4,
  BITCOL_STATUS_UNSUPPORTED = 5,
  BITCOL_STATUS_BUFFER_TOO_SMALL = 6,
  BITCOL_STATUS_PANIC = 7,
} BitcolStatus;

typedef enum BitcolLayerKind {
  BITCOL_LAYER_KIND_CONV = 0,
  BITCOL_LAYER_KIND_DEPTHWISE_CONV = 1,
  BITCOL_LAYER_KIND_POINTWISE_CONV = 2,
  BITCOL_LAYER_KIND_FULLY_CONNECTED = 3,
  BITCOL_LAYER_KIND_MAT_MUL = 4,
} BitcolLayerKind;

/**
 * One compressed layer together with its shape.
 */
typedef struct BitcolCompressed BitcolCompressed;

/**
 * A loaded network.
 */
typedef struct BitcolNetwork BitcolNetwork;

/**
 * Loop dimensions of one layer; weights are K-major, then C, FY, FX.
 */
typedef struct BitcolShape {
  uint32_t batch;
  uint32_t out_channels;
  uint32_t in_channels;
  uint32_t out_x;
  uint32_t out_y;
  uint32_t kernel_x;
  uint32_t kernel_y;
  uint32_t stride;
  enum BitcolLayerKind kind;
} BitcolShape;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `cap`) and returns the full message length,
 * or 0 when the last call succeeded.
 */
uintptr_t bitcol_last_error(char *buf, uintptr_t cap);

/**
 * Static, NUL-terminated version string.
 */
const char *bitcol_version(void);

/**
 * Loads a network from a manifest path.
 */
enum BitcolStatus bitcol_network_load(const char *manifest_path,
                                      struct BitcolNetwork **out_network);

void bitcol_network_free(struct BitcolNetwork *network);

enum BitcolStatus bitcol_network_layer_count(const struct BitcolNetwork *network,
                                             uintptr_t *out_count);

/**
 * Shape of layer `index`.
 */
enum BitcolStatus bitcol_network_layer_shape(const struct BitcolNetwork *network,
                                             uintptr_t index,
                                             struct BitcolShape *out_shape);

/**
 * Copies the weights of layer `index` into `out_values` (`len` must equal
 * the layer's weight count).
 */
enum BitcolStatus bitcol_network_layer_weights(const struct BitcolNetwork *network,
                                               uintptr_t index,
                                               int8_t *out_values,
                                               uintptr_t len);

/**
 * Evaluates the network on a named accelerator preset.
 */
enum BitcolStatus bitcol_perf_evaluate(const struct BitcolNetwork *network,
                                       const char *preset_name,
                                       double *out_cycles,
                                       double *out_energy);

/**
 * Compresses one layer. `group_size` of 0 means BCS or dense, whichever
 * is smaller, at G=8; otherwise the layer is compressed at that G in the
 * same automatic mode.
 */
enum BitcolStatus bitcol_compress(const int8_t *values,
                                  uintptr_t len,
                                  struct BitcolShape shape,
                                  uint32_t group_size,
                                  struct BitcolCompressed **out_compressed);

void bitcol_compressed_free(struct BitcolCompressed *compressed);

/**
 * Real compression ratio (index included) and group count.
 */
enum BitcolStatus bitcol_compressed_info(const struct BitcolCompressed *compressed,
                                         double *out_ratio,
                                         uint32_t *out_groups,
                                         bool *out_is_dense);

/**
 * Writes the layer as a single-layer container. With `buf` null or too
 * small, stores the required size in `out_len` and returns
 * `BufferTooSmall`.
 */
enum BitcolStatus bitcol_compressed_encode(const struct BitcolCompressed *compressed,
                                           uint8_t *buf,
                                           uintptr_t cap,
                                           uintptr_t *out_len);

/**
 * Decompresses into `out_values` (`len` = weight count).
 */
enum BitcolStatus bitcol_compressed_decompress(const struct BitcolCompressed *compressed,
                                               int8_t *out_values,
                                               uintptr_t len);

/**
 * Lockstep cycles of a compressed layer on `SU<su_id>`; `su_id` 0 picks
 * the best unrolling for the shape.
 */
enum BitcolStatus bitcol_simulate(const struct BitcolCompressed *compressed,
                                  uint8_t su_id,
                                  bool count_sign_cycle,
                                  uint64_t *out_cycles,
                                  uint64_t *out_barrier_loss);

/**
 * Best spatial unrolling for a shape and its utilization.
 */
enum BitcolStatus bitcol_select_su(struct BitcolShape shape,
                                   uint8_t *out_su_id,
                                   double *out_utilization);

/**
 * Dot product of one weight group with activations through the
 * column-serial engine. `len` must be a supported group size.
 */
enum BitcolStatus bitcol_bce_dot(const int8_t *activations,
                                 const int8_t *weights,
                                 uintptr_t len,
                                 int64_t *out_dot,
                                 uint32_t *out_cycles);

/**
 * Rounds a group to the nearest values with at least `zero_columns` zero
 * sign-magnitude columns, in place.
 */
enum BitcolStatus bitcol_flip_group(int8_t *values,
                                    uintptr_t len,
                                    uint32_t zero_columns,
                                    bool preserve_sign,
                                    uint64_t *out_squared_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BITCOL_H */
