/* Accelerator interface for b11:conv3x3+dwconv3x3+normalization+activationx2. Generated; do not edit. */
#ifndef ACCEL_H
#define ACCEL_H

#include <stddef.h>
#include <stdint.h>

typedef int8_t data_t;
typedef int8_t weight_t;
typedef int32_t acc_t;

#define TILE_W 8
#define TILE_H 8
#define TILE_C 8
#define TILE_ELEMS (TILE_W * TILE_H * TILE_C)
#define FRAC_BITS 4
#define DATA_MIN (-128)
#define DATA_MAX 127
#define CLIP_MAX DATA_MAX
#define NORM_SCALE (1 << FRAC_BITS)

static inline data_t saturate(acc_t v)
{
    if (v > DATA_MAX) {
        return DATA_MAX;
    }
    if (v < DATA_MIN) {
        return DATA_MIN;
    }
    return (data_t)v;
}

void ip0_conv3x3(const data_t in[TILE_ELEMS], data_t out[TILE_ELEMS], const weight_t w[]);
void ip1_dwconv3x3(const data_t in[TILE_ELEMS], data_t out[TILE_ELEMS], const weight_t w[]);
void ip2_normalization(const data_t *in, data_t *out);
void ip3_activation(const data_t *in, data_t *out);

void load_tile(const data_t *src, data_t *dst, int width, int height, int channels, int x0, int y0, int c0, int stride);
void store_tile(data_t *dst, const data_t *src, int width, int height, int channels, int x0, int y0, int c0);
void load_weights(const weight_t *src, weight_t *dst, int count);
void accel_top(const data_t *fmap_in, data_t *fmap_out, const weight_t *weights, data_t *dram_a, data_t *dram_b);

#endif
