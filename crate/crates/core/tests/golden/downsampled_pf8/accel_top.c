#include "accel.h"

/* b03:conv5x5+normalization+activationx3: 9 layers in 9 calls over 3 segments. */

static data_t t0[TILE_ELEMS];
static data_t t1[TILE_ELEMS];
static weight_t w0[1600];

void load_tile(const data_t *src, data_t *dst, int width, int height, int channels, int x0, int y0, int c0, int stride)
{
    for (int c = 0; c < TILE_C; c++) {
        for (int y = 0; y < TILE_H; y++) {
            for (int x = 0; x < TILE_W; x++) {
                /* HLS PIPELINE II=1 */
                int sc = c0 + c;
                int sy = y0 + y * stride;
                int sx = x0 + x * stride;
                data_t v = 0;
                if (sc < channels && sy < height && sx < width) {
                    v = src[((size_t)sc * height + sy) * width + sx];
                }
                dst[(c * TILE_H + y) * TILE_W + x] = v;
            }
        }
    }
}

void store_tile(data_t *dst, const data_t *src, int width, int height, int channels, int x0, int y0, int c0)
{
    for (int c = 0; c < TILE_C; c++) {
        for (int y = 0; y < TILE_H; y++) {
            for (int x = 0; x < TILE_W; x++) {
                /* HLS PIPELINE II=1 */
                int dc = c0 + c;
                int dy = y0 + y;
                int dx = x0 + x;
                if (dc < channels && dy < height && dx < width) {
                    dst[((size_t)dc * height + dy) * width + dx] = src[(c * TILE_H + y) * TILE_W + x];
                }
            }
        }
    }
}

void load_weights(const weight_t *src, weight_t *dst, int count)
{
    for (int i = 0; i < count; i++) {
        /* HLS PIPELINE II=1 */
        dst[i] = src[i];
    }
}

void accel_top(const data_t *fmap_in, data_t *fmap_out, const weight_t *weights, data_t *dram_a, data_t *dram_b)
{
    /* HLS INTERFACE m_axi port=fmap_in */
    /* HLS INTERFACE m_axi port=fmap_out */
    /* HLS INTERFACE m_axi port=weights */
    /* HLS INTERFACE m_axi port=dram_a */
    /* HLS INTERFACE m_axi port=dram_b */

    /* rep0: 64x32x8 -> 64x32x8, conv5x5 + normalization + activation */
    for (int tc = 0; tc < 1; tc++) {
        load_weights(weights + 0 + (size_t)tc * 1600, w0, 1600);
        for (int ty = 0; ty < 4; ty++) {
            for (int tx = 0; tx < 8; tx++) {
                /* HLS DATAFLOW */
                load_tile(fmap_in, t0, 64, 32, 8, tx * TILE_W * 1, ty * TILE_H * 1, 0, 1);
                ip0_conv5x5(t0, t1, w0);
                ip1_normalization(t1, t0);
                ip2_activation(t0, t1);
                store_tile(dram_a, t1, 64, 32, 8, tx * TILE_W, ty * TILE_H, tc * TILE_C);
            }
        }
    }

    /* rep1: 64x32x8 -> 32x16x16, conv5x5 + normalization + activation */
    for (int tc = 0; tc < 2; tc++) {
        load_weights(weights + 1600 + (size_t)tc * 1600, w0, 1600);
        for (int ty = 0; ty < 2; ty++) {
            for (int tx = 0; tx < 4; tx++) {
                /* HLS DATAFLOW */
                load_tile(dram_a, t0, 64, 32, 8, tx * TILE_W * 2, ty * TILE_H * 2, 0, 2);
                ip0_conv5x5(t0, t1, w0);
                ip1_normalization(t1, t0);
                ip2_activation(t0, t1);
                store_tile(dram_b, t1, 32, 16, 16, tx * TILE_W, ty * TILE_H, tc * TILE_C);
            }
        }
    }

    /* rep2: 32x16x16 -> 32x16x24, conv5x5 + normalization + activation */
    for (int tc = 0; tc < 3; tc++) {
        load_weights(weights + 4800 + (size_t)tc * 1600, w0, 1600);
        for (int ty = 0; ty < 2; ty++) {
            for (int tx = 0; tx < 4; tx++) {
                /* HLS DATAFLOW */
                load_tile(dram_b, t0, 32, 16, 16, tx * TILE_W * 1, ty * TILE_H * 1, 0, 1);
                ip0_conv5x5(t0, t1, w0);
                ip1_normalization(t1, t0);
                ip2_activation(t0, t1);
                store_tile(fmap_out, t1, 32, 16, 24, tx * TILE_W, ty * TILE_H, tc * TILE_C);
            }
        }
    }
}
