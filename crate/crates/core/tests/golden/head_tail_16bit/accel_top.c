#include "accel.h"

/* b12:conv3x3+dwconv5x5+normalization+activationx2: 11 layers in 7 calls over 5 segments. */

static data_t t0[TILE_ELEMS];
static data_t t1[TILE_ELEMS];
static weight_t w0[576];
static weight_t w1[200];
static weight_t w5[64];

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

static void reduce_tile(const data_t *tile, acc_t acc[TILE_C])
{
    for (int c = 0; c < TILE_C; c++) {
        for (int i = 0; i < TILE_W * TILE_H; i++) {
            acc[c] += tile[c * TILE_W * TILE_H + i];
        }
    }
}

static void store_mean(data_t *dst, const acc_t acc[TILE_C], int channels, int c0, int count)
{
    for (int c = 0; c < TILE_C && c0 + c < channels; c++) {
        dst[c0 + c] = saturate(acc[c] / count);
    }
}

static void fused_l2_ip1_dwconv5x5(const data_t *in, data_t *out, const weight_t *w)
{
    ip1_dwconv5x5(in, out, w);
    ip2_normalization(out, out);
    ip3_activation(out, out);
}

static void fused_l6_ip1_dwconv5x5(const data_t *in, data_t *out, const weight_t *w)
{
    ip1_dwconv5x5(in, out, w);
    ip2_normalization(out, out);
    ip3_activation(out, out);
}

void accel_top(const data_t *fmap_in, data_t *fmap_out, const weight_t *weights, data_t *dram_a, data_t *dram_b)
{
    /* HLS INTERFACE m_axi port=fmap_in */
    /* HLS INTERFACE m_axi port=fmap_out */
    /* HLS INTERFACE m_axi port=weights */
    /* HLS INTERFACE m_axi port=dram_a */
    /* HLS INTERFACE m_axi port=dram_b */
    acc_t gacc[TILE_C];

    /* head0: 64x64x3 -> 32x32x8, conv3x3 */
    for (int tc = 0; tc < 1; tc++) {
        load_weights(weights + 0 + (size_t)tc * 576, w0, 576);
        for (int ty = 0; ty < 4; ty++) {
            for (int tx = 0; tx < 4; tx++) {
                /* HLS DATAFLOW */
                load_tile(fmap_in, t0, 64, 64, 3, tx * TILE_W * 2, ty * TILE_H * 2, 0, 2);
                ip0_conv3x3(t0, t1, w0);
                store_tile(dram_a, t1, 32, 32, 8, tx * TILE_W, ty * TILE_H, tc * TILE_C);
            }
        }
    }

    /* rep0: 32x32x8 -> 32x32x8, conv3x3 + dwconv5x5 */
    for (int tc = 0; tc < 1; tc++) {
        load_weights(weights + 576 + (size_t)tc * 576, w0, 576);
        load_weights(weights + 1152 + (size_t)tc * 200, w1, 200);
        for (int ty = 0; ty < 4; ty++) {
            for (int tx = 0; tx < 4; tx++) {
                /* HLS DATAFLOW */
                load_tile(dram_a, t0, 32, 32, 8, tx * TILE_W * 1, ty * TILE_H * 1, 0, 1);
                ip0_conv3x3(t0, t1, w0);
                fused_l2_ip1_dwconv5x5(t1, t0, w1);
                store_tile(dram_b, t0, 32, 32, 8, tx * TILE_W, ty * TILE_H, tc * TILE_C);
            }
        }
    }

    /* rep1: 32x32x8 -> 16x16x16, conv3x3 + dwconv5x5 */
    for (int tc = 0; tc < 2; tc++) {
        load_weights(weights + 1352 + (size_t)tc * 576, w0, 576);
        load_weights(weights + 2504 + (size_t)tc * 200, w1, 200);
        for (int ty = 0; ty < 2; ty++) {
            for (int tx = 0; tx < 2; tx++) {
                /* HLS DATAFLOW */
                load_tile(dram_b, t0, 32, 32, 8, tx * TILE_W * 2, ty * TILE_H * 2, 0, 2);
                ip0_conv3x3(t0, t1, w0);
                fused_l6_ip1_dwconv5x5(t1, t0, w1);
                store_tile(dram_a, t0, 16, 16, 16, tx * TILE_W, ty * TILE_H, tc * TILE_C);
            }
        }
    }

    /* tail0: 16x16x16 -> 1x1x16, avg_pool */
    for (int tc = 0; tc < 2; tc++) {
        for (int c = 0; c < TILE_C; c++) {
            gacc[c] = 0;
        }
        for (int ty = 0; ty < 2; ty++) {
            for (int tx = 0; tx < 2; tx++) {
                /* HLS DATAFLOW */
                load_tile(dram_a, t0, 16, 16, 16, tx * TILE_W * 1, ty * TILE_H * 1, tc * TILE_C, 1);
                ip4_avg_pool(t0, t1);
                reduce_tile(t1, gacc);
            }
        }
        store_mean(dram_b, gacc, 16, tc * TILE_C, 256);
    }

    /* tail1: 1x1x16 -> 1x1x10, conv1x1 */
    for (int tc = 0; tc < 2; tc++) {
        load_weights(weights + 2904 + (size_t)tc * 64, w5, 64);
        for (int ty = 0; ty < 1; ty++) {
            for (int tx = 0; tx < 1; tx++) {
                /* HLS DATAFLOW */
                load_tile(dram_b, t0, 1, 1, 16, tx * TILE_W * 1, ty * TILE_H * 1, 0, 1);
                ip5_conv1x1(t0, t1, w5);
                store_tile(fmap_out, t1, 1, 1, 10, tx * TILE_W, ty * TILE_H, tc * TILE_C);
            }
        }
    }
}
