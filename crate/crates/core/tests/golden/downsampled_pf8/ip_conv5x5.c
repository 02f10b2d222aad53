#include "accel.h"

/* conv5x5 at pf 8: 12800 cycles per tile. */
void ip0_conv5x5(const data_t in[TILE_ELEMS], data_t out[TILE_ELEMS], const weight_t w[])
{
    for (int co = 0; co < TILE_C; co++) {
        for (int y = 0; y < TILE_H; y++) {
            for (int x = 0; x < TILE_W; x++) {
                /* HLS PIPELINE II=1 */
                acc_t acc = 0;
                for (int ci = 0; ci < TILE_C; ci++) {
                    for (int ky = 0; ky < 5; ky++) {
                        for (int kx = 0; kx < 5; kx++) {
                            /* HLS UNROLL factor=8 */
                            int iy = y + ky - 2;
                            int ix = x + kx - 2;
                            if (iy >= 0 && iy < TILE_H && ix >= 0 && ix < TILE_W) {
                                acc += (acc_t)in[(ci * TILE_H + iy) * TILE_W + ix] * w[((co * TILE_C + ci) * 5 + ky) * 5 + kx];
                            }
                        }
                    }
                }
                out[(co * TILE_H + y) * TILE_W + x] = saturate(acc >> FRAC_BITS);
            }
        }
    }
}
