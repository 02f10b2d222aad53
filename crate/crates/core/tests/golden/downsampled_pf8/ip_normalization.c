#include "accel.h"

/* normalization at pf 8: 128 cycles per tile. */
void ip1_normalization(const data_t *in, data_t *out)
{
    for (int i = 0; i < TILE_ELEMS; i++) {
        /* HLS UNROLL factor=8 */
        out[i] = saturate(((acc_t)in[i] * NORM_SCALE) >> FRAC_BITS);
    }
}
