#include "accel.h"

/* activation at pf 8: 64 cycles per tile. */
void ip2_activation(const data_t *in, data_t *out)
{
    for (int i = 0; i < TILE_ELEMS; i++) {
        /* HLS UNROLL factor=8 */
        acc_t v = in[i];
        out[i] = saturate(v < 0 ? 0 : (v > CLIP_MAX ? CLIP_MAX : v));
    }
}
