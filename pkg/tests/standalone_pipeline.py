"""Single-user QPSK pipeline written from the documented stream layout only.

Philox-4x64 keyed (seed, 0), counter (0, 0, snr_index, trial); draws in order:
2 bits (top bit of a word each), 1 channel tap, 1 noise sample (Box-Muller
on two 53-bit uniforms each). MMSE by scalar division, nearest-point demap.
"""
import math

import numpy as np


def bit_errors(seed, snr_index, trial, snr_db):
    g = np.random.Philox(key=[seed, 0], counter=[0, 0, snr_index, trial])
    words = [int(w) for w in g.random_raw(6)]
    bits = [words[0] >> 63, words[1] >> 63]

    def cn(w1, w2, var):
        u1 = 1.0 - (w1 >> 11) * 2.0**-53
        u2 = (w2 >> 11) * 2.0**-53
        r = math.sqrt(-2 * math.log(u1)) * math.sqrt(var / 2)
        return complex(r * math.cos(2 * math.pi * u2), r * math.sin(2 * math.pi * u2))

    x = complex(1 - 2 * bits[0], 1 - 2 * bits[1]) / math.sqrt(2)
    h = cn(words[2], words[3], 1.0)
    s2 = 1.0 / 10 ** (snr_db / 10)
    y = h * x + cn(words[4], words[5], s2)
    xhat = h.conjugate() * y / (abs(h) ** 2 + s2)
    return int(xhat.real < 0) != bits[0], int(xhat.imag < 0) != bits[1]
