"""Deterministic random streams for portable test-problem generation.

Problem instances are stored as metadata only and regenerated on demand, so
the stream has to be bit-reproducible across platforms and languages.  We use
xoshiro256++ seeded through splitmix64, with Box-Muller for Gaussian draws.
NumPy's own Generator is deliberately not used here: its bit streams are not
part of any cross-language contract.
"""

from __future__ import annotations

import math

import numpy as np

RNG_ID = "xoshiro256++/boxmuller/v1"

_MASK64 = 0xFFFFFFFFFFFFFFFF


def splitmix64_stream(seed: int, count: int) -> list[int]:
    """First `count` outputs of splitmix64 starting from `seed` (mod 2^64)."""
    x = seed & _MASK64
    out = []
    for _ in range(count):
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


class Xoshiro256pp:
    """xoshiro256++ with the published constants (23, 17, 45).

    State is seeded from four consecutive splitmix64 outputs, the seeding
    recommended by the algorithm's authors.
    """

    def __init__(self, seed: int):
        s = splitmix64_stream(seed, 4)
        if all(v == 0 for v in s):  # all-zero state is a fixed point
            s[0] = 1
        self._s = tuple(s)

    def raw(self, count: int) -> np.ndarray:
        """Next `count` raw 64-bit outputs as a uint64 array."""
        s0, s1, s2, s3 = self._s
        out = np.empty(count, dtype=np.uint64)
        for i in range(count):
            t0 = (s0 + s3) & _MASK64
            r = ((t0 << 23) & _MASK64) | (t0 >> 41)
            out[i] = (r + s0) & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) & _MASK64) | (s3 >> 19)
        self._s = (s0, s1, s2, s3)
        return out


class DeterministicRng:
    """Sequential deterministic stream of uniforms, Gaussians and matrices.

    Draw-order contract (fixed so instances are portable):
      * uniforms(m): m values (raw >> 11) * 2^-53 in [0, 1).
      * gaussians(m): ceil(m/2) Box-Muller pairs, consuming exactly two raw
        draws per pair; the radial uniform is ((raw >> 11) + 1) * 2^-53 in
        (0, 1] so the log is finite; an odd call discards the last sine value.
      * gaussian_matrix(rows, cols): rows*cols gaussians filled column-major.
    """

    def __init__(self, seed: int):
        self._gen = Xoshiro256pp(seed)

    def uniforms(self, count: int) -> np.ndarray:
        raw = self._gen.raw(count)
        return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def gaussians(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        raw = self._gen.raw(2 * pairs)
        u_rad = ((raw[0::2] >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53
        u_ang = (raw[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        rad = np.sqrt(-2.0 * np.log(u_rad))
        ang = 2.0 * math.pi * u_ang
        z = np.empty(2 * pairs)
        z[0::2] = rad * np.cos(ang)
        z[1::2] = rad * np.sin(ang)
        return z[:count]

    def gaussian_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.gaussians(rows * cols).reshape((rows, cols), order="F")
