"""Counter-based keyed pseudorandom streams.

Every draw is a pure function of ``(key, counter)``: there is no generator
state to carry around, so any entry of any stream can be recomputed in
isolation and batches can be evaluated in any order.  Mixing uses the
SplitMix64 finalizer; normals come from the inverse CDF so one counter always
yields exactly one variate.
"""

import numpy as np
from scipy.special import chdtri, ndtri

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def mix_int(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(*parts: int) -> int:
    """Fold integers into one 64-bit key. Order matters."""
    h = 0x6A09E667F3BCC908
    for p in parts:
        h = mix_int(h ^ mix_int((int(p) + _GOLDEN) & MASK64))
    return h


def mix_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _U_M1
        z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


def random_bits(key, counters) -> np.ndarray:
    """64 pseudorandom bits per counter; ``key`` broadcasts against ``counters``."""
    counters = np.asarray(counters, dtype=np.uint64)
    key = np.asarray(key, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix_array(mix_array(counters + _U_GOLDEN) ^ key)


def uniforms(key, counters) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    bits = random_bits(key, counters)
    return ((bits >> _S11).astype(np.float64) + 0.5) * (2.0 ** -53)


def normals(key, counters) -> np.ndarray:
    return ndtri(uniforms(key, counters))


def chi_squares(df, key, counters) -> np.ndarray:
    return chdtri(df, uniforms(key, counters))


def derive_keys(seeds, *parts: int) -> np.ndarray:
    """Vectorized ``derive_key(seed, *parts)`` over an array of seeds."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = mix_array(np.uint64(0x6A09E667F3BCC908) ^ mix_array(seeds + _U_GOLDEN))
    for p in parts:
        h = mix_array(h ^ np.uint64(mix_int((int(p) + _GOLDEN) & MASK64)))
    return h
