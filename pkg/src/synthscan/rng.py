"""Counter-based random numbers for per-pulse range noise.

Every pulse gets an independent value derived by hashing
(seed, leg, azimuth index, elevation index), so noise is a pure function of
those coordinates: execution order, chunking and thread count cannot change
it. The mixer is the splitmix64 finalizer chain.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_STREAM_U1 = np.uint64(0x7FB5D329728EA185)
_STREAM_U2 = np.uint64(0x81DADEF4BC2DD44D)
_TO_UNIT = 2.0 ** -53


def _mix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def _as_u64(x) -> np.ndarray:
    # signed view keeps negative Python ints representable
    return np.asarray(x, dtype=np.int64).view(np.uint64)


def pulse_keys(seed: int, leg: int, az_idx, el_idx) -> np.ndarray:
    """64-bit hash per (seed, leg, azimuth, elevation) tuple; vectorized."""
    h = _mix(np.asarray(seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64))
    h = _mix(h ^ _as_u64(leg))
    h = _mix(h ^ _as_u64(az_idx))
    return _mix(h ^ _as_u64(el_idx))


def _unit_open(h: np.ndarray) -> np.ndarray:
    # (0, 1]: safe for log()
    return ((h >> _S11) + np.uint64(1)).astype(np.float64) * _TO_UNIT


def standard_normals(seed: int, leg: int, az_idx, el_idx) -> np.ndarray:
    """One N(0, 1) draw per pulse coordinate (Box-Muller on two hashed lanes)."""
    h = pulse_keys(seed, leg, az_idx, el_idx)
    u1 = _unit_open(_mix(h ^ _STREAM_U1))
    u2 = _unit_open(_mix(h ^ _STREAM_U2))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def range_noise(seed: int, leg: int, az_idx, el_idx, sigma: float) -> np.ndarray:
    """Gaussian range perturbation, N(0, sigma^2), keyed per pulse."""
    shape = np.broadcast(np.asarray(az_idx), np.asarray(el_idx)).shape
    if sigma == 0.0:
        return np.zeros(shape, dtype=np.float64)
    return sigma * standard_normals(seed, leg, az_idx, el_idx)
