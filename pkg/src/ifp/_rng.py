"""Counter-based random numbers.

A uniform draw is a pure function of ``(seed, path, t, tag)``: the four
integers are folded through the SplitMix64 finalizer.  No generator state is
carried between draws, so any partition of paths across threads produces the
same numbers bit for bit.
"""

import numpy as np

from ._accel import njit

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

# variable tags
TAG_INIT_STATE = 0
TAG_CHAIN = 1
TAG_R1 = 2
TAG_R2 = 3
TAG_Y1 = 4
TAG_Y2 = 5
TAG_PHI1 = 6
TAG_PHI2 = 7


def seed_to_uint64(seed):
    return np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def uniform(seed, path, t, tag):
    """Uniform on the open interval (0, 1); ``seed`` must be a uint64."""
    h = _mix(seed + _GOLDEN * (np.uint64(tag) + _ONE))
    h = _mix(h + _GOLDEN * (np.uint64(path) + _ONE))
    h = _mix(h + _GOLDEN * (np.uint64(t) + _ONE))
    return (np.float64(h >> _S11) + 0.5) * _INV53


@njit(cache=True)
def std_normal(seed, path, t, tag1, tag2):
    u1 = uniform(seed, path, t, tag1)
    u2 = uniform(seed, path, t, tag2)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _mix_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _scalar_step(k):
    return np.uint64((int(_GOLDEN) * (int(k) + 1)) & 0xFFFFFFFFFFFFFFFF)


def uniform_np(seed, paths, t, tag):
    """Vectorized :func:`uniform` over an integer array of path indices."""
    paths = np.asarray(paths).astype(np.uint64)
    seed = np.full(paths.shape, seed, dtype=np.uint64)
    h = _mix_np(seed + _scalar_step(tag))
    h = _mix_np(h + _GOLDEN * (paths + _ONE))
    h = _mix_np(h + _scalar_step(t))
    return ((h >> _S11).astype(np.float64) + 0.5) * _INV53


def std_normal_np(seed, paths, t, tag1, tag2):
    u1 = uniform_np(seed, paths, t, tag1)
    u2 = uniform_np(seed, paths, t, tag2)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
