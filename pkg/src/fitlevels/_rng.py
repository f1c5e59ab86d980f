"""Counter-seeded xoshiro256** generator usable from numba kernels.

Each stream is a ``uint64[4]`` state array. A stream is derived from a
``(seed, stream_id)`` pair through splitmix64, so run ``r`` of a campaign
always sees the same draws regardless of how runs are scheduled.
"""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_STREAM_SALT = np.uint64(0x632BE59BD9B4E019)
_U1 = np.uint64(1)
_S11 = np.uint64(11)
_S17 = np.uint64(17)
_S45 = np.uint64(45)
_TWO_M53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def seed_state(seed, stream, state):
    """Fill ``state`` from a (seed, stream) pair."""
    key = _mix(np.uint64(seed) + _GOLDEN) ^ _mix(np.uint64(stream) + _STREAM_SALT)
    for w in range(4):
        key = key + _GOLDEN
        state[w] = _mix(key)
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = _U1


@njit(cache=True)
def next_u64(state):
    result = _rotl(state[1] * np.uint64(5), 7) * np.uint64(9)
    t = state[1] << _S17
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = _rotl(state[3], 45)
    return result


@njit(cache=True)
def next_double(state):
    """Uniform on [0, 1)."""
    return np.float64(next_u64(state) >> _S11) * _TWO_M53


@njit(cache=True)
def next_open_double(state):
    """Uniform on (0, 1]; safe to take the log of."""
    return (np.float64(next_u64(state) >> _S11) + 1.0) * _TWO_M53


@njit(cache=True)
def next_below(state, bound):
    """Uniform integer in [0, bound)."""
    k = np.int64(next_double(state) * bound)
    if k >= bound:
        k = bound - 1
    return k


@njit(cache=True)
def random_bits(state, n):
    """``n`` uniform bits (n <= 63) packed into a non-negative int64."""
    return np.int64(next_u64(state) >> np.uint64(64 - n))


@njit(cache=True)
def flip_positions(state, n, log1mp, out):
    """Sample the bit positions flipped by standard bit mutation.

    Positions are produced in increasing order by geometric skipping, which
    is exactly equivalent to ``n`` independent Bernoulli trials. ``log1mp``
    is ``log(1 - p)``. Returns the number of positions written to ``out``.
    """
    count = 0
    pos = -1
    while True:
        skip = np.floor(np.log(next_open_double(state)) / log1mp)
        if skip >= n - pos - 1:
            return count
        pos += 1 + np.int64(skip)
        out[count] = pos
        count += 1


@njit(cache=True)
def mutate_word(state, x, n, log1mp):
    """Standard bit mutation of an ``n``-bit word, bit 0 being the MSB."""
    pos = -1
    while True:
        skip = np.floor(np.log(next_open_double(state)) / log1mp)
        if skip >= n - pos - 1:
            return x
        pos += 1 + np.int64(skip)
        x ^= np.int64(1) << (n - 1 - pos)


def splitmix_reference(seed, stream, count):
    """Pure-Python reference of the seeded xoshiro256** stream (for tests)."""
    mask = (1 << 64) - 1

    def mix(z):
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        return z ^ (z >> 31)

    key = mix((seed + 0x9E3779B97F4A7C15) & mask) ^ mix((stream + 0x632BE59BD9B4E019) & mask)
    s = []
    for _ in range(4):
        key = (key + 0x9E3779B97F4A7C15) & mask
        s.append(mix(key))

    def rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & mask

    out = []
    for _ in range(count):
        out.append((rotl((s[1] * 5) & mask, 7) * 9) & mask)
        t = (s[1] << 17) & mask
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
    return out
