"""Counter-based Gaussian noise with one substream per agent.

Every draw is a pure function of ``(agent_key, step)``: the pair is hashed
with the SplitMix64 finalizer and the 64 hashed bits feed a 128-layer
ziggurat sampler (Doornik's ZIGNOR layout). Rejections and tail samples
consume further hashes derived from the first one, so the number of draws
never depends on evaluation order. Agent keys come from
:class:`numpy.random.SeedSequence`, which gives a cheap way to derive
independent 64-bit keys from a master seed plus a spawn key.
"""

import math

import numba
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_LOW7 = np.uint64(127)
_INV_2_53 = 1.0 / 9007199254740992.0

ZIG_LAYERS = 128
ZIG_R = 3.442619855899
ZIG_V = 9.91256303526217e-3


def _ziggurat_tables(layers=ZIG_LAYERS, r=ZIG_R, v=ZIG_V):
    x = np.zeros(layers + 1)
    f = math.exp(-0.5 * r * r)
    x[0] = v / f
    x[1] = r
    for i in range(2, layers):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    x[layers] = 0.0
    return x, x[1:] / x[:-1]


ZIG_X, ZIG_RATIO = _ziggurat_tables()


@numba.njit(inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(inline="always")
def uniform53(h):
    # top 53 bits, strictly inside (0, 1)
    return (np.float64(h >> np.uint64(11)) + 0.5) * _INV_2_53


@numba.njit(nogil=True)
def normal_slow(h, xs, ratio):
    state = h
    while True:
        i = np.int64(h & _LOW7)
        u = 2.0 * uniform53(h) - 1.0
        if abs(u) < ratio[i]:
            return u * xs[i]
        if i == 0:
            while True:
                state += GOLDEN
                a = uniform53(mix64(state))
                state += GOLDEN
                b = uniform53(mix64(state))
                x = math.log(a) / ZIG_R
                y = math.log(b)
                if -2.0 * y >= x * x:
                    return x - ZIG_R if u < 0.0 else ZIG_R - x
        x = u * xs[i]
        f0 = math.exp(-0.5 * (xs[i] * xs[i] - x * x))
        f1 = math.exp(-0.5 * (xs[i + 1] * xs[i + 1] - x * x))
        state += GOLDEN
        if f1 + uniform53(mix64(state)) * (f0 - f1) < 1.0:
            return x
        state += GOLDEN
        h = mix64(state)


@numba.njit(inline="always")
def counter_offset(counter):
    """Additive offset that selects draw number ``counter`` of a substream."""
    return (np.uint64(counter) + np.uint64(1)) * GOLDEN


@numba.njit
def normal_from_hash(h, xs, ratio):
    # hot loops repeat this fast path inline; numba call overhead here costs ~5x
    i = np.int64(h & _LOW7)
    u = 2.0 * uniform53(h) - 1.0
    if abs(u) < ratio[i]:
        return u * xs[i]
    return normal_slow(h, xs, ratio)


@numba.njit
def normal_at(key, counter, xs, ratio):
    """Standard normal draw number ``counter`` of the substream ``key``."""
    return normal_from_hash(mix64(key + counter_offset(counter)), xs, ratio)


@numba.njit(nogil=True, cache=True)
def _fill_normals(keys, start, count, xs, ratio, out):
    for k in range(count):
        offset = counter_offset(start + k)
        for j in range(keys.shape[0]):
            h = mix64(keys[j] + offset)
            i = np.int64(h & _LOW7)
            u = 2.0 * uniform53(h) - 1.0
            if abs(u) < ratio[i]:
                out[k, j] = u * xs[i]
            else:
                out[k, j] = normal_slow(h, xs, ratio)


def stream_keys(seed, n, spawn_key=()):
    """Derive ``n`` independent 64-bit substream keys from ``seed``.

    Parameters
    ----------
    seed : int
        Non-negative master seed.
    n : int
        Number of keys (one per agent).
    spawn_key : tuple of int
        Extra path components, e.g. ``(alpha_index, beta_index, replicate)``.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in spawn_key))
    return ss.generate_state(int(n), dtype=np.uint64)


class NoiseStream:
    """Per-agent Gaussian substreams addressed by step index.

    Draws are stateless: ``draw(k)`` returns the same vector however many
    times and in whatever order it is called.

    Parameters
    ----------
    seed : int
        Master seed for the run.
    n_agents : int
        Number of agents, i.e. substreams.
    spawn_key : tuple of int, optional
        Path used to separate this run from sibling runs on the same seed.
    """

    def __init__(self, seed, n_agents, spawn_key=()):
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)
        self.keys = stream_keys(seed, n_agents, spawn_key)
        self.keys.setflags(write=False)

    @classmethod
    def from_keys(cls, keys):
        obj = cls.__new__(cls)
        obj.seed = None
        obj.spawn_key = ()
        obj.keys = np.array(keys, dtype=np.uint64)
        obj.keys.setflags(write=False)
        return obj

    @property
    def n_agents(self):
        return self.keys.shape[0]

    def draw_block(self, start, count):
        """Draws for steps ``start .. start+count-1``, shape ``(count, n_agents)``."""
        if start < 0 or count < 0:
            raise ValueError("start and count must be non-negative")
        out = np.empty((int(count), self.n_agents))
        _fill_normals(self.keys, int(start), int(count), ZIG_X, ZIG_RATIO, out)
        return out

    def draw(self, step):
        """Draws for a single step index, shape ``(n_agents,)``."""
        return self.draw_block(step, 1)[0]
