"""Counter-based uniform variates.

Every draw is a pure function of ``(seed, stream, i, j)``: enlarging the
population or splitting the work across threads never changes an existing
draw.  The mixer is the SplitMix64 finaliser applied in a short chain.
"""

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

# stream tags
LABELS = 0
EDGES = 1
WEIGHTS = 2
INITIAL = 3


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniform(seed, stream, i, j=0):
    """Uniform variates in [0, 1) keyed by ``(seed, stream, i, j)``.

    ``i`` and ``j`` may be integer arrays; they broadcast against each other.
    """
    with np.errstate(over="ignore"):
        i = np.asarray(i, dtype=np.uint64)
        j = np.asarray(j, dtype=np.uint64)
        key = _mix(np.uint64(seed) * _GOLDEN + np.uint64(stream) + np.uint64(1))
        h = _mix(key ^ _mix(i + _GOLDEN))
        h = _mix(h ^ _mix(j * _M1 + _GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
