"""Named, splittable random streams.

All randomness in the package flows from a single master seed through
`stream(master_seed, *key)`.  Distinct keys give statistically independent
generators, and the same (seed, key) pair always reproduces the same stream.
"""

import numpy as np

# Stream name tags, so call sites do not collide by accident.
GEOMETRY = 0
CHANNELS = 1
BEAM_COVARIANCE = 2
SENSING = 3
ORACLE = 4


def stream(master_seed, *key):
    """Return a `numpy` generator for the given master seed and key path.

    The seed may be an int or a tuple of ints (e.g. (experiment seed, drop)).
    """
    if isinstance(master_seed, (tuple, list)):
        entropy = [int(v) for v in master_seed]
    else:
        entropy = int(master_seed)
    ss = np.random.SeedSequence(entropy=entropy, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
