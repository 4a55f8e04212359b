"""Counter-based expansion of one master seed into independent random streams.

Every random draw in the package goes through :func:`stream`, keyed by a
purpose tag and whatever indices identify the draw (sweep point, trial,
row section).  The same keys always give the same stream, no matter how
the work is scheduled.
"""

import numpy as np

SIGNAL = 0
NOISE = 1
PERMUTATION = 2
HAAR = 3


def stream(master_seed, purpose, *keys):
    """Return a fresh ``Generator`` for ``(master_seed, purpose, *keys)``."""
    entropy = [int(master_seed), int(purpose)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise ValueError("seed keys must be non-negative integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
