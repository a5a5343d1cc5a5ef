"""Deterministic seed derivation.

Every random stream in the package is keyed by a tuple of non-negative
integers so that results do not depend on evaluation order or worker count.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def stream(*keys: int) -> np.random.Generator:
    """Return a generator whose state depends only on ``keys``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) & MASK64 for k in keys])))


def derive_seed(*keys: int) -> int:
    """Collapse ``keys`` into a single 64-bit seed."""
    state = np.random.SeedSequence([int(k) & MASK64 for k in keys]).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
