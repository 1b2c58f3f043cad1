"""Counter-based random streams.

Every Gaussian increment is a pure function of ``(master_seed, path, step)``:
Philox4x64-10 keyed by ``(master_seed, STREAM_TAG)`` is applied to the counter
``(step // 4, path, stream, 0)`` and the four outputs are turned into four
normals by Box-Muller. Stream 0 carries the increments, stream 1 the uniforms
of the Brownian-bridge exit test. Results therefore do not depend on how paths
are split between workers.
"""
from __future__ import annotations

import numpy as np

from ._core import backend

#: second Philox key word, fixed for the package
STREAM_TAG = 0x736C6F7764696666
MASK64 = (1 << 64) - 1


def philox_key(master_seed: int) -> tuple[int, int]:
    return int(master_seed) & MASK64, STREAM_TAG


def path_normals(master_seed: int, paths, n_steps: int) -> np.ndarray:
    """Increments used by the simulator for the given paths, shape (len(paths), n_steps)."""
    k0, k1 = philox_key(master_seed)
    return backend.normals(np.asarray(paths, dtype=np.uint64), int(n_steps), k0, k1)


def generator(master_seed: int, purpose: int) -> np.random.Generator:
    """A numpy Generator for auxiliary sampling, keyed by seed and a purpose tag."""
    return np.random.Generator(np.random.Philox(key=[int(master_seed) & MASK64, STREAM_TAG ^ int(purpose)]))
