"""Seed derivation and generator construction.

Every random draw in the package goes through :func:`make_rng`, which wraps
numpy's counter-based Philox bit generator. Standard normal variates come from
``Generator.standard_normal`` (numpy's ziggurat method). Sub-seeds for
independent tasks (grid points, folds, repetitions, rows) are obtained by
hashing the parent seed together with a tuple of task coordinates, so results
never depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

_MASK64 = (1 << 64) - 1


def _canonical(part) -> str:
    if isinstance(part, np.generic):
        part = part.item()
    if isinstance(part, float):
        return repr(part)
    if isinstance(part, (list, tuple)):
        return "[" + ",".join(_canonical(p) for p in part) + "]"
    if isinstance(part, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_canonical(v)}" for k, v in sorted(part.items())) + "}"
    return str(part)


def derive_seed(seed: int, *parts) -> int:
    """Return a 64-bit sub-seed from ``seed`` and arbitrary task coordinates."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & _MASK64).encode())
    for p in parts:
        h.update(b"\x1f")
        h.update(_canonical(p).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))
