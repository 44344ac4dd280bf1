"""Deterministic seed derivation for independent PRNG streams.

Every stochastic component (topology generation, per-pair traffic, converter
placement, the assignment decision stream) draws from its own
``random.Random`` seeded through :func:`derive_seed`, so adding or reordering
one consumer never perturbs the draws seen by another.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Hash an arbitrary tag sequence into a 64-bit PRNG seed.

    Stable across processes and platforms (unlike ``hash()``).
    """
    text = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
