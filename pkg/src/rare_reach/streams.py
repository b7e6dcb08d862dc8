"""Counter-based random streams for reproducible parallel Monte Carlo.

Every replication of every experiment draws from its own Philox stream,
keyed by (master seed, experiment label, replication index, ...).  Streams
are independent of worker count and scheduling order: replication k of
experiment "foo" sees the same bits whether it runs alone, in a batch, in a
thread pool or in a process pool.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "stream_seed", "derive_seed"]

_U64 = 2**64


def _key_word(part: int | float | str) -> int:
    """Map one key component to a u64 word (strings and floats via sha256)."""
    if isinstance(part, bool):  # bool is an int subclass; be explicit
        return int(part)
    if isinstance(part, (int, np.integer)):
        return int(part) % _U64
    if isinstance(part, (float, np.floating)):
        part = repr(float(part))  # shortest round-trip text, platform-stable
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"stream key parts must be int, float or str, got {type(part)!r}")


def stream_seed(master_seed: int, *path: int | float | str) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream addressed by ``path``."""
    return np.random.SeedSequence(
        entropy=_key_word(master_seed),
        spawn_key=tuple(_key_word(p) for p in path),
    )


def stream(master_seed: int, *path: int | float | str) -> np.random.Generator:
    """Counter-based generator for the sub-stream addressed by ``path``."""
    return np.random.Generator(np.random.Philox(stream_seed(master_seed, *path)))


def derive_seed(master_seed: int, *path: int | float | str) -> int:
    """A u64 master seed for a child experiment, derived from ``path``."""
    return int(stream_seed(master_seed, *path).generate_state(1, np.uint64)[0])
