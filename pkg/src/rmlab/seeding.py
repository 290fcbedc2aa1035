"""Deterministic, splittable random streams.

A stream is identified by ``(master_seed, stream_index)`` plus an optional
tuple of extra keys.  The mapping to a numpy ``SeedSequence`` spawn key makes
distinct identifiers statistically independent while keeping every draw a pure
function of the identifier.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class SeedStream:
    master_seed: int
    stream_index: int = 0
    keys: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= MAX_SEED:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if int(self.stream_index) < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(
            entropy=int(self.master_seed),
            spawn_key=(int(self.stream_index),) + tuple(int(k) for k in self.keys),
        )
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, *keys: int | str) -> SeedStream:
        return SeedStream(self.master_seed, self.stream_index, self.keys + tuple(_key(k) for k in keys))

    def with_index(self, stream_index: int) -> SeedStream:
        return SeedStream(self.master_seed, stream_index, self.keys)


def _key(k: int | str) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return int(k)
