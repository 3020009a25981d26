"""
Deterministic Randomness for Outbreak Stacking

Every random draw in the project comes from an RngStream derived from
(seed, stream_id). The stream id is (test_case, series_index, purpose tag):
adding a detector, a method or a feature never shifts another stream.

Usage:
    from core.rng import derive_stream

    stream = derive_stream(7, (3, 12, "baseline"))
    counts = stream.generator.poisson(5.0, size=624)
"""

import hashlib
from typing import Tuple

import numpy as np

StreamId = Tuple[int, int, str]

_SEED_MASK = (1 << 64) - 1


def _tag_key(tag: str) -> int:
    """Stable 64-bit key for a purpose tag (hash() is salted per process)"""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """A seeded numpy Generator bound to its derivation key"""

    def __init__(self, seed: int, stream_id: StreamId):
        test_case, series_index, tag = stream_id
        if test_case < 0 or series_index < 0:
            raise ValueError("stream id indices must be non-negative")

        self.seed = int(seed) & _SEED_MASK
        self.stream_id: StreamId = (int(test_case), int(series_index), str(tag))
        sequence = np.random.SeedSequence(
            entropy=self.seed,
            spawn_key=(self.stream_id[0], self.stream_id[1], _tag_key(self.stream_id[2])),
        )
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def child_seed(self) -> int:
        """Draw a 63-bit seed for a nested derivation (e.g. forest trees)"""
        return int(self.generator.integers(0, 2**63 - 1))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def derive_stream(seed: int, stream_id: StreamId) -> RngStream:
    """
    Derive the random stream for one (test case, series, purpose)

    Same inputs always give the same sample sequence; distinct stream ids give
    statistically independent streams.
    """
    return RngStream(seed, stream_id)
