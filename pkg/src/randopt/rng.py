"""Splittable, label-addressed random streams.

Reproducibility contract: a stream is identified by (seed, label) alone.
Child streams are derived by extending the label, and the mapping from
(seed, label) to the underlying counter-based generator goes through
SHA-256, so streams with different labels are statistically independent
and the set of draws never depends on the order in which sibling streams
are created or consumed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_SEED_RANGE = 1 << 63


def _derive_key(seed: int, label: str) -> np.ndarray:
    """Hash (seed, label) to a 128-bit Philox key, as two uint64 words."""
    h = hashlib.sha256()
    h.update(int(seed).to_bytes(8, "little", signed=True))
    h.update(b"\x00")
    h.update(label.encode("utf-8"))
    return np.frombuffer(h.digest()[:16], dtype=np.uint64).copy()


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible source of randomness.

    Attributes:
        seed: master seed shared by a whole experiment.
        label: slash-separated path naming this stream, e.g. "ksat/clause/17".
    """

    seed: int
    label: str = ""

    def __post_init__(self):
        if not (-_SEED_RANGE <= int(self.seed) < _SEED_RANGE):
            raise ParameterError(f"seed out of int64 range: {self.seed}")

    def child(self, sub: str) -> "RngStream":
        """Derive the sub-stream with label `<label>/<sub>`."""
        if not sub:
            raise ParameterError("child label must be non-empty")
        label = f"{self.label}/{sub}" if self.label else sub
        return RngStream(self.seed, label)

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator; same (seed, label) -> same draw sequence."""
        return np.random.Generator(np.random.Philox(key=_derive_key(self.seed, self.label)))
