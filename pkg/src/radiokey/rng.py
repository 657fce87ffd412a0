"""Deterministic random-stream derivation for reproducible Monte Carlo runs.

A single 64-bit master seed plus a tuple of labels (strings or integers)
identifies an independent random substream.  The same (seed, labels)
combination always yields the same bit-identical draw sequence, no matter
how many other streams exist or in which order they are consumed, so
trials can be distributed over any number of workers without changing
results.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_U64_MAX = (1 << 64) - 1


def _label_words(labels: tuple) -> list[int]:
    """Hash a label tuple into eight 32-bit entropy words."""
    encoded = "\x1f".join(str(part) for part in labels).encode("utf-8")
    digest = hashlib.sha256(encoded).digest()
    return np.frombuffer(digest, dtype=np.uint32).tolist()


@dataclass(frozen=True)
class RngSeed:
    """Master seed from which all substreams of a run are derived."""

    master_seed: int

    def __post_init__(self):
        if not 0 <= self.master_seed <= _U64_MAX:
            raise ValueError(
                f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}"
            )

    def stream(self, *labels) -> np.random.Generator:
        """Return the generator for the substream named by ``labels``."""
        entropy = [
            self.master_seed & 0xFFFFFFFF,
            (self.master_seed >> 32) & 0xFFFFFFFF,
            *_label_words(labels),
        ]
        return np.random.default_rng(np.random.SeedSequence(entropy))
