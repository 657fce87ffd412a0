"""Classical post-treatment: error estimation, reconciliation, privacy amplification.

The public channel is assumed authenticated.  Every bit disclosed on it is
accounted for: sampled bits are removed from the keys outright, and every
parity revealed during reconciliation increments the leakage ledger that
privacy amplification later consumes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ReconciliationError

#: Error rate above which parity reconciliation is uneconomical.
ABORT_ERROR_RATE = 0.15

#: Numerator of the initial-block-size heuristic block ~ 0.73 / error_rate.
BLOCK_HEURISTIC = 0.73

_MAX_PASSES = 16


def estimate_error_rate(
    alice_raw: np.ndarray,
    bob_raw: np.ndarray,
    sample_fraction: float,
    rng: np.random.Generator,
) -> tuple[float, np.ndarray]:
    """Disclose a random sample of both keys and compare it.

    Returns the observed mismatch rate and the disclosed indices, which
    must be removed from both keys before reconciliation.
    """
    alice_raw = np.asarray(alice_raw, dtype=np.uint8)
    bob_raw = np.asarray(bob_raw, dtype=np.uint8)
    if alice_raw.size != bob_raw.size:
        raise ValueError("keys must have equal length")
    if alice_raw.size == 0:
        raise ValueError("cannot estimate the error rate of empty keys")
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError("sample_fraction must lie in (0, 1]")
    n = alice_raw.size
    k = max(1, int(round(sample_fraction * n)))
    disclosed = np.sort(rng.permutation(n)[:k])
    rate = float(np.mean(alice_raw[disclosed] != bob_raw[disclosed]))
    return rate, disclosed


def remove_indices(key: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Drop the disclosed positions from a key."""
    return np.delete(np.asarray(key, dtype=np.uint8), indices)


@dataclass
class ReconciliationResult:
    """Corrected keys plus an exact ledger of every parity disclosed."""

    alice_key: np.ndarray
    bob_key: np.ndarray
    corrections: int
    block_parity_bits: int
    search_parity_bits: int
    confirm_parity_bits: int
    passes: int

    @property
    def leakage(self) -> int:
        return self.block_parity_bits + self.search_parity_bits + self.confirm_parity_bits


def _parity(bits: np.ndarray) -> int:
    return int(bits.sum()) & 1


def _locate_mismatch(alice, bob, segment, counter) -> int:
    """Binary-search a segment with odd mismatch count down to one index.

    Each halving discloses one parity (the left half's); the other half's
    parity is inferred.  Returns the located index, guaranteed to differ.
    """
    while segment.size > 1:
        half = segment.size // 2
        left = segment[:half]
        counter["search"] += 1
        if _parity(alice[left]) != _parity(bob[left]):
            segment = left
        else:
            segment = segment[half:]
    return int(segment[0])


def reconcile(
    alice_key: np.ndarray,
    bob_key: np.ndarray,
    rng: np.random.Generator,
    error_rate: float | None = None,
    confidence_bits: int = 30,
) -> ReconciliationResult:
    """Interactive block-parity reconciliation of Bob's key against Alice's.

    Runs shuffled block-parity passes with doubling block size (at least
    two), binary-searching one error inside every mismatching block, until
    a pass finds nothing.  Random-subset parity checks then confirm
    agreement: ``confidence_bits`` consecutive clean checks leave a
    residual-mismatch probability of at most ``2 ** -confidence_bits``,
    since each random parity catches any surviving error pattern with
    probability one half.

    Args:
        error_rate: prior estimate used to size the first blocks; defaults
            to the keys' actual mismatch rate.

    Raises:
        ReconciliationError: when more than 15% of the bits disagree.
    """
    alice = np.asarray(alice_key, dtype=np.uint8).copy()
    bob = np.asarray(bob_key, dtype=np.uint8).copy()
    if alice.size != bob.size:
        raise ValueError("keys must have equal length")
    n = alice.size
    if n == 0:
        raise ValueError("cannot reconcile empty keys")
    if confidence_bits < 1:
        raise ValueError("confidence_bits must be positive")

    actual_rate = float(np.mean(alice != bob))
    if actual_rate > ABORT_ERROR_RATE:
        raise ReconciliationError(
            f"error rate {actual_rate:.3f} exceeds {ABORT_ERROR_RATE}; aborting"
        )
    rate = actual_rate if error_rate is None else error_rate
    if rate <= 0:
        block = n
    else:
        block = min(n, max(8, math.ceil(BLOCK_HEURISTIC / rate)))

    counter = {"block": 0, "search": 0, "confirm": 0}
    corrections = 0
    passes = 0
    while passes < _MAX_PASSES:
        size = min(n, block * 2**passes)
        perm = rng.permutation(n)
        corrected_this_pass = 0
        for start in range(0, n, size):
            segment = perm[start : start + size]
            counter["block"] += 1
            if _parity(alice[segment]) != _parity(bob[segment]):
                idx = _locate_mismatch(alice, bob, segment, counter)
                bob[idx] ^= 1
                corrected_this_pass += 1
        corrections += corrected_this_pass
        passes += 1
        if passes >= 2 and corrected_this_pass == 0:
            break

    clean = 0
    while clean < confidence_bits:
        subset = np.flatnonzero(rng.integers(0, 2, size=n, dtype=np.uint8))
        counter["confirm"] += 1
        if subset.size and _parity(alice[subset]) != _parity(bob[subset]):
            idx = _locate_mismatch(alice, bob, subset, counter)
            bob[idx] ^= 1
            corrections += 1
            clean = 0
        else:
            clean += 1

    return ReconciliationResult(
        alice_key=alice,
        bob_key=bob,
        corrections=corrections,
        block_parity_bits=counter["block"],
        search_parity_bits=counter["search"],
        confirm_parity_bits=counter["confirm"],
        passes=passes,
    )


@dataclass(frozen=True, eq=False)
class HashSeed:
    """Random bits parameterising one member of the Toeplitz hash family.

    The seed holds the first row and first column of the matrix:
    ``input_len + output_len - 1`` bits in total.
    """

    bits: np.ndarray
    input_len: int
    output_len: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        object.__setattr__(self, "bits", bits)
        if self.input_len < 1 or self.output_len < 1:
            raise ValueError("input and output lengths must be positive")
        if bits.size != self.input_len + self.output_len - 1:
            raise ValueError(
                f"seed needs {self.input_len + self.output_len - 1} bits, "
                f"got {bits.size}"
            )
        if np.any(bits > 1):
            raise ValueError("seed bits must be 0 or 1")

    @classmethod
    def generate(
        cls, input_len: int, output_len: int, rng: np.random.Generator
    ) -> "HashSeed":
        bits = rng.integers(0, 2, size=input_len + output_len - 1, dtype=np.uint8)
        return cls(bits=bits, input_len=input_len, output_len=output_len)


def toeplitz_hash(key: np.ndarray, seed: HashSeed) -> np.ndarray:
    """Multiply the key by the seed's Toeplitz matrix over GF(2).

    The matrix-vector product is a slice of the integer convolution of the
    seed with the key, reduced mod 2; exact and fast at any desk scale.
    """
    key = np.asarray(key, dtype=np.int64)
    n, m = seed.input_len, seed.output_len
    if key.size != n:
        raise ValueError(f"key length {key.size} does not match seed input {n}")
    conv = np.convolve(seed.bits.astype(np.int64), key)
    return (conv[n - 1 : n - 1 + m] & 1).astype(np.uint8)


def final_key_length(
    raw_length: int, eve_bound: float, leakage: int, security_bits: int
) -> int:
    """Output length after removing Eve's bound, the leakage, and a margin.

    ``m = max(0, n - ceil(n * eve_bound) - leakage - security_bits)``.
    """
    if not 0.0 <= eve_bound <= 1.0:
        raise ValueError("eve_bound must lie in [0, 1]")
    if leakage < 0 or security_bits < 0:
        raise ValueError("leakage and security_bits must be non-negative")
    return max(0, raw_length - math.ceil(raw_length * eve_bound) - leakage - security_bits)


@dataclass
class AmplifiedKey:
    """Privacy-amplification output; ``status`` is ABORTED when nothing is left."""

    bits: np.ndarray
    status: str
    input_length: int
    output_length: int

    @property
    def hex(self) -> str:
        """Final key as hexadecimal text (last byte zero-padded)."""
        if self.bits.size == 0:
            return ""
        return np.packbits(self.bits).tobytes().hex()


def privacy_amplify(
    key: np.ndarray,
    leakage: int,
    eve_bound: float,
    security_bits: int,
    seed: HashSeed | None = None,
    rng: np.random.Generator | None = None,
) -> AmplifiedKey:
    """Compress the reconciled key, removing Eve's knowledge budget.

    Exactly one of ``seed`` and ``rng`` must be supplied: a seed sized for
    the computed output length, or a generator from which to draw one.
    """
    key = np.asarray(key, dtype=np.uint8)
    n = key.size
    if n == 0:
        raise ValueError("cannot amplify an empty key")
    m = final_key_length(n, eve_bound, leakage, security_bits)
    if m == 0:
        return AmplifiedKey(
            bits=np.empty(0, dtype=np.uint8),
            status="ABORTED",
            input_length=n,
            output_length=0,
        )
    if (seed is None) == (rng is None):
        raise ValueError("supply exactly one of seed and rng")
    if seed is None:
        seed = HashSeed.generate(n, m, rng)
    if seed.input_len != n or seed.output_len != m:
        raise ValueError(
            f"seed is sized for {seed.input_len}->{seed.output_len}, "
            f"but this key needs {n}->{m}"
        )
    return AmplifiedKey(
        bits=toeplitz_hash(key, seed),
        status="OK",
        input_length=n,
        output_length=m,
    )


@dataclass
class KeyLedger:
    """Full accounting of one key-distillation session."""

    alice_raw: np.ndarray
    bob_raw: np.ndarray
    disclosed_sample_indices: np.ndarray
    estimated_error_rate: float
    reconciliation_leakage: int
    eve_bound: float
    security_bits: int
    final_key: np.ndarray
    status: str
    residual_mismatches: int

    def __post_init__(self):
        kept = self.alice_raw.size - self.disclosed_sample_indices.size
        limit = max(0, kept - self.reconciliation_leakage)
        if self.final_key.size > limit:
            raise ValueError("final key cannot exceed the kept length minus leakage")

    @property
    def final_hex(self) -> str:
        if self.final_key.size == 0:
            return ""
        return np.packbits(self.final_key).tobytes().hex()

    def to_dict(self) -> dict:
        return {
            "raw_length": int(self.alice_raw.size),
            "disclosed_samples": int(self.disclosed_sample_indices.size),
            "estimated_error_rate": self.estimated_error_rate,
            "reconciliation_leakage": int(self.reconciliation_leakage),
            "eve_bound": self.eve_bound,
            "security_bits": int(self.security_bits),
            "final_length": int(self.final_key.size),
            "final_key_hex": self.final_hex,
            "status": self.status,
            "residual_mismatches": int(self.residual_mismatches),
        }


def distill_key(
    alice_raw: np.ndarray,
    bob_raw: np.ndarray,
    eve_bound: float,
    rng: np.random.Generator,
    sample_fraction: float = 0.2,
    security_bits: int = 64,
    confidence_bits: int = 30,
) -> KeyLedger:
    """Run the whole pipeline: estimate, reconcile, amplify.

    Returns a ledger whose final key is Bob's; ``residual_mismatches``
    counts any disagreement left between the corrected keys (zero in all
    but a ``2 ** -confidence_bits`` fraction of runs).
    """
    alice_raw = np.asarray(alice_raw, dtype=np.uint8)
    bob_raw = np.asarray(bob_raw, dtype=np.uint8)
    rate, disclosed = estimate_error_rate(alice_raw, bob_raw, sample_fraction, rng)
    alice = remove_indices(alice_raw, disclosed)
    bob = remove_indices(bob_raw, disclosed)
    empty = np.empty(0, dtype=np.uint8)
    if alice.size == 0:
        return KeyLedger(
            alice_raw, bob_raw, disclosed, rate, 0, eve_bound, security_bits,
            empty, "ABORTED", 0,
        )
    try:
        rec = reconcile(alice, bob, rng, error_rate=rate, confidence_bits=confidence_bits)
    except ReconciliationError:
        return KeyLedger(
            alice_raw, bob_raw, disclosed, rate, 0, eve_bound, security_bits,
            empty, "ABORTED", int(np.sum(alice != bob)),
        )
    residual = int(np.sum(rec.alice_key != rec.bob_key))
    amplified = privacy_amplify(
        rec.bob_key, rec.leakage, eve_bound, security_bits, rng=rng
    )
    return KeyLedger(
        alice_raw=alice_raw,
        bob_raw=bob_raw,
        disclosed_sample_indices=disclosed,
        estimated_error_rate=rate,
        reconciliation_leakage=rec.leakage,
        eve_bound=eve_bound,
        security_bits=security_bits,
        final_key=amplified.bits,
        status=amplified.status,
        residual_mismatches=residual,
    )
