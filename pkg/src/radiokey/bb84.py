"""Four-state prepare-and-measure variant using nuclear two-level qubits.

Instead of betting on decay timing, a bit can be written into the quantum
state of a single nucleus over the {ground, metastable} levels and read in
one of two conjugate bases: the computational basis {ground, metastable}
or the diagonal basis {(ground + metastable)/sqrt(2),
(ground - metastable)/sqrt(2)}.  Intercepting and resending in a random
basis then shows up as a 25% error rate on the sifted key, exactly as in
any four-state protocol.

Pure states only: decay and decoherence are deliberately not mixed into
this module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_NORM_TOL = 1e-12


class Basis(Enum):
    COMPUTATIONAL = "computational"
    DIAGONAL = "diagonal"


_BASIS_STATES = {
    Basis.COMPUTATIONAL: np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex),
    Basis.DIAGONAL: np.array(
        [[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex
    ),
}


@dataclass(frozen=True, eq=False)
class NuclearQubit:
    """Unit-norm state over {ground, metastable}; amplitudes (a_ground, a_meta)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (2,):
            raise ValueError("a qubit needs exactly two amplitudes")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state norm {norm} deviates from 1 beyond {_NORM_TOL}")


def basis_states(basis: Basis) -> np.ndarray:
    """The two orthonormal states of a basis, as rows (bit 0, bit 1)."""
    return _BASIS_STATES[basis].copy()


def prepare(bit: int, basis: Basis) -> NuclearQubit:
    """Encode a bit as the corresponding basis state."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    return NuclearQubit(_BASIS_STATES[basis][bit])


def outcome_probabilities(qubit: NuclearQubit, basis: Basis) -> np.ndarray:
    """Born probabilities of reading 0 and 1 in the given basis."""
    overlaps = _BASIS_STATES[basis].conj() @ qubit.amplitudes
    return np.abs(overlaps) ** 2


def measure(qubit: NuclearQubit, basis: Basis, rng: np.random.Generator) -> int:
    """Born-rule measurement; wrong-basis readings of basis states are coin flips."""
    probs = outcome_probabilities(qubit, basis)
    return int(rng.random() < probs[1])


@dataclass
class SessionResult:
    """One prepare-and-measure session after basis sifting."""

    sent: int
    sifted_alice: np.ndarray
    sifted_bob: np.ndarray
    qber: float
    sifted_fraction: float
    eve_enabled: bool

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "sifted_length": int(self.sifted_alice.size),
            "qber": self.qber,
            "sifted_fraction": self.sifted_fraction,
            "eve_enabled": self.eve_enabled,
        }


def bb84_session(
    n: int, eve_enabled: bool, rng: np.random.Generator
) -> SessionResult:
    """Run a session of ``n`` prepared qubits and sift on matching bases.

    Vectorised over qubits: with these four states, a same-basis reading
    reproduces the prepared bit with certainty and a cross-basis reading is
    a fair coin, which is exactly the Born rule of :func:`measure`.  An
    enabled Eve measures every qubit in a random basis and resends her
    outcome.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    alice_bits = rng.integers(0, 2, size=n, dtype=np.uint8)
    alice_bases = rng.integers(0, 2, size=n, dtype=np.uint8)
    if eve_enabled:
        eve_bases = rng.integers(0, 2, size=n, dtype=np.uint8)
        eve_coins = rng.random(n)
        resend_bits = np.where(
            eve_bases == alice_bases, alice_bits, (eve_coins < 0.5).astype(np.uint8)
        )
        resend_bases = eve_bases
    else:
        resend_bits = alice_bits
        resend_bases = alice_bases
    bob_bases = rng.integers(0, 2, size=n, dtype=np.uint8)
    bob_coins = rng.random(n)
    bob_bits = np.where(
        bob_bases == resend_bases, resend_bits, (bob_coins < 0.5).astype(np.uint8)
    ).astype(np.uint8)

    mask = alice_bases == bob_bases
    sifted_alice = alice_bits[mask]
    sifted_bob = bob_bits[mask]
    qber = float(np.mean(sifted_alice != sifted_bob)) if sifted_alice.size else 0.0
    return SessionResult(
        sent=n,
        sifted_alice=sifted_alice,
        sifted_bob=sifted_bob,
        qber=qber,
        sifted_fraction=sifted_alice.size / n,
        eve_enabled=eve_enabled,
    )
