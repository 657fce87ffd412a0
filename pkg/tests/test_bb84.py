"""Four-state prepare-and-measure variant."""
import itertools
import math

import numpy as np
import pytest

from radiokey import Basis, NuclearQubit, RngSeed, bb84_session, measure, prepare
from radiokey.bb84 import basis_states, outcome_probabilities


def _oracle_states():
    """Local state table, independent of the module under test."""
    s = 1.0 / math.sqrt(2.0)
    return {
        (0, 0): np.array([1.0, 0.0], dtype=complex),
        (0, 1): np.array([0.0, 1.0], dtype=complex),
        (1, 0): np.array([s, s], dtype=complex),
        (1, 1): np.array([s, -s], dtype=complex),
    }


def intercept_resend_qber_oracle() -> float:
    """Brute-force average over the (bit, basis, Eve basis, outcomes) cases."""
    states = _oracle_states()
    weight_total = 0.0
    weight_error = 0.0
    for a_bit, a_basis, e_basis in itertools.product((0, 1), repeat=3):
        psi = states[(a_basis, a_bit)]
        for e_bit in (0, 1):
            p_eve = abs(np.vdot(states[(e_basis, e_bit)], psi)) ** 2
            resent = states[(e_basis, e_bit)]
            for b_bit in (0, 1):
                p_bob = abs(np.vdot(states[(a_basis, b_bit)], resent)) ** 2
                w = 0.125 * p_eve * p_bob  # uniform bit, bases
                weight_total += w
                weight_error += w * (b_bit != a_bit)
    return weight_error / weight_total


def test_prepared_states():
    assert np.allclose(prepare(0, Basis.COMPUTATIONAL).amplitudes, [1, 0])
    assert np.allclose(prepare(1, Basis.COMPUTATIONAL).amplitudes, [0, 1])
    s = 1 / math.sqrt(2)
    assert np.allclose(prepare(0, Basis.DIAGONAL).amplitudes, [s, s])
    assert np.allclose(prepare(1, Basis.DIAGONAL).amplitudes, [s, -s])
    with pytest.raises(ValueError):
        prepare(2, Basis.COMPUTATIONAL)


def test_qubit_norm_validation():
    with pytest.raises(ValueError):
        NuclearQubit(np.array([1.0, 1.0]))
    NuclearQubit(np.array([1.0, 0.0]))  # fine


def test_same_basis_measurement_is_deterministic():
    rng = RngSeed(1).stream("det")
    for basis in Basis:
        for bit in (0, 1):
            qubit = prepare(bit, basis)
            assert all(measure(qubit, basis, rng) == bit for _ in range(16))


def test_unitarity_of_basis_change():
    rng = RngSeed(2).stream("unitary")
    for _ in range(50):
        raw = rng.normal(size=2) + 1j * rng.normal(size=2)
        raw /= math.sqrt(float(np.sum(np.abs(raw) ** 2)))
        qubit = NuclearQubit(raw)
        for basis in Basis:
            probs = outcome_probabilities(qubit, basis)
            assert abs(probs.sum() - 1.0) < 1e-12


def test_basis_states_are_orthonormal():
    for basis in Basis:
        states = basis_states(basis)
        gram = states.conj() @ states.T
        assert np.allclose(gram, np.eye(2), atol=1e-12)


def test_born_statistics_for_all_prepared_states():
    # All four prepared states, measured in both bases: frequencies match
    # the Born probabilities within 3 sigma at 20k shots per case.
    shots = 20_000
    for prep_basis in Basis:
        for bit in (0, 1):
            qubit = prepare(bit, prep_basis)
            for meas_basis in Basis:
                rng = RngSeed(3).stream("born", prep_basis.value, bit, meas_basis.value)
                p1 = outcome_probabilities(qubit, meas_basis)[1]
                outcomes = sum(measure(qubit, meas_basis, rng) for _ in range(shots))
                sigma = math.sqrt(max(p1 * (1 - p1), 1e-12) / shots)
                assert abs(outcomes / shots - p1) <= 3 * sigma + 1e-9


def test_cross_basis_measurement_is_even_coin():
    rng = RngSeed(4).stream("coin")
    shots = 100_000
    qubit = prepare(0, Basis.COMPUTATIONAL)
    ones = sum(measure(qubit, Basis.DIAGONAL, rng) for _ in range(shots))
    assert abs(ones / shots - 0.5) < 3 * math.sqrt(0.25 / shots)


def test_intercept_resend_oracle_is_one_quarter():
    assert intercept_resend_qber_oracle() == pytest.approx(0.25, abs=1e-12)


def test_session_without_eve_has_zero_qber():
    session = bb84_session(50_000, eve_enabled=False, rng=RngSeed(5).stream("clean"))
    assert session.qber == 0.0
    assert np.array_equal(session.sifted_alice, session.sifted_bob)
    n = session.sent
    assert abs(session.sifted_fraction - 0.5) < 3 * math.sqrt(0.25 / n)


def test_session_with_eve_reaches_oracle_qber():
    session = bb84_session(200_000, eve_enabled=True, rng=RngSeed(6).stream("eve"))
    sifted = session.sifted_alice.size
    oracle = intercept_resend_qber_oracle()
    sigma = math.sqrt(oracle * (1 - oracle) / sifted)
    assert sifted > 90_000
    assert abs(session.qber - oracle) < 3 * sigma


def test_session_agrees_with_per_qubit_simulation():
    # The vectorised session and an explicit prepare/measure chain are two
    # routes to the same statistics; compare their eavesdropped QBERs.
    n = 20_000
    rng = RngSeed(7).stream("chain")
    errors = 0
    sifted = 0
    for _ in range(n):
        a_bit = int(rng.integers(0, 2))
        a_basis = Basis.COMPUTATIONAL if rng.integers(0, 2) == 0 else Basis.DIAGONAL
        e_basis = Basis.COMPUTATIONAL if rng.integers(0, 2) == 0 else Basis.DIAGONAL
        b_basis = Basis.COMPUTATIONAL if rng.integers(0, 2) == 0 else Basis.DIAGONAL
        qubit = prepare(a_bit, a_basis)
        e_bit = measure(qubit, e_basis, rng)
        resent = prepare(e_bit, e_basis)
        b_bit = measure(resent, b_basis, rng)
        if a_basis is b_basis:
            sifted += 1
            errors += b_bit != a_bit
    chain_qber = errors / sifted
    session = bb84_session(n, eve_enabled=True, rng=RngSeed(8).stream("vec"))
    spread = math.sqrt(0.25 * 0.75 * (1 / sifted + 1 / session.sifted_alice.size))
    assert abs(chain_qber - session.qber) < 4 * spread


def test_session_validation():
    with pytest.raises(ValueError):
        bb84_session(0, False, RngSeed(9).stream("bad"))
