import json
import math

import numpy as np
import pytest

from cvarq.errors import ResourceLimitError, ValidationError
from cvarq.noise import (
    PauliLindbladModel,
    apply_channel_dense,
    apply_superoperator,
    channel_superoperator,
    gamma,
    layer_fidelity,
    ptm,
    sample_error,
    twirl_channel_dense,
)
from cvarq.pauli import PauliString


def _model(n, spec):
    return PauliLindbladModel.from_terms(n, spec)


def test_gamma_and_fidelity():
    m = _model(2, [("XI", 0.1), ("ZZ", 0.25)])
    assert gamma(m) == pytest.approx(math.exp(2 * 0.35), rel=1e-15)
    assert layer_fidelity(m) == pytest.approx(math.exp(-0.35), rel=1e-15)
    empty = PauliLindbladModel(2, ())
    assert gamma(empty) == 1.0


def test_mixing_weights():
    m = _model(1, [("X", 0.05)])
    w = m.mixing_weights[0]
    assert w == pytest.approx((1 + math.exp(-0.1)) / 2, rel=1e-15)
    assert 0.5 < w <= 1.0


def test_validation():
    with pytest.raises(ValidationError):
        _model(1, [("XX", 0.1)])  # wrong size
    with pytest.raises(ValidationError):
        _model(1, [("X", -0.1)])  # negative rate


def test_json_round_trip():
    m = _model(2, [("XI", 0.1), ("-YZ", 0.2)])
    m2 = PauliLindbladModel.from_json(m.to_json())
    assert m2 == m
    payload = json.loads(m.to_json())
    assert payload["terms"][0]["pauli"] == "XI"


def test_channel_dense_matches_superoperator():
    # oracle: build each term's Kraus pair and compose superoperators
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = 2
        terms = []
        for _ in range(3):
            x = int(rng.integers(0, 4))
            z = int(rng.integers(0, 4))
            if x or z:
                terms.append((PauliString(n, x, z), float(rng.uniform(0, 0.3))))
        model = PauliLindbladModel(n, tuple(terms))
        s = np.eye(16, dtype=complex)
        for (p, _), w in zip(model.terms, model.mixing_weights):
            pm = p.to_matrix()
            s = channel_superoperator(
                [math.sqrt(w) * np.eye(4), math.sqrt(1 - w) * pm]
            ) @ s
        rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = rho @ rho.conj().T
        rho /= np.trace(rho)
        assert np.allclose(
            apply_channel_dense(model, rho), apply_superoperator(s, rho), atol=1e-12
        )


def test_channel_dense_limit():
    m = PauliLindbladModel(12, ())
    with pytest.raises(ResourceLimitError):
        apply_channel_dense(m, np.eye(1 << 12, dtype=complex))


def test_clean_shot_probability_exceeds_inverse_sqrt_gamma():
    # prod w_k >= 1/sqrt(gamma) holds exactly, not just to first order
    rng = np.random.default_rng(6)
    for _ in range(200):
        lams = rng.uniform(0, 0.5, size=rng.integers(1, 6))
        w = (1 + np.exp(-2 * lams)) / 2
        assert np.prod(w) >= math.exp(-float(lams.sum())) - 1e-15


def test_sample_error_statistics():
    m = _model(1, [("X", 0.2)])
    rng = np.random.default_rng(7)
    fire = m.fire_probs[0]
    hits = sum(
        not sample_error(m, rng).is_empty for _ in range(20000)
    )
    assert hits / 20000 == pytest.approx(fire, abs=4 * math.sqrt(fire / 20000))


def _amplitude_damping(g):
    k0 = np.array([[1, 0], [0, math.sqrt(1 - g)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(g)], [0, 0]], dtype=complex)
    return [k0, k1]


def test_twirl_diagonalizes_nonpauli_channel():
    tw = twirl_channel_dense(_amplitude_damping(0.3))
    s_ptm = ptm(tw.superoperator, 1)
    assert np.allclose(s_ptm, np.diag(np.diag(s_ptm)), atol=1e-10)
    probs = np.array(list(tw.pauli_probs.values()))
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(probs >= -1e-10)


def test_twirl_amplitude_damping_known_probs():
    # hand calculation: PTM diag of amp damping is (1, sqrt(1-g), sqrt(1-g), 1-g);
    # character inversion gives the Pauli-channel probabilities below
    g = 0.3
    r = math.sqrt(1 - g)
    tw = twirl_channel_dense(_amplitude_damping(g))
    want = {
        "I": (1 + 2 * r + (1 - g)) / 4,
        "X": g / 4,
        "Y": g / 4,
        "Z": (1 - 2 * r + (1 - g)) / 4,
    }
    for k, v in want.items():
        assert tw.pauli_probs[k] == pytest.approx(v, abs=1e-12)


def test_twirl_fixes_pauli_channel():
    # a channel that is already Pauli is invariant under twirling
    p = 0.2
    kraus = [
        math.sqrt(1 - p) * np.eye(2, dtype=complex),
        math.sqrt(p) * PauliString.from_label("X").to_matrix(),
    ]
    tw = twirl_channel_dense(kraus)
    s = channel_superoperator(kraus)
    assert np.allclose(tw.superoperator, s, atol=1e-12)
    assert tw.pauli_probs["X"] == pytest.approx(p, abs=1e-12)


def test_twirl_two_qubit_channel():
    rng = np.random.default_rng(8)
    # random CPTP map from a random isometry
    m = rng.normal(size=(12, 4)) + 1j * rng.normal(size=(12, 4))
    q, _ = np.linalg.qr(m)
    kraus = [q[4 * i: 4 * i + 4, :] for i in range(3)]
    tw = twirl_channel_dense(kraus)
    s_ptm = ptm(tw.superoperator, 2)
    assert np.allclose(s_ptm, np.diag(np.diag(s_ptm)), atol=1e-10)
    probs = np.array(list(tw.pauli_probs.values()))
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)


def test_twirl_rejects_non_tp():
    with pytest.raises(ValidationError):
        twirl_channel_dense([0.5 * np.eye(2, dtype=complex)])
