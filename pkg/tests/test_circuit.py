import numpy as np
import pytest

from cvarq.circuit import (
    CnotLayer,
    Gate,
    LayeredCircuit,
    SingleQubitLayer,
    from_json,
    insert_pauli_twirl,
    inverse_circuit,
    stats,
    to_json,
    total_gamma,
    total_layer_fidelity,
)
from cvarq.errors import ValidationError
from cvarq.noise import PauliLindbladModel, gamma


def _bell():
    return LayeredCircuit(
        2, (SingleQubitLayer((Gate(0, "H"),)), CnotLayer(((0, 1),)))
    )


def test_gate_validation():
    with pytest.raises(ValidationError):
        Gate(0, "T")


def test_cnot_layer_disjointness():
    with pytest.raises(ValidationError):
        CnotLayer(((0, 1), (1, 2)))
    with pytest.raises(ValidationError):
        CnotLayer(((0, 0),))


def test_circuit_qubit_range_checked():
    with pytest.raises(ValidationError):
        LayeredCircuit(2, (CnotLayer(((0, 2),)),))


def test_stats_and_classes():
    c = LayeredCircuit(
        4,
        (
            CnotLayer(((0, 1), (2, 3)), label="a"),
            CnotLayer(((1, 2),), label="b"),
            CnotLayer(((0, 3),), label="a"),
        ),
    )
    s = stats(c)
    assert s.cnot_count == 4
    assert s.cnot_depth == 3
    assert s.per_class == {"a": 3, "b": 1}


def test_total_gamma_multiplies_layers():
    m = PauliLindbladModel.from_terms(2, [("XI", 0.1), ("ZZ", 0.2)])
    c = _bell().with_noise_on_cnot_layers(m)
    c = c.extended([CnotLayer(((1, 0),), noise=m)])
    assert total_gamma(c) == pytest.approx(gamma(m) ** 2, rel=1e-12)
    assert total_layer_fidelity(c) == pytest.approx(gamma(m) ** -1.0, rel=1e-12)


def test_inverse_circuit_is_inverse():
    from cvarq.simulator import dense_unitary

    rng = np.random.default_rng(21)
    layers = [
        SingleQubitLayer((Gate(0, "H"), Gate(1, "S"), Gate(2, "Rz", 0.7))),
        CnotLayer(((0, 2),)),
        SingleQubitLayer((Gate(1, "Rx", -1.2), Gate(2, "Sdg"))),
        CnotLayer(((1, 0),)),
    ]
    c = LayeredCircuit(3, tuple(layers))
    u = dense_unitary(c)
    v = dense_unitary(inverse_circuit(c))
    assert np.allclose(v @ u, np.eye(8), atol=1e-12)


def test_inverse_drops_noise():
    m = PauliLindbladModel.from_terms(2, [("XI", 0.1)])
    c = _bell().with_noise_on_cnot_layers(m)
    inv = inverse_circuit(c)
    assert all(l.noise is None for l in inv.cnot_layers())


def test_twirl_preserves_unitary_up_to_sign():
    from cvarq.simulator import dense_unitary

    rng = np.random.default_rng(22)
    c = LayeredCircuit(
        3,
        (
            SingleQubitLayer((Gate(0, "H"), Gate(2, "Rx", 0.4))),
            CnotLayer(((0, 1),)),
            CnotLayer(((2, 0),)),
        ),
    )
    u = dense_unitary(c)
    for _ in range(20):
        tw, signs = insert_pauli_twirl(c, rng)
        ut = dense_unitary(tw)
        s = np.prod(signs)
        assert np.allclose(ut, s * u, atol=1e-12)


def test_json_round_trip():
    m = PauliLindbladModel.from_terms(2, [("XI", 0.1)])
    c = LayeredCircuit(
        2,
        (
            SingleQubitLayer((Gate(0, "H"), Gate(1, "Rz", 0.25))),
            CnotLayer(((0, 1),), noise=m, label="c0"),
        ),
    )
    c2 = from_json(to_json(c))
    assert c2 == c
