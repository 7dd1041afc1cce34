"""Probabilistic error cancellation for sparse Pauli noise layers.

Each noise term w rho + (1-w) P rho P has the analytic inverse

    a_I rho + a_P P rho P,  a_I = w/(2w-1),  a_P = -(1-w)/(2w-1),

a quasiprobability decomposition with one-norm gamma_k = 1/(2w-1) = e^(2 lambda).
Monte Carlo PEC samples each inverse term (probabilities |a|/gamma_k, signs
sign(a)), runs the still-noisy trajectory with the sampled Paulis inserted, and
weights outcomes by gamma * product of signs, which is unbiased for the
noise-free expectation at the cost of a gamma^2 variance blowup.

The sign-stripped state actually sampled, rho_PEC, is reached by the composite
Pauli channel in which term k flips with probability 2 w_k (1 - w_k); its
output probabilities dominate the noise-free ones as p_x^PEC >= p_x / gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cvarq.circuit import LayeredCircuit, SingleQubitLayer
from cvarq.errors import ResourceLimitError, ValidationError
from cvarq.noise import PauliLindbladModel, apply_pauli_mixing
from cvarq.pauli import PauliString
from cvarq.simulator import (
    DENSE_LIMIT,
    STATEVECTOR_LIMIT,
    Distribution,
    _apply_1q_rho,
    _batch_seeds,
    _cnot_perm,
    _evolve,
    _noisy_layer_terms,
    gate_matrix,
)


@dataclass(frozen=True)
class QpdTerm:
    pauli: PauliString
    p_identity: float  # w_k
    p_pauli: float  # 1 - w_k
    gamma_k: float  # 1/(2 w_k - 1)


@dataclass(frozen=True)
class QpdDecomposition:
    terms: tuple[QpdTerm, ...]
    gamma: float


def qpd_inverse(model: PauliLindbladModel) -> QpdDecomposition:
    """Per-term quasiprobability inverse; total gamma = e^(2 sum lambda)."""
    terms = []
    g = 1.0
    for (p, lam), w in zip(model.terms, model.mixing_weights):
        if w <= 0.5:
            raise ValidationError(
                f"term {p.label()} has mixing weight {w} <= 1/2; not invertible"
            )
        gk = 1.0 / (2.0 * w - 1.0)
        terms.append(QpdTerm(p, float(w), float(1.0 - w), gk))
        g *= gk
    return QpdDecomposition(tuple(terms), g)


def circuit_qpd_gamma(circuit: LayeredCircuit) -> float:
    g = 1.0
    for layer in circuit.cnot_layers():
        if layer.noise is not None:
            g *= qpd_inverse(layer.noise).gamma
    return g


def pec_expectation(
    circuit: LayeredCircuit,
    h,
    shots: int,
    seed: int,
    limit: int = STATEVECTOR_LIMIT,
) -> tuple[float, float]:
    """Sign-weighted Monte Carlo estimate of the noise-free expectation of the
    diagonal observable h (callable on basis-state integers, or lookup table).

    Per shot, every noise term independently both fires as noise (prob 1-w)
    and is picked for QPD insertion (prob 1-w, contributing a -1 sign); the
    two Pauli sets XOR into one inserted pattern, so trajectories with equal
    patterns share a cached output distribution.
    """
    if circuit.n > limit:
        raise ResourceLimitError(
            f"statevector limited to {limit} qubits, got {circuit.n}"
        )
    if shots < 1:
        raise ValidationError("shots must be positive")
    if callable(h):
        table = np.array([h(i) for i in range(1 << circuit.n)], dtype=float)
    else:
        table = np.asarray(h, dtype=float)
    layer_terms = _noisy_layer_terms(circuit)
    n_layers = len(layer_terms)
    gamma_total = circuit_qpd_gamma(circuit)
    all_fp = (
        np.concatenate([fp for _, _, _, fp in layer_terms])
        if n_layers
        else np.empty(0)
    )

    cache: dict[bytes, np.ndarray] = {}

    def cdf_for(key: bytes, masks: np.ndarray) -> np.ndarray:
        cdf = cache.get(key)
        if cdf is None:
            inserted = {
                layer_terms[l][0]: (int(masks[2 * l]), int(masks[2 * l + 1]))
                for l in range(n_layers)
            }
            amp = np.zeros(1 << circuit.n, dtype=complex)
            amp[0] = 1.0
            _evolve(amp, circuit, inserted)
            cdf = np.cumsum(np.abs(amp) ** 2)
            cdf[-1] = 1.0
            cache[key] = cdf
        return cdf

    total = 0.0
    total_sq = 0.0
    for b, size in enumerate(_batch_seeds(shots)):
        rng = np.random.default_rng([seed, b])
        signs = np.ones(size)
        keys = np.zeros((size, 2 * max(n_layers, 1)), dtype=np.uint64)
        if n_layers:
            fires = rng.random((size, all_fp.size)) < all_fp
            picks_qpd = rng.random((size, all_fp.size)) < all_fp
            col = 0
            for l, (_, xs, zs, fp) in enumerate(layer_terms):
                for k in range(fp.size):
                    f = fires[:, col] ^ picks_qpd[:, col]
                    keys[f, 2 * l] ^= xs[k]
                    keys[f, 2 * l + 1] ^= zs[k]
                    col += 1
            signs[picks_qpd.sum(axis=1) % 2 == 1] = -1.0
        draws = rng.random(size)

        if n_layers:
            uniq, inverse = np.unique(keys[:, : 2 * n_layers], axis=0, return_inverse=True)
        else:
            uniq = np.zeros((1, 0), dtype=np.uint64)
            inverse = np.zeros(size, dtype=int)
        vals = np.empty(size)
        for ui in range(uniq.shape[0]):
            row = uniq[ui]
            cdf = cdf_for(row.tobytes(), row)
            sel = inverse == ui
            vals[sel] = table[np.searchsorted(cdf, draws[sel], side="right")]
        vals *= gamma_total * signs
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))

    mean = total / shots
    var = max(total_sq / shots - mean * mean, 0.0) * shots / max(shots - 1, 1)
    return mean, math.sqrt(var / shots)


def pec_sampling_distribution(
    circuit: LayeredCircuit, dense_limit: int = DENSE_LIMIT
) -> Distribution:
    """Diagonal of rho_PEC, the sign-stripped PEC mixture, computed exactly:
    sampling a QPD insertion and then letting the noise fire is itself a Pauli
    channel with per-term flip probability 2 w (1 - w)."""
    if circuit.n > dense_limit:
        raise ResourceLimitError(
            f"dense evolution limited to {dense_limit} qubits, got {circuit.n}"
        )
    dim = 1 << circuit.n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for layer in circuit.layers:
        if isinstance(layer, SingleQubitLayer):
            for g in layer.gates:
                rho = _apply_1q_rho(rho, g.qubit, gate_matrix(g.name, g.angle))
        else:
            if layer.noise is not None:
                for (p, _), w in zip(layer.noise.terms, layer.noise.mixing_weights):
                    rho = apply_pauli_mixing(rho, p, 2.0 * w * (1.0 - w))
            if layer.pairs:
                perm = _cnot_perm(circuit.n, layer.pairs)
                rho = rho[np.ix_(perm, perm)]
    p = np.real(np.diag(rho)).copy()
    p[p < 0] = 0.0
    return Distribution(circuit.n, p / p.sum())
