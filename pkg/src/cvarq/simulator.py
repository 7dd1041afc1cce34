"""Exact statevector / density-matrix evolution of layered circuits, ideal and
noisy sampling, and the compute-uncompute fidelity bound.

Noisy sampling uses Pauli-insertion Monte Carlo: per shot, every noise term of
every noisy CNOT layer fires independently, the fired Paulis are applied as
gates before the layer unitary, and one bit string is drawn from the resulting
pure state.  Shots with the same net inserted Pauli per layer share the same
output distribution, which is cached, so large shot counts stay cheap.

Shots are processed in fixed-size logical batches; batch b uses the RNG stream
seeded by (seed, b).  Results therefore do not depend on how batches are
executed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from cvarq import kernels
from cvarq.circuit import CnotLayer, LayeredCircuit, SingleQubitLayer, inverse_circuit
from cvarq.errors import ResourceLimitError, ValidationError
from cvarq.noise import PauliLindbladModel, apply_channel_dense

STATEVECTOR_LIMIT = 24
DENSE_LIMIT = 10
_LOGICAL_BATCH = 8192

_SQ2 = 1.0 / math.sqrt(2.0)
_FIXED_GATES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "Sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
}


def gate_matrix(name: str, angle: float = 0.0) -> np.ndarray:
    if name in _FIXED_GATES:
        return _FIXED_GATES[name]
    if name == "Rz":
        return np.array(
            [[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex
        )
    if name == "Rx":
        c, s = math.cos(angle / 2), math.sin(angle / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    raise ValidationError(f"unknown gate {name!r}")


# ---------------------------------------------------------------------------
# statevector evolution


def _evolve(state: np.ndarray, circuit: LayeredCircuit,
            inserted: Optional[dict] = None) -> np.ndarray:
    """Apply circuit layers in order; ``inserted`` maps the ordinal of a CNOT
    layer to an (x_mask, z_mask) Pauli applied before that layer's unitary."""
    cnot_ordinal = 0
    for layer in circuit.layers:
        if isinstance(layer, SingleQubitLayer):
            for g in layer.gates:
                kernels.apply_1q(state, g.qubit, gate_matrix(g.name, g.angle))
        else:
            if inserted is not None and cnot_ordinal in inserted:
                x, z = inserted[cnot_ordinal]
                if x or z:
                    kernels.apply_pauli(state, x, z)
            if layer.pairs:
                controls = np.array([c for c, _ in layer.pairs], dtype=np.int64)
                targets = np.array([t for _, t in layer.pairs], dtype=np.int64)
                kernels.apply_cnot_layer(state, controls, targets)
            cnot_ordinal += 1
    return state


def statevector(circuit: LayeredCircuit,
                limit: int = STATEVECTOR_LIMIT) -> np.ndarray:
    if circuit.n > limit:
        raise ResourceLimitError(
            f"statevector limited to {limit} qubits, got {circuit.n}"
        )
    state = np.zeros(1 << circuit.n, dtype=complex)
    state[0] = 1.0
    return _evolve(state, circuit)


def dense_unitary(circuit: LayeredCircuit, limit: int = 12) -> np.ndarray:
    """Full unitary of the circuit, built column by column (oracle helper)."""
    if circuit.n > limit:
        raise ResourceLimitError("dense unitary limited to small circuits")
    dim = 1 << circuit.n
    u = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        col = np.zeros(dim, dtype=complex)
        col[j] = 1.0
        u[:, j] = _evolve(col, circuit)
    return u


# ---------------------------------------------------------------------------
# density-matrix evolution (dense channel oracle)


def _apply_1q_rho(rho: np.ndarray, q: int, m: np.ndarray) -> np.ndarray:
    dim = rho.shape[0]
    # ket side
    v = rho.reshape(dim >> (q + 1), 2, 1 << q, dim)
    a = v[:, 0].copy()
    b = v[:, 1].copy()
    v[:, 0] = m[0, 0] * a + m[0, 1] * b
    v[:, 1] = m[1, 0] * a + m[1, 1] * b
    # bra side
    v = rho.reshape(dim, dim >> (q + 1), 2, 1 << q)
    a = v[:, :, 0].copy()
    b = v[:, :, 1].copy()
    mc = m.conj()
    v[:, :, 0] = mc[0, 0] * a + mc[0, 1] * b
    v[:, :, 1] = mc[1, 0] * a + mc[1, 1] * b
    return rho


def _cnot_perm(n: int, pairs) -> np.ndarray:
    idx = np.arange(1 << n)
    flip = np.zeros(1 << n, dtype=np.int64)
    for c, t in pairs:
        flip ^= ((idx >> c) & 1) << t
    return idx ^ flip


def evolve_density(circuit: LayeredCircuit,
                   dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Evolve |0..0><0..0| with noise applied before each noisy layer unitary."""
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
                rho = apply_channel_dense(layer.noise, rho, dense_limit)
            if layer.pairs:
                perm = _cnot_perm(circuit.n, layer.pairs)
                rho = rho[np.ix_(perm, perm)]
    return rho


# ---------------------------------------------------------------------------
# distributions and sample sets


def int_to_bits(i: int, n: int) -> str:
    return format(i, f"0{n}b")


@dataclass(frozen=True)
class Distribution:
    """Probabilities over n-bit strings, indexed by integer basis state."""

    n: int
    p: np.ndarray

    def __post_init__(self):
        if self.p.shape != (1 << self.n,):
            raise ValidationError("distribution length mismatch")
        if np.any(self.p < -1e-12):
            raise ValidationError("negative probability")
        if abs(float(self.p.sum()) - 1.0) > 1e-10:
            raise ValidationError("probabilities do not sum to 1")

    def prob(self, bitstring: str) -> float:
        return float(self.p[int(bitstring, 2)])

    def expectation(self, values: np.ndarray) -> float:
        return float(np.dot(self.p, values))

    def tv_distance(self, other: "Distribution") -> float:
        return 0.5 * float(np.abs(self.p - other.p).sum())

    def to_json(self) -> str:
        probs = {
            int_to_bits(i, self.n): float(v)
            for i, v in enumerate(self.p)
            if v > 0.0
        }
        return json.dumps({"n": self.n, "probabilities": probs}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Distribution":
        data = json.loads(text)
        p = np.zeros(1 << data["n"])
        for k, v in data["probabilities"].items():
            p[int(k, 2)] = v
        return cls(data["n"], p)


@dataclass(frozen=True)
class SampleSet:
    n: int
    counts: dict  # bitstring -> count
    shots: int
    seed: Optional[int] = None
    provenance: str = "ideal"

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValidationError("counts do not sum to the shot count")

    def int_counts(self) -> tuple[np.ndarray, np.ndarray]:
        ints = np.array([int(b, 2) for b in self.counts], dtype=np.int64)
        cnts = np.array(list(self.counts.values()), dtype=np.int64)
        return ints, cnts

    def values(self, value_fn: Callable[[int], float] | np.ndarray) -> np.ndarray:
        """Expand to one value per shot, applying value_fn (or a lookup table
        over basis-state integers) to each sampled bit string."""
        ints, cnts = self.int_counts()
        if isinstance(value_fn, np.ndarray):
            vals = value_fn[ints]
        else:
            vals = np.array([value_fn(int(i)) for i in ints])
        return np.repeat(vals, cnts)

    def empirical(self) -> Distribution:
        p = np.zeros(1 << self.n)
        ints, cnts = self.int_counts()
        p[ints] = cnts / self.shots
        return Distribution(self.n, p)

    def to_csv(self) -> str:
        lines = ["bitstring,count"]
        for b in sorted(self.counts):
            lines.append(f"{b},{self.counts[b]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, seed: Optional[int] = None,
                 provenance: str = "ideal") -> "SampleSet":
        lines = [l for l in text.strip().splitlines() if l]
        if lines[0] != "bitstring,count":
            raise ValidationError("bad sample CSV header")
        counts = {}
        for line in lines[1:]:
            b, c = line.split(",")
            counts[b] = int(c)
        n = len(next(iter(counts))) if counts else 0
        return cls(n, counts, sum(counts.values()), seed, provenance)


def ideal_distribution(circuit: LayeredCircuit,
                       limit: int = STATEVECTOR_LIMIT) -> Distribution:
    amp = statevector(circuit, limit)
    p = np.abs(amp) ** 2
    return Distribution(circuit.n, p / p.sum())


def noisy_distribution_exact(circuit: LayeredCircuit,
                             dense_limit: int = DENSE_LIMIT) -> Distribution:
    rho = evolve_density(circuit, dense_limit)
    p = np.real(np.diag(rho)).copy()
    p[p < 0] = 0.0
    return Distribution(circuit.n, p / p.sum())


# ---------------------------------------------------------------------------
# Monte Carlo noisy sampling


def _noisy_layer_terms(circuit: LayeredCircuit):
    """Per noisy CNOT layer: (ordinal, x-masks, z-masks, fire probabilities)."""
    out = []
    ordinal = 0
    for layer in circuit.layers:
        if isinstance(layer, CnotLayer):
            if layer.noise is not None and layer.noise.terms:
                xs = np.array([p.x for p, _ in layer.noise.terms], dtype=np.uint64)
                zs = np.array([p.z for p, _ in layer.noise.terms], dtype=np.uint64)
                out.append((ordinal, xs, zs, layer.noise.fire_probs))
            ordinal += 1
    return out


def _batch_seeds(shots: int):
    n_batches = (shots + _LOGICAL_BATCH - 1) // _LOGICAL_BATCH
    sizes = [_LOGICAL_BATCH] * (n_batches - 1)
    sizes.append(shots - _LOGICAL_BATCH * (n_batches - 1))
    return sizes


def sample_noisy(circuit: LayeredCircuit, shots: int, seed: int,
                 limit: int = STATEVECTOR_LIMIT) -> SampleSet:
    """Trajectory sampling of the noisy circuit; deterministic given the seed."""
    if circuit.n > limit:
        raise ResourceLimitError(
            f"statevector limited to {limit} qubits, got {circuit.n}"
        )
    if shots < 1:
        raise ValidationError("shots must be positive")
    layer_terms = _noisy_layer_terms(circuit)
    n_layers = len(layer_terms)
    all_fp = np.concatenate([fp for _, _, _, fp in layer_terms]) if n_layers else np.empty(0)

    cache: dict[bytes, np.ndarray] = {}
    base_key = np.zeros(2 * n_layers, dtype=np.uint64).tobytes()

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
            p = np.abs(amp) ** 2
            cdf = np.cumsum(p)
            cdf[-1] = 1.0
            cache[key] = cdf
        return cdf

    counts: dict[int, int] = {}
    for b, size in enumerate(_batch_seeds(shots)):
        rng = np.random.default_rng([seed, b])
        if n_layers:
            fires = rng.random((size, all_fp.size)) < all_fp
            keys = np.zeros((size, 2 * n_layers), dtype=np.uint64)
            col = 0
            for l, (_, xs, zs, fp) in enumerate(layer_terms):
                for k in range(fp.size):
                    f = fires[:, col]
                    keys[f, 2 * l] ^= xs[k]
                    keys[f, 2 * l + 1] ^= zs[k]
                    col += 1
        else:
            keys = np.zeros((size, 0), dtype=np.uint64)
        picks = rng.random(size)

        if n_layers:
            uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        else:
            uniq, inverse = np.zeros((1, 0), dtype=np.uint64), np.zeros(size, dtype=int)
        for ui in range(uniq.shape[0]):
            row = uniq[ui]
            key = row.tobytes() if n_layers else base_key
            cdf = cdf_for(key, row)
            sel = inverse == ui
            drawn = np.searchsorted(cdf, picks[sel], side="right")
            for i, c in zip(*np.unique(drawn, return_counts=True)):
                counts[int(i)] = counts.get(int(i), 0) + int(c)

    str_counts = {int_to_bits(i, circuit.n): c for i, c in sorted(counts.items())}
    return SampleSet(circuit.n, str_counts, shots, seed, "noisy")


def sample_ideal(circuit: LayeredCircuit, shots: int, seed: int,
                 limit: int = STATEVECTOR_LIMIT) -> SampleSet:
    dist = ideal_distribution(circuit, limit)
    cdf = np.cumsum(dist.p)
    cdf[-1] = 1.0
    counts: dict[int, int] = {}
    for b, size in enumerate(_batch_seeds(shots)):
        rng = np.random.default_rng([seed, b])
        drawn = np.searchsorted(cdf, rng.random(size), side="right")
        for i, c in zip(*np.unique(drawn, return_counts=True)):
            counts[int(i)] = counts.get(int(i), 0) + int(c)
    str_counts = {int_to_bits(i, circuit.n): c for i, c in sorted(counts.items())}
    return SampleSet(circuit.n, str_counts, shots, seed, "ideal")


# ---------------------------------------------------------------------------
# compute-uncompute fidelity bound


def fidelity_upper_bound(
    u: LayeredCircuit,
    v: LayeredCircuit,
    noise: Optional[PauliLindbladModel],
    shots: int,
    alpha: float,
    seed: int = 0,
) -> tuple[float, float]:
    """Upper bound on |<0|V^dag U|0>|^2 from noisy samples of V^dag U.

    The all-zeros indicator is a Bernoulli variable; the upper CVaR of the
    sampled indicators at level alpha upper bounds the noise-free fidelity
    whenever alpha <= 1/sqrt(gamma) of the composite circuit.
    """
    if u.n != v.n:
        raise ValidationError("circuits act on different qubit counts")
    if not (0.0 < alpha <= 1.0):
        raise ValidationError("alpha must be in (0, 1]")
    composite = LayeredCircuit(u.n, u.layers + inverse_circuit(v).layers)
    if noise is not None:
        composite = composite.with_noise_on_cnot_layers(noise)
    samples = sample_noisy(composite, shots, seed)
    k = int(alpha * shots)
    if k < 1:
        raise ValidationError(
            f"alpha={alpha} needs at least {math.ceil(1.0 / alpha)} shots"
        )
    zeros = samples.counts.get("0" * u.n, 0)
    bound = min(zeros, k) / k
    stderr = math.sqrt(max(bound * (1.0 - bound), 1.0 / shots) / k)
    return bound, stderr
