"""Sparse Pauli noise channels of the form

    Lambda(rho) = prod_k [ w_k rho + (1 - w_k) P_k rho P_k ],
    w_k = (1 + exp(-2 lambda_k)) / 2.

The channel strength is gamma = exp(2 sum_k lambda_k) and the corresponding
layer fidelity is 1/sqrt(gamma).  Error events are sampled exactly (each term
fires independently with probability 1 - w_k), so the probability of a clean
shot is prod_k w_k >= 1/sqrt(gamma) as an exact inequality, not a first-order
approximation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cvarq.errors import ResourceLimitError, ValidationError
from cvarq.pauli import PauliString

DENSE_LIMIT = 10


@dataclass(frozen=True)
class PauliLindbladModel:
    n: int
    terms: tuple[tuple[PauliString, float], ...]

    def __post_init__(self):
        for p, lam in self.terms:
            if p.n != self.n:
                raise ValidationError(f"term {p.label()} has wrong qubit count")
            if lam < 0:
                raise ValidationError(f"negative rate {lam} for term {p.label()}")

    @classmethod
    def from_terms(cls, n: int, terms: Sequence[tuple[PauliString | str, float]]):
        parsed = tuple(
            (PauliString.from_label(p) if isinstance(p, str) else p, float(lam))
            for p, lam in terms
        )
        return cls(n, parsed)

    @property
    def rates(self) -> np.ndarray:
        return np.array([lam for _, lam in self.terms], dtype=float)

    @property
    def mixing_weights(self) -> np.ndarray:
        """w_k = (1 + exp(-2 lambda_k)) / 2, each in (1/2, 1]."""
        return (1.0 + np.exp(-2.0 * self.rates)) / 2.0

    @property
    def fire_probs(self) -> np.ndarray:
        return 1.0 - self.mixing_weights

    def concat(self, other: "PauliLindbladModel") -> "PauliLindbladModel":
        if other.n != self.n:
            raise ValidationError("qubit count mismatch in concat")
        return PauliLindbladModel(self.n, self.terms + other.terms)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "terms": [{"pauli": p.label(), "lambda": lam} for p, lam in self.terms],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "PauliLindbladModel":
        data = json.loads(text)
        return cls.from_terms(
            data["n"], [(t["pauli"], t["lambda"]) for t in data["terms"]]
        )


@dataclass(frozen=True)
class ErrorEvent:
    layer_index: int
    fired: tuple[PauliString, ...]

    @property
    def is_empty(self) -> bool:
        return not self.fired


def gamma(model: PauliLindbladModel) -> float:
    """Overall channel strength exp(2 sum_k lambda_k); multiplicative under concat."""
    return math.exp(2.0 * float(np.sum(model.rates))) if model.terms else 1.0


def layer_fidelity(model: PauliLindbladModel) -> float:
    return 1.0 / math.sqrt(gamma(model))


def sample_error(model: PauliLindbladModel, rng: np.random.Generator,
                 layer_index: int = 0) -> ErrorEvent:
    """Draw one error event; each term fires independently w.p. 1 - w_k."""
    u = rng.random(len(model.terms))
    fired = tuple(p for (p, _), ui, fp in zip(model.terms, u, model.fire_probs) if ui < fp)
    return ErrorEvent(layer_index, fired)


def _pauli_indices(n: int, p: PauliString):
    """Index permutation and sign vector implementing rho -> P rho P densely."""
    dim = 1 << n
    idx = np.arange(dim)
    perm = idx ^ p.x
    if p.z:
        if hasattr(np, "bitwise_count"):
            par = np.bitwise_count(idx & p.z) & 1
        else:
            v = (idx & p.z).astype(np.uint64)
            for s in (32, 16, 8, 4, 2, 1):
                v ^= v >> np.uint64(s)
            par = (v & np.uint64(1)).astype(np.intp)
        signs = 1.0 - 2.0 * par
    else:
        signs = np.ones(dim)
    return perm, signs


def apply_pauli_mixing(rho: np.ndarray, p: PauliString, flip_prob: float) -> np.ndarray:
    """rho -> (1 - q) rho + q P rho P for a single Pauli term."""
    perm, signs = _pauli_indices(p.n, p)
    conj = rho[np.ix_(perm, perm)] * np.outer(signs[perm], signs[perm])
    return (1.0 - flip_prob) * rho + flip_prob * conj


def apply_channel_dense(model: PauliLindbladModel, rho: np.ndarray,
                        dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    """Apply the full channel to a density matrix (n <= dense_limit qubits)."""
    if model.n > dense_limit:
        raise ResourceLimitError(
            f"dense channel limited to {dense_limit} qubits, got {model.n}"
        )
    dim = 1 << model.n
    if rho.shape != (dim, dim):
        raise ValidationError("density matrix dimension mismatch")
    out = rho
    for (p, _), fp in zip(model.terms, model.fire_probs):
        out = apply_pauli_mixing(out, p, fp)
    return out


def _all_paulis(n: int) -> list[PauliString]:
    return [
        PauliString(n, x, z)
        for x in range(1 << n)
        for z in range(1 << n)
    ]


def channel_superoperator(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Column-stacking superoperator: vec(sum_i A rho A^dag) = S vec(rho)."""
    return sum(np.kron(a.conj(), a) for a in kraus)


def apply_superoperator(s: np.ndarray, rho: np.ndarray) -> np.ndarray:
    dim = rho.shape[0]
    return (s @ rho.reshape(-1, order="F")).reshape(dim, dim, order="F")


def ptm(s: np.ndarray, n: int) -> np.ndarray:
    """Pauli transfer matrix R[a, b] = tr(P_a Lambda(P_b)) / 2^n."""
    paulis = [p.to_matrix() for p in _all_paulis(n)]
    dim = 1 << n
    r = np.empty((len(paulis), len(paulis)))
    for b, pb in enumerate(paulis):
        out = apply_superoperator(s, pb)
        for a, pa in enumerate(paulis):
            r[a, b] = np.real(np.trace(pa @ out)) / dim
    return r


@dataclass(frozen=True)
class TwirledChannel:
    n: int
    superoperator: np.ndarray
    ptm_diagonal: np.ndarray
    pauli_probs: dict  # label -> probability, sums to 1 for a CPTP input


def twirl_channel_dense(kraus: Sequence[np.ndarray], atol: float = 1e-10) -> TwirledChannel:
    """Average a channel over conjugation by all 4^n Paulis (n <= 2).

    The result is a Pauli channel; returns its error probabilities obtained by
    inverting the character sum over the diagonal PTM.
    """
    dim = kraus[0].shape[0]
    n = dim.bit_length() - 1
    if 1 << n != dim or n > 2:
        raise ValidationError("dense twirl supports 1 or 2 qubits")
    tp = sum(a.conj().T @ a for a in kraus)
    if np.max(np.abs(tp - np.eye(dim))) > atol:
        raise ValidationError("Kraus set is not trace preserving")

    s = channel_superoperator(kraus)
    paulis = _all_paulis(n)
    mats = [p.to_matrix() for p in paulis]
    s_tw = np.zeros_like(s)
    for m in mats:
        conj = channel_superoperator([m])
        s_tw += conj @ s @ conj
    s_tw /= len(mats)

    r = ptm(s_tw, n)
    diag = np.diag(r).copy()
    # Pauli channel with probs q_c has R_aa = sum_c q_c chi(a,c) where chi is
    # +1 when P_a and P_c commute; invert by character orthogonality.
    chi = np.array(
        [[1.0 if _sym(a, c) == 0 else -1.0 for a in paulis] for c in paulis]
    )
    probs = chi @ diag / len(paulis)
    labels = [p.label() for p in paulis]
    return TwirledChannel(n, s_tw, diag, dict(zip(labels, probs)))


def _sym(a: PauliString, b: PauliString) -> int:
    return (bin(a.x & b.z).count("1") + bin(a.z & b.x).count("1")) % 2
