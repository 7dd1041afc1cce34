"""Bit-mask Pauli strings, commutation tests, CNOT conjugation and commuting groups.

Pauli operators on n qubits are stored as a pair of n-bit integers (x_mask,
z_mask) plus a sign in {+1, -1}.  Bit q of a mask refers to qubit q, and qubit
0 is the rightmost character of a label such as "-XIZ".  Phases beyond the
sign are not tracked; sign-only bookkeeping is sufficient for conjugation
through CNOT layers and single-qubit Clifford rotations, which is all that is
needed here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PauliString",
    "CommutingGroup",
    "commutes",
    "qubitwise_commutes",
    "conjugate_through_cnot_layer",
    "group_commuting",
    "diagonalize_group",
]

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    """n-qubit Pauli operator in symplectic (x_mask, z_mask) form with a sign."""

    n: int
    x: int = 0
    z: int = 0
    sign: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("qubit count must be nonnegative")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise ValueError("mask has bits set beyond the qubit count")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse a label like "XIZ" or "-YZ"; qubit 0 is the rightmost character."""
        sign = 1
        if label and label[0] in "+-":
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        n = len(label)
        x = z = 0
        for i, c in enumerate(reversed(label)):
            if c == "X":
                x |= 1 << i
            elif c == "Y":
                x |= 1 << i
                z |= 1 << i
            elif c == "Z":
                z |= 1 << i
            elif c != "I":
                raise ValueError(f"invalid Pauli character {c!r}")
        return cls(n, x, z, sign)

    def label(self) -> str:
        chars = []
        for i in range(self.n - 1, -1, -1):
            xb = (self.x >> i) & 1
            zb = (self.z >> i) & 1
            chars.append("IXZY"[xb + 2 * zb] if xb + 2 * zb != 3 else "Y")
        body = "".join(chars) if chars else ""
        return ("-" if self.sign < 0 else "") + body

    @property
    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def support(self) -> int:
        """Mask of qubits the operator acts on non-trivially."""
        return self.x | self.z

    def qubit_char(self, q: int) -> str:
        xb = (self.x >> q) & 1
        zb = (self.z >> q) & 1
        return ["I", "X", "Z", "Y"][xb + 2 * zb]

    def to_matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix; used as an oracle at small n."""
        m = np.array([[self.sign]], dtype=complex)
        for q in range(self.n - 1, -1, -1):
            m = np.kron(m, _SINGLE[self.qubit_char(q)])
        return m

    def __repr__(self):
        return f"PauliString({self.label()!r})"


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the symplectic product a.x&b.z ^ a.z&b.x has even parity."""
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n}")
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2 == 0


def qubitwise_commutes(a: PauliString, b: PauliString) -> bool:
    """True iff on every qubit the two operators share I or the same Pauli."""
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n}")
    overlap = a.support & b.support
    # On overlapping qubits both (x, z) bit pairs must coincide.
    return (a.x ^ b.x) & overlap == 0 and (a.z ^ b.z) & overlap == 0


def conjugate_through_cnot_layer(
    p: PauliString, layer: Sequence[tuple[int, int]]
) -> PauliString:
    """Return U p U^dag for U a layer of disjoint CNOT(control, target) gates.

    Sign update per CNOT follows the stabilizer-tableau rule
    r ^= x_c z_t (x_t ^ z_c ^ 1); the operation is involutive.
    """
    used = 0
    for c, t in layer:
        if not (0 <= c < p.n and 0 <= t < p.n) or c == t:
            raise ValueError(f"invalid CNOT pair ({c}, {t})")
        pair = (1 << c) | (1 << t)
        if used & pair:
            raise ValueError("overlapping CNOT pairs in layer")
        used |= pair
    x, z, sign = p.x, p.z, p.sign
    for c, t in layer:
        xc = (x >> c) & 1
        zc = (z >> c) & 1
        xt = (x >> t) & 1
        zt = (z >> t) & 1
        if xc & zt & (xt ^ zc ^ 1):
            sign = -sign
        x ^= xc << t
        z ^= zt << c
    return PauliString(p.n, x, z, sign)


@dataclass(frozen=True)
class CommutingGroup:
    """Qubit-wise commuting Pauli terms plus the per-qubit diagonalizing rotation.

    ``rotation[q]`` is one of "I", "H", "HSdg": the single-qubit Clifford that
    maps the group's shared Pauli on qubit q to Z.  "HSdg" means apply S^dag
    then H (circuit order).
    """

    members: tuple[PauliString, ...]
    weights: tuple[float, ...]
    rotation: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.members[0].n

    def diagonal_masks(self) -> list[tuple[int, int]]:
        """Per member: (z-mask after rotation, sign).  The post-rotation string
        is Z on the member's support, so the expectation of the member on bit
        string x is sign * (-1)^popcount(x & mask)."""
        return [(m.support, m.sign) for m in self.members]


def group_commuting(
    terms: Iterable[tuple[PauliString, float]]
) -> list[CommutingGroup]:
    """Partition weighted Pauli terms into qubit-wise commuting groups.

    Greedy first-fit in input order: each term joins the first group it
    qubit-wise commutes with, else opens a new group.
    """
    terms = list(terms)
    if not terms:
        return []
    n = terms[0][0].n
    groups: list[list[tuple[PauliString, float]]] = []
    for p, w in terms:
        if p.n != n:
            raise ValueError("size mismatch among terms")
        for g in groups:
            if all(qubitwise_commutes(p, q) for q, _ in g):
                g.append((p, w))
                break
        else:
            groups.append([(p, w)])
    return [_finalize_group(g, n) for g in groups]


def _finalize_group(members: list[tuple[PauliString, float]], n: int) -> CommutingGroup:
    rotation = ["I"] * n
    for p, _ in members:
        for q in range(n):
            c = p.qubit_char(q)
            if c == "X":
                rotation[q] = "H"
            elif c == "Y":
                rotation[q] = "HSdg"
    return CommutingGroup(
        members=tuple(p for p, _ in members),
        weights=tuple(w for _, w in members),
        rotation=tuple(rotation),
    )


def diagonalize_group(g: CommutingGroup):
    """Return (rotation gate list, [(diagonal z-mask, sign)]) for a group.

    The rotation is a list of (qubit, gate) pairs in circuit order, gates in
    {"Sdg", "H"}.  Applying it maps every member to a Z-type string with the
    member's own sign, since H X H = Z and H (Sdg Y S) H = H X H = Z.
    """
    for a in g.members:
        for b in g.members:
            if not qubitwise_commutes(a, b):
                raise ValueError("group is not qubit-wise commuting")
    gates: list[tuple[int, str]] = []
    for q, tag in enumerate(g.rotation):
        if tag == "H":
            gates.append((q, "H"))
        elif tag == "HSdg":
            gates.append((q, "Sdg"))
            gates.append((q, "H"))
    return gates, g.diagonal_masks()
