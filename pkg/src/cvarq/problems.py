"""Diagonal observables (Ising polynomials up to cubic terms), problem
generators, QAOA circuit builders, brute-force enumeration, and feasibility
filters for post-selection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from cvarq.circuit import CnotLayer, Gate, LayeredCircuit, SingleQubitLayer
from cvarq.errors import ResourceLimitError, ValidationError
from cvarq.heavyhex import HeavyHexInstance, heavy_hex_instance  # noqa: F401

BRUTE_FORCE_LIMIT = 24

# Approximation-ratio guarantees for MAXCUT on 3-regular graphs at optimal
# angles, by QAOA depth.
RATIO_GUARANTEES = {1: 0.692, 2: 0.7559, 3: 0.7924}

# Light-cone optimized angles for the heavy-hex spin glass family,
# as (gammas, betas) per depth.
LIGHT_CONE_ANGLES = {
    1: ((2.8405,), (0.3982,)),
    2: ((1.1506, 0.1941), (0.3288, 0.6582)),
}


def _norm_key(key, n: int, arity: int):
    t = tuple(int(i) for i in (key if isinstance(key, (tuple, list)) else (key,)))
    if len(t) != arity or len(set(t)) != arity:
        raise ValidationError(f"bad index tuple {t} for arity {arity}")
    if any(i < 0 or i >= n for i in t):
        raise ValidationError(f"index out of range in {t}")
    return t[0] if arity == 1 else tuple(sorted(t))


@dataclass(frozen=True)
class IsingPolynomial:
    """h(x) = constant + sum_v d_v z_v + sum d_ij z_i z_j + sum d_lab z_l z_a z_b
    with z_i = 1 - 2 x_i.  Index tuples are stored sorted; duplicates merge."""

    n: int
    linear: dict = field(default_factory=dict)
    quadratic: dict = field(default_factory=dict)
    cubic: dict = field(default_factory=dict)
    sense: str = "min"
    constant: float = 0.0

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValidationError(f"sense must be 'min' or 'max', got {self.sense!r}")
        for name, arity in (("linear", 1), ("quadratic", 2), ("cubic", 3)):
            raw = getattr(self, name)
            norm: dict = {}
            for k, c in raw.items():
                c = float(c)
                if not math.isfinite(c):
                    raise ValidationError(f"non-finite coefficient in {name}")
                key = _norm_key(k, self.n, arity)
                norm[key] = norm.get(key, 0.0) + c
            object.__setattr__(self, name, norm)

    def evaluate(self, x) -> float:
        """Value at one bitstring (int, or 0/1 text with qubit 0 rightmost)."""
        if isinstance(x, str):
            if len(x) != self.n:
                raise ValidationError(f"bitstring length {len(x)} != n = {self.n}")
            x = int(x, 2)
        z = [1.0 - 2.0 * ((x >> i) & 1) for i in range(self.n)]
        val = self.constant
        for v, c in self.linear.items():
            val += c * z[v]
        for (i, j), c in self.quadratic.items():
            val += c * z[i] * z[j]
        for (a, b, l), c in self.cubic.items():
            val += c * z[a] * z[b] * z[l]
        return val

    def value_table(self) -> np.ndarray:
        """Values on all 2^n bitstrings, indexed by the integer bitstring."""
        if self.n > BRUTE_FORCE_LIMIT:
            raise ResourceLimitError(
                f"value table limited to {BRUTE_FORCE_LIMIT} variables, got {self.n}"
            )
        idx = np.arange(1 << self.n)
        z = [
            (1.0 - 2.0 * ((idx >> i) & 1)).astype(np.float64) for i in range(self.n)
        ]
        vals = np.full(1 << self.n, self.constant, dtype=np.float64)
        for v, c in self.linear.items():
            vals += c * z[v]
        for (i, j), c in self.quadratic.items():
            vals += c * z[i] * z[j]
        for (a, b, l), c in self.cubic.items():
            vals += c * z[a] * z[b] * z[l]
        return vals

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "sense": self.sense,
                "constant": self.constant,
                "linear": [[v, c] for v, c in sorted(self.linear.items())],
                "quadratic": [[i, j, c] for (i, j), c in sorted(self.quadratic.items())],
                "cubic": [[a, b, l, c] for (a, b, l), c in sorted(self.cubic.items())],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "IsingPolynomial":
        d = json.loads(text)
        return cls(
            n=d["n"],
            linear={e[0]: e[1] for e in d.get("linear", [])},
            quadratic={(e[0], e[1]): e[2] for e in d.get("quadratic", [])},
            cubic={(e[0], e[1], e[2]): e[3] for e in d.get("cubic", [])},
            sense=d.get("sense", "min"),
            constant=d.get("constant", 0.0),
        )


@dataclass(frozen=True)
class BruteForceResult:
    best_value: float
    best_bitstring: str
    histogram: dict  # value -> number of bitstrings attaining it


def brute_force(poly: IsingPolynomial) -> BruteForceResult:
    """Exact optimum by full enumeration (n <= 24); the histogram doubles as
    the noise-free value distribution under uniform sampling."""
    if poly.n > BRUTE_FORCE_LIMIT:
        raise ResourceLimitError(
            f"brute force limited to {BRUTE_FORCE_LIMIT} variables, got {poly.n}"
        )
    vals = poly.value_table()
    best_idx = int(np.argmin(vals) if poly.sense == "min" else np.argmax(vals))
    uniq, counts = np.unique(vals, return_counts=True)
    return BruteForceResult(
        best_value=float(vals[best_idx]),
        best_bitstring=format(best_idx, f"0{poly.n}b"),
        histogram={float(v): int(c) for v, c in zip(uniq, counts)},
    )


def maxcut_3regular(
    nodes: int, seed: int, max_tries: int = 10_000
) -> tuple[list[tuple[int, int]], IsingPolynomial]:
    """Random 3-regular simple graph (configuration model with rejection) and
    the cut-counting objective cut(x) = sum_{(i,j) in E} (1 - z_i z_j)/2,
    encoded for maximization so reported values are cut sizes directly."""
    if nodes < 4 or nodes % 2:
        raise ValidationError("3-regular graphs need an even node count >= 4")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        stubs = np.repeat(np.arange(nodes), 3)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        edges = {tuple(sorted(p)) for p in pairs.tolist()}
        if len(edges) == 3 * nodes // 2 and all(u != v for u, v in edges):
            edge_list = sorted(edges)
            m = len(edge_list)
            poly = IsingPolynomial(
                n=nodes,
                quadratic={e: -0.5 for e in edge_list},
                sense="max",
                constant=m / 2.0,
            )
            return edge_list, poly
    raise ValidationError(f"no simple 3-regular pairing found in {max_tries} tries")


def approximation_ratio(value: float, optimum: float) -> float:
    if optimum == 0:
        raise ValidationError("approximation ratio undefined for zero optimum")
    return value / optimum


def meets_guarantee(ratio: float, p: int) -> Optional[bool]:
    """Compare against the depth-p worst-case guarantee; None if p untabulated."""
    g = RATIO_GUARANTEES.get(p)
    return None if g is None else ratio >= g


@dataclass(frozen=True)
class QaoaParams:
    p: int
    betas: tuple
    gammas: tuple

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if len(self.betas) != self.p or len(self.gammas) != self.p:
            raise ValidationError("betas and gammas must each have length p")


@dataclass(frozen=True)
class FeasibilityFilter:
    """Post-selection predicate on bitstrings plus penalty bounds M_l, M_u
    that must bracket h(x) for every feasible x."""

    name: str
    predicate: Callable  # (x: int, n: int) -> bool
    m_lower: float
    m_upper: float

    def accepts(self, x: int, n: int) -> bool:
        return bool(self.predicate(x, n))

    def mask(self, n: int) -> np.ndarray:
        return np.array([self.accepts(x, n) for x in range(1 << n)], dtype=bool)


def always_true_filter(m_lower: float, m_upper: float) -> FeasibilityFilter:
    return FeasibilityFilter("always-true", lambda x, n: True, m_lower, m_upper)


def hamming_weight_filter(k: int, m_lower: float, m_upper: float) -> FeasibilityFilter:
    return FeasibilityFilter(
        f"hamming-weight=={k}",
        lambda x, n, k=k: bin(x).count("1") == k,
        m_lower,
        m_upper,
    )


def validate_filter(flt: FeasibilityFilter, poly: IsingPolynomial) -> None:
    """Brute-force check (n <= 24) that feasible values lie in [M_l, M_u]."""
    vals = poly.value_table()
    feas = flt.mask(poly.n)
    if feas.any():
        lo, hi = float(vals[feas].min()), float(vals[feas].max())
        if lo < flt.m_lower - 1e-12 or hi > flt.m_upper + 1e-12:
            raise ValidationError(
                f"filter {flt.name}: feasible values span [{lo}, {hi}], "
                f"outside penalties [{flt.m_lower}, {flt.m_upper}]"
            )


def _greedy_rounds(terms: list) -> list[list]:
    """Pack terms (keyed tuples of qubits) into rounds with disjoint supports."""
    rounds: list[list] = []
    used: list[set] = []
    for key in terms:
        qs = set(key)
        for r, u in zip(rounds, used):
            if not (u & qs):
                r.append(key)
                u |= qs
                break
        else:
            rounds.append([key])
            used.append(set(qs))
    return rounds


def _rz_layer(entries: list[tuple[int, float]]) -> SingleQubitLayer:
    return SingleQubitLayer(tuple(Gate(q, "Rz", a) for q, a in entries))


def _generic_phase_layers(poly: IsingPolynomial, gamma: float) -> list:
    """e^(-i gamma h(Z)) via CNOT parity gadgets; Rz(2 gamma d) on the parity
    qubit gives exp(-i gamma d z-product) per term."""
    layers: list = []
    if poly.linear:
        layers.append(
            _rz_layer([(v, 2.0 * gamma * c) for v, c in sorted(poly.linear.items())])
        )
    for rnd in _greedy_rounds(sorted(poly.quadratic)):
        pairs = tuple((i, j) for i, j in rnd)
        layers.append(CnotLayer(pairs))
        layers.append(
            _rz_layer([(j, 2.0 * gamma * poly.quadratic[(i, j)]) for i, j in rnd])
        )
        layers.append(CnotLayer(pairs))
    for rnd in _greedy_rounds(sorted(poly.cubic)):
        first = tuple((a, l) for a, b, l in rnd)
        second = tuple((b, l) for a, b, l in rnd)
        layers.append(CnotLayer(first))
        layers.append(CnotLayer(second))
        layers.append(
            _rz_layer([(l, 2.0 * gamma * poly.cubic[(a, b, l)]) for a, b, l in rnd])
        )
        layers.append(CnotLayer(second))
        layers.append(CnotLayer(first))
    return layers


def _heavyhex_phase_layers(inst: HeavyHexInstance, gamma: float) -> list:
    """Parity compute/uncompute phase separator with CNOT depth exactly 6.

    Every CNOT targets the V2 endpoint of its edge.  All CNOTs in the network
    commute (controls in V3 are never targets), so the uncompute half repeats
    the same three colored layers; after re-applying a degree-2 vertex's first
    edge, that vertex holds the parity with its second neighbor, which is where
    the remaining quadratic phase goes.  Cubic terms need no extra CNOTs.
    """
    poly = inst.polynomial
    color_pairs: dict[int, list] = {0: [], 1: [], 2: []}
    v3 = inst.v3
    for (u, v), c in inst.coloring.items():
        ctrl, tgt = (u, v) if u in v3 else (v, u)
        color_pairs[c].append((ctrl, tgt))
    # per V2 vertex: its edges ordered by color
    edges_of: dict[int, list] = {}
    for (u, v), c in inst.coloring.items():
        tgt = v if u in v3 else u
        ctrl = u if u in v3 else v
        edges_of.setdefault(tgt, []).append((c, ctrl))
    for lst in edges_of.values():
        lst.sort()

    def quad(a, b):
        return poly.quadratic.get(tuple(sorted((a, b))), 0.0)

    compute_rz: dict[int, list] = {0: [], 1: [], 2: []}
    uncompute_rz: dict[int, list] = {0: [], 1: [], 2: []}
    for l, lst in edges_of.items():
        c1, n1 = lst[0]
        compute_rz[c1].append((l, 2.0 * gamma * quad(l, n1)))
        if len(lst) == 2:
            c2, n2 = lst[1]
            key = tuple(sorted((l, n1, n2)))
            compute_rz[c2].append((l, 2.0 * gamma * poly.cubic.get(key, 0.0)))
            uncompute_rz[c1].append((l, 2.0 * gamma * quad(l, n2)))

    layers: list = []
    if poly.linear:
        layers.append(
            _rz_layer([(v, 2.0 * gamma * c) for v, c in sorted(poly.linear.items())])
        )
    for half in (compute_rz, uncompute_rz):
        for c in (0, 1, 2):
            layers.append(CnotLayer(tuple(sorted(color_pairs[c])), label=f"c{c}"))
            if half[c]:
                layers.append(_rz_layer(sorted(half[c])))
    return layers


def build_qaoa(
    poly: IsingPolynomial,
    params: QaoaParams,
    layout: str = "generic",
    instance: Optional[HeavyHexInstance] = None,
) -> LayeredCircuit:
    """QAOA circuit prod_j e^(-i H_X beta_j) e^(-i gamma_j h(Z)) |+>, with the
    transverse-field mixer H_X = -sum_i X_i realized as Rx(-2 beta) per qubit."""
    if layout not in ("generic", "heavy-hex-parity"):
        raise ValidationError(f"unknown layout {layout!r}")
    if layout == "heavy-hex-parity":
        if instance is None:
            raise ValidationError("heavy-hex-parity layout needs a HeavyHexInstance")
        if instance.polynomial is not poly and instance.polynomial != poly:
            raise ValidationError("polynomial does not match the heavy-hex instance")
    layers: list = [SingleQubitLayer(tuple(Gate(q, "H") for q in range(poly.n)))]
    for g, b in zip(params.gammas, params.betas):
        if layout == "generic":
            layers.extend(_generic_phase_layers(poly, g))
        else:
            layers.extend(_heavyhex_phase_layers(instance, g))
        layers.append(
            SingleQubitLayer(tuple(Gate(q, "Rx", -2.0 * b) for q in range(poly.n)))
        )
    return LayeredCircuit(poly.n, tuple(layers))


def qaoa_grid_search(
    poly: IsingPolynomial, grid: int = 64, statevector_limit: int = 20
) -> tuple[QaoaParams, float]:
    """Best depth-1 angles over a (beta, gamma) grid by noise-free expectation."""
    from cvarq.simulator import ideal_distribution

    if poly.n > statevector_limit:
        raise ResourceLimitError("grid search needs a statevector-sized problem")
    vals = poly.value_table()
    best = None
    betas = np.linspace(0.0, math.pi, grid, endpoint=False)
    gammas = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
    for b in betas:
        for g in gammas:
            circ = build_qaoa(poly, QaoaParams(1, (b,), (g,)))
            dist = ideal_distribution(circ)
            e = float(dist.p @ vals)
            if best is None or (e > best[1] if poly.sense == "max" else e < best[1]):
                best = (QaoaParams(1, (float(b),), (float(g),)), e)
    return best


def graph_to_json(nodes: int, edges: list[tuple[int, int]]) -> str:
    return json.dumps(
        {"nodes": nodes, "edges": [list(e) for e in sorted(edges)]}, indent=2
    )
