"""Layered circuits: single-qubit gate layers alternating with layers of
non-overlapping CNOTs.  Noise models attach to CNOT layers only (single-qubit
gates are treated as noise free).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from cvarq import noise as noise_mod
from cvarq.errors import ValidationError
from cvarq.noise import PauliLindbladModel
from cvarq.pauli import PauliString, conjugate_through_cnot_layer

GATE_NAMES = {"H", "X", "Y", "Z", "S", "Sdg", "Rz", "Rx"}
_PARAMETRIC = {"Rz", "Rx"}
_INVERSE = {"H": "H", "X": "X", "Y": "Y", "Z": "Z", "S": "Sdg", "Sdg": "S"}


@dataclass(frozen=True)
class Gate:
    qubit: int
    name: str
    angle: float = 0.0

    def __post_init__(self):
        if self.name not in GATE_NAMES:
            raise ValidationError(f"unknown gate {self.name!r}")


@dataclass(frozen=True)
class SingleQubitLayer:
    gates: tuple[Gate, ...]


@dataclass(frozen=True)
class CnotLayer:
    pairs: tuple[tuple[int, int], ...]
    noise: Optional[PauliLindbladModel] = None
    label: Optional[str] = None

    def __post_init__(self):
        used = set()
        for c, t in self.pairs:
            if c == t:
                raise ValidationError(f"CNOT control equals target ({c})")
            if c in used or t in used:
                raise ValidationError("overlapping CNOT pairs in layer")
            used.update((c, t))


Layer = Union[SingleQubitLayer, CnotLayer]


@dataclass(frozen=True)
class LayeredCircuit:
    n: int
    layers: tuple[Layer, ...] = ()

    def __post_init__(self):
        for layer in self.layers:
            if isinstance(layer, SingleQubitLayer):
                qs = [g.qubit for g in layer.gates]
            else:
                qs = [q for pair in layer.pairs for q in pair]
                if layer.noise is not None and layer.noise.n != self.n:
                    raise ValidationError("attached noise model has wrong qubit count")
            if any(q < 0 or q >= self.n for q in qs):
                raise ValidationError("gate qubit index out of range")

    def cnot_layers(self) -> list[CnotLayer]:
        return [l for l in self.layers if isinstance(l, CnotLayer)]

    def extended(self, layers: Sequence[Layer]) -> "LayeredCircuit":
        return LayeredCircuit(self.n, self.layers + tuple(layers))

    def with_noise_on_cnot_layers(self, model: PauliLindbladModel) -> "LayeredCircuit":
        """Attach one model to every CNOT layer (replacing any existing one)."""
        new_layers = tuple(
            replace(l, noise=model) if isinstance(l, CnotLayer) else l
            for l in self.layers
        )
        return LayeredCircuit(self.n, new_layers)


@dataclass(frozen=True)
class CircuitStats:
    cnot_count: int
    cnot_depth: int
    per_class: dict


def stats(circuit: LayeredCircuit) -> CircuitStats:
    per_class: dict = {}
    count = depth = 0
    for layer in circuit.cnot_layers():
        depth += 1
        count += len(layer.pairs)
        key = layer.label
        per_class[key] = per_class.get(key, 0) + len(layer.pairs)
    return CircuitStats(count, depth, per_class)


def total_gamma(circuit: LayeredCircuit) -> float:
    """Product of per-layer gammas; layers without a model count as noiseless."""
    g = 1.0
    for layer in circuit.cnot_layers():
        if layer.noise is not None:
            g *= noise_mod.gamma(layer.noise)
    return g


def total_layer_fidelity(circuit: LayeredCircuit) -> float:
    return 1.0 / math.sqrt(total_gamma(circuit))


def _pauli_gate_layer(n: int, p: PauliString) -> SingleQubitLayer:
    gates = []
    for q in range(n):
        c = p.qubit_char(q)
        if c != "I":
            gates.append(Gate(q, c))
    return SingleQubitLayer(tuple(gates))


def insert_pauli_twirl(
    circuit: LayeredCircuit, rng: np.random.Generator
) -> tuple[LayeredCircuit, list[int]]:
    """Sandwich every CNOT layer between a random Pauli P and Q = U P U^dag.

    The twirled circuit implements the original unitary up to the returned
    per-layer signs (their product is the net global sign).
    """
    new_layers: list[Layer] = []
    signs: list[int] = []
    for layer in circuit.layers:
        if not isinstance(layer, CnotLayer):
            new_layers.append(layer)
            continue
        x = int(rng.integers(0, 1 << circuit.n))
        z = int(rng.integers(0, 1 << circuit.n))
        p = PauliString(circuit.n, x, z)
        q = conjugate_through_cnot_layer(p, layer.pairs)
        signs.append(q.sign)
        new_layers.append(_pauli_gate_layer(circuit.n, p))
        new_layers.append(layer)
        new_layers.append(_pauli_gate_layer(circuit.n, q))
    return LayeredCircuit(circuit.n, tuple(new_layers)), signs


def inverse_circuit(circuit: LayeredCircuit) -> LayeredCircuit:
    """Reverse layer order and invert each gate (noise attachments dropped)."""
    out: list[Layer] = []
    for layer in reversed(circuit.layers):
        if isinstance(layer, CnotLayer):
            out.append(CnotLayer(layer.pairs, noise=None, label=layer.label))
        else:
            gates = tuple(
                Gate(g.qubit, g.name, -g.angle)
                if g.name in _PARAMETRIC
                else Gate(g.qubit, _INVERSE[g.name])
                for g in reversed(layer.gates)
            )
            out.append(SingleQubitLayer(gates))
    return LayeredCircuit(circuit.n, tuple(out))


def to_json(circuit: LayeredCircuit) -> str:
    layers = []
    for layer in circuit.layers:
        if isinstance(layer, SingleQubitLayer):
            layers.append(
                {
                    "type": "1q",
                    "gates": [
                        [g.qubit, g.name] if g.name not in _PARAMETRIC
                        else [g.qubit, g.name, g.angle]
                        for g in layer.gates
                    ],
                }
            )
        else:
            entry: dict = {"type": "cnot", "pairs": [list(p) for p in layer.pairs]}
            if layer.noise is not None:
                entry["noise"] = json.loads(layer.noise.to_json())
            if layer.label is not None:
                entry["class"] = layer.label
            layers.append(entry)
    return json.dumps({"n": circuit.n, "layers": layers}, indent=2)


def from_json(text: str) -> LayeredCircuit:
    data = json.loads(text)
    n = data["n"]
    layers: list[Layer] = []
    for entry in data["layers"]:
        if entry["type"] == "1q":
            gates = tuple(
                Gate(g[0], g[1], g[2] if len(g) > 2 else 0.0) for g in entry["gates"]
            )
            layers.append(SingleQubitLayer(gates))
        elif entry["type"] == "cnot":
            model = None
            if "noise" in entry:
                model = PauliLindbladModel.from_json(json.dumps(entry["noise"]))
            layers.append(
                CnotLayer(
                    tuple(tuple(p) for p in entry["pairs"]),
                    noise=model,
                    label=entry.get("class"),
                )
            )
        else:
            raise ValidationError(f"unknown layer type {entry['type']!r}")
    return LayeredCircuit(n, tuple(layers))
