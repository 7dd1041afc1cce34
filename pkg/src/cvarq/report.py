"""Overhead arithmetic from measured layer fidelities, hardware-requirement
thresholds, and bound-check reports with CDF exports.

From per-layer fidelities LF_i covering c_i CNOTs each:

    F_CX   = (prod LF_i)^(1 / sum c_i)   geometric per-gate fidelity
    EPLG   = 1 - F_CX                    error per layered gate
    gamma_CX = 1 / F_CX^2                per-CNOT channel strength
    sqrt(gamma_p) = F_CX^(-#CNOT)        sampling overhead of a #CNOT circuit
    alpha_p = 1 / sqrt(gamma_p)          deepest usable CVaR level
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from cvarq.cvar import (
    calibrate_alpha,
    cdf_csv,
    cvar_empirical,
    gamma_prime_per_cnot,
)
from cvarq.errors import ValidationError


@dataclass(frozen=True)
class OverheadReport:
    layer_fidelities: tuple
    layer_cnot_counts: tuple
    f_cx: float
    eplg: float
    gamma_cx: float
    n_cnot: int
    sqrt_gamma: float
    alpha: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "layer_fidelities": list(self.layer_fidelities),
                "layer_cnot_counts": list(self.layer_cnot_counts),
                "f_cx": self.f_cx,
                "eplg": self.eplg,
                "gamma_cx": self.gamma_cx,
                "n_cnot": self.n_cnot,
                "sqrt_gamma": self.sqrt_gamma,
                "alpha": self.alpha,
            },
            indent=2,
        )


def derive_overheads(
    layer_fidelities: Sequence[float],
    layer_cnot_counts: Sequence[int],
    n_cnot: int,
) -> OverheadReport:
    lfs = [float(x) for x in layer_fidelities]
    counts = [int(c) for c in layer_cnot_counts]
    if len(lfs) != len(counts) or not lfs:
        raise ValidationError("need one CNOT count per layer fidelity")
    if any(not 0.0 < lf <= 1.0 for lf in lfs):
        raise ValidationError("layer fidelities must lie in (0, 1]")
    if any(c < 1 for c in counts) or n_cnot < 1:
        raise ValidationError("CNOT counts must be >= 1")
    log_f = sum(math.log(lf) for lf in lfs) / sum(counts)
    f_cx = math.exp(log_f)
    sqrt_gamma = math.exp(-log_f * n_cnot)
    return OverheadReport(
        tuple(lfs),
        tuple(counts),
        f_cx,
        1.0 - f_cx,
        math.exp(-2.0 * log_f),
        n_cnot,
        sqrt_gamma,
        1.0 / sqrt_gamma,
    )


def min_layer_fidelity(p: int) -> float:
    """Layer fidelity a depth-p run must beat for sampling to outpace
    brute-force enumeration: 2^(-1/(3p))."""
    if p < 1:
        raise ValidationError("depth must be >= 1")
    return 2.0 ** (-1.0 / (3.0 * p))


def min_cnot_fidelity(p: int, n: int) -> float:
    """Per-CNOT analogue 2^(-2/(3 p n)) for dense layers of ~n/2 CNOTs."""
    if p < 1 or n < 2:
        raise ValidationError("need depth >= 1 and n >= 2")
    return 2.0 ** (-2.0 / (3.0 * p * n))


@dataclass(frozen=True)
class BoundReport:
    alpha: float
    shots: int
    noisy_mean: float
    lower_cvar: float
    upper_cvar: float
    best_sample: float
    reference: Optional[float] = None
    optimum: Optional[float] = None
    best_ratio: Optional[float] = None
    cvar_ratio: Optional[float] = None
    alpha_prime: Optional[float] = None
    gamma_prime_cx: Optional[float] = None
    cdf: str = ""

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items() if k != "cdf" and v is not None}
        return json.dumps(d, indent=2)

    def table(self) -> str:
        rows = [
            ("shots", f"{self.shots}"),
            ("alpha", f"{self.alpha:.6g}"),
            ("noisy mean", f"{self.noisy_mean:.6g}"),
            ("lower CVaR", f"{self.lower_cvar:.6g}"),
            ("upper CVaR", f"{self.upper_cvar:.6g}"),
            ("best sample", f"{self.best_sample:.6g}"),
        ]
        if self.reference is not None:
            rows.append(("noise-free mean", f"{self.reference:.6g}"))
        if self.optimum is not None:
            rows.append(("optimum", f"{self.optimum:.6g}"))
        if self.best_ratio is not None:
            rows.append(("best-sample ratio", f"{self.best_ratio:.4g}"))
        if self.cvar_ratio is not None:
            rows.append(("CVaR ratio", f"{self.cvar_ratio:.4g}"))
        if self.alpha_prime is not None:
            rows.append(("alpha'", f"{self.alpha_prime:.4g}"))
        if self.gamma_prime_cx is not None:
            rows.append(("gamma'_CX", f"{self.gamma_prime_cx:.6g}"))
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows) + "\n"


def bound_report(
    sample_set,
    values,
    alpha: float,
    reference: Optional[float] = None,
    optimum: Optional[float] = None,
    n_cnot: Optional[int] = None,
    sense: str = "max",
) -> BoundReport:
    """CVaR sandwich, best sample, and ratios for one noisy sample set.

    ``values`` is a lookup table (or callable) of the observable over basis
    states; ``reference`` (a noise-free mean) additionally triggers alpha
    calibration, with gamma'_CX derived when n_cnot is given.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError(f"alpha must be in (0, 1], got {alpha}")
    if int(alpha * sample_set.shots) < 1:
        raise ValidationError(
            f"alpha={alpha} needs at least {math.ceil(1.0 / alpha)} shots, "
            f"got {sample_set.shots}"
        )
    vals = sample_set.values(
        values if isinstance(values, np.ndarray) else np.vectorize(values)(
            np.arange(1 << sample_set.n)
        )
    )
    lower = cvar_empirical(vals, alpha, "lower").estimate
    upper = cvar_empirical(vals, alpha, "upper").estimate
    noisy_mean = float(vals.mean())
    best = float(vals.max() if sense == "max" else vals.min())
    best_ratio = cvar_ratio = alpha_prime = gp = None
    if optimum is not None and optimum != 0:
        best_ratio = best / optimum
        cvar_ratio = (upper if sense == "max" else lower) / optimum
    if reference is not None:
        side = "upper" if sense == "max" else "lower"
        cal = calibrate_alpha(vals, reference, side)
        alpha_prime = cal.alpha_prime
        if n_cnot is not None:
            gp = gamma_prime_per_cnot(alpha_prime, n_cnot)
    return BoundReport(
        alpha=alpha,
        shots=sample_set.shots,
        noisy_mean=noisy_mean,
        lower_cvar=lower,
        upper_cvar=upper,
        best_sample=best,
        reference=reference,
        optimum=optimum,
        best_ratio=best_ratio,
        cvar_ratio=cvar_ratio,
        alpha_prime=alpha_prime,
        gamma_prime_cx=gp,
        cdf=cdf_csv(vals),
    )
