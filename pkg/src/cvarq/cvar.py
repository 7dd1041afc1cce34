"""Conditional value at risk machinery.

Two deliberately separate code paths are kept and cross-tested: the exact
formula on finite distributions

    CVaR_alpha = C sum_{i<=k} x_i p_i + x_k (1 - C sum_{i<=k} p_i),
    C = 1/alpha, k = first index with cumulative probability >= alpha,

and the order-statistic estimator (mean of the bottom or top floor(alpha n)
samples).  Upper CVaR is the mirror image: -CVaR_alpha(-X).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from cvarq.errors import ValidationError
from cvarq.problems import FeasibilityFilter

# ---------------------------------------------------------------------------
# standard normal helpers (quantile via Acklam's rational approximation plus
# one Newton refinement; no scipy dependency)

_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValidationError(f"quantile needs p in (0,1), got {p}")
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
             / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
             / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
              / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    # one Newton step pushes the error below 1e-12
    err = normal_cdf(x) - p
    x -= err / normal_pdf(x)
    return x


# ---------------------------------------------------------------------------
# exact CVaR on finite distributions


@dataclass(frozen=True)
class FiniteDistribution:
    support: np.ndarray  # strictly increasing
    probs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "probs", p)
        if s.shape != p.shape or s.ndim != 1 or s.size == 0:
            raise ValidationError("support/probs shape mismatch")
        if np.any(np.diff(s) <= 0):
            raise ValidationError("support must be strictly increasing")
        if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-12:
            raise ValidationError("probabilities must be >= 0 and sum to 1")

    @classmethod
    def from_values(cls, values: Iterable[float], probs: Iterable[float],
                    tol: float = 0.0) -> "FiniteDistribution":
        """Aggregate (value, prob) pairs, merging duplicate values."""
        agg: dict[float, float] = {}
        for v, p in zip(values, probs):
            v = float(v)
            agg[v] = agg.get(v, 0.0) + float(p)
        items = sorted((v, p) for v, p in agg.items() if p > tol)
        return cls(np.array([v for v, _ in items]), np.array([p for _, p in items]))

    @classmethod
    def from_samples(cls, values: Sequence[float]) -> "FiniteDistribution":
        vals, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
        return cls(vals, counts / counts.sum())

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def negated(self) -> "FiniteDistribution":
        return FiniteDistribution(-self.support[::-1], self.probs[::-1].copy())

    def cdf_rows(self) -> list[tuple[float, float]]:
        cum = np.cumsum(self.probs)
        return [(float(v), float(c)) for v, c in zip(self.support, cum)]


def _check_alpha(alpha: float):
    if not 0.0 < alpha <= 1.0:
        raise ValidationError(f"alpha must be in (0, 1], got {alpha}")


def cvar_exact(dist: FiniteDistribution, alpha: float) -> float:
    _check_alpha(alpha)
    c = 1.0 / alpha
    cum = np.cumsum(dist.probs)
    k = int(np.searchsorted(cum, alpha - 1e-15))
    k = min(k, len(cum) - 1)
    head = float(np.dot(dist.support[: k + 1], dist.probs[: k + 1]))
    return c * head + float(dist.support[k]) * (1.0 - c * float(cum[k]))


def cvar_upper_exact(dist: FiniteDistribution, alpha: float) -> float:
    return -cvar_exact(dist.negated(), alpha)


def cvar_sandwich_bounds(
    noisy: FiniteDistribution, c: float, target: float, tol: float = 1e-12
) -> tuple[float, float, tuple[bool, bool]]:
    """CVaR sandwich at alpha = 1/c for a noisy distribution dominating the
    noise-free one as p_noisy >= p/c; returns (lower, upper, holds)."""
    if c < 1.0:
        raise ValidationError(f"overhead constant must be >= 1, got {c}")
    alpha = 1.0 / c
    lo = cvar_exact(noisy, alpha)
    hi = cvar_upper_exact(noisy, alpha)
    return lo, hi, (lo <= target + tol, target <= hi + tol)


# ---------------------------------------------------------------------------
# order-statistic estimator


@dataclass(frozen=True)
class CVaRReport:
    alpha: float
    side: str
    estimate: float
    kept: int
    shots: int
    variance: Optional[float] = None
    filter_name: Optional[str] = None

    def to_json(self) -> str:
        d = {
            "alpha": self.alpha,
            "side": self.side,
            "estimate": self.estimate,
            "kept": self.kept,
            "shots": self.shots,
        }
        if self.variance is not None:
            d["variance"] = self.variance
        if self.filter_name is not None:
            d["filter"] = self.filter_name
        return json.dumps(d, indent=2)


def _check_side(side: str):
    if side not in ("lower", "upper"):
        raise ValidationError(f"side must be 'lower' or 'upper', got {side!r}")


def cvar_empirical(values, alpha: float, side: str = "lower") -> CVaRReport:
    """Mean of the bottom (lower) or top (upper) floor(alpha n) samples."""
    _check_alpha(alpha)
    _check_side(side)
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    k = int(alpha * n)
    if k < 1:
        raise ValidationError(
            f"floor(alpha*n) = 0: need at least ceil(1/alpha) = "
            f"{math.ceil(1.0 / alpha)} samples, got {n}"
        )
    est = float(v[:k].mean()) if side == "lower" else float(v[-k:].mean())
    return CVaRReport(alpha, side, est, k, n)


def _empirical_cvar_continuous(sorted_vals: np.ndarray, prefix: np.ndarray,
                               alpha: float) -> float:
    """Exact-CVaR of the empirical distribution at fractional alpha; the
    partial atom enters with linearly interpolated weight."""
    n = sorted_vals.size
    m = alpha * n
    k = int(m)
    if k >= n:
        return float(prefix[n]) / n
    head = float(prefix[k]) + (m - k) * float(sorted_vals[k])
    return head / m


# ---------------------------------------------------------------------------
# filtering / post-selection


@dataclass(frozen=True)
class FilteredCVaR:
    report: CVaRReport
    lower: float
    upper: float
    postselected_mean: float
    feasible_fraction: float


def cvar_filtered(
    sample_set,
    h,
    flt: FeasibilityFilter,
    alpha: float,
    side: str = "lower",
    validate_poly=None,
) -> FilteredCVaR:
    """CVaR of h with infeasible bitstrings replaced by a penalty: M_u for the
    lower bound, M_l for the upper bound, so each side can only move toward
    the other.  The plain post-selected mean must land between the two."""
    _check_alpha(alpha)
    _check_side(side)
    if validate_poly is not None:
        from cvarq.problems import validate_filter

        validate_filter(flt, validate_poly)
    ints, cnts = sample_set.int_counts()
    n = sample_set.n
    feas = np.array([flt.accepts(int(x), n) for x in ints], dtype=bool)
    if callable(h):
        raw = np.array([h(int(x)) for x in ints], dtype=float)
    else:
        raw = np.asarray(h, dtype=float)[ints]

    def side_values(penalty):
        vals = np.where(feas, raw, penalty)
        return np.repeat(vals, cnts)

    lower = cvar_empirical(side_values(flt.m_upper), alpha, "lower").estimate
    upper = cvar_empirical(side_values(flt.m_lower), alpha, "upper").estimate
    n_feas = int(cnts[feas].sum())
    if n_feas:
        ps_mean = float(np.dot(raw[feas], cnts[feas]) / n_feas)
    else:
        # no feasible shots: both sides collapse to their penalties
        ps_mean = 0.5 * (lower + upper)
    report = CVaRReport(
        alpha, side, lower if side == "lower" else upper,
        int(alpha * sample_set.shots), sample_set.shots, filter_name=flt.name,
    )
    return FilteredCVaR(report, lower, upper, ps_mean, n_feas / sample_set.shots)


def cvar_nondiagonal(group_values: Sequence, alpha: float, side: str = "lower") -> float:
    """Bound for a sum of commuting groups: sum of per-group CVaRs, each
    measured in its own diagonalizing basis."""
    if not len(group_values):
        raise ValidationError("no measurement groups supplied")
    return sum(cvar_empirical(v, alpha, side).estimate for v in group_values)


# ---------------------------------------------------------------------------
# alpha calibration


@dataclass(frozen=True)
class CalibrationResult:
    alpha_prime: float
    saturated: bool
    achieved: float


def calibrate_alpha(values, target: float, side: str = "upper",
                    iters: int = 200) -> CalibrationResult:
    """Largest alpha whose empirical CVaR still lies on the target's side
    (>= target for upper, <= target for lower).  The empirical CVaR is
    monotone in alpha, so bisection applies; fractional alphas interpolate
    the partial order statistic."""
    _check_side(side)
    v = np.sort(np.asarray(values, dtype=float))
    n = v.size
    if side == "upper":
        v = -v[::-1]
        target = -target
    prefix = np.concatenate(([0.0], np.cumsum(v)))
    lo_alpha = 1.0 / n

    def est(a):
        return _empirical_cvar_continuous(v, prefix, a)

    # est is non-decreasing in alpha; want the largest alpha with est <= target
    if est(1.0) <= target:
        return CalibrationResult(1.0, est(1.0) < target, -est(1.0) if side == "upper" else est(1.0))
    if est(lo_alpha) > target:
        return CalibrationResult(lo_alpha, True, -est(lo_alpha) if side == "upper" else est(lo_alpha))
    lo, hi = lo_alpha, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if est(mid) <= target:
            lo = mid
        else:
            hi = mid
    a = lo
    return CalibrationResult(a, False, -est(a) if side == "upper" else est(a))


def gamma_prime_per_cnot(alpha_prime: float, n_cnot: int) -> float:
    """Effective per-CNOT noise strength gamma' with alpha' = gamma'^(-#CNOT/2)."""
    if not 0.0 < alpha_prime <= 1.0 or n_cnot < 1:
        raise ValidationError("need alpha' in (0,1] and #CNOT >= 1")
    return alpha_prime ** (-2.0 / n_cnot)


# ---------------------------------------------------------------------------
# bootstrap variance


@dataclass(frozen=True)
class BootstrapResult:
    alphas: tuple
    variances: tuple
    slope: float  # least-squares slope of log variance vs log alpha


def bootstrap_variance(values, alphas, resamples: int, seed: int,
                       m: Optional[int] = None, side: str = "lower") -> BootstrapResult:
    """Variance of the CVaR estimator across bootstrap resamples of size m
    (default: the original sample size), plus the log-log scaling slope."""
    _check_side(side)
    v = np.asarray(values, dtype=float)
    if m is None:
        m = v.size
    alphas = [float(a) for a in alphas]
    if resamples < 2:
        raise ValidationError("need at least 2 bootstrap resamples")
    for a in alphas:
        _check_alpha(a)
        if int(a * m) < 1:
            raise ValidationError(f"resample size {m} too small for alpha {a}")
    ests = np.empty((len(alphas), resamples))
    for b in range(resamples):
        rng = np.random.default_rng([seed, b])
        rs = np.sort(v[rng.integers(0, v.size, m)])
        for i, a in enumerate(alphas):
            k = int(a * m)
            ests[i, b] = rs[:k].mean() if side == "lower" else rs[-k:].mean()
    variances = ests.var(axis=1, ddof=1)
    if np.any(variances <= 0):
        slope = 0.0
    else:
        slope = float(np.polyfit(np.log(alphas), np.log(variances), 1)[0])
    return BootstrapResult(tuple(alphas), tuple(float(x) for x in variances), slope)


# ---------------------------------------------------------------------------
# closed-form laws for the limiting behavior of the estimator


def bernoulli_upper_cvar(p: float, alpha: float) -> float:
    """Large-n limit of the top-quantile estimator on Bernoulli(p) samples."""
    _check_alpha(alpha)
    return min(p / alpha, 1.0)


def bernoulli_upper_cvarv(p: float, alpha: float) -> float:
    """Limiting variance (of sqrt(n)-scaled error) in the three regimes."""
    _check_alpha(alpha)
    if alpha > p:
        return p * (1.0 - p) / alpha**2
    if alpha == p:
        return (1.0 - p) / p * (0.5 - 1.0 / (2.0 * math.pi))
    return 0.0


def gaussian_cvar(alpha: float) -> float:
    """Lower CVaR of a standard normal: -f(x_alpha)/alpha."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return 0.0
    return -normal_pdf(normal_quantile(alpha)) / alpha


def gaussian_cvarv(alpha: float) -> float:
    """Limiting variance alpha^-1 Var[N | N <= x_alpha]."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return 1.0
    x = normal_quantile(alpha)
    f = normal_pdf(x)
    return (1.0 - x * f / alpha - (f / alpha) ** 2) / alpha


def powerlaw_upper_cvar(beta: float, alpha: float) -> float:
    """Upper CVaR of density beta x^(-1-beta) on x >= 1 (needs beta > 1)."""
    _check_alpha(alpha)
    if beta <= 1.0:
        raise ValidationError("power-law CVaR needs beta > 1")
    return beta / (beta - 1.0) * alpha ** (-1.0 / beta)


def powerlaw_upper_cvarv(beta: float, alpha: float) -> float:
    """Limiting variance alpha^-1 Var[X | X >= x_alpha] for the power law;
    the conditional tail is Pareto(beta) with minimum alpha^(-1/beta), so
    this is beta (beta-1)^-2 (beta-2)^-1 alpha^(-2/beta) / alpha.  In the
    beta -> 2 limit it meets the crude E[X^2]/alpha^2 bound."""
    _check_alpha(alpha)
    if beta <= 2.0:
        raise ValidationError("power-law variance needs beta > 2")
    tail_var = beta / ((beta - 1.0) ** 2 * (beta - 2.0)) * alpha ** (-2.0 / beta)
    return tail_var / alpha


def crude_cvarv_bound(second_moment: float, alpha: float) -> float:
    _check_alpha(alpha)
    return second_moment / alpha**2


def analytic_variance(law: str, alpha: float, **params) -> tuple[float, float]:
    """(limiting CVaR, limiting estimator variance) for a named law.

    Laws: "bernoulli" (param p, upper side), "gaussian" (lower side),
    "powerlaw" (param beta, upper side).
    """
    if law == "bernoulli":
        p = params["p"]
        return bernoulli_upper_cvar(p, alpha), bernoulli_upper_cvarv(p, alpha)
    if law == "gaussian":
        return gaussian_cvar(alpha), gaussian_cvarv(alpha)
    if law == "powerlaw":
        beta = params["beta"]
        return powerlaw_upper_cvar(beta, alpha), powerlaw_upper_cvarv(beta, alpha)
    raise ValidationError(f"unknown law {law!r}")


# ---------------------------------------------------------------------------
# CDF export


def cdf_csv(dist_or_values) -> str:
    """CSV text `value,cumulative_probability` with sorted support."""
    if isinstance(dist_or_values, FiniteDistribution):
        d = dist_or_values
    else:
        d = FiniteDistribution.from_samples(np.asarray(dist_or_values, dtype=float))
    lines = ["value,cumulative_probability"]
    lines += [f"{v:.12g},{c:.12g}" for v, c in d.cdf_rows()]
    return "\n".join(lines) + "\n"
