import math

import numpy as np
import pytest

from cvarq.cvar import (
    FiniteDistribution,
    analytic_variance,
    bernoulli_upper_cvar,
    bernoulli_upper_cvarv,
    bootstrap_variance,
    calibrate_alpha,
    cdf_csv,
    crude_cvarv_bound,
    cvar_empirical,
    cvar_exact,
    cvar_filtered,
    cvar_nondiagonal,
    cvar_upper_exact,
    gamma_prime_per_cnot,
    gaussian_cvar,
    gaussian_cvarv,
    cvar_sandwich_bounds,
    normal_cdf,
    normal_quantile,
    powerlaw_upper_cvar,
    powerlaw_upper_cvarv,
)
from cvarq.errors import ValidationError
from cvarq.problems import always_true_filter, hamming_weight_filter
from cvarq.simulator import SampleSet


def _dist(mapping):
    items = sorted(mapping.items())
    return FiniteDistribution(
        np.array([v for v, _ in items]), np.array([p for _, p in items])
    )


def _cvar_oracle(mapping, alpha, side):
    """Independent oracle: spread each atom into tiny equal slivers and
    average the worst alpha mass directly."""
    items = sorted(mapping.items(), reverse=(side == "upper"))
    need = alpha
    acc = 0.0
    for v, p in items:
        take = min(p, need)
        acc += v * take
        need -= take
        if need <= 1e-15:
            break
    return acc / alpha


def test_exact_small_examples():
    d = _dist({0.0: 0.5, 1.0: 0.5})
    assert cvar_exact(d, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert cvar_exact(d, 1.0) == pytest.approx(d.mean(), abs=1e-15)
    assert cvar_upper_exact(d, 0.5) == pytest.approx(1.0, abs=1e-15)
    d2 = _dist({1.0: 0.3, 2.0: 0.3, 3.0: 0.4})
    # bottom 0.5 of mass: 0.3 at 1 plus 0.2 at 2 -> (0.3 + 0.4)/0.5
    assert cvar_exact(d2, 0.5) == pytest.approx(1.4, abs=1e-15)
    # top 0.5 of mass: 0.4 at 3 plus 0.1 at 2 -> (1.2 + 0.2)/0.5
    assert cvar_upper_exact(d2, 0.5) == pytest.approx(2.8, abs=1e-15)


def test_exact_matches_mass_oracle():
    rng = np.random.default_rng(50)
    for _ in range(100):
        k = int(rng.integers(2, 9))
        vals = np.sort(rng.normal(size=k))
        while np.any(np.diff(vals) == 0):
            vals = np.sort(rng.normal(size=k))
        p = rng.dirichlet(np.ones(k))
        mapping = dict(zip(vals, p))
        d = _dist(mapping)
        a = float(rng.uniform(0.05, 1.0))
        assert cvar_exact(d, a) == pytest.approx(
            _cvar_oracle(mapping, a, "lower"), abs=1e-10
        )
        assert cvar_upper_exact(d, a) == pytest.approx(
            _cvar_oracle(mapping, a, "upper"), abs=1e-10
        )


def test_exact_monotone_and_bracketing():
    rng = np.random.default_rng(51)
    for _ in range(50):
        k = int(rng.integers(2, 12))
        vals = np.sort(rng.normal(size=k) * 3)
        if np.any(np.diff(vals) == 0):
            continue
        d = FiniteDistribution(vals, rng.dirichlet(np.ones(k)))
        alphas = np.linspace(0.05, 1.0, 12)
        lows = [cvar_exact(d, a) for a in alphas]
        ups = [cvar_upper_exact(d, a) for a in alphas]
        assert all(x <= y + 1e-12 for x, y in zip(lows, lows[1:]))
        assert all(x >= y - 1e-12 for x, y in zip(ups, ups[1:]))
        for lo, hi in zip(lows, ups):
            assert lo <= d.mean() + 1e-12 <= hi + 2e-12
        assert lows[-1] == pytest.approx(d.mean(), abs=1e-12)
        assert ups[-1] == pytest.approx(d.mean(), abs=1e-12)


def test_alpha_validation():
    d = _dist({0.0: 1.0})
    for bad in (0.0, -0.1, 1.1):
        with pytest.raises(ValidationError):
            cvar_exact(d, bad)


def test_sandwich_bounds_random_mixtures():
    # noisy = (1/c) * clean + (1 - 1/c) * junk dominates clean pointwise / c,
    # so the alpha = 1/c CVaRs must bracket the clean mean
    rng = np.random.default_rng(52)
    for _ in range(1000):
        k = int(rng.integers(2, 10))
        vals = np.sort(rng.normal(size=k) * 2)
        if np.any(np.diff(vals) == 0):
            continue
        clean = rng.dirichlet(np.ones(k))
        junk = rng.dirichlet(np.ones(k))
        c = float(rng.uniform(1.0, 20.0))
        noisy = clean / c + (1 - 1 / c) * junk
        d = FiniteDistribution(vals, noisy)
        target = float(np.dot(vals, clean))
        lo, hi, (okl, oku) = cvar_sandwich_bounds(d, c, target, tol=1e-12)
        assert okl and oku
        assert lo <= target + 1e-12 <= hi + 2e-12


def test_sandwich_rejects_c_below_one():
    with pytest.raises(ValidationError):
        cvar_sandwich_bounds(_dist({0.0: 1.0}), 0.5, 0.0)


def test_empirical_matches_exact_on_aligned_sample():
    # sample whose multiplicities realize the distribution exactly
    values = [1.0] * 3 + [2.0] * 3 + [3.0] * 4
    d = _dist({1.0: 0.3, 2.0: 0.3, 3.0: 0.4})
    for a in (0.1, 0.3, 0.5, 0.8, 1.0):
        assert cvar_empirical(values, a, "lower").estimate == pytest.approx(
            cvar_exact(d, a), abs=1e-12
        )
        assert cvar_empirical(values, a, "upper").estimate == pytest.approx(
            cvar_upper_exact(d, a), abs=1e-12
        )


def test_empirical_too_few_samples():
    with pytest.raises(ValidationError) as err:
        cvar_empirical([1.0, 2.0], 0.1)
    assert "10" in str(err.value)


def test_empirical_report_fields():
    r = cvar_empirical(list(range(100)), 0.25, "upper")
    assert r.kept == 25
    assert r.shots == 100
    assert r.estimate == pytest.approx(np.mean(range(75, 100)))
    assert '"alpha": 0.25' in r.to_json()


def test_filtered_always_true_matches_plain():
    rng = np.random.default_rng(53)
    table = rng.normal(size=16)
    counts = {format(i, "04b"): int(c) for i, c in
              enumerate(rng.integers(1, 50, 16))}
    s = SampleSet(4, counts, sum(counts.values()))
    flt = always_true_filter(float(table.min()), float(table.max()))
    out = cvar_filtered(s, table, flt, 0.3)
    vals = s.values(table)
    assert out.lower == pytest.approx(
        cvar_empirical(vals, 0.3, "lower").estimate, abs=1e-12
    )
    assert out.upper == pytest.approx(
        cvar_empirical(vals, 0.3, "upper").estimate, abs=1e-12
    )
    assert out.feasible_fraction == 1.0
    assert out.lower <= out.postselected_mean <= out.upper


def test_filtered_penalties_move_inward():
    # infeasible strings get M_u on the lower side and M_l on the upper side
    table = np.arange(16, dtype=float)
    counts = {format(i, "04b"): 1 for i in range(16)}
    s = SampleSet(4, counts, 16)
    flt = hamming_weight_filter(2, m_lower=0.0, m_upper=15.0)
    out = cvar_filtered(s, table, flt, 0.25)
    feas = [i for i in range(16) if bin(i).count("1") == 2]
    lo_vals = [table[i] if i in feas else 15.0 for i in range(16)]
    hi_vals = [table[i] if i in feas else 0.0 for i in range(16)]
    assert out.lower == pytest.approx(np.mean(sorted(lo_vals)[:4]), abs=1e-12)
    assert out.upper == pytest.approx(np.mean(sorted(hi_vals)[-4:]), abs=1e-12)
    assert out.postselected_mean == pytest.approx(np.mean(table[feas]), abs=1e-12)
    assert out.feasible_fraction == len(feas) / 16


def test_filtered_no_feasible_shots():
    table = np.zeros(4)
    s = SampleSet(2, {"11": 10}, 10)
    flt = hamming_weight_filter(1, m_lower=-2.0, m_upper=3.0)
    out = cvar_filtered(s, table, flt, 0.5)
    assert out.lower == 3.0
    assert out.upper == -2.0
    assert out.feasible_fraction == 0.0


def test_nondiagonal_sum_of_groups():
    # expectation of X0 + Z0 on a random 1-qubit state, via two bases
    rng = np.random.default_rng(54)
    psi = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi /= np.linalg.norm(psi)
    ex = float(np.real(np.vdot(psi, np.array([[0, 1], [1, 0]]) @ psi)))
    ez = float(np.real(np.vdot(psi, np.array([[1, 0], [0, -1]]) @ psi)))
    h = 1 / math.sqrt(2)
    pz = np.abs(psi) ** 2
    px = np.abs(np.array([[h, h], [h, -h]]) @ psi) ** 2
    m = 200000
    zs = rng.choice([1.0, -1.0], size=m, p=pz)
    xs = rng.choice([1.0, -1.0], size=m, p=px)
    lo = cvar_nondiagonal([xs, zs], 0.25, "lower")
    hi = cvar_nondiagonal([xs, zs], 0.25, "upper")
    assert lo <= ex + ez + 0.02
    assert hi >= ex + ez - 0.02
    # alpha = 1 collapses both sides onto the sample mean of the sum
    assert cvar_nondiagonal([xs, zs], 1.0, "lower") == pytest.approx(
        xs.mean() + zs.mean(), abs=1e-12
    )


def test_nondiagonal_x_on_plus_state():
    vals = np.ones(100)  # X eigenvalue on |+> is always +1
    assert cvar_nondiagonal([vals], 0.1, "lower") == 1.0
    with pytest.raises(ValidationError):
        cvar_nondiagonal([], 0.1)


def test_calibrate_alpha_round_trip():
    rng = np.random.default_rng(55)
    v = rng.normal(size=20000)
    target = 1.2
    res = calibrate_alpha(v, target, side="upper")
    assert not res.saturated
    assert res.achieved >= target - 1e-9
    # upper CVaR at the calibrated alpha sits at the target; a notch larger
    # alpha must fall below it
    worse = cvar_empirical(v, min(1.0, res.alpha_prime * 1.05), "upper").estimate
    assert worse <= target + 1e-6
    assert res.achieved == pytest.approx(target, abs=1e-6)


def test_calibrate_alpha_saturation():
    v = np.zeros(100)
    hi = calibrate_alpha(v, -1.0, side="upper")
    assert hi.alpha_prime == 1.0 and hi.saturated
    lo = calibrate_alpha(v, 5.0, side="upper")
    assert lo.alpha_prime == pytest.approx(0.01)
    assert lo.saturated


def test_gamma_prime_per_cnot():
    assert gamma_prime_per_cnot(1.0, 10) == 1.0
    a = 0.25
    g = gamma_prime_per_cnot(a, 8)
    assert g ** (-8 / 2) == pytest.approx(a, rel=1e-12)
    with pytest.raises(ValidationError):
        gamma_prime_per_cnot(0.0, 4)


def test_bootstrap_constant_sample():
    res = bootstrap_variance(np.ones(500), [0.5, 0.1], 50, 7)
    assert res.variances == (0.0, 0.0)
    assert res.slope == 0.0


def test_bootstrap_determinism_and_scaling():
    rng = np.random.default_rng(56)
    v = rng.normal(size=4000)
    a = bootstrap_variance(v, [0.5, 0.2, 0.1], 200, 11)
    b = bootstrap_variance(v, [0.5, 0.2, 0.1], 200, 11)
    assert a == b
    # gaussian lower-CVaR variance scales close to 1/alpha at these alphas
    assert -1.6 < a.slope < -0.5
    assert all(x < y for x, y in zip(a.variances, a.variances[1:]))


def test_bootstrap_validation():
    with pytest.raises(ValidationError):
        bootstrap_variance(np.ones(100), [0.001], 10, 0)
    with pytest.raises(ValidationError):
        bootstrap_variance(np.ones(100), [0.5], 1, 0)


def test_normal_quantile_accuracy():
    for p in (1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999):
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-12)
    assert normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)


def test_gaussian_closed_forms():
    assert gaussian_cvar(0.5) == pytest.approx(-math.sqrt(2 / math.pi), rel=1e-10)
    assert gaussian_cvar(1.0) == 0.0
    assert gaussian_cvarv(1.0) == 1.0
    # definitional cross-check: alpha^-1 Var[N | N <= x_alpha] by monte carlo
    # over the conditioned tail (note this conditional-variance convention is
    # smaller than the order-statistic estimator's sampling variance, which
    # picks up an extra (1 - alpha)(x_alpha - cvar)^2 / alpha term)
    rng = np.random.default_rng(57)
    a = 0.2
    x = rng.normal(size=2_000_000)
    tail = x[x <= normal_quantile(a)]
    assert tail.var() / a == pytest.approx(gaussian_cvarv(a), rel=0.01)


def test_bernoulli_closed_forms():
    assert bernoulli_upper_cvar(0.05, 0.5) == pytest.approx(0.1)
    assert bernoulli_upper_cvar(0.05, 0.01) == 1.0
    assert bernoulli_upper_cvarv(0.05, 0.5) == pytest.approx(0.05 * 0.95 / 0.25)
    assert bernoulli_upper_cvarv(0.05, 0.01) == 0.0
    assert bernoulli_upper_cvarv(0.05, 0.05) == pytest.approx(
        0.95 / 0.05 * (0.5 - 1 / (2 * math.pi))
    )


def test_powerlaw_closed_forms():
    beta = 3.0
    a = 0.2
    # direct integral oracle: E[X | X >= q] with q = a^(-1/beta)
    q = a ** (-1 / beta)
    mean_tail = beta / (beta - 1) * q  # pareto mean above q
    assert powerlaw_upper_cvar(beta, a) == pytest.approx(mean_tail, rel=1e-12)
    var_tail = q * q * beta / ((beta - 1) ** 2 * (beta - 2))
    assert powerlaw_upper_cvarv(beta, a) == pytest.approx(var_tail / a, rel=1e-12)
    with pytest.raises(ValidationError):
        powerlaw_upper_cvar(1.0, 0.5)
    with pytest.raises(ValidationError):
        powerlaw_upper_cvarv(2.0, 0.5)


def test_powerlaw_variance_below_crude_bound():
    beta = 3.0
    second = beta / (beta - 2.0)  # E[X^2] for the beta = 3 law
    for a in (0.05, 0.2, 0.7, 1.0):
        assert powerlaw_upper_cvarv(beta, a) <= crude_cvarv_bound(second, a)


def test_analytic_variance_dispatch():
    assert analytic_variance("gaussian", 0.5) == (
        gaussian_cvar(0.5), gaussian_cvarv(0.5)
    )
    assert analytic_variance("bernoulli", 0.5, p=0.1)[0] == pytest.approx(0.2)
    assert analytic_variance("powerlaw", 0.5, beta=3.0)[0] == pytest.approx(
        powerlaw_upper_cvar(3.0, 0.5)
    )
    with pytest.raises(ValidationError):
        analytic_variance("cauchy", 0.5)


def test_cdf_csv():
    text = cdf_csv([1.0, 1.0, 2.0, 3.0])
    lines = text.strip().split("\n")
    assert lines[0] == "value,cumulative_probability"
    assert lines[1] == "1,0.5"
    assert lines[-1] == "3,1"
