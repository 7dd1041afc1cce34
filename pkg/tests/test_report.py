import json
import math

import numpy as np
import pytest

from cvarq.errors import ValidationError
from cvarq.report import (
    bound_report,
    derive_overheads,
    min_cnot_fidelity,
    min_layer_fidelity,
)
from cvarq.simulator import SampleSet


def test_chain_overheads_40q():
    # two alternating CNOT layers of 20 and 19 gates on a line of 40 qubits
    r1 = derive_overheads([0.7686, 0.7444], [20, 19], 461)
    assert r1.f_cx == pytest.approx(0.9858, abs=5e-5)
    assert r1.eplg == pytest.approx(0.0142, abs=5e-5)
    assert r1.gamma_cx == pytest.approx(1.0290, abs=5e-5)
    assert r1.sqrt_gamma == pytest.approx(735.0, rel=1e-3)
    assert r1.alpha == pytest.approx(1.361e-3, rel=1e-3)
    r2 = derive_overheads([0.7686, 0.7444], [20, 19], 922)
    assert r2.sqrt_gamma == pytest.approx(540275.9, rel=1e-3)
    assert r2.alpha == pytest.approx(1.851e-6, rel=1e-3)


def test_chain_overheads_127q():
    lfs = [0.056926, 0.029630, 0.167959]
    r = derive_overheads(lfs, [48, 48, 48], 288)
    assert math.prod(lfs) == pytest.approx(0.000283, abs=5e-7)
    assert r.f_cx == pytest.approx(0.944850, abs=1e-4)
    assert r.eplg == pytest.approx(0.055150, abs=1e-4)
    assert r.gamma_cx == pytest.approx(1.120146, abs=1e-4)
    assert r.sqrt_gamma == pytest.approx(1.246e7, rel=1e-2)
    for p, want in [(2, 1.553e14), (3, 1.935e21), (4, 2.410e28), (5, 3.003e35)]:
        rp = derive_overheads(lfs, [48, 48, 48], 288 * p)
        assert rp.sqrt_gamma == pytest.approx(want, rel=1e-2)
        assert rp.alpha == pytest.approx(1.0 / want, rel=1e-2)


def test_overhead_scale_consistency():
    # splitting the same fidelity mass across layers leaves F_CX unchanged
    a = derive_overheads([0.9, 0.8], [10, 10], 100)
    b = derive_overheads([0.72], [20], 100)
    assert a.f_cx == pytest.approx(b.f_cx, rel=1e-12)
    assert a.sqrt_gamma == pytest.approx(b.sqrt_gamma, rel=1e-12)
    # alpha is exactly the reciprocal overhead
    assert a.alpha * a.sqrt_gamma == pytest.approx(1.0, rel=1e-12)
    # doubling the CNOT count squares the overhead
    c = derive_overheads([0.9, 0.8], [10, 10], 200)
    assert c.sqrt_gamma == pytest.approx(a.sqrt_gamma ** 2, rel=1e-10)


def test_overhead_validation():
    with pytest.raises(ValidationError):
        derive_overheads([0.9], [1, 2], 10)
    with pytest.raises(ValidationError):
        derive_overheads([1.5], [1], 10)
    with pytest.raises(ValidationError):
        derive_overheads([0.9], [0], 10)


def test_overhead_json():
    r = derive_overheads([0.9], [5], 10)
    d = json.loads(r.to_json())
    assert d["n_cnot"] == 10
    assert d["f_cx"] == pytest.approx(0.9 ** 0.2)


def test_min_layer_fidelity_thresholds():
    assert min_layer_fidelity(1) == pytest.approx(0.7937, abs=5e-5)
    assert min_layer_fidelity(2) == pytest.approx(0.8909, abs=5e-5)
    assert min_layer_fidelity(3) == pytest.approx(0.9259, abs=5e-5)
    assert min_layer_fidelity(3) == pytest.approx(2 ** (-1 / 9), rel=1e-12)
    with pytest.raises(ValidationError):
        min_layer_fidelity(0)


def test_min_cnot_fidelity():
    assert min_cnot_fidelity(2, 10) == pytest.approx(2 ** (-2 / 60), rel=1e-12)
    # per-CNOT threshold squared over n/2 gates reproduces the layer threshold
    p, n = 3, 12
    assert min_cnot_fidelity(p, n) ** (n / 2) == pytest.approx(
        min_layer_fidelity(p), rel=1e-12
    )
    with pytest.raises(ValidationError):
        min_cnot_fidelity(1, 1)


def test_bound_report_basic():
    rng = np.random.default_rng(70)
    table = np.arange(16, dtype=float)
    counts = {format(i, "04b"): int(c) for i, c in
              enumerate(rng.integers(1, 100, 16))}
    s = SampleSet(4, counts, sum(counts.values()))
    r = bound_report(s, table, 0.25, optimum=15.0)
    assert r.lower_cvar <= r.noisy_mean <= r.upper_cvar
    assert r.best_sample == 15.0
    assert r.best_ratio == 1.0
    assert r.cvar_ratio == pytest.approx(r.upper_cvar / 15.0)
    assert r.alpha_prime is None
    assert r.cdf.startswith("value,cumulative_probability")


def test_bound_report_ratio_examples():
    # 47 of 56 and 50 of 56 round to the published three decimals
    assert 47 / 56 == pytest.approx(0.839, abs=5e-4)
    assert 50 / 56 == pytest.approx(0.893, abs=5e-4)
    assert 43.1 / 56 == pytest.approx(0.770, abs=5e-4)
    assert 48.5 / 56 == pytest.approx(0.866, abs=5e-4)


def test_bound_report_calibration():
    rng = np.random.default_rng(71)
    table = rng.normal(size=16)
    counts = {format(i, "04b"): 200 for i in range(16)}
    s = SampleSet(4, counts, 3200)
    ref = float(np.quantile(table, 0.8))
    r = bound_report(s, table, 0.5, reference=ref, n_cnot=100)
    assert r.alpha_prime is not None
    assert 0 < r.alpha_prime <= 1
    assert r.gamma_prime_cx == pytest.approx(r.alpha_prime ** (-2 / 100), rel=1e-10)


def test_bound_report_min_sense():
    table = np.arange(4, dtype=float)
    s = SampleSet(2, {"00": 5, "01": 5, "10": 5, "11": 5}, 20)
    r = bound_report(s, table, 0.5, optimum=-1.0, sense="min")
    assert r.best_sample == 0.0
    assert r.cvar_ratio == pytest.approx(r.lower_cvar / -1.0)


def test_bound_report_validation():
    s = SampleSet(2, {"00": 3}, 3)
    with pytest.raises(ValidationError):
        bound_report(s, np.zeros(4), 0.1)
    with pytest.raises(ValidationError):
        bound_report(s, np.zeros(4), 1.5)


def test_bound_report_serialization():
    s = SampleSet(2, {"00": 2, "11": 2}, 4)
    r = bound_report(s, np.arange(4, dtype=float), 0.5)
    d = json.loads(r.to_json())
    assert "cdf" not in d
    assert d["shots"] == 4
    text = r.table()
    assert "lower CVaR" in text and "upper CVaR" in text
