"""Command line front end.

Every run writes its outputs plus a manifest (command, arguments, config hash,
package/numpy versions, kernel backend) into the output directory, and a run
can be reproduced from its manifest with `cvarq rerun`.  Seeds are explicit
and mandatory for anything that samples.  Exit codes: 1 for validation
errors, 2 for resource-limit refusals.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

import cvarq
from cvarq import circuit as circuit_mod
from cvarq import cvar as cvar_mod
from cvarq import kernels
from cvarq import pec as pec_mod
from cvarq import report as report_mod
from cvarq.circuit import CnotLayer, LayeredCircuit
from cvarq.errors import ResourceLimitError, ValidationError
from cvarq.noise import PauliLindbladModel
from cvarq.pauli import PauliString
from cvarq.problems import (
    IsingPolynomial,
    QaoaParams,
    build_qaoa,
    graph_to_json,
    hamming_weight_filter,
    heavy_hex_instance,
    maxcut_3regular,
    qaoa_grid_search,
)
from cvarq.simulator import SampleSet


def _out_dir(args) -> Path:
    d = Path(os.environ.get("CVARQ_OUT_DIR", args.out))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path: Path, text: str):
    path.write_text(text)
    print(f"wrote {path}")


def _manifest(args, command: str, out: Path):
    config = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    blob = json.dumps({"command": command, "config": config}, sort_keys=True)
    manifest = {
        "command": command,
        "argv": [command] + _argv_of(args, command),
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "versions": {
            "cvarq": cvarq.__version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
            "kernels": kernels.BACKEND,
        },
    }
    _write(out / f"manifest-{command}.json", json.dumps(manifest, indent=2))


def _argv_of(args, command: str) -> list[str]:
    argv = []
    for k, v in vars(args).items():
        if k in ("func", "command") or v is None or v is False:
            continue
        flag = "--" + k.replace("_", "-")
        if v is True:
            argv.append(flag)
        elif isinstance(v, list):
            for item in v:
                argv += [flag, str(item)]
        else:
            argv += [flag, str(v)]
    return argv


def _load_poly(path: str) -> IsingPolynomial:
    return IsingPolynomial.from_json(Path(path).read_text())


def _load_values(args, sample_set: SampleSet) -> np.ndarray:
    poly = _load_poly(args.problem)
    if poly.n != sample_set.n:
        raise ValidationError("problem and samples disagree on qubit count")
    return sample_set.values(poly.value_table())


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _uniform_cnot_noise(circ: LayeredCircuit, lam: float) -> LayeredCircuit:
    """Attach, per CNOT layer, one term for each of the 15 non-identity
    two-qubit Paulis on every gate's pair, all at rate lam."""
    if lam < 0:
        raise ValidationError("lambda-per-cnot must be >= 0")
    layers = []
    for layer in circ.layers:
        if isinstance(layer, CnotLayer):
            terms = []
            for c, t in layer.pairs:
                for xc in (0, 1):
                    for zc in (0, 1):
                        for xt in (0, 1):
                            for zt in (0, 1):
                                if xc or zc or xt or zt:
                                    x = (xc << c) | (xt << t)
                                    z = (zc << c) | (zt << t)
                                    terms.append((PauliString(circ.n, x, z), lam))
            model = PauliLindbladModel(circ.n, tuple(terms))
            layers.append(CnotLayer(layer.pairs, noise=model, label=layer.label))
        else:
            layers.append(layer)
    return LayeredCircuit(circ.n, tuple(layers))


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_problem(args):
    out = _out_dir(args)
    if args.kind == "maxcut-3reg":
        if args.nodes is None:
            raise ValidationError("--nodes is required for maxcut-3reg")
        edges, poly = maxcut_3regular(args.nodes, args.seed)
        _write(out / "graph.json", graph_to_json(args.nodes, edges))
    elif args.kind == "heavyhex":
        inst = heavy_hex_instance(
            rows=args.rows, row_len=args.row_len, seed=args.seed, preset=args.preset
        )
        poly = inst.polynomial
        _write(out / "graph.json", graph_to_json(inst.n, list(inst.edges)))
    else:
        raise ValidationError(f"unknown problem kind {args.kind!r}")
    _write(out / "problem.json", poly.to_json())
    _manifest(args, "gen-problem", out)


def cmd_run_qaoa(args):
    from cvarq.simulator import sample_ideal, sample_noisy

    out = _out_dir(args)
    poly = _load_poly(args.problem)
    if args.grid_search:
        params, expectation = qaoa_grid_search(poly, grid=args.grid)
        print(f"grid search: gamma={params.gammas[0]:.6g} "
              f"beta={params.betas[0]:.6g} expectation={expectation:.6g}")
    else:
        if args.betas is None or args.gammas is None:
            raise ValidationError("--betas/--gammas required without --grid-search")
        betas, gammas = _parse_floats(args.betas), _parse_floats(args.gammas)
        params = QaoaParams(len(betas), betas, gammas)
    instance = None
    if args.layout == "heavy-hex-parity":
        instance = heavy_hex_instance(
            rows=args.rows, row_len=args.row_len,
            seed=args.instance_seed if args.instance_seed is not None else 0,
            preset=args.preset,
        )
        poly = instance.polynomial
    circ = build_qaoa(poly, params, layout=args.layout, instance=instance)
    if args.noise is not None:
        model = PauliLindbladModel.from_json(Path(args.noise).read_text())
        circ = circ.with_noise_on_cnot_layers(model)
    elif args.lambda_per_cnot is not None:
        circ = _uniform_cnot_noise(circ, args.lambda_per_cnot)
    _write(out / "circuit.json", circuit_mod.to_json(circ))
    if any(l.noise is not None for l in circ.cnot_layers()):
        samples = sample_noisy(circ, args.shots, args.seed)
    else:
        samples = sample_ideal(circ, args.shots, args.seed)
    _write(out / "samples.csv", samples.to_csv())
    _manifest(args, "run-qaoa", out)


def cmd_cvar(args):
    out = _out_dir(args)
    samples = SampleSet.from_csv(Path(args.samples).read_text())
    poly = _load_poly(args.problem)
    if poly.n != samples.n:
        raise ValidationError("problem and samples disagree on qubit count")
    table = poly.value_table()
    reports = []
    for alpha in _parse_floats(args.alpha):
        if args.filter is not None:
            kind, _, karg = args.filter.partition(":")
            if kind != "hamming":
                raise ValidationError(f"unknown filter {args.filter!r}")
            flt = hamming_weight_filter(int(karg), args.m_lower, args.m_upper)
            res = cvar_mod.cvar_filtered(samples, table, flt, alpha, args.side)
            reports.append(json.loads(res.report.to_json())
                           | {"lower": res.lower, "upper": res.upper,
                              "postselected_mean": res.postselected_mean})
        else:
            rep = cvar_mod.cvar_empirical(samples.values(table), alpha, args.side)
            reports.append(json.loads(rep.to_json()))
    _write(out / "cvar.json", json.dumps(reports, indent=2))
    _write(out / "cdf.csv", cvar_mod.cdf_csv(samples.values(table)))
    _manifest(args, "cvar", out)


def cmd_pec(args):
    out = _out_dir(args)
    circ = circuit_mod.from_json(Path(args.circuit).read_text())
    poly = _load_poly(args.problem)
    est, stderr = pec_mod.pec_expectation(circ, poly.value_table(), args.shots, args.seed)
    gamma = pec_mod.circuit_qpd_gamma(circ)
    result = {"estimate": est, "stderr": stderr, "gamma": gamma,
              "variance_overhead": gamma**2}
    _write(out / "pec.json", json.dumps(result, indent=2))
    _manifest(args, "pec", out)
    print(f"PEC estimate {est:.6g} +- {stderr:.3g} (gamma {gamma:.6g})")


def cmd_bounds_report(args):
    out = _out_dir(args)
    samples = SampleSet.from_csv(Path(args.samples).read_text())
    poly = _load_poly(args.problem)
    rep = report_mod.bound_report(
        samples,
        poly.value_table(),
        args.alpha,
        reference=args.reference,
        optimum=args.optimum,
        n_cnot=args.cnots,
        sense=poly.sense,
    )
    print(rep.table(), end="")
    _write(out / "bounds.json", rep.to_json())
    _write(out / "cdf.csv", rep.cdf)
    _manifest(args, "bounds-report", out)


def cmd_bootstrap_var(args):
    out = _out_dir(args)
    if args.values is not None:
        vals = np.loadtxt(args.values, ndmin=1)
    else:
        if args.samples is None or args.problem is None:
            raise ValidationError("need --values, or --samples with --problem")
        samples = SampleSet.from_csv(Path(args.samples).read_text())
        vals = _load_values(args, samples)
    res = cvar_mod.bootstrap_variance(
        vals, _parse_floats(args.alphas), args.resamples, args.seed,
        m=args.size, side=args.side,
    )
    payload = {"alphas": list(res.alphas), "variances": list(res.variances),
               "slope": res.slope}
    _write(out / "bootstrap.json", json.dumps(payload, indent=2))
    _manifest(args, "bootstrap-var", out)
    print(f"log-log slope {res.slope:.4g}")


def cmd_overhead(args):
    out = _out_dir(args)
    lfs, counts = [], []
    for spec in args.lf:
        lf, _, cnt = spec.partition(":")
        if not cnt:
            raise ValidationError(f"--lf needs the form value:count, got {spec!r}")
        lfs.append(float(lf))
        counts.append(int(cnt))
    rep = report_mod.derive_overheads(lfs, counts, args.cnots)
    _write(out / "overhead.json", rep.to_json())
    _manifest(args, "overhead", out)
    print(f"F_CX {rep.f_cx:.6g}  EPLG {rep.eplg:.6g}  gamma_CX {rep.gamma_cx:.6g}")
    print(f"sqrt(gamma) {rep.sqrt_gamma:.6g}  alpha {rep.alpha:.6g}")


def cmd_min_lf(args):
    lf = report_mod.min_layer_fidelity(args.p)
    print(f"{lf:.4f}")
    if args.n is not None:
        print(f"per-CNOT: {report_mod.min_cnot_fidelity(args.p, args.n):.6f}")


def cmd_twirl_compare(args):
    from cvarq.circuit import insert_pauli_twirl
    from cvarq.simulator import sample_noisy

    out = _out_dir(args)
    circ = circuit_mod.from_json(Path(args.circuit).read_text())
    plain = sample_noisy(circ, args.shots, args.seed)
    per_twirl = args.shots // args.twirls
    if per_twirl < 1:
        raise ValidationError("shots must be >= twirls")
    agg: dict[str, int] = {}
    rng = np.random.default_rng(args.seed)
    for t in range(args.twirls):
        tw, _ = insert_pauli_twirl(circ, rng)
        s = sample_noisy(tw, per_twirl, args.seed + 1 + t)
        for b, c in s.counts.items():
            agg[b] = agg.get(b, 0) + c
    twirled = SampleSet(circ.n, agg, per_twirl * args.twirls,
                        args.seed, "noisy")
    tv = plain.empirical().tv_distance(twirled.empirical())
    payload = {"tv_distance": tv, "shots": args.shots, "twirls": args.twirls}
    _write(out / "twirl-compare.json", json.dumps(payload, indent=2))
    _manifest(args, "twirl-compare", out)
    print(f"TV(untwirled, twirled) = {tv:.6g}")


def cmd_rerun(args):
    manifest = json.loads(Path(args.manifest).read_text())
    return main(manifest["argv"])


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvarq",
        description="Noisy-circuit sampling with provable CVaR bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (results are thread-count independent)")
        return p

    p = add("gen-problem", cmd_gen_problem, help="generate a problem instance")
    p.add_argument("--kind", required=True, choices=["maxcut-3reg", "heavyhex"])
    p.add_argument("--nodes", type=int)
    p.add_argument("--rows", type=int, default=7)
    p.add_argument("--row-len", type=int, default=15)
    p.add_argument("--preset", choices=["127"])
    p.add_argument("--seed", type=int, required=True)

    p = add("run-qaoa", cmd_run_qaoa, help="build and sample a QAOA circuit")
    p.add_argument("--problem", required=True)
    p.add_argument("--betas")
    p.add_argument("--gammas")
    p.add_argument("--grid-search", action="store_true")
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--layout", default="generic",
                   choices=["generic", "heavy-hex-parity"])
    p.add_argument("--rows", type=int, default=7)
    p.add_argument("--row-len", type=int, default=15)
    p.add_argument("--preset", choices=["127"])
    p.add_argument("--instance-seed", type=int)
    p.add_argument("--noise", help="noise model JSON attached to every CNOT layer")
    p.add_argument("--lambda-per-cnot", type=float,
                   help="uniform rate for all 15 two-qubit Paulis per gate")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = add("cvar", cmd_cvar, help="CVaR of sampled values")
    p.add_argument("--samples", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--alpha", required=True, help="comma-separated levels")
    p.add_argument("--side", default="lower", choices=["lower", "upper"])
    p.add_argument("--filter", help="feasibility filter, e.g. hamming:3")
    p.add_argument("--m-lower", type=float, default=0.0)
    p.add_argument("--m-upper", type=float, default=0.0)

    p = add("pec", cmd_pec, help="probabilistic error cancellation estimate")
    p.add_argument("--circuit", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)

    p = add("bounds-report", cmd_bounds_report, help="CVaR bound report + CDF")
    p.add_argument("--samples", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--reference", type=float)
    p.add_argument("--optimum", type=float)
    p.add_argument("--cnots", type=int)

    p = add("bootstrap-var", cmd_bootstrap_var, help="bootstrap CVaR variance")
    p.add_argument("--samples")
    p.add_argument("--problem")
    p.add_argument("--values", help="file with one raw value per line")
    p.add_argument("--alphas", required=True)
    p.add_argument("--resamples", type=int, required=True)
    p.add_argument("--size", type=int, help="resample size (default: sample count)")
    p.add_argument("--side", default="lower", choices=["lower", "upper"])
    p.add_argument("--seed", type=int, required=True)

    p = add("overhead", cmd_overhead, help="derive overheads from layer fidelities")
    p.add_argument("--lf", action="append", required=True,
                   help="layer fidelity as value:cnot-count (repeatable)")
    p.add_argument("--cnots", type=int, required=True,
                   help="CNOT count of the circuit of interest")

    p = add("min-lf", cmd_min_lf, help="minimum useful layer fidelity")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int)

    p = add("twirl-compare", cmd_twirl_compare,
            help="compare sampling with and without Pauli twirling")
    p.add_argument("--circuit", required=True)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--twirls", type=int, default=50)
    p.add_argument("--seed", type=int, required=True)

    p = add("rerun", cmd_rerun, help="re-execute a run from its manifest")
    p.add_argument("--manifest", required=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result = args.func(args)
        return int(result) if result is not None else 0
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ResourceLimitError as e:
        print(f"resource limit: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
