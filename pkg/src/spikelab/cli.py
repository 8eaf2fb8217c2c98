"""Command-line entry point.

Subcommands: ``theory``, ``oracle``, ``simulate``, ``verify`` and ``clt``.
Exit codes: 0 pass, 1 statistical failure or non-convergence, 2 bad
configuration or model assumption.

Every flag can also be set through an environment variable named
``SPIKELAB_<FLAG>`` (upper case, dashes replaced by underscores, for
example ``SPIKELAB_REPLICATES=400``); explicit flags win.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, clt, quadrature, theory
from .errors import ModelError, NonConvergence, SpikelabError
from .fluctuations import run_ensemble
from .model import check, load_config
from .stats import compare, mean_cov
from .verification import verify_ensemble

ENV_PREFIX = "SPIKELAB_"

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

DEFAULT_ALPHAS = "4,2.5,0.2,0.1"


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    config_sha256: str | None
    master_seed: int | None
    replicates: int | None
    artifacts: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0
    version: str = __version__


def _env(name, default=None, cast=str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    return cast(raw)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write(out_dir, name, text, artifacts):
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    artifacts.append(str(path))
    return path


def _finish(manifest, out_dir, start):
    manifest.wall_clock_seconds = round(time.perf_counter() - start, 3)
    if out_dir:
        manifest.artifacts.append(str(Path(out_dir) / "manifest.json"))
        with open(Path(out_dir) / "manifest.json", "w", newline="\n") as fh:
            fh.write(json.dumps(asdict(manifest), indent=2) + "\n")


def _load_run(path):
    if not path:
        raise ModelError("a config file is required (--config or SPIKELAB_CONFIG)")
    try:
        return load_config(path)
    except OSError as exc:
        raise ModelError(f"cannot read config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Subcommands


def cmd_theory(args):
    run = _load_run(args.config)
    model = run.theory_model
    check(model, experiment="eigenvalues")
    pred = theory.predict(model)
    text = json.dumps(pred.to_dict(), indent=2) + "\n"
    sys.stdout.write(text)
    if args.out:
        start = time.perf_counter()
        man = RunManifest("theory", args.config, _sha256(args.config), run.seed, None)
        _write(args.out, "theory.json", text, man.artifacts)
        _finish(man, args.out, start)
    return EXIT_PASS


def cmd_oracle(args):
    start = time.perf_counter()
    alphas = [float(a) for a in args.alphas.split(",") if a.strip()] if args.alphas else []
    report = quadrature.verify_m_report(args.gamma_sq, alphas, args.tol)
    bad = report.failures(args.tol)
    sys.stdout.write(report.to_csv())
    for row in bad:
        if row.status == "NonConvergence":
            print(f"NonConvergence: {row.kind}({row.alpha}, {row.alpha_prime}) at tol={args.tol:g}", file=sys.stderr)
        elif row.status == "ok":
            print(f"mismatch: {row.kind}({row.alpha}, {row.alpha_prime}) rel_err={row.rel_err:.3g}", file=sys.stderr)
    if args.out:
        man = RunManifest("oracle", None, None, None, None)
        _write(args.out, "moments.csv", report.to_csv(), man.artifacts)
        _write(args.out, "moments.json", report.to_json() + "\n", man.artifacts)
        _finish(man, args.out, start)
    print(f"max rel err {report.max_rel_err:.3g} over {len(report.rows)} rows; "
          f"{'PASS' if not bad else 'FAIL'}", file=sys.stderr)
    return EXIT_PASS if not bad else EXIT_FAIL


def cmd_simulate(args):
    start = time.perf_counter()
    run = _load_run(args.config)
    check(run.model, experiment="eigenvalues")
    seed = run.seed if args.seed is None else args.seed
    ens = run_ensemble(run.model, args.replicates, seed, args.workers, run.theory_model)
    out = args.out or "."
    man = RunManifest("simulate", args.config, _sha256(args.config), seed, args.replicates)
    _write(out, "ensemble.csv", ens.to_csv(), man.artifacts)
    _write(out, "ensemble.json", ens.to_json() + "\n", man.artifacts)
    _finish(man, out, start)
    print(f"{args.replicates} replicates ({len(ens.flagged)} flagged) -> {out}", file=sys.stderr)
    return EXIT_PASS


def cmd_verify(args):
    start = time.perf_counter()
    run = _load_run(args.config)
    check(run.model, experiment="eigenvalues")
    check(run.theory_model, experiment="eigenvalues")
    seed = run.seed if args.seed is None else args.seed
    # centering constants are part of the theory under test
    ens = run_ensemble(run.model, args.replicates, seed, args.workers, run.theory_model)
    report = verify_ensemble(ens, run.theory_model, args.se_mult)
    print(report.summary())
    if args.out:
        man = RunManifest("verify", args.config, _sha256(args.config), seed, args.replicates)
        _write(args.out, "report.csv", report.to_csv(), man.artifacts)
        _write(args.out, "report.json", report.to_json() + "\n", man.artifacts)
        _finish(man, args.out, start)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_clt(args):
    start = time.perf_counter()
    if not args.config:
        raise ModelError("a CLT spec file is required (--config)")
    try:
        d = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read CLT spec {args.config}: {exc}") from exc
    if not isinstance(d, dict):
        raise ModelError("CLT spec must be a JSON object")
    spec = clt.parse_spec(d)
    g2 = float(d.get("gamma_sq", 4.0))
    n = int(d.get("n", 2000))
    seed = int(d.get("seed", 0)) if args.seed is None else args.seed
    pool = d.get("matrix_pool", 10)
    # resolvent limits are evaluated at the realized ratio n / p
    lim = clt.limits(spec, n / round(n / g2))
    Z = clt.sample_ensemble(spec, g2, n, args.replicates, seed, matrix_pool=pool)
    mc = mean_cov(Z)
    K = spec.K
    names, emp, th, se = [], [], [], []
    for a in range(K):
        for b in range(a, K):
            names.append(f"D[{a},{b}]")
            emp.append(mc.cov[a, b])
            th.append(lim.D[a, b])
            se.append(mc.cov_se[a, b])
    report = compare(names, emp, th, se, args.se_mult)
    if "decay_kappa" in d:
        dec = clt.decay_check(spec, g2, float(d["decay_kappa"]), d.get("n_grid", (500, 2000, 8000)),
                              int(d.get("decay_replicates", 200)), seed)
        report = report.extend(compare("decay.monotone", float(dec.monotone), 1.0, 0.0, args.se_mult))
        print(f"decay medians {dec.medians} (factor {dec.overall_factor:.3g})")
    print(report.summary())
    if args.out:
        man = RunManifest("clt", args.config, _sha256(args.config), seed, args.replicates)
        _write(args.out, "clt_report.csv", report.to_csv(), man.artifacts)
        _write(args.out, "clt_theory.json", json.dumps(lim.to_dict(), indent=2) + "\n", man.artifacts)
        _finish(man, args.out, start)
    return EXIT_PASS if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="spikelab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"spikelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, replicates=None):
        sp.add_argument("--config", default=_env("config"), help="JSON config path")
        sp.add_argument("--out", default=_env("out"), help="output directory")
        sp.add_argument("--seed", type=int, default=_env("seed", None, int), help="master seed (overrides config)")
        if replicates is not None:
            sp.add_argument("--replicates", type=int, default=_env("replicates", replicates, int))
            sp.add_argument("--workers", type=int, default=_env("workers", 1, int))

    sp = sub.add_parser("theory", help="print limit predictions for a config")
    common(sp)
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("oracle", help="closed-form moments vs quadrature")
    sp.add_argument("--gamma-sq", type=float, default=_env("gamma_sq", 4.0, float))
    sp.add_argument("--alphas", default=_env("alphas", DEFAULT_ALPHAS), help="comma-separated spike values")
    sp.add_argument("--tol", type=float, default=_env("tol", 1e-10, float))
    sp.add_argument("--out", default=_env("out"))
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("simulate", help="run an ensemble and write CSV/JSON")
    common(sp, replicates=200)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("verify", help="run an ensemble and compare with theory")
    common(sp, replicates=400)
    sp.add_argument("--se-mult", type=float, default=_env("se_mult", 5.0, float))
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("clt", help="bilinear-form CLT harness from a JSON spec")
    common(sp, replicates=2000)
    sp.add_argument("--se-mult", type=float, default=_env("se_mult", 5.0, float))
    sp.set_defaults(func=cmd_clt)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergence as exc:
        print(f"NonConvergence: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except SpikelabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
