"""Command-line front end: ``tubewalk {generate,sweep,validate,maximize,simulate}``.

Exit codes: 0 ok, 2 usage or configuration error, 3 oracle refused,
4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .lattice import TubeSpec, TubeSpecError, build_nanotube, export_graph
from .transport import (
    CSV_COLUMNS, REGIMES, analyze_tube, atp_exact, atp_via_simulation, make_regime,
    regime_setup, reports_to_csv, sr_basis, sweep,
)
from .trapped import (
    ORACLE_MAX_DIM, OracleRefused, TrappedBasis, cqw_basis, orthonormalize, pcqw_basis,
    span_residual, spectral_oracle,
)
from .walk import (
    MixedState, averaged_channel_survival, pcqw_trajectories, step_matrix, survival_trace,
    uniform_on,
)

EXIT_OK, EXIT_USAGE, EXIT_REFUSED, EXIT_INVALID = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _chirality(text: str) -> tuple[int, int]:
    try:
        m, n = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected m,n, got {text!r}") from None
    return m, n


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _spec(args) -> TubeSpec:
    m, n = args.chirality
    return TubeSpec(m, n, args.length)


# -- subcommands --------------------------------------------------------------

def cmd_generate(args) -> int:
    _emit(export_graph(build_nanotube(_spec(args))), args.out)
    return EXIT_OK


def _sweep_config(args) -> cfgmod.SweepConfig:
    if args.preset and args.config:
        raise UsageError("give a config file or --preset, not both")
    if args.preset:
        cfg = cfgmod.load_preset(args.preset)
    elif args.config:
        cfg = cfgmod.load_config(args.config)
    else:
        raise UsageError("sweep needs a config file or --preset")
    for key in ("out", "workers", "seed", "trajectories", "p"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


def _extra_columns(cfg: cfgmod.SweepConfig, reports) -> list[dict]:
    """Optional validation columns appended after the fixed schema."""
    extras = [dict() for _ in reports]
    residuals: dict = {}
    for row, r in zip(extras, reports):
        if cfg.oracle_check:
            key = (r.spec.m, r.spec.n, r.spec.length)
            if key not in residuals:
                try:
                    g = build_nanotube(r.spec)
                    analytic = orthonormalize([s.amplitudes for s in pcqw_basis(g).states])
                    residuals[key] = span_residual(analytic, spectral_oracle(g, "pcqw").matrix())
                except Exception as err:
                    residuals[key] = f"{type(err).__name__}"
            res = residuals[key]
            row["oracleResidual"] = res if isinstance(res, str) else f"{res:.3e}"
        if cfg.simulation_check and not r.error:
            g = build_nanotube(r.spec)
            reg = make_regime(g, r.regime)
            rho = MixedState.maximally_mixed(reg.source, g.dim)
            setup = regime_setup(g, reg, r.flavor, cfg.p, cfg.seed)
            sim = atp_via_simulation(rho, setup, cfg.horizon, trajectories=cfg.trajectories)
            row["simATP"] = f"{sim.atp:.12f}"
            row["simStderr"] = "" if sim.stderr is None else f"{sim.stderr:.3e}"
            row["simConverged"] = str(sim.converged).lower()
    return extras


def cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    reports = sweep(cfg.specs(), cfg.regimes, cfg.flavors, workers=cfg.workers)
    if not (cfg.oracle_check or cfg.simulation_check):
        _emit(reports_to_csv(reports), cfg.out)
    else:
        extras = _extra_columns(cfg, reports)
        cols = CSV_COLUMNS + ["error"] + [k for k in ("oracleResidual", "simATP", "simStderr",
                                                      "simConverged") if any(k in e for e in extras)]
        buf = io.StringIO()
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        for r, e in zip(reports, extras):
            w.writerow({**r.row(), "error": r.error, **e})
        _emit(buf.getvalue(), cfg.out)
    failed = sum(bool(r.error) for r in reports)
    if failed:
        print(f"{failed} of {len(reports)} grid points failed; see the error column", file=sys.stderr)
    return EXIT_OK


def _check(checks: list, name: str, value: float, limit: float, ok: bool | None = None) -> None:
    checks.append({"check": name, "value": value, "limit": limit,
                   "pass": bool(value <= limit) if ok is None else bool(ok)})


def validate_setting(spec: TubeSpec, regime: str, flavor: str, trajectories: int = 1000,
                     horizon: int = 2000, p: float = 0.5, seed: int = 0,
                     max_dim: int = ORACLE_MAX_DIM) -> dict:
    """Basis-vs-oracle span, eigen-equation residuals and projection-vs-simulation ATP."""
    g = build_nanotube(spec)
    if g.dim > max_dim:
        raise OracleRefused(f"state space of dimension {g.dim} exceeds oracle limit {max_dim}")
    reg = make_regime(g, regime)
    checks: list = []
    pc = pcqw_basis(g)
    analytic = orthonormalize([s.amplitudes for s in pc.states])
    oracle_pc = spectral_oracle(g, "pcqw", max_dim).matrix()
    _check(checks, "pcqw span residual (analytic vs oracle)", span_residual(analytic, oracle_pc), 1e-8)
    _check(checks, "pcqw dimension = 2V - E", analytic.shape[1], g.trapped_dim,
           ok=analytic.shape[1] == oracle_pc.shape[1] == g.trapped_dim)
    rng = np.random.default_rng(seed)
    basis: TrappedBasis = pc if flavor == "pcqw" else cqw_basis(g)
    worst = 0.0
    mats = [step_matrix(g)]
    if flavor == "pcqw":
        mats += [step_matrix(g, rng.random(g.n_edges) < p) for _ in range(20)]
    for s in basis.states:
        for U in mats:
            worst = max(worst, float(np.linalg.norm(U @ s.amplitudes - s.eigenvalue * s.amplitudes)))
    _check(checks, "eigen-equation residual of analytic states", worst, 1e-8)
    report = {"m": spec.m, "n": spec.n, "length": spec.length, "regime": regime, "flavor": flavor}
    if flavor == "cqw":
        oracle_cqw = spectral_oracle(g, "cqw", max_dim)
        report["trappedDimPCQW"] = g.trapped_dim
        report["trappedDimCQW"] = len(oracle_cqw)
        A = orthonormalize([s.amplitudes for s in basis.states])
        B = oracle_cqw.matrix()
        report["analyticDimCQW"] = A.shape[1]
        outside = A - B @ (B.conj().T @ A)
        _check(checks, "analytic cqw states inside oracle span",
               float(np.linalg.norm(outside, axis=0).max()), 1e-8)
    res = sr_basis(g, reg, flavor)
    rho = MixedState.maximally_mixed(reg.source, g.dim)
    exact = atp_exact(rho, res.basis)
    report.update(method=res.method, trappedDim=res.trapped_dim, srDim=res.basis.shape[1],
                  averagedATP=exact)
    setup = regime_setup(g, reg, flavor, p, seed)
    if flavor == "cqw":
        sim = atp_via_simulation(rho, setup, max(horizon, 5000), tolerance=1e-6)
        report["simulatedATP"] = sim.atp
        _check(checks, "projection vs plain-walk simulation", abs(sim.atp - exact), 1e-2)
    else:
        curves = pcqw_trajectories(rho, setup, horizon, trajectories)
        mean = curves[:, -1].mean()
        se = curves[:, -1].std(ddof=1) / np.sqrt(trajectories) if trajectories > 1 else 0.0
        channel = averaged_channel_survival(rho, setup, horizon)[-1]
        report.update(simulatedATP=1 - mean, stderr=se, channelATP=1 - channel, horizon=horizon)
        # sampling error: Monte Carlo against the exact averaged channel at the same horizon
        _check(checks, "Monte Carlo vs averaged channel (standard errors)",
               abs(mean - channel) / max(se, 1e-300) if se > 1e-14 else 0.0, 3.0,
               ok=abs(mean - channel) <= 3 * se + 1e-12)
        # transient: averaged channel at the horizon against the projection limit
        _check(checks, "averaged channel vs projection", abs((1 - channel) - exact), 1e-4)
    report["checks"] = checks
    report["pass"] = all(c["pass"] for c in checks)
    return report


def cmd_validate(args) -> int:
    report = validate_setting(_spec(args), args.regime, args.flavor, args.trajectories,
                              args.horizon, args.p, args.seed, args.max_dim)
    _emit(json.dumps(report, indent=1, default=float) + "\n", args.out)
    for c in report["checks"]:
        print(f"[{'PASS' if c['pass'] else 'FAIL'}] {c['check']}: {c['value']:.4g} (limit {c['limit']})",
              file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_INVALID


def cmd_maximize(args) -> int:
    (report,) = analyze_tube(_spec(args), [args.regime], [args.flavor], max_dim=args.max_dim)
    _emit(report.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    g = build_nanotube(_spec(args))
    reg = make_regime(g, args.regime)
    if args.initial == "mixed":
        rho = MixedState.maximally_mixed(reg.source, g.dim)
    else:
        rho = MixedState.pure(uniform_on(reg.source, g.dim))
    setup = regime_setup(g, reg, args.flavor, args.p, args.seed)
    if args.flavor == "pcqw" and args.exact:
        surv = averaged_channel_survival(rho, setup, args.steps)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "survival", "stderr"])
        for t, s in enumerate(surv):
            w.writerow([t, repr(float(s)), ""])
        _emit(buf.getvalue(), args.out)
        return EXIT_OK
    trace = survival_trace(rho, setup, args.steps, args.trajectories, workers=args.workers)
    _emit(trace.to_csv(), args.out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tubewalk", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def tube(p, regime=False):
        p.add_argument("--chirality", type=_chirality, required=True, metavar="M,N")
        p.add_argument("--length", type=int, required=True)
        if regime:
            p.add_argument("--regime", choices=sorted(REGIMES), default="ll")
            p.add_argument("--flavor", choices=["cqw", "pcqw"], default="pcqw")
        p.add_argument("--out", default=None, metavar="PATH")

    def walk(p):
        p.add_argument("--p", type=float, default=0.5)
        p.add_argument("--trajectories", type=int, default=1000)
        p.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="write the tube graph export")
    tube(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sweep", help="averaged and maximal ATP over a grid, as CSV")
    s.add_argument("config", nargs="?", help="flat key = value config file")
    s.add_argument("--preset", help=f"shipped config: {', '.join(cfgmod.preset_names())}")
    s.add_argument("--out", default=None, metavar="PATH")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--trajectories", type=int, default=None)
    s.add_argument("--p", type=float, default=None)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="oracle, residual and simulation checks for one setting")
    tube(v, regime=True)
    walk(v)
    v.add_argument("--horizon", type=int, default=2000)
    v.add_argument("--max-dim", type=int, default=ORACLE_MAX_DIM)
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("maximize", help="maximal ATP and the state reaching it, as JSON")
    tube(m, regime=True)
    m.add_argument("--max-dim", type=int, default=ORACLE_MAX_DIM)
    m.set_defaults(func=cmd_maximize)

    t = sub.add_parser("simulate", help="survival trace p(t) as CSV")
    tube(t, regime=True)
    walk(t)
    t.add_argument("--steps", type=int, default=500)
    t.add_argument("--initial", choices=["mixed", "uniform"], default="mixed")
    t.add_argument("--exact", action="store_true", help="percolated walk: exact averaged channel")
    t.add_argument("--workers", type=int, default=1)
    t.set_defaults(func=cmd_simulate)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OracleRefused as err:
        print(f"oracle refused: {err}", file=sys.stderr)
        return EXIT_REFUSED
    except (UsageError, cfgmod.ConfigError, TubeSpecError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
