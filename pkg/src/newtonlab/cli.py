"""Command-line client for the experiment engine.

Each subcommand builds one experiment config, runs it (in process by default,
or against a running service with --server), and writes the report JSON plus
any requested CSV tables.  Exit codes: 0 success, 2 validation error,
3 numerical failure; errors are emitted as JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pydantic

from . import __version__, configs, experiments
from .errors import NumericalFailure, ValidationFailure
from .reports import Table, write_report, write_table

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x != ""]
    except ValueError as exc:
        raise ValidationFailure(f"{flag} expects comma-separated floats, got {text!r}") from exc


def _parse_pair(text: str, flag: str) -> tuple[float, float]:
    vals = _parse_floats(text, flag)
    if len(vals) != 2:
        raise ValidationFailure(f"{flag} expects two comma-separated floats, got {text!r}")
    return vals[0], vals[1]


def _parse_alphas(text: str) -> list[float]:
    """Either 'lo:hi:count' (log-spaced) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValidationFailure(f"--alphas range expects lo:hi:count, got {text!r}")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ValidationFailure(f"bad --alphas range {text!r}") from exc
        if not (0 < lo < hi) or count < 1:
            raise ValidationFailure(f"--alphas range needs 0 < lo < hi and count >= 1, got {text!r}")
        return [float(a) for a in np.geomspace(lo, hi, count)]
    return _parse_floats(text, "--alphas")


def _source(path: str) -> configs.PotentialSource:
    return configs.PotentialSource(path=path)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: NEWTONLAB_THREADS or CPU count)")
    common.add_argument("--server", default=None, metavar="URL",
                        help="run on a newtonlab service instead of in process")
    common.add_argument("--report", default=None, metavar="PATH",
                        help="report JSON path (default: <kind>-report.json)")

    parser = argparse.ArgumentParser(
        prog="newtonlab",
        description="Numerical lab for time-periodic Newton equations on the torus.",
    )
    parser.add_argument("--version", action="version", version=f"newtonlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("conjugate-scan", parents=[common],
                       help="integrate one orbit and locate its first conjugate point")
    p.add_argument("--potential", required=True)
    p.add_argument("--q0", required=True, help="comma-separated initial position")
    p.add_argument("--p0", required=True, help="comma-separated initial momentum")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--h-step", type=float, default=None)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--riccati-window", default=None, metavar="LO,HI")
    p.add_argument("--orbit-csv", default=None)
    p.add_argument("--jacobi-csv", default=None)

    p = sub.add_parser("estimate-m", parents=[common],
                       help="sample a momentum shell and estimate its minimal fraction")
    p.add_argument("--potential", required=True)
    p.add_argument("--r1", type=float, required=True)
    p.add_argument("--r2", type=float, required=True)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h-step", type=float, default=None)
    p.add_argument("--find-witness", action="store_true",
                   help="stop at the first non-minimal sample instead of scanning all")
    p.add_argument("--budget", type=int, default=None,
                   help="orbit budget for --find-witness (default: --samples)")
    p.add_argument("--witnesses-csv", default=None)
    p.add_argument("--witness-orbits-dir", default=None,
                   help="dump an orbit CSV per witness (local runs only)")

    p = sub.add_parser("dalpha-sweep", parents=[common],
                       help="evaluate the discriminant over a range of stretch parameters")
    p.add_argument("--potential", required=True)
    p.add_argument("--n", type=int, default=None, help="ambient dimension (>= potential n)")
    p.add_argument("--shell-r", type=float, default=None,
                   help="shell radius fixing the default cutoff support")
    p.add_argument("--bump", default=None, metavar="A,B", help="explicit cutoff support")
    p.add_argument("--alphas", required=True, help="'lo:hi:count' log-spaced, or a comma list")
    p.add_argument("--csv", default=None, help="sweep table CSV path")

    p = sub.add_parser("crosscheck-d", parents=[common],
                       help="compare discriminant quadrature against direct Monte Carlo")
    p.add_argument("--potential", required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--shell-r", type=float, default=None)
    p.add_argument("--bump", default=None, metavar="A,B")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify-correspondence", parents=[common],
                       help="check the rescaling map against direct integration")
    p.add_argument("--potential", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--q0", required=True)
    p.add_argument("--p0", required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--h-step", type=float, default=1e-4)
    p.add_argument("--tolerance", type=float, default=1e-6)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _config_from_args(args) -> configs.ExperimentConfig:
    if args.command == "conjugate-scan":
        window = None
        if args.riccati_window is not None:
            window = _parse_pair(args.riccati_window, "--riccati-window")
        return configs.ConjugateScanConfig(
            potential=_source(args.potential),
            q0=_parse_floats(args.q0, "--q0"),
            p0=_parse_floats(args.p0, "--p0"),
            t0=args.t0,
            horizon=args.horizon,
            h_step=args.h_step,
            eps=args.eps,
            riccati_window=window,
        )
    if args.command == "estimate-m":
        return configs.EstimateMConfig(
            potential=_source(args.potential),
            r1=args.r1, r2=args.r2, horizon=args.horizon,
            samples=args.samples, seed=args.seed, h_step=args.h_step,
            mode="witness" if args.find_witness else "fraction",
            budget_orbits=args.budget,
        )
    if args.command == "dalpha-sweep":
        bump = None
        if args.bump is not None:
            a, b = _parse_pair(args.bump, "--bump")
            bump = configs.BumpConfig(a=a, b=b)
        return configs.DalphaSweepConfig(
            potential=_source(args.potential),
            n=args.n, shell_r=args.shell_r, bump=bump,
            alphas=_parse_alphas(args.alphas),
        )
    if args.command == "crosscheck-d":
        bump = None
        if args.bump is not None:
            a, b = _parse_pair(args.bump, "--bump")
            bump = configs.BumpConfig(a=a, b=b)
        return configs.CrosscheckDConfig(
            potential=_source(args.potential),
            n=args.n, shell_r=args.shell_r, bump=bump,
            alpha=args.alpha, samples=args.samples, seed=args.seed,
        )
    if args.command == "verify-correspondence":
        return configs.VerifyCorrespondenceConfig(
            potential=_source(args.potential),
            eps=args.eps,
            q0=_parse_floats(args.q0, "--q0"),
            p0=_parse_floats(args.p0, "--p0"),
            t0=args.t0,
            duration=args.duration,
            h_step=args.h_step,
            tolerance=args.tolerance,
        )
    raise ValidationFailure(f"unknown command {args.command}")


def _run_remote(server: str, cfg, threads: int | None) -> experiments.ExperimentResult:
    import httpx

    url = f"{server.rstrip('/')}/experiments/{cfg.kind}"
    params = {} if threads is None else {"threads": threads}
    resp = httpx.post(url, json=cfg.model_dump(mode="json"), params=params, timeout=None)
    if resp.status_code in (400, 422):
        raise ValidationFailure(resp.text)
    if resp.status_code != 200:
        raise NumericalFailure(resp.text)
    payload = resp.json()
    tables = {name: Table.from_payload(t) for name, t in payload.get("tables", {}).items()}
    return experiments.ExperimentResult(report=payload["report"], tables=tables)


def _summary_line(kind: str, report: dict) -> str:
    res = report["results"]
    if kind == "conjugate-scan":
        if res["first_conjugate_time"] is None:
            return f"no conjugate point within the horizon (h = {res['h_step']:.3g})"
        label = "tangential" if res["tangential"] else "transversal"
        return f"first conjugate point at t = {res['first_conjugate_time']:.6f} ({label})"
    if kind == "estimate-m":
        if "witness" in res:
            w = res["witness"]
            if w is None:
                return f"no witness within budget {res['budget_orbits']}"
            return (f"witness at sample {w['index']}: first conjugate time "
                    f"{w['first_conjugate_time']:.6f}")
        return (f"minimal {res['minimal_count']}/{res['tested']} = "
                f"{res['fraction_minimal']:.4f} "
                f"[{res['wilson_low']:.4f}, {res['wilson_high']:.4f}] (95% Wilson)")
    if kind == "dalpha-sweep":
        neg = res.get("largest_negative_alpha")
        slopes = (f"slopes A:{res['slope_term_a']} B:{res['slope_term_b']} "
                  f"(expected {res['expected_slope_a']}, {res['expected_slope_b']})")
        if neg is None:
            return f"no negative discriminant in range; {slopes}"
        return f"D_alpha < 0 up to alpha = {neg:.6g}; {slopes}"
    if kind == "crosscheck-d":
        comp = res["comparison"]["total"]
        verdict = "agree" if comp["within_3se"] else "DISAGREE"
        return (f"quadrature {comp['quadrature']:.6e} vs MC {comp['mc']:.6e} "
                f"+- {comp['mc_stderr']:.2e}: {verdict}")
    if kind == "verify-correspondence":
        verdict = "passed" if res["passed"] else "FAILED"
        return (f"rescaling correspondence {verdict}: max deviation "
                f"{res['max_deviation']:.3e} (tolerance {res['tolerance']:.1e})")
    return "done"


def _write_outputs(args, result: experiments.ExperimentResult) -> None:
    kind = result.report["kind"]
    report_path = args.report if args.report else f"{kind}-report.json"
    write_report(report_path, result.report)
    print(f"wrote {report_path}")

    def maybe(table_name: str, path: str | None):
        if path is not None:
            if table_name not in result.tables:
                raise ValidationFailure(f"no {table_name} table produced by this run")
            write_table(path, result.tables[table_name])
            print(f"wrote {path}")

    if kind == "conjugate-scan":
        maybe("orbit", args.orbit_csv)
        maybe("jacobi", args.jacobi_csv)
    elif kind == "estimate-m":
        maybe("witnesses", args.witnesses_csv)
        if args.witness_orbits_dir is not None:
            if args.server is not None:
                raise ValidationFailure("--witness-orbits-dir requires a local run")
            _dump_witness_orbits(args, result)
    elif kind == "dalpha-sweep":
        maybe("sweep", args.csv)
    print(_summary_line(kind, result.report))


def _dump_witness_orbits(args, result: experiments.ExperimentResult) -> None:
    from .minimal_set import Witness
    from .dynamics import PhaseState
    from .potential import load_potential

    res = result.report["results"]
    witnesses = res["witnesses"] if "witnesses" in res else (
        [res["witness"]] if res.get("witness") else [])
    if not witnesses:
        return
    pot = load_potential(args.potential)
    out_dir = Path(args.witness_orbits_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    horizon = res["spec"]["horizon"]
    for w in witnesses:
        witness = Witness(
            index=w["index"],
            state=PhaseState(q=w["q"], p=w["p"], t=w["t"]),
            first_conjugate_time=w["first_conjugate_time"],
            tangential=w["tangential"],
            h_step=w["h_step"],
            half_step_time=w["half_step_time"],
            converged=w["converged"],
        )
        table = experiments.witness_orbit_table(pot, witness, horizon)
        path = out_dir / f"witness-{w['index']:05d}.csv"
        write_table(path, table)
        print(f"wrote {path}")


def _emit_error(code: str, message: str) -> None:
    print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return EXIT_OK

    try:
        cfg = _config_from_args(args)
        if args.server is not None:
            result = _run_remote(args.server, cfg, args.threads)
        else:
            result = experiments.run(cfg, threads=args.threads)
        _write_outputs(args, result)
        return EXIT_OK
    except pydantic.ValidationError as exc:
        _emit_error("validation", str(exc))
        return EXIT_VALIDATION
    except ValidationFailure as exc:
        _emit_error("validation", str(exc))
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        _emit_error("numerical", str(exc))
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
