"""Experiment engine: each config kind maps to one run function.

A run returns an :class:`ExperimentResult` holding the report dict plus any
CSV tables; the CLI and the HTTP service both delegate here, so local and
served runs produce identical artifacts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .configs import (
    ConjugateScanConfig,
    CrosscheckDConfig,
    DalphaSweepConfig,
    EstimateMConfig,
    ExperimentConfig,
    PotentialSource,
    VerifyCorrespondenceConfig,
)
from .conjugate import (
    SINGULAR_REL,
    detect_conjugate,
    propagate_jacobi,
    riccati_diagnostics,
)
from .dynamics import OrbitSegment, PhaseState, integrate, rescale_orbit
from .errors import ValidationFailure
from .hopf import CutoffFunction, alpha_sweep, d_alpha, d_alpha_direct_mc
from .minimal_set import ShellSpec, Witness, estimate_fraction, find_witness
from .potential import FourierPotential, load_potential
from .reports import Table, make_report


@dataclass(frozen=True)
class ExperimentResult:
    report: dict
    tables: dict[str, Table] = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "report": self.report,
            "tables": {name: t.to_payload() for name, t in self.tables.items()},
        }


def resolve_potential(source: PotentialSource) -> FourierPotential:
    """Load (or build) and normalize the potential a config refers to."""
    if source.path is not None:
        return load_potential(source.path)
    d = source.definition
    pot = FourierPotential.from_dict({
        "n": d.n,
        "offset": d.offset,
        "modes": [m.model_dump() for m in d.modes],
    })
    return pot.normalize()


def _potential_block(pot: FourierPotential) -> dict:
    return {
        "n": pot.n,
        "modes": len(pot.modes),
        "upper": pot.upper,
        "gauge_shift": pot.gauge_shift,
        "l2_ut": pot.l2_ut(),
        "l2_gradu": pot.l2_gradu(),
    }


def _check_dimension(name: str, vec: list[float], n: int) -> np.ndarray:
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (n,):
        raise ValidationFailure(f"{name} must have length {n}, got {arr.shape[0]}")
    return arr


def _orbit_table(orbit: OrbitSegment) -> Table:
    n = orbit.n
    cols = ["t"] + [f"q{i}" for i in range(n)] + [f"p{i}" for i in range(n)] + ["energy"]
    energies = orbit.energies()
    rows = []
    for i in range(orbit.n_samples):
        rows.append((float(orbit.times[i]),
                     *(float(x) for x in orbit.q[i]),
                     *(float(x) for x in orbit.p[i]),
                     float(energies[i])))
    return Table(columns=tuple(cols), rows=tuple(rows))


def _jacobi_table(record) -> Table:
    """Per-sample det J with Riccati quantities where J is invertible.

    trace A and the symmetry defect need an invertible J at the sample;
    the centered residual additionally needs invertible neighbors.  Cells
    that cannot be computed are blank.
    """
    det = record.det
    scale = float(np.max(np.abs(det)))
    ok = np.abs(det) >= SINGULAR_REL * scale if scale > 0 else np.zeros(det.shape, bool)
    nsamp = record.n_samples
    n = record.n
    trace_a = [None] * nsamp
    sym = [None] * nsamp
    a_mats = [None] * nsamp
    for i in range(nsamp):
        if ok[i]:
            A = np.linalg.solve(record.J[i].T, record.Jdot[i].T).T
            a_mats[i] = A
            trace_a[i] = float(np.trace(A))
            d = A - A.T
            sym[i] = float(np.sqrt(np.sum(d * d)))
    S = record.hessians()
    h = record.h_step
    residual = [None] * nsamp
    for i in range(1, nsamp - 1):
        if a_mats[i - 1] is not None and a_mats[i] is not None and a_mats[i + 1] is not None:
            R = (a_mats[i + 1] - a_mats[i - 1]) / (2 * h) + a_mats[i] @ a_mats[i] + S[i]
            residual[i] = float(np.sqrt(np.sum(R * R)))
    rows = tuple(
        (float(record.times[i]), float(det[i]), trace_a[i], sym[i], residual[i])
        for i in range(nsamp)
    )
    return Table(
        columns=("t", "det_j", "trace_a", "symmetry_defect", "riccati_residual"),
        rows=rows,
    )


def run_conjugate_scan(cfg: ConjugateScanConfig, threads: int | None = None) -> ExperimentResult:
    pot = resolve_potential(cfg.potential)
    q0 = _check_dimension("q0", cfg.q0, pot.n)
    p0 = _check_dimension("p0", cfg.p0, pot.n)
    state = PhaseState(q=q0, p=p0, t=cfg.t0)
    orbit = integrate(pot, state, cfg.horizon, h_step=cfg.h_step, eps=cfg.eps)
    record = propagate_jacobi(pot, orbit)
    point = detect_conjugate(record)
    energies = orbit.energies()
    results = {
        "potential": _potential_block(pot),
        "h_step": orbit.h_step,
        "n_steps": orbit.n_samples - 1,
        "eps": cfg.eps,
        "first_conjugate_time": None if point is None else point.time,
        "tangential": None if point is None else point.tangential,
        "minimal_within_horizon": point is None,
        "det_scale": float(np.max(np.abs(record.det))),
        "energy_initial": float(energies[0]),
        "energy_final": float(energies[-1]),
        "energy_drift": orbit.energy_drift(),
        "wronskian_defect": record.wronskian_defect(),
    }
    if cfg.riccati_window is not None:
        diag = riccati_diagnostics(record, cfg.riccati_window)
        results["riccati"] = {
            "window": list(cfg.riccati_window),
            "max_matrix_residual": diag.max_matrix_residual,
            "max_trace_residual": diag.max_trace_residual,
            "max_symmetry_defect": float(np.max(diag.symmetry_defect)),
            "min_trace_gap": float(np.min(diag.trace_gap)),
        }
    report = make_report(cfg.kind, cfg.model_dump(mode="json"), results)
    return ExperimentResult(report=report, tables={
        "orbit": _orbit_table(orbit),
        "jacobi": _jacobi_table(record),
    })


def _witness_table(witnesses: tuple[Witness, ...], n: int) -> Table:
    cols = (["index"] + [f"q{i}" for i in range(n)] + [f"p{i}" for i in range(n)]
            + ["t", "first_conjugate_time", "tangential", "converged"])
    rows = tuple(
        (w.index, *(float(x) for x in w.state.q), *(float(x) for x in w.state.p),
         w.state.t, w.first_conjugate_time, w.tangential, w.converged)
        for w in witnesses
    )
    return Table(columns=tuple(cols), rows=rows)


def run_estimate_m(cfg: EstimateMConfig, threads: int | None = None) -> ExperimentResult:
    pot = resolve_potential(cfg.potential)
    if not cfg.r1 < cfg.r2:
        raise ValidationFailure(f"need r1 < r2, got r1={cfg.r1}, r2={cfg.r2}")
    spec = ShellSpec(r1=cfg.r1, r2=cfg.r2, horizon=cfg.horizon,
                     samples=cfg.samples, seed=cfg.seed, h_step=cfg.h_step)
    if cfg.mode == "witness":
        witness = find_witness(pot, spec, budget_orbits=cfg.budget_orbits, threads=threads)
        results = {
            "potential": _potential_block(pot),
            "spec": spec.to_dict(),
            "budget_orbits": cfg.budget_orbits if cfg.budget_orbits is not None else cfg.samples,
            "witness": None if witness is None else witness.to_dict(),
        }
        tables = {}
        if witness is not None:
            tables["witnesses"] = _witness_table((witness,), pot.n)
        return ExperimentResult(
            report=make_report(cfg.kind, cfg.model_dump(mode="json"), results),
            tables=tables,
        )
    shell = estimate_fraction(pot, spec, threads=threads)
    results = {
        "potential": _potential_block(pot),
        **shell.to_dict(),
    }
    report = make_report(cfg.kind, cfg.model_dump(mode="json"), results)
    return ExperimentResult(report=report, tables={
        "witnesses": _witness_table(shell.witnesses, pot.n),
    })


def witness_orbit_table(pot: FourierPotential, witness: Witness, horizon: float) -> Table:
    """Stored re-integration of one witness orbit, for CSV dumps."""
    orbit = integrate(pot, witness.state, horizon, h_step=witness.h_step)
    return _orbit_table(orbit)


def _resolve_bump(cfg, pot: FourierPotential) -> CutoffFunction:
    if cfg.bump is not None:
        return CutoffFunction(cfg.bump.a, cfg.bump.b)
    m_val = pot.upper_bound()
    lo = 0.5 * cfg.shell_r * cfg.shell_r + m_val + 1.0
    return CutoffFunction(lo, lo + 1.0)


def run_dalpha_sweep(cfg: DalphaSweepConfig, threads: int | None = None) -> ExperimentResult:
    pot = resolve_potential(cfg.potential)
    n = cfg.n if cfg.n is not None else pot.n
    if n < pot.n:
        raise ValidationFailure(f"target dimension {n} is below the potential dimension {pot.n}")
    pot = pot.embed(n)
    rho = _resolve_bump(cfg, pot)
    sweep = alpha_sweep(pot, rho, cfg.alphas, n=n, threads=threads)
    results = {
        "potential": _potential_block(pot),
        **sweep.to_dict(),
    }
    rows = tuple(
        (r.alpha, r.term_a, r.term_b, r.d_alpha, r.term_a_bound, r.term_b_bound,
         r.d_bound, r.quadrature_error)
        for r in sweep.reports
    )
    table = Table(
        columns=("alpha", "term_a", "term_b", "d_alpha", "term_a_bound",
                 "term_b_bound", "d_bound", "quadrature_error"),
        rows=rows,
    )
    report = make_report(cfg.kind, cfg.model_dump(mode="json"), results)
    return ExperimentResult(report=report, tables={"sweep": table})


def run_crosscheck_d(cfg: CrosscheckDConfig, threads: int | None = None) -> ExperimentResult:
    pot = resolve_potential(cfg.potential)
    n = cfg.n if cfg.n is not None else pot.n
    if n < pot.n:
        raise ValidationFailure(f"target dimension {n} is below the potential dimension {pot.n}")
    pot = pot.embed(n)
    rho = _resolve_bump(cfg, pot)
    quad = d_alpha(pot, rho, cfg.alpha, n=n)
    mc = d_alpha_direct_mc(pot, rho, cfg.alpha, samples=cfg.samples,
                           seed=cfg.seed, n=n, threads=threads)

    def compare(q_val: float, mc_val: float, se: float, q_err: float) -> dict:
        diff = mc_val - q_val
        slack = 3.0 * se + q_err
        return {
            "quadrature": q_val,
            "mc": mc_val,
            "mc_stderr": se,
            "diff": diff,
            "within_3se": bool(abs(diff) <= slack),
        }

    results = {
        "potential": _potential_block(pot),
        "alpha": cfg.alpha,
        "n": n,
        "samples": mc.samples,
        "quadrature": quad.to_dict(),
        "mc": mc.to_dict(),
        "comparison": {
            "term_a": compare(quad.term_a, mc.term_a, mc.term_a_stderr,
                              quad.term_a_inner_error + quad.term_a_outer_error),
            "term_b": compare(quad.term_b, mc.term_b, mc.term_b_stderr,
                              quad.term_b_inner_error + quad.term_b_outer_error),
            "total": compare(quad.d_alpha, mc.value, mc.stderr, quad.quadrature_error),
        },
    }
    report = make_report(cfg.kind, cfg.model_dump(mode="json"), results)
    return ExperimentResult(report=report)


def run_verify_correspondence(cfg: VerifyCorrespondenceConfig,
                              threads: int | None = None) -> ExperimentResult:
    pot = resolve_potential(cfg.potential)
    q0 = _check_dimension("q0", cfg.q0, pot.n)
    p0 = _check_dimension("p0", cfg.p0, pot.n)
    inv = 1.0 / cfg.eps
    stride = round(inv)
    if stride < 1 or abs(stride - inv) > 1e-9:
        raise ValidationFailure(
            f"1/eps must be an integer for sample alignment, got eps={cfg.eps}")
    h = cfg.h_step
    base_state = PhaseState(q=q0, p=p0, t=cfg.t0)
    base = integrate(pot, base_state, cfg.eps * cfg.duration, h_step=h)
    mapped = rescale_orbit(base, cfg.eps)
    direct_state = PhaseState(q=q0, p=cfg.eps * p0, t=cfg.t0 / cfg.eps)
    direct = integrate(pot, direct_state, cfg.duration, h_step=h, eps=cfg.eps)

    n_common = min(mapped.n_samples, (direct.n_samples - 1) // stride + 1)
    dq = np.max(np.abs(mapped.q[:n_common] - direct.q[: (n_common - 1) * stride + 1: stride]))
    dp = np.max(np.abs(mapped.p[:n_common] - direct.p[: (n_common - 1) * stride + 1: stride]))
    deviation = float(max(dq, dp))
    results = {
        "potential": _potential_block(pot),
        "eps": cfg.eps,
        "stride": stride,
        "h_step": h,
        "samples_compared": int(n_common),
        "max_deviation_q": float(dq),
        "max_deviation_p": float(dp),
        "max_deviation": deviation,
        "tolerance": cfg.tolerance,
        "passed": bool(deviation <= cfg.tolerance),
    }
    report = make_report(cfg.kind, cfg.model_dump(mode="json"), results)
    return ExperimentResult(report=report)


_RUNNERS = {
    "conjugate-scan": run_conjugate_scan,
    "estimate-m": run_estimate_m,
    "dalpha-sweep": run_dalpha_sweep,
    "crosscheck-d": run_crosscheck_d,
    "verify-correspondence": run_verify_correspondence,
}


def run(config: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    runner = _RUNNERS.get(config.kind)
    if runner is None:
        raise ValidationFailure(f"unknown experiment kind: {config.kind}")
    return runner(config, threads=threads)
