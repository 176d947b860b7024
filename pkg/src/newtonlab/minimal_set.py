"""Shell sampling: what fraction of a momentum shell starts minimal orbits?

States are drawn uniformly on T^n x S^1 in (q, t) and uniformly in the
annulus R1 <= |p| <= R2 (density proportional to r^{n-1} in radius, uniform
direction).  Each sampled state is scanned for a conjugate point within a
fixed horizon; the minimal fraction comes with a Wilson score interval, and
non-minimal samples are reported as witnesses with a half-step convergence
check on their first conjugate time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conjugate import ScanResult, scan_orbit
from .dynamics import PhaseState, default_h_step
from .errors import ValidationFailure
from .parallel import chunks, ordered_map, resolve_threads
from .potential import FourierPotential

# 97.5% standard normal quantile for the 95% Wilson interval
Z95 = 1.959963984540054

WITNESS_TIME_RTOL = 1e-3
FIND_WITNESS_CHUNK = 64


@dataclass(frozen=True)
class ShellSpec:
    """Sampling plan for one momentum shell."""

    r1: float
    r2: float
    horizon: float
    samples: int
    seed: int
    h_step: float | None = None

    def __post_init__(self):
        if not (0.0 < self.r1 < self.r2):
            raise ValidationFailure(f"need 0 < r1 < r2, got r1={self.r1}, r2={self.r2}")
        if self.horizon <= 0:
            raise ValidationFailure(f"horizon must be positive, got {self.horizon}")
        if self.samples < 1:
            raise ValidationFailure(f"samples must be >= 1, got {self.samples}")
        if self.h_step is not None and self.h_step <= 0:
            raise ValidationFailure(f"h_step must be positive, got {self.h_step}")

    def to_dict(self) -> dict:
        return {
            "r1": self.r1, "r2": self.r2, "horizon": self.horizon,
            "samples": self.samples, "seed": self.seed, "h_step": self.h_step,
        }


def sample_shell(spec: ShellSpec, n: int) -> list[PhaseState]:
    """Deterministic sample states; sample i depends only on (seed, i, n).

    Radius r is drawn with density ~ r^{n-1} via inverse transform on r^n, so
    p is uniform in the annulus volume.
    """
    states = []
    for i in range(spec.samples):
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(i,)))
        q = rng.random(n)
        t = float(rng.random())
        while True:
            g = rng.standard_normal(n)
            norm = float(np.linalg.norm(g))
            if norm > 1e-12:
                break
        u = rng.random()
        r = (spec.r1**n + u * (spec.r2**n - spec.r1**n)) ** (1.0 / n)
        states.append(PhaseState(q=q, p=g * (r / norm), t=t))
    return states


def wilson_interval(successes: int, total: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; safe at 0 and total."""
    if total == 0:
        return 0.0, 1.0
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class Witness:
    """A sampled state whose orbit develops a conjugate point in the horizon."""

    index: int
    state: PhaseState
    first_conjugate_time: float
    tangential: bool
    h_step: float
    half_step_time: float | None
    converged: bool

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "q": [float(x) for x in self.state.q],
            "p": [float(x) for x in self.state.p],
            "t": self.state.t,
            "first_conjugate_time": self.first_conjugate_time,
            "tangential": self.tangential,
            "h_step": self.h_step,
            "half_step_time": self.half_step_time,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class Divergence:
    index: int
    state: PhaseState
    time: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "q": [float(x) for x in self.state.q],
            "p": [float(x) for x in self.state.p],
            "t": self.state.t,
            "time": self.time,
        }


@dataclass(frozen=True)
class ShellReport:
    """Aggregate outcome of scanning every sampled state."""

    spec: ShellSpec
    n: int
    tested: int
    minimal_count: int
    fraction_minimal: float
    wilson_low: float
    wilson_high: float
    witnesses: tuple[Witness, ...]
    divergences: tuple[Divergence, ...]

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "n": self.n,
            "tested": self.tested,
            "minimal_count": self.minimal_count,
            "fraction_minimal": self.fraction_minimal,
            "wilson_low": self.wilson_low,
            "wilson_high": self.wilson_high,
            "witness_count": len(self.witnesses),
            "witnesses": [w.to_dict() for w in self.witnesses],
            "divergences": [d.to_dict() for d in self.divergences],
        }


def _scan_sample(pot: FourierPotential, spec: ShellSpec, state: PhaseState) -> ScanResult:
    h = spec.h_step if spec.h_step is not None else default_h_step(state)
    return scan_orbit(pot, state, spec.horizon, h_step=h)


def _make_witness(pot: FourierPotential, spec: ShellSpec, index: int,
                  state: PhaseState, result: ScanResult) -> Witness:
    point = result.conjugate
    # re-detect at half step; agreement confirms the event is resolved, not a
    # step-size artifact
    half = scan_orbit(pot, state, spec.horizon, h_step=0.5 * result.h_step)
    half_time = half.conjugate.time if half.conjugate is not None else None
    converged = (
        half_time is not None
        and abs(half_time - point.time) <= WITNESS_TIME_RTOL * max(1.0, abs(point.time))
    )
    return Witness(
        index=index,
        state=state,
        first_conjugate_time=point.time,
        tangential=point.tangential,
        h_step=result.h_step,
        half_step_time=half_time,
        converged=converged,
    )


def estimate_fraction(pot: FourierPotential, spec: ShellSpec,
                      threads: int | None = None) -> ShellReport:
    """Scan every sampled state and report the minimal fraction.

    Deterministic for fixed (spec, potential) regardless of thread count:
    per-sample RNG streams are independent of execution order and results are
    reduced in index order.
    """
    nthreads = resolve_threads(threads)
    states = sample_shell(spec, pot.n)
    results = ordered_map(lambda s: _scan_sample(pot, spec, s), states, nthreads)
    witnesses: list[Witness] = []
    divergences: list[Divergence] = []
    minimal = 0
    for i, (state, res) in enumerate(zip(states, results)):
        if res.diverged:
            divergences.append(Divergence(index=i, state=state, time=res.divergence_time))
        elif res.found:
            witnesses.append(_make_witness(pot, spec, i, state, res))
        else:
            minimal += 1
    tested = len(states) - len(divergences)
    fraction = minimal / tested if tested else 0.0
    low, high = wilson_interval(minimal, tested) if tested else (0.0, 1.0)
    return ShellReport(
        spec=spec, n=pot.n, tested=tested, minimal_count=minimal,
        fraction_minimal=fraction, wilson_low=low, wilson_high=high,
        witnesses=tuple(witnesses), divergences=tuple(divergences),
    )


def find_witness(pot: FourierPotential, spec: ShellSpec, budget_orbits: int | None = None,
                 threads: int | None = None) -> Witness | None:
    """First (lowest-index) non-minimal sample within the budget, or None.

    Scans in fixed-size chunks so the search can stop early; the returned
    witness is always the minimal index among hits, independent of thread
    count.
    """
    budget = spec.samples if budget_orbits is None else min(budget_orbits, spec.samples)
    nthreads = resolve_threads(threads)
    states = sample_shell(ShellSpec(
        r1=spec.r1, r2=spec.r2, horizon=spec.horizon, samples=budget,
        seed=spec.seed, h_step=spec.h_step,
    ), pot.n)
    offset = 0
    for chunk in chunks(states, FIND_WITNESS_CHUNK):
        results = ordered_map(lambda s: _scan_sample(pot, spec, s), chunk, nthreads)
        for j, res in enumerate(results):
            if res.found:
                idx = offset + j
                return _make_witness(pot, spec, idx, chunk[j], res)
        offset += len(chunk)
    return None
