"""Hamiltonian flow of H = |p|^2/2 + u(q, t) and its rescaled family.

Integration is velocity-Verlet (symplectic, time-reversible, second order)
with the time-dependent force evaluated at the step endpoints.  The rescaled
Hamiltonians H_eps = |p|^2/2 + eps^2 u(q, eps t) share mode data with the base
potential; ``OrbitSegment.eps`` records which family member a segment solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import IntegrationDivergedError, ValidationFailure
from .potential import FourierPotential


@dataclass(frozen=True)
class PhaseState:
    """A point (q, p) at time t; q lives on the torus but is stored unwrapped."""

    q: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise ValidationFailure(f"q and p dimensions differ: {q.shape} vs {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p)) and math.isfinite(self.t)):
            raise ValidationFailure("phase state components must be finite")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def speed(self) -> float:
        return float(np.linalg.norm(self.p))


def energy(pot: FourierPotential, state: PhaseState, eps: float = 1.0) -> float:
    """H_eps at the state; eps = 1 gives the plain energy |p|^2/2 + u(q, t)."""
    return 0.5 * float(state.p @ state.p) + eps * eps * pot.value(state.q, eps * state.t)


def default_h_step(state: PhaseState) -> float:
    """Step policy 1e-3 / max(1, |p|): resolves fast orbits without wasting
    steps on slow ones."""
    return 1e-3 / max(1.0, state.speed())


@dataclass(frozen=True)
class OrbitSegment:
    """Uniformly sampled trajectory of H_eps for the referenced potential."""

    potential: FourierPotential
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    h_step: float
    eps: float = 1.0

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def state(self, i: int) -> PhaseState:
        return PhaseState(q=self.q[i], p=self.p[i], t=float(self.times[i]))

    @property
    def initial(self) -> PhaseState:
        return self.state(0)

    @property
    def final(self) -> PhaseState:
        return self.state(-1)

    def energies(self) -> np.ndarray:
        """H_eps sampled along the segment."""
        u = self.potential.value(self.q, self.eps * self.times)
        return 0.5 * np.sum(self.p * self.p, axis=1) + self.eps**2 * u

    def energy_drift(self) -> float:
        e = self.energies()
        return float(np.max(np.abs(e - e[0])))


def _resolve_steps(duration: float, h_step: float) -> int:
    if duration <= 0:
        raise ValidationFailure(f"duration must be positive, got {duration}")
    if h_step <= 0:
        raise ValidationFailure(f"h_step must be positive, got {h_step}")
    # snap to an integer count when duration is a near-multiple of h
    nearest = round(duration / h_step)
    if nearest >= 1 and abs(nearest * h_step - duration) <= 1e-9 * duration:
        return nearest
    return math.ceil(duration / h_step)


def step_vv(pot: FourierPotential, state: PhaseState, h_step: float,
            eps: float = 1.0) -> PhaseState:
    """One velocity-Verlet step: half kick, drift, half kick with the force
    re-evaluated at t + h."""
    seg = integrate(pot, state, h_step, h_step=h_step, eps=eps)
    return seg.final


def integrate(pot: FourierPotential, state: PhaseState, duration: float,
              h_step: float | None = None, eps: float = 1.0) -> OrbitSegment:
    """Integrate H_eps forward from ``state`` for ``duration``.

    Returns the segment with ceil(duration / h) + 1 stored samples.  Raises
    :class:`IntegrationDivergedError` if the state leaves the representable
    range, reporting the last valid sample time.
    """
    if state.n != pot.n:
        raise ValidationFailure(f"state dimension {state.n} != potential dimension {pot.n}")
    if eps <= 0:
        raise ValidationFailure(f"eps must be positive, got {eps}")
    if h_step is None:
        h_step = default_h_step(state)
    nsteps = _resolve_steps(duration, h_step)
    n = state.n
    out_q = np.empty((nsteps + 1, n))
    out_p = np.empty((nsteps + 1, n))
    k, m, amp, ph = pot._arrays
    bad = _kernels.verlet_orbit(
        state.q, state.p, state.t, h_step, nsteps,
        k, m, amp, ph, eps * eps, eps, out_q, out_p,
    )
    times = state.t + h_step * np.arange(nsteps + 1)
    if bad >= 0:
        raise IntegrationDivergedError(
            f"integration diverged near t = {times[bad]:.6g}",
            last_valid_time=float(times[bad - 1]) if bad > 0 else state.t,
        )
    return OrbitSegment(potential=pot, times=times, q=out_q, p=out_p,
                        h_step=h_step, eps=eps)


def rescale_orbit(orbit: OrbitSegment, eps: float) -> OrbitSegment:
    """Map an orbit of H_delta to the corresponding orbit of H_{delta * eps}.

    The correspondence (q(t), p(t)) -> (q(eps s), eps p(eps s)) with s = t/eps
    is exact at the level of solutions; applied to sampled data it relabels
    times and scales momenta, no re-integration involved.
    """
    if eps <= 0:
        raise ValidationFailure(f"eps must be positive, got {eps}")
    return replace(
        orbit,
        times=orbit.times / eps,
        p=orbit.p * eps,
        h_step=orbit.h_step / eps,
        eps=orbit.eps * eps,
    )
