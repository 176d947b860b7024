"""Jacobi fields, conjugate points, and Riccati diagnostics along orbits.

The focal Jacobi solution J(t) solves J'' = -S(t) J with J(t0) = 0,
J'(t0) = I, where S is the (scaled) spatial Hessian of the potential along
the orbit.  Zeros of det J past t0 are conjugate points; an orbit segment
free of them is a local action minimizer among fixed-endpoint variations.

Two propagation paths share identical update arithmetic: a stored-record path
(full J, J', det J history) for diagnostics and CSV output, and a fused
streaming scan (see :mod:`._kernels`) that stops at the first event and is
cheap enough for shell sampling.  Both refine a sign-change bracket with the
same one-substep bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dynamics import OrbitSegment, PhaseState, default_h_step, integrate
from .errors import SingularWindowError, ValidationFailure
from .potential import FourierPotential

GUARD_STEPS = 10
SINGULAR_REL = 1e-10
BISECT_TOL = 1e-8


@dataclass(frozen=True)
class JacobiRecord:
    """Focal Jacobi solution sampled along an orbit (or frozen Hessian)."""

    times: np.ndarray
    J: np.ndarray
    Jdot: np.ndarray
    det: np.ndarray
    h_step: float
    orbit: OrbitSegment | None = None
    frozen_hessian: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.J.shape[1]

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    def hessian_at(self, q: np.ndarray, t: float) -> np.ndarray:
        if self.frozen_hessian is not None:
            return self.frozen_hessian
        orbit = self.orbit
        eps = orbit.eps
        return eps * eps * orbit.potential.hess_q(q, eps * t)

    def sample_state(self, i: int) -> tuple[np.ndarray, float]:
        if self.orbit is not None:
            return self.orbit.q[i], float(self.times[i])
        return np.zeros(self.n), float(self.times[i])

    def hessians(self) -> np.ndarray:
        """S(t_i) for every sample, shape (n_samples, n, n)."""
        if self.frozen_hessian is not None:
            return np.tile(self.frozen_hessian, (self.n_samples, 1, 1))
        orbit = self.orbit
        eps = orbit.eps
        return eps * eps * orbit.potential.hess_q(orbit.q, eps * orbit.times)

    def wronskian_defect(self) -> float:
        """Max Frobenius norm of J^T J' - J'^T J; zero for the exact flow and
        conserved exactly by the discrete update, so this measures pure
        floating-point drift."""
        w = np.einsum("sij,sik->sjk", self.J, self.Jdot)
        w = w - np.transpose(w, (0, 2, 1))
        return float(np.max(np.sqrt(np.sum(w * w, axis=(1, 2)))))


@dataclass(frozen=True)
class ConjugatePoint:
    """First zero (or near-zero tangential touch) of det J past the guard."""

    time: float
    tangential: bool
    bracket_index: int


def _hessians_for_orbit(orbit: OrbitSegment) -> np.ndarray:
    eps = orbit.eps
    return eps * eps * orbit.potential.hess_q(orbit.q, eps * orbit.times)


def propagate_jacobi(pot: FourierPotential, orbit: OrbitSegment) -> JacobiRecord:
    """Propagate the focal Jacobi solution along a stored orbit."""
    if orbit.potential is not pot and orbit.potential != pot:
        raise ValidationFailure("orbit was integrated for a different potential")
    S = np.ascontiguousarray(_hessians_for_orbit(orbit))
    nsamp, n = S.shape[0], S.shape[1]
    out_J = np.empty((nsamp, n, n))
    out_Jd = np.empty((nsamp, n, n))
    out_det = np.empty(nsamp)
    _kernels.jacobi_recursion(S, orbit.h_step, out_J, out_Jd, out_det)
    return JacobiRecord(times=orbit.times, J=out_J, Jdot=out_Jd, det=out_det,
                        h_step=orbit.h_step, orbit=orbit)


def propagate_jacobi_frozen(hessian: np.ndarray, duration: float, h_step: float,
                            t0: float = 0.0) -> JacobiRecord:
    """Same recursion with a constant Hessian; the harness for closed-form
    checks (J = sin(sqrt(k) t)/sqrt(k) in each eigendirection)."""
    H = np.asarray(hessian, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationFailure("hessian must be a square matrix")
    if not np.allclose(H, H.T, atol=1e-12, rtol=0.0):
        raise ValidationFailure("hessian must be symmetric")
    nsteps = max(1, math.ceil(duration / h_step - 1e-9))
    S = np.tile(H, (nsteps + 1, 1, 1))
    n = H.shape[0]
    out_J = np.empty((nsteps + 1, n, n))
    out_Jd = np.empty((nsteps + 1, n, n))
    out_det = np.empty(nsteps + 1)
    _kernels.jacobi_recursion(S, h_step, out_J, out_Jd, out_det)
    times = t0 + h_step * np.arange(nsteps + 1)
    return JacobiRecord(times=times, J=out_J, Jdot=out_Jd, det=out_det,
                        h_step=h_step, frozen_hessian=np.ascontiguousarray(H))


def _refine_crossing(hess_start: np.ndarray, t_i: float, J_i: np.ndarray,
                     Jd_i: np.ndarray, d_lo: float, h: float,
                     tol: float = BISECT_TOL) -> float:
    """Bisect det J(tau) = 0 on (t_i, t_i + h).

    Within one step the Jacobi update is quadratic in the substep length,
    J(t_i + d) = J_i + d J'_i - (d^2/2) S_i J_i, which at d = h reproduces the
    scan's own next sample, so the bracket signs are consistent by
    construction.
    """
    SJ = hess_start @ J_i
    lo, hi = t_i, t_i + h
    f_lo = d_lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        d = mid - t_i
        J_tau = J_i + d * Jd_i - (0.5 * d * d) * SJ
        val = float(_kernels._det(J_tau))
        if val == 0.0:
            return mid
        if (val < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, val
        else:
            hi = mid
    return 0.5 * (lo + hi)


def detect_conjugate(record: JacobiRecord, guard_steps: int = GUARD_STEPS,
                     singular_rel: float = SINGULAR_REL) -> ConjugatePoint | None:
    """First conjugate event in a stored record, or None.

    Sign changes of det J are refined by bisection; tangential touches are
    local minima of |det J| below ``singular_rel`` times the record-wide
    maximum, reported at the sample time without refinement.  The first
    ``guard_steps`` samples are excluded: det J ~ (t - t0)^n near the focal
    start and must not be mistaken for an event.
    """
    det = record.det
    nsamp = det.shape[0]
    if nsamp < 2:
        return None
    scale = float(np.max(np.abs(det)))
    if scale == 0.0:
        return None
    prod = det[:-1] * det[1:]
    cross_idx = np.nonzero((prod < 0.0) & (np.arange(nsamp - 1) >= guard_steps))[0]
    ad = np.abs(det)
    interior = np.arange(1, nsamp - 1)
    is_dip = (
        (ad[interior] <= ad[interior - 1])
        & (ad[interior] <= ad[interior + 1])
        & (ad[interior] < singular_rel * scale)
        & (interior > guard_steps)
    )
    dip_idx = interior[is_dip]
    # drop dips that sit on a sign change; the crossing classification wins
    if dip_idx.size and cross_idx.size:
        on_cross = np.isin(dip_idx, cross_idx) | np.isin(dip_idx - 1, cross_idx)
        dip_idx = dip_idx[~on_cross]

    cross_key = cross_idx[0] + 0.5 if cross_idx.size else math.inf
    dip_key = float(dip_idx[0]) if dip_idx.size else math.inf
    if math.isinf(cross_key) and math.isinf(dip_key):
        return None
    if dip_key < cross_key:
        i = int(dip_idx[0])
        return ConjugatePoint(time=float(record.times[i]), tangential=True, bracket_index=i)
    i = int(cross_idx[0])
    q_i, t_i = record.sample_state(i)
    S_i = record.hessian_at(q_i, t_i)
    time = _refine_crossing(S_i, t_i, record.J[i], record.Jdot[i],
                            float(det[i]), record.h_step)
    return ConjugatePoint(time=time, tangential=False, bracket_index=i)


def first_conjugate_time(record: JacobiRecord) -> float | None:
    """Refined time of the first conjugate point, or None if the record is
    free of them."""
    point = detect_conjugate(record)
    return None if point is None else point.time


@dataclass(frozen=True)
class ScanResult:
    """Outcome of the fused streaming scan over one orbit."""

    conjugate: ConjugatePoint | None
    diverged: bool
    divergence_time: float | None
    h_step: float
    n_steps: int
    det_scale: float

    @property
    def found(self) -> bool:
        return self.conjugate is not None


def scan_orbit(pot: FourierPotential, state: PhaseState, horizon: float,
               h_step: float | None = None, eps: float = 1.0,
               guard_steps: int = GUARD_STEPS,
               singular_rel: float = SINGULAR_REL) -> ScanResult:
    """Integrate forward and report the first conjugate event within the
    horizon, without storing the trajectory.

    The streaming dip threshold uses the running maximum of |det J|, so a
    longer horizon can only add events, never remove them.
    """
    if state.n != pot.n:
        raise ValidationFailure(f"state dimension {state.n} != potential dimension {pot.n}")
    if eps <= 0:
        raise ValidationFailure(f"eps must be positive, got {eps}")
    if h_step is None:
        h_step = default_h_step(state)
    if horizon <= 0:
        raise ValidationFailure(f"horizon must be positive, got {horizon}")
    nsteps = max(1, math.ceil(horizon / h_step - 1e-9))
    n = state.n
    ev_q = np.empty(n)
    ev_p = np.empty(n)
    ev_J = np.empty((n, n))
    ev_Jd = np.empty((n, n))
    k, m, amp, ph = pot._arrays
    status, idx, d_lo, d_hi, scale = _kernels.conjugate_scan(
        state.q, state.p, state.t, h_step, nsteps, k, m, amp, ph,
        eps * eps, eps, guard_steps, singular_rel,
        ev_q, ev_p, ev_J, ev_Jd,
    )
    if status == _kernels.SCAN_DIVERGED:
        return ScanResult(conjugate=None, diverged=True,
                          divergence_time=state.t + idx * h_step,
                          h_step=h_step, n_steps=nsteps, det_scale=scale)
    if status == _kernels.SCAN_TANGENTIAL:
        point = ConjugatePoint(time=state.t + idx * h_step, tangential=True,
                               bracket_index=int(idx))
        return ScanResult(conjugate=point, diverged=False, divergence_time=None,
                          h_step=h_step, n_steps=nsteps, det_scale=scale)
    if status == _kernels.SCAN_SIGN_CHANGE:
        t_i = state.t + idx * h_step
        S_i = eps * eps * pot.hess_q(ev_q, eps * t_i)
        time = _refine_crossing(S_i, t_i, ev_J, ev_Jd, d_lo, h_step)
        point = ConjugatePoint(time=time, tangential=False, bracket_index=int(idx))
        return ScanResult(conjugate=point, diverged=False, divergence_time=None,
                          h_step=h_step, n_steps=nsteps, det_scale=scale)
    return ScanResult(conjugate=None, diverged=False, divergence_time=None,
                      h_step=h_step, n_steps=nsteps, det_scale=scale)


def is_minimal(pot: FourierPotential, state: PhaseState, horizon: float,
               h_step: float | None = None) -> bool:
    """True if the orbit from ``state`` has no conjugate point within the
    horizon.  Divergence raises; minimality is then undecidable."""
    result = scan_orbit(pot, state, horizon, h_step=h_step)
    if result.diverged:
        from .errors import IntegrationDivergedError

        raise IntegrationDivergedError(
            f"orbit diverged at t = {result.divergence_time:.6g} before the horizon",
            last_valid_time=result.divergence_time,
        )
    return not result.found


@dataclass(frozen=True)
class RiccatiDiagnostics:
    """Finite-difference residuals of A = J' J^{-1} on a time window.

    A solves the matrix Riccati equation A' + A^2 + S = 0 wherever J is
    invertible; its trace satisfies a' + tr(A^2) + tr S = 0 and, for the
    symmetric A produced by focal data, tr(A^2) >= (tr A)^2 / n.
    """

    times: np.ndarray
    A: np.ndarray
    symmetry_defect: np.ndarray
    trace_gap: np.ndarray
    interior_times: np.ndarray
    matrix_residual: np.ndarray
    trace_comparison_residual: np.ndarray

    @property
    def max_matrix_residual(self) -> float:
        return float(np.max(self.matrix_residual)) if self.matrix_residual.size else 0.0

    @property
    def max_trace_residual(self) -> float:
        return float(np.max(np.abs(self.trace_comparison_residual))) if self.trace_comparison_residual.size else 0.0


def riccati_diagnostics(record: JacobiRecord, window: tuple[float, float],
                        singular_rel: float = SINGULAR_REL) -> RiccatiDiagnostics:
    """Evaluate Riccati residuals on [window[0], window[1]].

    Raises :class:`SingularWindowError` if any sample in the window has
    |det J| below ``singular_rel`` times the record-wide maximum; the window
    must therefore avoid the focal start.
    """
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise ValidationFailure(f"empty window {window}")
    times = record.times
    mask = (times >= t_lo - 1e-12) & (times <= t_hi + 1e-12)
    idx = np.nonzero(mask)[0]
    if idx.size < 3:
        raise ValidationFailure("window must contain at least three samples")
    scale = float(np.max(np.abs(record.det)))
    bad = np.abs(record.det[idx]) < singular_rel * scale
    if np.any(bad):
        t_bad = float(times[idx[np.argmax(bad)]])
        raise SingularWindowError(
            f"Jacobi matrix is numerically singular at t = {t_bad:.6g}", time=t_bad)

    J = record.J[idx]
    Jd = record.Jdot[idx]
    # A = J' J^{-1}; solve J^T X = J'^T so X = A^T
    A = np.transpose(np.linalg.solve(np.transpose(J, (0, 2, 1)),
                                     np.transpose(Jd, (0, 2, 1))), (0, 2, 1))
    n = record.n
    sym = A - np.transpose(A, (0, 2, 1))
    symmetry_defect = np.sqrt(np.sum(sym * sym, axis=(1, 2)))
    A2 = A @ A
    trA = np.trace(A, axis1=1, axis2=2)
    trA2 = np.trace(A2, axis1=1, axis2=2)
    trace_gap = trA2 - trA * trA / n

    S = record.hessians()[idx]
    h = record.h_step
    dA = (A[2:] - A[:-2]) / (2.0 * h)
    R = dA + A2[1:-1] + S[1:-1]
    matrix_residual = np.sqrt(np.sum(R * R, axis=(1, 2)))
    da = (trA[2:] - trA[:-2]) / (2.0 * h)
    trS = np.trace(S, axis1=1, axis2=2)
    trace_comparison_residual = da + trA2[1:-1] + trS[1:-1]

    return RiccatiDiagnostics(
        times=times[idx],
        A=A,
        symmetry_defect=symmetry_defect,
        trace_gap=trace_gap,
        interior_times=times[idx][1:-1],
        matrix_residual=matrix_residual,
        trace_comparison_residual=trace_comparison_residual,
    )


def conjugate_scan_record(pot: FourierPotential, state: PhaseState, horizon: float,
                          h_step: float | None = None, eps: float = 1.0
                          ) -> tuple[OrbitSegment, JacobiRecord]:
    """Convenience: integrate, propagate Jacobi data, return both."""
    orbit = integrate(pot, state, horizon, h_step=h_step, eps=eps)
    return orbit, propagate_jacobi(pot, orbit)
