"""Compiled inner loops: Verlet stepping, Jacobi recursion, fused conjugate scan.

All kernels are monomorphic over float64 arrays.  Mode data arrives as packed
arrays (k: (J, n), m/amp/phase: (J,)); ``fscale``/``tscale`` implement the
rescaled family H_eps = |p|^2/2 + eps^2 u(q, eps t) via fscale = eps^2,
tscale = eps without touching the integer mode data.

The stored-path and fused-path update arithmetic is kept line-for-line
identical so both report bitwise-equal trajectories and determinants.
"""

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi

# status codes for the fused scan
SCAN_NONE = 0
SCAN_SIGN_CHANGE = 1
SCAN_TANGENTIAL = 2
SCAN_DIVERGED = 3


@njit(cache=True, nogil=True)
def _force(q, t, k, m, amp, ph, fscale, tscale, out):
    # out <- -fscale * grad_q u(q, tscale * t)
    n = q.shape[0]
    J = amp.shape[0]
    for i in range(n):
        out[i] = 0.0
    for j in range(J):
        th = ph[j] + TWO_PI * m[j] * (tscale * t)
        for i in range(n):
            th += TWO_PI * k[j, i] * q[i]
        s = TWO_PI * amp[j] * np.sin(th) * fscale
        for i in range(n):
            out[i] += s * k[j, i]


@njit(cache=True, nogil=True)
def _hessian(q, t, k, m, amp, ph, fscale, tscale, out):
    # out <- fscale * hess_q u(q, tscale * t)
    n = q.shape[0]
    J = amp.shape[0]
    for a in range(n):
        for b in range(n):
            out[a, b] = 0.0
    for j in range(J):
        th = ph[j] + TWO_PI * m[j] * (tscale * t)
        for i in range(n):
            th += TWO_PI * k[j, i] * q[i]
        c = -(TWO_PI * TWO_PI) * amp[j] * np.cos(th) * fscale
        for a in range(n):
            for b in range(n):
                out[a, b] += c * k[j, a] * k[j, b]


@njit(cache=True, nogil=True)
def _det(a):
    # closed-form determinant for the small n that dominate use; LU otherwise
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    if n == 2:
        return a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if n == 3:
        return (
            a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
            - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
            + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
        )
    return np.linalg.det(np.ascontiguousarray(a))


@njit(cache=True, nogil=True)
def verlet_orbit(q0, p0, t0, h, nsteps, k, m, amp, ph, fscale, tscale, out_q, out_p):
    """Velocity-Verlet orbit; fills out_q/out_p of shape (nsteps+1, n).

    Returns -1 on success, else the index of the first non-finite state.
    """
    n = q0.shape[0]
    q = q0.copy()
    p = p0.copy()
    f = np.empty(n)
    out_q[0] = q
    out_p[0] = p
    _force(q, t0, k, m, amp, ph, fscale, tscale, f)
    for step in range(nsteps):
        t = t0 + step * h
        for i in range(n):
            p[i] += 0.5 * h * f[i]
            q[i] += h * p[i]
        _force(q, t + h, k, m, amp, ph, fscale, tscale, f)
        ok = True
        for i in range(n):
            p[i] += 0.5 * h * f[i]
            if not (np.isfinite(q[i]) and np.isfinite(p[i])):
                ok = False
        out_q[step + 1] = q
        out_p[step + 1] = p
        if not ok:
            return step + 1
    return -1


@njit(cache=True, nogil=True)
def jacobi_recursion(S, h, out_J, out_Jd, out_det):
    """Focal Jacobi solution along precomputed Hessians S (nsamp, n, n).

    J(0) = 0, Jdot(0) = I; leapfrog update matching verlet_orbit:
    Jd_half = Jd - (h/2) S_i J;  J += h Jd_half;  Jd = Jd_half - (h/2) S_{i+1} J.
    """
    nsamp = S.shape[0]
    n = S.shape[1]
    J = np.zeros((n, n))
    Jd = np.eye(n)
    SJ = np.empty((n, n))
    out_J[0] = J
    out_Jd[0] = Jd
    out_det[0] = _det(J)
    for step in range(nsamp - 1):
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for c in range(n):
                    acc += S[step, a, c] * J[c, b]
                SJ[a, b] = acc
        for a in range(n):
            for b in range(n):
                Jd[a, b] -= 0.5 * h * SJ[a, b]
        for a in range(n):
            for b in range(n):
                J[a, b] += h * Jd[a, b]
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for c in range(n):
                    acc += S[step + 1, a, c] * J[c, b]
                SJ[a, b] = acc
        for a in range(n):
            for b in range(n):
                Jd[a, b] -= 0.5 * h * SJ[a, b]
        out_J[step + 1] = J
        out_Jd[step + 1] = Jd
        out_det[step + 1] = _det(J)
    return 0


@njit(cache=True, nogil=True)
def batch_det(mats, out):
    for i in range(mats.shape[0]):
        out[i] = _det(mats[i])


@njit(cache=True, nogil=True)
def conjugate_scan(
    q0, p0, t0, h, nsteps, k, m, amp, ph, fscale, tscale,
    guard_steps, sing_rel,
    ev_q, ev_p, ev_J, ev_Jd,
):
    """Fused orbit + Jacobi propagation with streaming event detection.

    Walks the orbit once, tracking det J and its running maximum.  Stops at
    the first event past the guard region:

    * sign change of det J between consecutive samples (bracket returned for
      bisection refinement),
    * tangential touch: local minimum of |det J| below sing_rel * running max
      without a sign change,
    * non-finite state (divergence).

    On an event the bracket-left sample (q, p, J, Jdot) is written into the
    ev_* output arrays.  Returns (status, index, det_lo, det_hi, scale) where
    index is the sample index of the bracket-left/event sample.
    """
    n = q0.shape[0]
    q = q0.copy()
    p = p0.copy()
    f = np.empty(n)
    S = np.empty((n, n))
    J = np.zeros((n, n))
    Jd = np.eye(n)
    SJ = np.empty((n, n))
    prev_q = np.empty(n)
    prev_p = np.empty(n)
    prev_J = np.empty((n, n))
    prev_Jd = np.empty((n, n))

    _force(q, t0, k, m, amp, ph, fscale, tscale, f)
    _hessian(q, t0, k, m, amp, ph, fscale, tscale, S)

    det_scale = 0.0
    # |det| history for the tangential local-minimum test: d_{i-2}, d_{i-1}, d_i
    a2 = 0.0
    a1 = 0.0
    d_prev = 0.0

    for step in range(nsteps):
        t = t0 + step * h
        # keep bracket-left state in case this step produces the event
        for i in range(n):
            prev_q[i] = q[i]
            prev_p[i] = p[i]
        for a in range(n):
            for b in range(n):
                prev_J[a, b] = J[a, b]
                prev_Jd[a, b] = Jd[a, b]

        for a in range(n):
            for b in range(n):
                acc = 0.0
                for c in range(n):
                    acc += S[a, c] * J[c, b]
                SJ[a, b] = acc
        for a in range(n):
            for b in range(n):
                Jd[a, b] -= 0.5 * h * SJ[a, b]
        for a in range(n):
            for b in range(n):
                J[a, b] += h * Jd[a, b]

        for i in range(n):
            p[i] += 0.5 * h * f[i]
            q[i] += h * p[i]
        _force(q, t + h, k, m, amp, ph, fscale, tscale, f)
        _hessian(q, t + h, k, m, amp, ph, fscale, tscale, S)
        ok = True
        for i in range(n):
            p[i] += 0.5 * h * f[i]
            if not (np.isfinite(q[i]) and np.isfinite(p[i])):
                ok = False
        for a in range(n):
            for b in range(n):
                acc = 0.0
                for c in range(n):
                    acc += S[a, c] * J[c, b]
                SJ[a, b] = acc
        for a in range(n):
            for b in range(n):
                Jd[a, b] -= 0.5 * h * SJ[a, b]

        if not ok:
            for i in range(n):
                ev_q[i] = prev_q[i]
                ev_p[i] = prev_p[i]
            return SCAN_DIVERGED, step, 0.0, 0.0, det_scale

        d_prev_signed = d_prev
        d = _det(J)
        ad = abs(d)
        if ad > det_scale:
            det_scale = ad

        idx = step + 1  # sample index of the state just produced
        if idx > guard_steps:
            if step > 0 and d_prev_signed * d < 0.0:
                for i in range(n):
                    ev_q[i] = prev_q[i]
                    ev_p[i] = prev_p[i]
                for a in range(n):
                    for b in range(n):
                        ev_J[a, b] = prev_J[a, b]
                        ev_Jd[a, b] = prev_Jd[a, b]
                return SCAN_SIGN_CHANGE, idx - 1, d_prev_signed, d, det_scale
            # local-minimum dip of |det| at sample idx-1
            if (step > 1 and idx - 1 > guard_steps and a1 <= a2 and a1 <= ad
                    and a1 < sing_rel * det_scale):
                if not (d_prev_signed * d < 0.0):
                    return SCAN_TANGENTIAL, idx - 1, d_prev_signed, d, det_scale
        a2 = a1
        a1 = ad
        d_prev = d

    return SCAN_NONE, nsteps, 0.0, 0.0, det_scale
