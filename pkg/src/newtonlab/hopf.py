"""Averaged discriminant for detecting non-minimal behavior at high energy.

For a compactly supported cutoff rho on an energy band and its stretched
family rho_alpha(x) = rho(alpha x), alpha in (0, 1), the discriminant

    D_alpha = int (rho_alpha'(H))^2 u_t^2 dmu
            + (1/n) int (rho_alpha^2)'(H) |grad_q u|^2 dmu

is integrated over T^n x R^n x S^1 with H = |p|^2/2 + u(q, t).  Averaging
over the momentum fibers reduces both terms to weighted energy integrals
(term A and, after integrating by parts in energy, term B <= 0); closed-form
bounds in alpha expose the power laws alpha^{(4-n)/2} and alpha^{(2-n)/2}.
A negative D_alpha certifies that the flow cannot be free of conjugate
points at the energies the cutoff selects.

u must be normalized (0 <= u <= M) and the stretched support must start
above M so the energy weights stay positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidAlphaError,
    InvalidSupportError,
    SupportTooLowError,
    UnsupportedDimensionError,
    ValidationFailure,
)
from .parallel import ordered_map, resolve_threads
from .potential import FourierPotential
from .quadrature import PhaseGrid, _gauss_nodes, gauss_integrate

MC_CHUNK = 65536
INNER_TOL = 1e-10
OUTER_TOL = 1e-9
MAX_OUTER_REFINE = 5
MAX_INNER_ORDER = 4096


@dataclass(frozen=True)
class CutoffFunction:
    """C^2 cubic bump on [a, b]: rho(x) = ((x-a)(b-x))^3 / ((b-a)/2)^6.

    Peak value 1 at the midpoint, two continuous derivatives vanishing at the
    endpoints.  The family is closed under stretching: the bump on
    [a/alpha, b/alpha] evaluated at x equals rho(alpha x) exactly.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b):
            raise InvalidSupportError(f"need 0 < a < b, got a={self.a}, b={self.b}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def _c6(self) -> float:
        return (0.5 * (self.b - self.a)) ** 6

    def value(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self.a) & (x < self.b)
        g = np.where(inside, (x - self.a) * (self.b - x), 0.0)
        out = g**3 / self._c6
        return float(out) if out.ndim == 0 else out

    __call__ = value

    def deriv(self, x):
        """rho'(x) = 3 ((x-a)(b-x))^2 (a + b - 2x) / c^6."""
        x = np.asarray(x, dtype=float)
        inside = (x > self.a) & (x < self.b)
        g = np.where(inside, (x - self.a) * (self.b - x), 0.0)
        out = 3.0 * g**2 * (self.a + self.b - 2.0 * x) / self._c6
        out = np.where(inside, out, 0.0)
        return float(out) if out.ndim == 0 else out

    def sq_deriv(self, x):
        """(rho^2)'(x) = 2 rho rho'."""
        return 2.0 * self.value(x) * self.deriv(x)

    def profile_coefficients(self) -> np.ndarray:
        """Polynomial coefficients (ascending) of the interior profile."""
        base = np.polynomial.polynomial.polyfromroots([self.a] * 3 + [self.b] * 3)
        return -base / self._c6

    def stretched(self, alpha: float) -> "CutoffFunction":
        """The bump representing x -> rho(alpha x); support [a/alpha, b/alpha]."""
        if not (0.0 < alpha < 1.0):
            raise InvalidAlphaError(f"alpha must lie in (0, 1), got {alpha}")
        return CutoffFunction(self.a / alpha, self.b / alpha)


def make_bump(a: float, b: float) -> CutoffFunction:
    return CutoffFunction(a, b)


def stretch(rho: CutoffFunction, alpha: float) -> CutoffFunction:
    return rho.stretched(alpha)


def default_bump(pot: FourierPotential, r: float) -> CutoffFunction:
    """Support [r^2/2 + M + 1, r^2/2 + M + 2]: above both the shell energy
    r^2/2 and the potential ceiling for every alpha in (0, 1)."""
    m_val = pot.upper_bound()
    lo = 0.5 * r * r + m_val + 1.0
    return CutoffFunction(lo, lo + 1.0)


def omega_n(n: int) -> float:
    """Surface area of the unit sphere in R^n: 2 pi^{n/2} / Gamma(n/2)."""
    if n < 1:
        raise UnsupportedDimensionError(f"dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** (0.5 * n) / math.gamma(0.5 * n)


def c1_constant(rho: CutoffFunction, n: int) -> float:
    """C1 = int rho'(x)^2 (2x)^{(n-2)/2} dx over the support."""
    if n < 1:
        raise UnsupportedDimensionError(f"dimension must be >= 1, got {n}")
    expo = 0.5 * (n - 2)
    val, _ = gauss_integrate(lambda x: rho.deriv(x) ** 2 * (2.0 * x) ** expo,
                             rho.a, rho.b)
    return val


def c2_constant(rho: CutoffFunction, n: int, upper: float = 0.0) -> float:
    """Dimension-dependent companion constant for the term-B bound.

    n = 3: int rho^2 (2x)^{-1/2} dx;  n = 4: int rho^2 dx;
    n >= 5: int rho^2 (2(x - upper))^{(n-4)/2} dx, requiring a > upper.
    """
    if n < 3:
        raise UnsupportedDimensionError(f"c2_constant requires n >= 3, got {n}")
    if n == 3:
        f = lambda x: rho.value(x) ** 2 * (2.0 * x) ** -0.5
    elif n == 4:
        f = lambda x: rho.value(x) ** 2
    else:
        if rho.a <= upper:
            raise SupportTooLowError(
                f"support start {rho.a} must exceed the potential bound {upper} for n >= 5")
        expo = 0.5 * (n - 4)
        f = lambda x: rho.value(x) ** 2 * (2.0 * (x - upper)) ** expo
    val, _ = gauss_integrate(f, rho.a, rho.b)
    return val


def _require_normalized(pot: FourierPotential) -> float:
    return pot.upper_bound()


def _check_support(rho_alpha: CutoffFunction, upper: float) -> None:
    if rho_alpha.a <= upper:
        raise SupportTooLowError(
            f"stretched support starts at {rho_alpha.a:.6g}, "
            f"below the potential bound {upper:.6g}")


@dataclass(frozen=True)
class TermQuadrature:
    value: float
    inner_error: float
    outer_error: float
    outer_points: int


def _inner_profile(rho_alpha: CutoffFunction, n: int, which: str,
                   u_vals: np.ndarray, tol: float) -> tuple[np.ndarray, float]:
    """I(u) = int w(E) (2(E - u))^expo dE over the stretched support for each
    sampled u, with w = rho_alpha'^2 (term A) or rho_alpha^2 (term B)."""
    lo, hi = rho_alpha.support
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    if which == "A":
        expo = 0.5 * (n - 2)
        weight = lambda E: rho_alpha.deriv(E) ** 2
    else:
        expo = 0.5 * (n - 4)
        weight = lambda E: rho_alpha.value(E) ** 2
    order = 64
    prev = None
    while True:
        x, w = _gauss_nodes(order)
        E = mid + half * x
        base = weight(E) * half
        arg = 2.0 * (E[None, :] - u_vals[:, None])
        vals = (arg**expo) @ (base * w)
        if prev is not None:
            scale = max(float(np.max(np.abs(vals))), 1e-300)
            err = float(np.max(np.abs(vals - prev)))
            if err <= tol * scale or order >= MAX_INNER_ORDER:
                return vals, err
        prev = vals
        order *= 2


def _reduced_term(pot: FourierPotential, rho_alpha: CutoffFunction, n: int,
                  which: str, grid: PhaseGrid | None,
                  inner_tol: float = INNER_TOL,
                  outer_tol: float = OUTER_TOL) -> TermQuadrature:
    upper = _require_normalized(pot)
    _check_support(rho_alpha, upper)
    if which == "A":
        prefactor = omega_n(n)
    else:
        prefactor = -omega_n(n) * (n - 2) / n

    def evaluate(g: PhaseGrid) -> tuple[float, float]:
        u = pot.value(g.q, g.t)
        if which == "A":
            factor = pot.du_dt(g.q, g.t) ** 2
        else:
            grad = pot.grad_q(g.q, g.t)
            factor = np.sum(grad * grad, axis=-1)
        inner, inner_err = _inner_profile(rho_alpha, n, which, u, inner_tol)
        return prefactor * float(np.mean(factor * inner)), inner_err

    if grid is not None:
        value, inner_err = evaluate(grid)
        return TermQuadrature(value=value, inner_error=inner_err,
                              outer_error=0.0, outer_points=grid.size)

    g = PhaseGrid.for_potential(pot)
    value, inner_err = evaluate(g)
    outer_err = math.inf
    for _ in range(MAX_OUTER_REFINE):
        g2 = g.refined(2)
        value2, inner_err = evaluate(g2)
        outer_err = abs(value2 - value)
        g, value = g2, value2
        if outer_err <= outer_tol * max(abs(value), 1e-300):
            break
    return TermQuadrature(value=value, inner_error=inner_err,
                          outer_error=outer_err, outer_points=g.size)


def term_a_exact(pot: FourierPotential, rho_alpha: CutoffFunction, n: int,
                 grid: PhaseGrid | None = None) -> float:
    """omega_n int u_t^2 [int rho_alpha'(E)^2 (2(E-u))^{(n-2)/2} dE] dq dt."""
    if n < 1:
        raise UnsupportedDimensionError(f"dimension must be >= 1, got {n}")
    return _reduced_term(pot, rho_alpha, n, "A", grid).value


def term_b_exact(pot: FourierPotential, rho_alpha: CutoffFunction, n: int,
                 grid: PhaseGrid | None = None) -> float:
    """-(omega_n (n-2)/n) int |grad u|^2 [int rho_alpha^2 (2(E-u))^{(n-4)/2} dE] dq dt.

    Exactly zero for n = 2 (the prefactor vanishes); nonpositive for n >= 3.
    """
    if n < 2:
        raise UnsupportedDimensionError(f"term_b_exact requires n >= 2, got {n}")
    if n == 2:
        _check_support(rho_alpha, _require_normalized(pot))
        return 0.0
    return _reduced_term(pot, rho_alpha, n, "B", grid).value


def term_a_bound(pot: FourierPotential, rho: CutoffFunction, alpha: float,
                 n: int) -> float:
    """A <= omega_n C1 alpha^{(4-n)/2} l2_ut, from dropping u >= 0 in the
    energy weight."""
    if not (0.0 < alpha < 1.0):
        raise InvalidAlphaError(f"alpha must lie in (0, 1), got {alpha}")
    return omega_n(n) * c1_constant(rho, n) * alpha ** (0.5 * (4 - n)) * pot.l2_ut()


def term_b_bound(pot: FourierPotential, rho: CutoffFunction, alpha: float,
                 n: int) -> float:
    """Upper bound on the (nonpositive) term B; exact for n = 4."""
    if not (0.0 < alpha < 1.0):
        raise InvalidAlphaError(f"alpha must lie in (0, 1), got {alpha}")
    if n == 2:
        return 0.0
    upper = _require_normalized(pot)
    c2 = c2_constant(rho, n, upper)
    return -(omega_n(n) * (n - 2) / n) * c2 * alpha ** (0.5 * (2 - n)) * pot.l2_gradu()


@dataclass(frozen=True)
class DiscriminantReport:
    """One evaluation of D_alpha with bounds and quadrature error estimates."""

    alpha: float
    n: int
    support: tuple[float, float]
    stretched_support: tuple[float, float]
    upper: float
    gauge_shift: float
    l2_ut: float
    l2_gradu: float
    omega: float
    c1: float
    c2: float | None
    term_a: float
    term_a_inner_error: float
    term_a_outer_error: float
    term_b: float
    term_b_inner_error: float
    term_b_outer_error: float
    d_alpha: float
    term_a_bound: float
    term_b_bound: float
    d_bound: float
    outer_points: int

    @property
    def quadrature_error(self) -> float:
        return (self.term_a_inner_error + self.term_a_outer_error
                + self.term_b_inner_error + self.term_b_outer_error)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n": self.n,
            "support": list(self.support),
            "stretched_support": list(self.stretched_support),
            "upper": self.upper,
            "gauge_shift": self.gauge_shift,
            "l2_ut": self.l2_ut,
            "l2_gradu": self.l2_gradu,
            "omega": self.omega,
            "c1": self.c1,
            "c2": self.c2,
            "term_a": self.term_a,
            "term_a_inner_error": self.term_a_inner_error,
            "term_a_outer_error": self.term_a_outer_error,
            "term_b": self.term_b,
            "term_b_inner_error": self.term_b_inner_error,
            "term_b_outer_error": self.term_b_outer_error,
            "d_alpha": self.d_alpha,
            "term_a_bound": self.term_a_bound,
            "term_b_bound": self.term_b_bound,
            "d_bound": self.d_bound,
            "quadrature_error": self.quadrature_error,
            "outer_points": self.outer_points,
        }


def d_alpha(pot: FourierPotential, rho: CutoffFunction, alpha: float,
            n: int | None = None, grid: PhaseGrid | None = None) -> DiscriminantReport:
    """Evaluate D_alpha = term A + term B for one stretch parameter.

    ``n`` defaults to the potential's dimension; a larger n embeds the
    potential on the bigger torus (term values depend on n through the
    momentum fiber average).  Requires n >= 2.
    """
    if n is None:
        n = pot.n
    if n < 2:
        raise UnsupportedDimensionError(f"d_alpha requires n >= 2, got {n}")
    pot = pot.embed(n)
    upper = _require_normalized(pot)
    rho_a = rho.stretched(alpha)
    _check_support(rho_a, upper)
    qa = _reduced_term(pot, rho_a, n, "A", grid)
    if n == 2:
        qb = TermQuadrature(value=0.0, inner_error=0.0, outer_error=0.0,
                            outer_points=qa.outer_points)
        c2 = None
        b_bound = 0.0
    else:
        qb = _reduced_term(pot, rho_a, n, "B", grid)
        c2 = c2_constant(rho, n, upper)
        b_bound = -(omega_n(n) * (n - 2) / n) * c2 * alpha ** (0.5 * (2 - n)) * pot.l2_gradu()
    a_bound = omega_n(n) * c1_constant(rho, n) * alpha ** (0.5 * (4 - n)) * pot.l2_ut()
    return DiscriminantReport(
        alpha=alpha,
        n=n,
        support=rho.support,
        stretched_support=rho_a.support,
        upper=upper,
        gauge_shift=pot.gauge_shift,
        l2_ut=pot.l2_ut(),
        l2_gradu=pot.l2_gradu(),
        omega=omega_n(n),
        c1=c1_constant(rho, n),
        c2=c2,
        term_a=qa.value,
        term_a_inner_error=qa.inner_error,
        term_a_outer_error=qa.outer_error,
        term_b=qb.value,
        term_b_inner_error=qb.inner_error,
        term_b_outer_error=qb.outer_error,
        d_alpha=qa.value + qb.value,
        term_a_bound=a_bound,
        term_b_bound=b_bound,
        d_bound=a_bound + b_bound,
        outer_points=qa.outer_points,
    )


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo evaluation of D_alpha straight from the phase-space
    definition, with standard errors; validates the reduced quadrature and
    the energy integration by parts."""

    samples: int
    r_lo: float
    r_hi: float
    volume: float
    term_a: float
    term_a_stderr: float
    term_b: float
    term_b_stderr: float
    value: float
    stderr: float

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "r_lo": self.r_lo,
            "r_hi": self.r_hi,
            "volume": self.volume,
            "term_a": self.term_a,
            "term_a_stderr": self.term_a_stderr,
            "term_b": self.term_b,
            "term_b_stderr": self.term_b_stderr,
            "value": self.value,
            "stderr": self.stderr,
        }


def d_alpha_direct_mc(pot: FourierPotential, rho: CutoffFunction, alpha: float,
                      samples: int, seed: int, n: int | None = None,
                      threads: int | None = None) -> MCEstimate:
    """Estimate D_alpha by uniform sampling of the bounding momentum annulus.

    The p-annulus 2(a/alpha - M) <= |p|^2 <= 2 b/alpha contains the support
    of both integrands; the estimator is volume * mean(f).  Term B uses the
    pre-integration-by-parts form (1/n)(rho_alpha^2)'(H) |grad u|^2, so
    agreement with the reduced quadrature checks that identity as well.
    Chunked accumulation in fixed order makes the result independent of the
    thread count.
    """
    if n is None:
        n = pot.n
    if n < 2:
        raise UnsupportedDimensionError(f"d_alpha_direct_mc requires n >= 2, got {n}")
    if samples < 1:
        raise ValidationFailure(f"samples must be >= 1, got {samples}")
    pot = pot.embed(n)
    upper = _require_normalized(pot)
    rho_a = rho.stretched(alpha)
    _check_support(rho_a, upper)
    r_lo = math.sqrt(2.0 * max(rho_a.a - upper, 0.0))
    r_hi = math.sqrt(2.0 * rho_a.b)
    volume = omega_n(n) / n * (r_hi**n - r_lo**n)

    n_chunks = (samples + MC_CHUNK - 1) // MC_CHUNK

    def run_chunk(c: int):
        count = min(MC_CHUNK, samples - c * MC_CHUNK)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        q = rng.random((count, n))
        t = rng.random(count)
        g = rng.standard_normal((count, n))
        norms = np.linalg.norm(g, axis=1)
        norms[norms < 1e-12] = 1.0
        u_r = rng.random(count)
        r = (r_lo**n + u_r * (r_hi**n - r_lo**n)) ** (1.0 / n)
        p = g * (r / norms)[:, None]
        h_vals = 0.5 * np.sum(p * p, axis=1) + pot.value(q, t)
        ut = pot.du_dt(q, t)
        grad = pot.grad_q(q, t)
        f1 = rho_a.deriv(h_vals) ** 2 * ut * ut
        f2 = rho_a.sq_deriv(h_vals) * np.sum(grad * grad, axis=1) / n
        return (
            float(np.sum(f1)), float(np.sum(f1 * f1)),
            float(np.sum(f2)), float(np.sum(f2 * f2)),
            float(np.sum(f1 * f2)), count,
        )

    nthreads = resolve_threads(threads)
    parts = ordered_map(run_chunk, list(range(n_chunks)), nthreads)
    s1 = s11 = s2 = s22 = s12 = 0.0
    total = 0
    for p1, p11, p2, p22, p12, cnt in parts:
        s1 += p1
        s11 += p11
        s2 += p2
        s22 += p22
        s12 += p12
        total += cnt

    mean1 = s1 / total
    mean2 = s2 / total
    var1 = max(s11 / total - mean1 * mean1, 0.0)
    var2 = max(s22 / total - mean2 * mean2, 0.0)
    cov = s12 / total - mean1 * mean2
    var_sum = max(var1 + var2 + 2.0 * cov, 0.0)
    scale = volume
    se = scale / math.sqrt(total)
    return MCEstimate(
        samples=total,
        r_lo=r_lo,
        r_hi=r_hi,
        volume=volume,
        term_a=scale * mean1,
        term_a_stderr=se * math.sqrt(var1),
        term_b=scale * mean2,
        term_b_stderr=se * math.sqrt(var2),
        value=scale * (mean1 + mean2),
        stderr=se * math.sqrt(var_sum),
    )


@dataclass(frozen=True)
class SweepReport:
    """D_alpha across a family of stretch parameters with power-law fits."""

    n: int
    alphas: tuple[float, ...]
    reports: tuple[DiscriminantReport, ...]
    slope_term_a: float | None
    slope_term_b: float | None
    expected_slope_a: float
    expected_slope_b: float
    fit_alphas: tuple[float, ...]
    largest_negative_alpha: float | None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alphas": list(self.alphas),
            "reports": [r.to_dict() for r in self.reports],
            "slope_term_a": self.slope_term_a,
            "slope_term_b": self.slope_term_b,
            "expected_slope_a": self.expected_slope_a,
            "expected_slope_b": self.expected_slope_b,
            "fit_alphas": list(self.fit_alphas),
            "largest_negative_alpha": self.largest_negative_alpha,
        }


def _fit_slope(alphas: np.ndarray, values: np.ndarray) -> float | None:
    mask = np.abs(values) > 0.0
    if np.count_nonzero(mask) < 2:
        return None
    x = np.log10(alphas[mask])
    y = np.log10(np.abs(values[mask]))
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def alpha_sweep(pot: FourierPotential, rho: CutoffFunction, alphas,
                n: int | None = None, threads: int | None = None) -> SweepReport:
    """Evaluate D_alpha over a list of alphas and fit the small-alpha power laws.

    Slopes are fitted on the smallest decade of alphas present (the power law
    is only asymptotic); ``largest_negative_alpha`` is the largest alpha whose
    D_alpha is negative by more than its quadrature error estimate.
    """
    if n is None:
        n = pot.n
    alphas = sorted(float(a) for a in alphas)
    if not alphas:
        raise ValidationFailure("alpha list must not be empty")
    nthreads = resolve_threads(threads)
    reports = ordered_map(lambda a: d_alpha(pot, rho, a, n=n), alphas, nthreads)

    amin = alphas[0]
    window = [a for a in alphas if a <= 10.0 * amin * (1.0 + 1e-12)]
    if len(window) < 3:
        window = list(alphas)
    warr = np.array(window)
    a_vals = np.array([r.term_a for r in reports[: len(window)]])
    b_vals = np.array([r.term_b for r in reports[: len(window)]])
    slope_a = _fit_slope(warr, a_vals)
    slope_b = _fit_slope(warr, b_vals)

    largest_neg = None
    for rep in reports:
        if rep.d_alpha < -rep.quadrature_error:
            largest_neg = rep.alpha
    return SweepReport(
        n=n,
        alphas=tuple(alphas),
        reports=tuple(reports),
        slope_term_a=slope_a,
        slope_term_b=slope_b,
        expected_slope_a=0.5 * (4 - n),
        expected_slope_b=0.5 * (2 - n),
        fit_alphas=tuple(window),
        largest_negative_alpha=largest_neg,
    )
