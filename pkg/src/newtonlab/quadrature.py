"""Quadrature helpers: periodic torus grids and adaptive Gauss-Legendre.

Periodic trapezoid sums on uniform torus grids integrate band-limited
trigonometric polynomials exactly once the per-axis point count exceeds the
bandwidth; Gauss-Legendre with order doubling handles the smooth non-periodic
energy integrals.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

MAX_GAUSS_ORDER = 4096


@lru_cache(maxsize=None)
def _gauss_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    start_order: int = 64,
    rel_tol: float = 1e-10,
) -> tuple[float, float]:
    """Integrate a smooth vectorized integrand over [a, b].

    Starts at ``start_order`` Gauss-Legendre points and doubles the order
    until the relative change drops below ``rel_tol`` (or the order cap is
    hit).  Returns ``(value, error_estimate)`` where the error estimate is
    the last observed change.
    """
    if not b > a:
        raise ValueError(f"empty integration interval [{a}, {b}]")
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    order = start_order
    prev = None
    while True:
        x, w = _gauss_nodes(order)
        val = half * float(w @ np.asarray(f(mid + half * x), dtype=float))
        if prev is not None:
            err = abs(val - prev)
            if err <= rel_tol * max(abs(val), 1e-300) or order >= MAX_GAUSS_ORDER:
                return val, err
        prev = val
        order *= 2


def gauss_integrate_batch(
    f: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
    start_order: int = 64,
    rel_tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Like :func:`gauss_integrate` for a batch of intervals sharing one integrand.

    ``f`` maps node positions of shape (batch, order) to values of the same
    shape; ``a`` and ``b`` are per-interval endpoints (broadcastable).  The
    doubling stop criterion is the max relative change across the batch.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    order = start_order
    prev = None
    while True:
        x, w = _gauss_nodes(order)
        nodes = mid[..., None] + half[..., None] * x
        val = half * (np.asarray(f(nodes), dtype=float) @ w)
        if prev is not None:
            scale = max(float(np.max(np.abs(val))), 1e-300)
            err = float(np.max(np.abs(val - prev)))
            if err <= rel_tol * scale or order >= MAX_GAUSS_ORDER:
                return val, err
        prev = val
        order *= 2


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform sample set on the space-time torus with unit total measure.

    ``q`` has shape (S, n) and ``t`` shape (S,); the mean of integrand values
    over the samples equals the trapezoid-rule integral because every axis is
    periodic with period 1.  Axes that the integrand provably does not depend
    on are collapsed to a single point.
    """

    q: np.ndarray
    t: np.ndarray
    axis_points: tuple[int, ...]

    @property
    def size(self) -> int:
        return self.t.shape[0]

    @classmethod
    def build(cls, n: int, axis_points: tuple[int, ...]) -> "PhaseGrid":
        # axis_points has n+1 entries; last is the time axis
        if len(axis_points) != n + 1:
            raise ValueError("axis_points must list n spatial axes plus time")
        axes = [np.arange(m, dtype=float) / m for m in axis_points]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = [m.ravel() for m in mesh]
        q = np.stack(flat[:n], axis=1) if n else np.empty((len(flat[-1]), 0))
        t = flat[n]
        return cls(q=q, t=t, axis_points=tuple(axis_points))

    @classmethod
    def for_potential(cls, pot, points_per_freq: int = 4, factor: int = 1) -> "PhaseGrid":
        """Grid sized to the potential's bandwidth, ``factor`` times over."""
        freqs = pot.axis_frequencies()
        pts = tuple(max(points_per_freq * f, 1) * factor if f else 1 for f in freqs)
        return cls.build(pot.n, pts)

    def refined(self, factor: int):
        pts = tuple(m * factor if m > 1 else 1 for m in self.axis_points)
        return PhaseGrid.build(self.q.shape[1], pts)
