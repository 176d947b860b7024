"""Smooth time-periodic potentials on the torus T^n x S^1.

A potential is a finite real cosine series

    u(q, t) = offset + sum_j a_j cos(2 pi (k_j . q + m_j t) + phi_j)

with integer wave vectors k_j and integer time frequencies m_j, so u is
automatically 1-periodic in every coordinate and in time.  Modes are stored in
a canonical half-space form: cos is even, hence (k, m, phi) and (-k, -m, -phi)
describe the same term, and keeping one representative per (k, m) makes the
family orthogonal and the closed-form L^2 identities exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import DuplicateModeError, ValidationFailure

TWO_PI = 2.0 * math.pi

GRID_POINT_CAP = 2**22
MIN_EXTREMUM_TOL = 1e-9


def _canonical(k: tuple[int, ...], m: int, phase: float) -> tuple[tuple[int, ...], int, float]:
    for entry in (*k, m):
        if entry > 0:
            return k, m, phase
        if entry < 0:
            return tuple(-x for x in k), -m, -phase
    raise ValidationFailure("mode must have a nonzero (k, m)")


@dataclass(frozen=True)
class FourierMode:
    """One cosine term a*cos(2 pi (k.q + m t) + phase), canonicalized on creation."""

    k: tuple[int, ...]
    m: int
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        k = tuple(int(x) for x in self.k)
        if any(kx != orig for kx, orig in zip(k, self.k)):
            raise ValidationFailure(f"wave vector must be integer, got {self.k}")
        if int(self.m) != self.m:
            raise ValidationFailure(f"time frequency must be integer, got {self.m}")
        if not math.isfinite(self.amplitude) or not math.isfinite(self.phase):
            raise ValidationFailure("amplitude and phase must be finite")
        k, m, phase = _canonical(k, int(self.m), float(self.phase))
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", phase)


@dataclass(frozen=True)
class FourierPotential:
    """Finite cosine series on T^n x S^1 with an additive constant.

    ``normalized`` records that the global minimum has been shifted to zero;
    ``gauge_shift`` accumulates the constant added relative to the original
    definition, and ``upper`` caches the normalized maximum M = max u.
    """

    n: int
    modes: tuple[FourierMode, ...]
    offset: float = 0.0
    normalized: bool = False
    gauge_shift: float = 0.0
    upper: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValidationFailure(f"dimension must be >= 1, got {self.n}")
        modes = tuple(self.modes)
        for mode in modes:
            if len(mode.k) != self.n:
                raise ValidationFailure(
                    f"mode wave vector length {len(mode.k)} != dimension {self.n}"
                )
        seen = set()
        for mode in modes:
            key = (mode.k, mode.m)
            if key in seen:
                raise DuplicateModeError(f"duplicate mode after canonicalization: k={mode.k} m={mode.m}")
            seen.add(key)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "offset", float(self.offset))

    # --- packed mode arrays for vectorized evaluation and the kernels ---

    @property
    def _arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        cached = self.__dict__.get("_arrays_cache")
        if cached is None:
            J = len(self.modes)
            k = np.zeros((J, self.n))
            m = np.zeros(J)
            amp = np.zeros(J)
            ph = np.zeros(J)
            for j, mode in enumerate(self.modes):
                k[j] = mode.k
                m[j] = mode.m
                amp[j] = mode.amplitude
                ph[j] = mode.phase
            for arr in (k, m, amp, ph):
                arr.setflags(write=False)
            cached = (k, m, amp, ph)
            object.__setattr__(self, "_arrays_cache", cached)
        return cached

    def axis_frequencies(self) -> tuple[int, ...]:
        """Largest |frequency| per axis (n spatial entries, then time)."""
        freqs = [0] * (self.n + 1)
        for mode in self.modes:
            for i, kx in enumerate(mode.k):
                freqs[i] = max(freqs[i], abs(kx))
            freqs[self.n] = max(freqs[self.n], abs(mode.m))
        return tuple(freqs)

    def _theta(self, q: np.ndarray, t) -> np.ndarray:
        k, m, _, ph = self._arrays
        t = np.asarray(t, dtype=float)
        return TWO_PI * (q @ k.T + t[..., None] * m) + ph

    def _is_scalar(self, q, t) -> bool:
        return np.ndim(q) == 1 and np.ndim(t) == 0

    def value(self, q, t):
        """u(q, t); broadcasts over leading axes of q (..., n) and t (...)."""
        scalar = self._is_scalar(q, t)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        _, _, amp, _ = self._arrays
        out = self.offset + np.cos(self._theta(q, t)) @ amp
        return float(out[0]) if scalar else out

    __call__ = value

    def grad_q(self, q, t):
        """Spatial gradient, shape (..., n)."""
        scalar = self._is_scalar(q, t)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        k, _, amp, _ = self._arrays
        s = np.sin(self._theta(q, t)) * amp
        out = -TWO_PI * (s @ k)
        return out[0] if scalar else out

    def du_dt(self, q, t):
        """Time derivative."""
        scalar = self._is_scalar(q, t)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        _, m, amp, _ = self._arrays
        s = np.sin(self._theta(q, t)) * (amp * m)
        out = -TWO_PI * np.sum(s, axis=-1)
        return float(out[0]) if scalar else out

    def hess_q(self, q, t):
        """Spatial Hessian, shape (..., n, n)."""
        scalar = self._is_scalar(q, t)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        k, _, amp, _ = self._arrays
        c = np.cos(self._theta(q, t)) * amp
        out = -(TWO_PI**2) * np.einsum("...j,ja,jb->...ab", c, k, k)
        return out[0] if scalar else out

    def laplacian_q(self, q, t):
        scalar = self._is_scalar(q, t)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        k, _, amp, _ = self._arrays
        c = np.cos(self._theta(q, t)) * (amp * np.sum(k * k, axis=1))
        out = -(TWO_PI**2) * np.sum(c, axis=-1)
        return float(out[0]) if scalar else out

    # --- normalization ---

    def _extremum_starts(self, points_per_axis: int = 64):
        freqs = self.axis_frequencies()
        active = [i for i, f in enumerate(freqs) if f > 0]
        if not active:
            return (self.offset, self.offset, None, None)
        pts = {}
        for i in active:
            pts[i] = max(points_per_axis, 4 * freqs[i] + 1)
        # shrink uniformly if the scan grid would be enormous
        while math.prod(pts.values()) > GRID_POINT_CAP:
            shrunk = False
            for i in active:
                floor = max(9, 4 * freqs[i] + 1)
                if pts[i] > floor:
                    pts[i] = max(floor, int(pts[i] * 0.8))
                    shrunk = True
            if not shrunk:
                break
        axes = [np.arange(pts[i]) / pts[i] for i in active]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=1)
        q = np.zeros((flat.shape[0], self.n))
        t = np.zeros(flat.shape[0])
        for col, i in enumerate(active):
            if i < self.n:
                q[:, i] = flat[:, col]
            else:
                t = flat[:, col]
        vals = self.value(q, t)
        lo = int(np.argmin(vals))
        hi = int(np.argmax(vals))
        x_lo = np.concatenate([q[lo], [t[lo]]])
        x_hi = np.concatenate([q[hi], [t[hi]]])
        return float(vals[lo]), float(vals[hi]), x_lo, x_hi

    def _polish(self, x0: np.ndarray, sign: float) -> float:
        def fun(x):
            q, t = x[: self.n], x[self.n]
            g = np.concatenate([self.grad_q(q, t), [self.du_dt(q, t)]])
            return sign * self.value(q, t), sign * g

        res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                       options={"gtol": 1e-13, "ftol": 0.0, "maxiter": 500})
        return sign * float(res.fun)

    def extrema(self) -> tuple[float, float]:
        """Global (min, max) of u, scanned on a bandwidth-matched grid and
        polished with a gradient descent to well below 1e-9."""
        lo, hi, x_lo, x_hi = self._extremum_starts()
        if x_lo is None:
            return lo, hi
        umin = min(lo, self._polish(x_lo, 1.0))
        umax = max(hi, self._polish(x_hi, -1.0))
        return umin, umax

    def normalize(self) -> "FourierPotential":
        """Shift by a constant so the global minimum is 0; record max as ``upper``.

        Idempotent up to the extremum tolerance; only the constant term
        changes, so all derivatives are untouched.
        """
        umin, umax = self.extrema()
        return replace(
            self,
            offset=self.offset - umin,
            normalized=True,
            gauge_shift=self.gauge_shift - umin,
            upper=umax - umin,
        )

    def upper_bound(self) -> float:
        """M = max u for a normalized potential (so 0 <= u <= M)."""
        if not self.normalized or self.upper is None:
            from .errors import NotNormalizedError

            raise NotNormalizedError("upper_bound requires a normalized potential")
        return self.upper

    # --- closed-form L^2 integrals over T^n x S^1 (unit total measure) ---

    def l2_ut(self) -> float:
        """Integral of (du/dt)^2; by orthogonality sum of (2 pi m a)^2 / 2."""
        return sum(0.5 * (TWO_PI * mode.m * mode.amplitude) ** 2 for mode in self.modes)

    def l2_gradu(self) -> float:
        """Integral of |grad_q u|^2; sum of (2 pi |k| a)^2 / 2."""
        return sum(
            0.5 * (TWO_PI * mode.amplitude) ** 2 * sum(kx * kx for kx in mode.k)
            for mode in self.modes
        )

    def embed(self, n_new: int) -> "FourierPotential":
        """Reinterpret on a higher-dimensional torus by zero-padding wave vectors.

        Values, extrema and time derivatives are unchanged, so normalization
        state carries over.
        """
        if n_new < self.n:
            raise ValidationFailure(f"cannot embed dimension {self.n} into {n_new}")
        if n_new == self.n:
            return self
        pad = (0,) * (n_new - self.n)
        modes = tuple(
            FourierMode(k=mode.k + pad, m=mode.m, amplitude=mode.amplitude, phase=mode.phase)
            for mode in self.modes
        )
        return replace(self, n=n_new, modes=modes)

    # --- serialization ---

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "offset": self.offset,
            "modes": [
                {"k": list(mode.k), "m": mode.m, "amplitude": mode.amplitude, "phase": mode.phase}
                for mode in self.modes
            ],
        }
        if self.normalized:
            d["normalized"] = True
            d["gauge_shift"] = self.gauge_shift
            d["upper"] = self.upper
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FourierPotential":
        try:
            modes = tuple(
                FourierMode(
                    k=tuple(md["k"]),
                    m=md["m"],
                    amplitude=md["amplitude"],
                    phase=md.get("phase", 0.0),
                )
                for md in d.get("modes", [])
            )
            return cls(
                n=d["n"],
                modes=modes,
                offset=d.get("offset", 0.0),
                normalized=bool(d.get("normalized", False)),
                gauge_shift=float(d.get("gauge_shift", 0.0)),
                upper=d.get("upper"),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationFailure(f"malformed potential definition: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def load_potential(path, normalize: bool = True) -> FourierPotential:
    """Read a potential definition from JSON, normalizing by default."""
    p = Path(path)
    if not p.exists():
        raise ValidationFailure(f"potential file not found: {p}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"potential file is not valid JSON: {exc}") from exc
    pot = FourierPotential.from_dict(d)
    return pot.normalize() if normalize else pot
