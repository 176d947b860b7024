"""Shared fixtures: kernel warmup and stock potentials."""

import numpy as np
import pytest

from newtonlab import (
    FourierMode,
    FourierPotential,
    PhaseState,
    integrate,
    propagate_jacobi_frozen,
    scan_orbit,
)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile (or load from disk cache) every jitted kernel before any
    # timed assertion runs.
    pot = FourierPotential(
        n=2,
        modes=(
            FourierMode(k=(1, 0), m=1, amplitude=0.05),
            FourierMode(k=(0, 1), m=0, amplitude=0.05),
        ),
    ).normalize()
    state = PhaseState(q=np.array([0.1, 0.2]), p=np.array([1.0, -0.5]))
    orbit = integrate(pot, state, duration=0.05, h_step=1e-3)
    scan_orbit(pot, state, horizon=0.05, h_step=1e-3)
    propagate_jacobi_frozen(np.eye(2), duration=0.05, h_step=1e-3)
    pot1 = FourierPotential(
        n=1, modes=(FourierMode(k=(1,), m=1, amplitude=0.05),)
    ).normalize()
    scan_orbit(pot1, PhaseState(q=np.array([0.3]), p=np.array([1.0])),
               horizon=0.05, h_step=1e-3)
    pot3 = pot.embed(3)
    scan_orbit(pot3, PhaseState(q=np.array([0.1, 0.2, 0.3]),
                                p=np.array([1.0, 0.0, 0.5])),
               horizon=0.05, h_step=1e-3)
    return orbit


def random_potential(rng, n, n_modes=3, amp=0.2, max_freq=2, time_dependent=True):
    """Draw a normalized potential with distinct random modes."""
    modes = []
    seen = set()
    while len(modes) < n_modes:
        k = tuple(int(v) for v in rng.integers(-max_freq, max_freq + 1, size=n))
        m = int(rng.integers(-max_freq, max_freq + 1)) if time_dependent else 0
        if all(v == 0 for v in k) and m == 0:
            continue
        mode = FourierMode(
            k=k, m=m,
            amplitude=float(rng.uniform(0.3, 1.0)) * amp / n_modes,
            phase=float(rng.uniform(0, 2 * np.pi)),
        )
        key = (mode.k, mode.m)
        if key in seen:
            continue
        seen.add(key)
        modes.append(mode)
    return FourierPotential(n=n, modes=tuple(modes)).normalize()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def pot_1d():
    """Single cosine well in one dimension, time independent."""
    return FourierPotential(
        n=1, modes=(FourierMode(k=(1,), m=0, amplitude=0.3),)
    ).normalize()


@pytest.fixture(scope="session")
def pot_3d():
    """Three-mode potential on the 3-torus with genuine time dependence."""
    return FourierPotential(
        n=3,
        modes=(
            FourierMode(k=(1, 0, 0), m=1, amplitude=0.25),
            FourierMode(k=(0, 1, 0), m=0, amplitude=0.2, phase=0.3),
            FourierMode(k=(1, 1, 0), m=0, amplitude=0.1, phase=-0.2),
        ),
    ).normalize()
