"""Numerical laboratory for time-periodic Newton equations on the torus.

Core pieces: cosine-series potentials (:mod:`.potential`), symplectic
integration of the flow and its rescaled family (:mod:`.dynamics`), Jacobi
fields and conjugate-point detection (:mod:`.conjugate`), momentum-shell
sampling for minimal orbits (:mod:`.minimal_set`), and the stretched-cutoff
discriminant with closed-form bounds (:mod:`.hopf`).  Experiments are driven
through :mod:`.experiments`, the CLI (:mod:`.cli`), or the HTTP service
(:mod:`.service`).
"""

__version__ = "0.1.0"

from .conjugate import (
    ConjugatePoint,
    JacobiRecord,
    RiccatiDiagnostics,
    ScanResult,
    detect_conjugate,
    first_conjugate_time,
    is_minimal,
    propagate_jacobi,
    propagate_jacobi_frozen,
    riccati_diagnostics,
    scan_orbit,
)
from .dynamics import (
    OrbitSegment,
    PhaseState,
    default_h_step,
    energy,
    integrate,
    rescale_orbit,
    step_vv,
)
from .errors import (
    DuplicateModeError,
    IntegrationDivergedError,
    InvalidAlphaError,
    InvalidSupportError,
    NewtonLabError,
    NotNormalizedError,
    NumericalFailure,
    SingularWindowError,
    SupportTooLowError,
    UnsupportedDimensionError,
    ValidationFailure,
)
from .hopf import (
    CutoffFunction,
    DiscriminantReport,
    MCEstimate,
    SweepReport,
    alpha_sweep,
    c1_constant,
    c2_constant,
    d_alpha,
    d_alpha_direct_mc,
    default_bump,
    make_bump,
    omega_n,
    stretch,
    term_a_bound,
    term_a_exact,
    term_b_bound,
    term_b_exact,
)
from .minimal_set import (
    Divergence,
    ShellReport,
    ShellSpec,
    Witness,
    estimate_fraction,
    find_witness,
    sample_shell,
    wilson_interval,
)
from .potential import FourierMode, FourierPotential, load_potential
from .quadrature import PhaseGrid

__all__ = [name for name in dir() if not name.startswith("_")]
