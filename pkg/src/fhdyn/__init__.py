"""Numerical local dynamics of fibered holomorphic maps over irrational
rotations: invariant-section characteristics, small-divisor solvers,
linearization, Birkhoff-sum diagnostics, Diophantine checks, and grid
approximation of the invariant continuum."""

from .arithmetic import (
    ApproximantSequence,
    ContinuedFraction,
    DiophantineReport,
    check_cd,
    continued_fraction,
    prime_denominator_approximants,
    torus_norm,
    value_from_quotients,
)
from .birkhoff import (
    BirkhoffTrace,
    FurstenbergExample,
    FurstenbergSchedule,
    StabilityReport,
    birkhoff_trace,
    boundedness_scan,
    furstenberg_example,
    stability_probe,
)
from .continua import (
    CompactSetApprox,
    ContinuumReport,
    ContinuumSchedule,
    GoodChain,
    continuum_approx,
    fill_fibers,
    hausdorff_distance,
    map_mask,
    nonescaping_set,
    periodize,
)
from .fourier import (
    SmallDivisorReport,
    TrigPoly,
    fejer_approximation,
    grid_points,
    solve_cohomological,
    stable_grid_mean,
)
from .linearize import (
    FormalConjugacy,
    KoenigsConjugacy,
    RescaleData,
    conjugacy_residual,
    koenigs_linearize,
    modulus_rescale,
    siegel_formal_linearize,
)
from .maps import (
    CharacteristicsReport,
    FiberedMap,
    InvariantCurve,
    conjugate_scaling,
    invariant_curve,
    normalize_curve,
)

__version__ = "0.1.0"
