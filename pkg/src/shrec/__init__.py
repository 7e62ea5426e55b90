"""Desk-scale lab for the recurrently forced modified Swift-Hohenberg equation."""

from .spectral import (
    DomainSpec,
    OperatorSpectrum,
    SpectralField,
    NormBundle,
    build_spectrum,
    lambda_ladder,
    to_grid,
    to_coeff,
    nonlinear_f,
    norms,
    zero_field,
    mode_field,
    random_field,
)
from .forcing import (
    ForcingComponent,
    ForcingModel,
    BebutovConfig,
    evaluate,
    shift,
    sup_bound,
    bebutov_distance,
    almost_period_scan,
    zero_forcing,
)
from .dynamics import (
    ModelSpec,
    IntegratorConfig,
    Trajectory,
    StepDivergedError,
    Stepper,
    step,
    integrate,
    duhamel_residual,
    skew_orbit,
)
from .gradient import (
    Equilibrium,
    MorseReport,
    lyapunov,
    dissipation,
    find_equilibria,
    default_seeds,
    morse_index_zero,
    marginal_modes,
    equilibrium_identity,
    morse_decomposition,
)
from .recurrence import (
    RecurrenceReport,
    SeparationReport,
    epsilon_ell_table,
    separation,
    omega_limit_estimate,
)
from .bounds import (
    AprioriConstants,
    BoundReport,
    compute_R0,
    verify_energy_inequality,
    verify_absorbing,
    verify_h2_regularization,
)

__version__ = "0.1.0"
