"""Information measures of the two-dimensional circular quantum well."""
from .measures import (
    BBM_BOUND,
    MeasureRecord,
    UncertaintyDiagnostics,
    cgl_complexity,
    fisher_momentum,
    fisher_position,
    measure_record,
    onicescu_momentum,
    onicescu_position,
    shannon_momentum,
    shannon_position,
    to_dimensional,
    uncertainty_diagnostics,
)
from .quad import QuadratureResult, TailPolicy, integrate_finite, integrate_semi_infinite
from .specfun import DomainError, bessel_j, bessel_prime_zero, bessel_zero
from .wells import D, N, BoundaryCondition, StateSpec, UnitSystem, energy, gamma, phi_radial, psi_radial, rho

__version__ = "1.0.0"
