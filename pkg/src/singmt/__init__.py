"""Singular Moser-Trudinger functional on the disk and on conformal images of it."""

from .conformal import (
    IDENTITY,
    DomainError,
    GeometryError,
    InversionError,
    Moebius,
    PowerSeries,
    Scaling,
    conformal_radius,
    invert,
    univalence_check,
)
from .diskfunc import (
    AdmissibilityError,
    FunctionalParams,
    RadialProfile,
    F_disk,
    concentration_tail,
    dirichlet_norm_radial,
    f_delta_estimate,
    moser_profile,
)
from .optimize import OptSettings, gap_experiment, maximize_radial
from .rearrange import GridFunction2D, decreasing_rearrangement, polya_szego_check
from .reports import VerificationReport
from .transplant import F_domain_montecarlo, F_domain_radial, verify_circle_inequality

__version__ = "0.1.0"
