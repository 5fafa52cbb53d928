"""diophlab: certified counting, exponent, covering, and measure probes
for simultaneous and dual Diophantine approximation on affine fibers."""

__version__ = "0.1.0"

from .certified import (  # noqa: F401
    RealExpr,
    RealVector,
    Threshold,
    nearest_int_dist,
    parse_real,
    parse_vector,
    sup_norm_dist,
)
from .counting import (  # noqa: F401
    CountQuery,
    CountReport,
    count_Q,
    partial_series,
    qualifying_q,
    verify_cor_nalpha,
    verify_count_lower_bound,
)
from .errors import (  # noqa: F401
    BudgetExceeded,
    DriftDetected,
    LiteralParseError,
    PrecisionExhausted,
    PreconditionViolated,
)
from .exponents import (  # noqa: F401
    check_transference,
    estimate_omega_D,
    estimate_omega_S,
    estimate_tau_D,
    vwa_witnesses,
)
from .lattice import (  # noqa: F401
    LatticeSpec,
    build_lattice,
    count_lattice_points,
    dual_short_vector,
    verify_nalpha_bound,
)
from .measure_lab import (  # noqa: F401
    MeasureExperiment,
    approximable_fraction,
    fraction_profile,
    phi_contrast,
    subspace_fraction,
)
from .psi import (  # noqa: F401
    ApproxFunction,
    check_u_regular,
    classify_divergence,
    parse_psi,
)
from .ubiquity import (  # noqa: F401
    check_conditions,
    mink_cover,
    select_k,
    small_q_mass,
)
