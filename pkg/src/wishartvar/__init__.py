"""Exact Wishart trace-moment tables and initialization-variance analysis.

The package has three layers:

- :mod:`wishartvar.wick`: exact integer coefficient tables for E[tr(S^k)]
  of a Wishart matrix, by enumeration of Gaussian pairings.
- :mod:`wishartvar.series` / :mod:`wishartvar.mc`: a truncated asymptotic
  series and a Monte Carlo oracle for the marginal output variance of
  norm-bounded layers gamma W (alpha I + W^T W)^(-1/2).
- :mod:`wishartvar.solve`: inversion of the variance map (which entry
  scale achieves a target variance) and grid sweeps for plots.

The ``wishartvar`` console script exposes all of it; see the README.
"""

from .linalg import (
    NotPositiveDefiniteError,
    SingularTriangularError,
    cholesky,
    gaussian_matrix,
    spectral_norm,
    trace_of_inverse,
    tri_solve_right,
)
from .mc import (
    McConfig,
    McEstimate,
    backward_variance,
    depth_simulate,
    gram_inverse_trace,
    mc_inverse_trace,
    mc_output_variance,
    normalize_layer,
    singular_value_map,
)
from .series import (
    LayerSpec,
    VarianceReport,
    WishartSpec,
    closed_form_trace_power,
    convergence_bound,
    expected_trace_power,
    get_table,
    marginal_variance_series,
    series_terms,
    truncated_inverse_trace,
)
from .solve import (
    BracketError,
    SeriesValidityError,
    SweepPoint,
    UnattainableTargetError,
    estimate_variance,
    solve_sigma,
    variance_sweep,
)
from .wick import (
    DEFAULT_ORDER_CAP,
    MomentTable,
    OrderCapError,
    PersymmetryError,
    complete_persymmetric,
    double_factorial_odd,
    enumerate_matchings,
    matching_weight,
    moment_table,
    reference_table,
)

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "DEFAULT_ORDER_CAP",
    "LayerSpec",
    "McConfig",
    "McEstimate",
    "MomentTable",
    "NotPositiveDefiniteError",
    "OrderCapError",
    "PersymmetryError",
    "SeriesValidityError",
    "SingularTriangularError",
    "SweepPoint",
    "UnattainableTargetError",
    "VarianceReport",
    "WishartSpec",
    "backward_variance",
    "cholesky",
    "closed_form_trace_power",
    "complete_persymmetric",
    "convergence_bound",
    "depth_simulate",
    "double_factorial_odd",
    "enumerate_matchings",
    "estimate_variance",
    "expected_trace_power",
    "gaussian_matrix",
    "get_table",
    "gram_inverse_trace",
    "marginal_variance_series",
    "matching_weight",
    "mc_inverse_trace",
    "mc_output_variance",
    "moment_table",
    "normalize_layer",
    "reference_table",
    "series_terms",
    "singular_value_map",
    "solve_sigma",
    "spectral_norm",
    "trace_of_inverse",
    "tri_solve_right",
    "truncated_inverse_trace",
    "variance_sweep",
]
