"""Truncated-series evaluation of the marginal output variance.

The normalized layer maps x to gamma W (alpha I + W^T W)^(-1/2) x with W an
m x n matrix of IID N(0, sigma^2) entries.  The marginal per-coordinate
output variance is

    Var[y] = gamma^2 - (gamma^2 alpha / m) E[tr((alpha I_m + W W^T)^{-1})]

and the expected inverse trace expands term-by-term as
sum_k (-1)^k alpha^(-(k+1)) E[tr(S^k)] with S = W W^T.  The trace moments
come from the integer coefficient tables in :mod:`wishartvar.wick`.  The
expansion is asymptotic, not convergent: it is only trustworthy when
sigma^2 stays below alpha / (sqrt(m) + sqrt(n))^2, and the default policy
truncates just before the smallest-magnitude term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Literal, Sequence

from .wick import DEFAULT_ORDER_CAP, MomentTable, SHIPPED_ORDERS
from .wick import moment_table, reference_table

if TYPE_CHECKING:  # McEstimate is only referenced, never constructed here
    from .mc import McEstimate

TruncationPolicy = Literal["fixed", "optimal"]

DEFAULT_MAX_ORDER = 10


@dataclass(frozen=True)
class WishartSpec:
    """Dimensions and entry variance of the underlying Gaussian matrix.

    m is the output dimension (rows), n the input dimension (columns) and
    sigma2 the per-entry variance; S = W W^T is then m x m Wishart with n
    degrees of freedom.
    """

    m: int
    n: int
    sigma2: float

    def __post_init__(self) -> None:
        if self.m < 1 or self.n < 1:
            raise ValueError(f"dimensions must be >= 1, got m={self.m}, n={self.n}")
        if not (self.sigma2 >= 0):
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class LayerSpec:
    """Regularizer alpha and norm bound gamma of the layer normalization."""

    alpha: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (self.gamma > 0):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


@dataclass(frozen=True)
class VarianceReport:
    """Series estimate of Var[y] with its truncation diagnostics.

    ``terms`` holds the K+1 signed terms of the inverse-trace expansion
    (before the affine map to the variance); ``truncation_k`` is the last
    order actually summed.  ``error_estimate`` is the standard asymptotic
    heuristic, the magnitude of the first omitted term mapped to variance
    units; it is recorded, not a rigorous bound (None when no term was
    omitted).  ``mc_check`` optionally carries a Monte Carlo cross-check.
    """

    value: float
    truncation_k: int
    within_validity: bool
    terms: tuple[float, ...] = field(repr=False)
    error_estimate: float | None = None
    mc_check: "McEstimate | None" = None

    def to_dict(self) -> dict:
        doc = {
            "value": self.value,
            "truncation_k": self.truncation_k,
            "within_validity": self.within_validity,
            "terms": list(self.terms),
            "error_estimate": self.error_estimate,
        }
        if self.mc_check is not None:
            doc["mc_check"] = self.mc_check.to_dict()
        return doc


def convergence_bound(m: int, n: int, alpha: float, t: float = 0.0) -> float:
    """Largest sigma2 for which the expansion is trustworthy: alpha/(sqrt m + sqrt n + t)^2."""
    if t < 0:
        raise ValueError(f"tail parameter must be >= 0, got {t}")
    return alpha / (math.sqrt(m) + math.sqrt(n) + t) ** 2


def _scaled_power(poly_value: int, sigma2: float, k: int) -> float:
    """sigma2^k * poly_value with a log-space fallback for huge magnitudes."""
    if sigma2 == 0.0:
        return 0.0
    try:
        return float(poly_value) * sigma2**k
    except OverflowError:
        log_v = k * math.log(sigma2) + math.log(poly_value)
        return math.exp(log_v) if log_v < 709.0 else math.inf


def expected_trace_power(
    spec: WishartSpec, k: int, table: MomentTable | None = None
) -> float:
    """E[tr(S^k)] = sigma^(2k) sum_{a,b} C[a,b] n^a m^b from a coefficient table.

    The polynomial part is accumulated Horner-style per row in exact integer
    arithmetic (n and m are integer dimensions), then scaled by sigma^(2k);
    the scaling switches to log space when the float range would overflow.
    k = 0 needs no table and returns m.
    """
    if k < 0:
        raise ValueError(f"order must be >= 0, got {k}")
    if k == 0:
        return float(spec.m)
    if table is None:
        table = get_table(k)
    if table.k != k:
        raise ValueError(f"table order {table.k} does not match k={k}")
    m, n = spec.m, spec.n
    poly = 0
    for r in range(k):
        acc = 0
        for c in range(k - 1, -1, -1):
            acc = acc * m + int(table.coeffs[r, c])
        acc *= m  # column c encodes exponent c + 1
        poly += acc * n ** (k - r)
    return _scaled_power(poly, spec.sigma2, k)


def closed_form_trace_power(spec: WishartSpec, k: int) -> float:
    """Independent closed forms for the first two trace moments.

    k=1: n m sigma^2.  k=2: sigma^4 n m (m + 1 + n).  Exists purely as a
    cross-check of the enumerated tables.
    """
    if k == 1:
        return spec.n * spec.m * spec.sigma2
    if k == 2:
        return spec.sigma2**2 * spec.n * spec.m * (spec.m + 1 + spec.n)
    raise ValueError(f"closed form available only for k in {{1, 2}}, got {k}")


def get_table(k: int, cap: int = DEFAULT_ORDER_CAP) -> MomentTable:
    """Coefficient table for order k: shipped data for k <= 10, enumerated above."""
    if k in SHIPPED_ORDERS:
        return reference_table(k)
    return moment_table(k, cap=cap)


def series_terms(
    spec: WishartSpec,
    layer: LayerSpec,
    max_order: int = DEFAULT_MAX_ORDER,
    tables: Sequence[MomentTable] | None = None,
) -> list[float]:
    """Signed terms (-1)^k alpha^(-(k+1)) E[tr(S^k)] for k = 0..max_order."""
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    alpha = layer.alpha
    terms = [spec.m / alpha]
    for k in range(1, max_order + 1):
        table = tables[k - 1] if tables is not None else None
        ek = expected_trace_power(spec, k, table)
        terms.append((-1) ** k * alpha ** (-(k + 1)) * ek)
    return terms


def _truncate(terms: Sequence[float], policy: TruncationPolicy) -> tuple[float, int]:
    if policy == "fixed":
        used = len(terms) - 1
    elif policy == "optimal":
        mags = [abs(t) for t in terms]
        used = max(mags.index(min(mags)) - 1, 0)
    else:
        raise ValueError(f"unknown truncation policy: {policy!r}")
    return sum(terms[: used + 1]), used


def truncated_inverse_trace(
    spec: WishartSpec,
    layer: LayerSpec,
    max_order: int = DEFAULT_MAX_ORDER,
    policy: TruncationPolicy = "optimal",
    tables: Sequence[MomentTable] | None = None,
) -> tuple[float, int]:
    """Truncated series for E[tr((alpha I + S)^{-1})]; returns (value, used_k).

    Policy "fixed" sums all max_order+1 terms.  Policy "optimal" applies the
    usual asymptotic-series rule: locate the smallest-magnitude term and sum
    only the terms strictly before it (never fewer than the k=0 term).
    """
    return _truncate(series_terms(spec, layer, max_order, tables), policy)


def marginal_variance_series(
    spec: WishartSpec,
    layer: LayerSpec,
    max_order: int = DEFAULT_MAX_ORDER,
    policy: TruncationPolicy = "optimal",
    tables: Sequence[MomentTable] | None = None,
) -> VarianceReport:
    """Series estimate of Var[y] = gamma^2 - (gamma^2 alpha / m) E[tr((alpha I + S)^{-1})].

    The true inverse trace is strictly positive, which keeps Var[y] strictly
    below gamma^2; when a fixed out-of-validity truncation drives the series
    value non-positive it is replaced by the Jensen lower bound
    m / (alpha + n sigma2), so the report never violates that ceiling.
    """
    terms = series_terms(spec, layer, max_order, tables)
    raw, used = _truncate(terms, policy)
    trace_est = raw if raw > 0 else spec.m / (layer.alpha + spec.n * spec.sigma2)
    gamma2 = layer.gamma**2
    scale = gamma2 * layer.alpha / spec.m
    value = 0.0 if spec.sigma2 == 0 else gamma2 - scale * trace_est
    err = scale * abs(terms[used + 1]) if used + 1 <= max_order else None
    return VarianceReport(
        value=value,
        truncation_k=used,
        within_validity=spec.sigma2 < convergence_bound(spec.m, spec.n, layer.alpha),
        terms=tuple(terms),
        error_estimate=err,
    )
