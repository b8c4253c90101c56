"""Invert the variance map: find the entry scale that hits a target variance.

The output variance is empirically monotone in sigma (it rises from 0
toward the gamma^2 ceiling), so the solver bisects on log sigma.
Monotonicity is an assumption, not a theorem: before bisecting, a coarse
grid is sampled and any decrease beyond noise aborts with diagnostics.
Every Monte Carlo evaluation reuses the same trial seeds, which makes the
objective deterministic and exactly monotone in sigma for fixed seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .mc import McConfig, mc_output_variance
from .series import (
    DEFAULT_MAX_ORDER,
    LayerSpec,
    WishartSpec,
    convergence_bound,
    marginal_variance_series,
)

Method = Literal["mc", "series"]

SIGMA_SPAN = (1e-4, 1e4)  # bisection bracket, in units of 1/sqrt(n)
COARSE_GRID_POINTS = 9
MAX_BISECT_ITERS = 60


class UnattainableTargetError(ValueError):
    """Requested variance is not strictly between 0 and gamma^2."""


class BracketError(RuntimeError):
    """No bracket for the target; carries the diagnostic sweep in ``sweep``."""

    def __init__(self, message: str, sweep: list[dict]):
        super().__init__(message)
        self.sweep = sweep


class SeriesValidityError(ValueError):
    """Series evaluation requested outside its validity region."""


@dataclass(frozen=True)
class SweepPoint:
    """One evaluated grid point of the variance map."""

    m: int
    n: int
    sigma: float
    sigma_scaled: float
    method: str
    value: float
    std_error: float
    within_validity: bool
    k_used: int | None = None

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "sigma": self.sigma,
            "sigma2": self.sigma**2,
            "sigma_scaled": self.sigma_scaled,
            "method": self.method,
            "k_used": self.k_used,
            "value": self.value,
            "std_error": self.std_error,
            "within_validity": self.within_validity,
        }


def estimate_variance(
    m: int,
    n: int,
    sigma: float,
    layer: LayerSpec,
    method: Method = "mc",
    cfg: McConfig = McConfig(),
    max_order: int = DEFAULT_MAX_ORDER,
    override_validity: bool = False,
) -> SweepPoint:
    """Evaluate Var[y] at one point with the chosen estimator."""
    spec = WishartSpec(m=m, n=n, sigma2=sigma * sigma)
    if method == "mc":
        est = mc_output_variance(spec, layer, cfg)
        return SweepPoint(
            m=m,
            n=n,
            sigma=sigma,
            sigma_scaled=sigma,
            method="mc",
            value=est.mean,
            std_error=est.std_error,
            within_validity=spec.sigma2 < convergence_bound(m, n, layer.alpha),
        )
    if method == "series":
        bound = convergence_bound(m, n, layer.alpha)
        if spec.sigma2 >= bound and not override_validity:
            raise SeriesValidityError(
                f"sigma2={spec.sigma2:.6g} exceeds the validity bound "
                f"{bound:.6g}; the asymptotic series is meaningless there "
                "(pass override_validity=True to force evaluation)"
            )
        report = marginal_variance_series(spec, layer, max_order=max_order)
        return SweepPoint(
            m=m,
            n=n,
            sigma=sigma,
            sigma_scaled=sigma,
            method="series",
            value=report.value,
            std_error=0.0,
            within_validity=report.within_validity,
            k_used=report.truncation_k,
        )
    raise ValueError(f"unknown method: {method!r}")


def solve_sigma(
    target: float,
    m: int,
    n: int,
    layer: LayerSpec = LayerSpec(),
    method: Method = "mc",
    tol: float = 0.02,
    cfg: McConfig = McConfig(trials=1000),
    max_order: int = DEFAULT_MAX_ORDER,
    override_validity: bool = False,
    max_iters: int = MAX_BISECT_ITERS,
) -> float:
    """Entry scale sigma with |Var[y](sigma) - target| <= tol.

    Bisects on log sigma over [1e-4, 1e4] / sqrt(n).  Targets at or above
    gamma^2 are unattainable (the variance approaches gamma^2 only in the
    infinite-scale limit).  For the MC method, tol must exceed three
    standard errors of the estimator or the tolerance is meaningless.
    """
    gamma2 = layer.gamma**2
    if not (0.0 < target < gamma2):
        raise UnattainableTargetError(
            f"target {target} is unattainable: the output variance lies "
            f"strictly inside (0, gamma^2) = (0, {gamma2})"
        )

    def evaluate(sigma: float) -> SweepPoint:
        return estimate_variance(
            m, n, sigma, layer, method, cfg, max_order, override_validity
        )

    def accept(pt: SweepPoint) -> float:
        # tol is only meaningful when it dominates the estimator noise at
        # the accepted point
        if 3.0 * pt.std_error > tol:
            raise ValueError(
                f"tol={tol} is below 3 standard errors "
                f"({3.0 * pt.std_error:.3g}) at the solution; increase cfg.trials"
            )
        return pt.sigma

    lo = math.log(SIGMA_SPAN[0] / math.sqrt(n))
    hi = math.log(SIGMA_SPAN[1] / math.sqrt(n))

    grid = [
        lo + (hi - lo) * i / (COARSE_GRID_POINTS - 1)
        for i in range(COARSE_GRID_POINTS)
    ]
    points = [evaluate(math.exp(g)) for g in grid]
    sweep_rows = [p.to_dict() for p in points]
    for a, b in zip(points, points[1:]):
        noise = 3.0 * (a.std_error + b.std_error)
        if b.value < a.value - noise:
            raise BracketError(
                f"variance is not monotone in sigma beyond noise between "
                f"sigma={a.sigma:.6g} and sigma={b.sigma:.6g}",
                sweep_rows,
            )
    if target < points[0].value - tol or target > points[-1].value + tol:
        raise BracketError(
            f"target {target} is outside the achievable range "
            f"[{points[0].value:.6g}, {points[-1].value:.6g}] for sigma in "
            f"[{math.exp(lo):.3g}, {math.exp(hi):.3g}]",
            sweep_rows,
        )

    idx = 0
    for i, p in enumerate(points):
        if p.value >= target:
            idx = max(i - 1, 0)
            break
    else:
        idx = len(points) - 2
    left, right = grid[idx], grid[idx + 1]

    best = points[idx] if abs(points[idx].value - target) <= abs(
        points[idx + 1].value - target
    ) else points[idx + 1]
    for _ in range(max_iters):
        if abs(best.value - target) <= tol:
            return accept(best)
        mid = 0.5 * (left + right)
        pt = evaluate(math.exp(mid))
        if abs(pt.value - target) < abs(best.value - target):
            best = pt
        if pt.value < target:
            left = mid
        else:
            right = mid
    if abs(best.value - target) <= tol:
        return accept(best)
    raise BracketError(
        f"bisection did not reach |value - target| <= {tol} within "
        f"{max_iters} iterations (best residual {abs(best.value - target):.3g})",
        sweep_rows,
    )


def variance_sweep(
    dims: list[int],
    sigma_grid: list[float],
    scaling: Literal["none", "n", "sqrt-n"] = "sqrt-n",
    layer: LayerSpec = LayerSpec(),
    method: Method = "mc",
    cfg: McConfig = McConfig(),
    max_order: int = DEFAULT_MAX_ORDER,
    override_validity: bool = True,
) -> list[SweepPoint]:
    """Evaluate the variance map over a grid of square sizes and scales.

    ``sigma_grid`` values s are interpreted per ``scaling``: the actual
    entry scale is s ("none"), s / n ("n") or s / sqrt(n) ("sqrt-n"); the
    scaled value is recorded alongside so size-collapse plots can be read
    straight off the output.  Rows are emitted in input grid order.
    """
    if not dims or not sigma_grid:
        raise ValueError("dims and sigma_grid must be non-empty")
    rows: list[SweepPoint] = []
    for size in dims:
        for s in sigma_grid:
            if scaling == "none":
                sigma = s
            elif scaling == "n":
                sigma = s / size
            elif scaling == "sqrt-n":
                sigma = s / math.sqrt(size)
            else:
                raise ValueError(f"unknown scaling: {scaling!r}")
            pt = estimate_variance(
                size, size, sigma, layer, method, cfg, max_order, override_validity
            )
            rows.append(
                SweepPoint(
                    m=pt.m,
                    n=pt.n,
                    sigma=pt.sigma,
                    sigma_scaled=s,
                    method=pt.method,
                    value=pt.value,
                    std_error=pt.std_error,
                    within_validity=pt.within_validity,
                    k_used=pt.k_used,
                )
            )
    return rows
