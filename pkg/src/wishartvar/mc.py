"""Monte Carlo ground truth for the normalized-layer variance quantities.

Each trial samples a fresh weight matrix, forms the norm-bounded layer
M = gamma W R^{-T} with R the lower Cholesky factor of alpha I + W^T W,
and measures the statistic of interest.  The input vector is integrated
out analytically by default (the conditional covariance of the output is
gamma^2 M~ M~^T exactly), which removes one source of sampling noise;
explicit input draws remain available and are required on the ELU path.

Trials are reproducible: trial t draws from a generator seeded by
(base seed, t), and accumulation runs in trial order, so serial and any
parallel schedule produce identical estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .linalg import cholesky, gaussian_matrix, tri_solve_right, trace_of_inverse
from .series import LayerSpec, WishartSpec

Activation = Literal["identity", "elu"]


@dataclass(frozen=True)
class McConfig:
    """Trial count, base seed, and input-sampling mode.

    ``x_samples_per_weight = 0`` integrates the input out analytically per
    sampled weight matrix; a positive count draws that many explicit input
    vectors per trial instead.
    """

    trials: int = 1000
    seed: int = 0
    x_samples_per_weight: int = 0

    def __post_init__(self) -> None:
        if self.trials < 2:
            raise ValueError(f"trials must be >= 2, got {self.trials}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.x_samples_per_weight < 0:
            raise ValueError("x_samples_per_weight must be >= 0")


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with its standard error (sample std / sqrt(trials))."""

    mean: float
    std_error: float
    trials: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "trials": self.trials}


class _Welford:
    """Running mean/variance accumulator, updated in trial order."""

    __slots__ = ("count", "mean", "m2")

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, value: float) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    def estimate(self) -> McEstimate:
        var = self.m2 / (self.count - 1) if self.count > 1 else 0.0
        return McEstimate(
            mean=self.mean,
            std_error=math.sqrt(max(var, 0.0) / self.count),
            trials=self.count,
        )


def _trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, index)))


def singular_value_map(mu, alpha: float = 1.0, gamma: float = 1.0):
    """Singular values of the normalized layer: mu -> gamma mu / sqrt(alpha + mu^2).

    Saturates at gamma for large mu; its derivative flattens there, which is
    why large initialization scales freeze the parameterization.
    """
    mu = np.asarray(mu, dtype=np.float64)
    return gamma * mu / np.sqrt(alpha + mu * mu)


def normalize_layer(w: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """gamma W R^{-T} with R R^T = alpha I + W^T W (lower Cholesky factor).

    Right-dividing by R^T is the orientation that inherits the spectral
    bound: W^T W <= R R^T entrywise in the PSD order, so ||W R^{-T}|| <= 1.
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[1]
    g = w.T @ w
    g[np.diag_indices(n)] += layer.alpha
    r = cholesky(g)
    return layer.gamma * tri_solve_right(w, r, transpose=True)


def gram_inverse_trace(w: np.ndarray, alpha: float) -> float:
    """tr((alpha I_m + W W^T)^{-1}) computed on the smaller Gram side.

    For m > n the m-side and n-side spectra differ only by m - n zero
    eigenvalues, so the m-side trace is (m - n)/alpha plus the n-side trace.
    """
    m, n = w.shape
    if n < m:
        g = w.T @ w
        g[np.diag_indices(n)] += alpha
        return (m - n) / alpha + trace_of_inverse(g)
    g = w @ w.T
    g[np.diag_indices(m)] += alpha
    return trace_of_inverse(g)


def mc_inverse_trace(
    spec: WishartSpec, layer: LayerSpec, cfg: McConfig
) -> McEstimate:
    """Monte Carlo estimate of E[tr((alpha I_m + W W^T)^{-1})]."""
    acc = _Welford()
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t)
        w = gaussian_matrix(spec.m, spec.n, spec.sigma, rng)
        acc.add(gram_inverse_trace(w, layer.alpha))
    return acc.estimate()


def _output_variance_trial(
    w: np.ndarray,
    layer: LayerSpec,
    rng: np.random.Generator,
    x_samples: int,
    normalize_dim: int,
    transpose: bool,
) -> float:
    m_unit = normalize_layer(w, LayerSpec(alpha=layer.alpha, gamma=1.0))
    gamma2 = layer.gamma**2
    if x_samples == 0:
        return gamma2 * float((m_unit * m_unit).sum()) / normalize_dim
    op = m_unit.T if transpose else m_unit
    x = rng.standard_normal((op.shape[1], x_samples))
    y = layer.gamma * (op @ x)
    return float((y * y).sum()) / (normalize_dim * x_samples)


def mc_output_variance(
    spec: WishartSpec, layer: LayerSpec, cfg: McConfig
) -> McEstimate:
    """Monte Carlo estimate of the marginal per-coordinate output variance.

    Per trial the input is integrated out exactly: Var[y | W] is
    (gamma^2 / m) tr(M~ M~^T) for the unit-gamma normalized layer M~.  In
    expectation this equals gamma^2 - (gamma^2 alpha / m) E[tr((alpha I +
    W W^T)^{-1})].  With ``x_samples_per_weight > 0`` explicit inputs are
    propagated instead.
    """
    acc = _Welford()
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t)
        w = gaussian_matrix(spec.m, spec.n, spec.sigma, rng)
        acc.add(
            _output_variance_trial(
                w, layer, rng, cfg.x_samples_per_weight, spec.m, transpose=False
            )
        )
    return acc.estimate()


def backward_variance(
    spec: WishartSpec, layer: LayerSpec, cfg: McConfig
) -> McEstimate:
    """Monte Carlo estimate of the gradient variance through the layer.

    Propagates unit-normal cotangents through the transpose of the
    normalized layer (the chain rule applies M^T even though the forward
    map applies M), which amounts to the output-variance statistic with the
    normalization dimension n instead of m.  For m = n the two coincide.
    """
    acc = _Welford()
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t)
        w = gaussian_matrix(spec.m, spec.n, spec.sigma, rng)
        acc.add(
            _output_variance_trial(
                w, layer, rng, cfg.x_samples_per_weight, spec.n, transpose=True
            )
        )
    return acc.estimate()


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def depth_simulate(
    width: int,
    layers: int,
    sigma: float | Sequence[float],
    layer: LayerSpec,
    activation: Activation = "identity",
    cfg: McConfig = McConfig(),
) -> list[McEstimate]:
    """Per-layer signal magnitude through a stack of square normalized layers.

    Each trial draws an input x ~ N(0, I) and L fresh weight matrices, and
    records the empirical per-coordinate mean square after every layer
    (averaged over coordinates; for the identity activation this is the
    per-coordinate variance).  With the identity activation and analytic
    input mode the product map is tracked instead of explicit inputs.
    ``sigma`` may be a scalar or one value per layer.
    """
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")
    if isinstance(sigma, (int, float)):
        sigmas = [float(sigma)] * layers
    else:
        sigmas = [float(s) for s in sigma]
        if len(sigmas) != layers:
            raise ValueError(f"need {layers} sigma values, got {len(sigmas)}")
    if activation not in ("identity", "elu"):
        raise ValueError(f"unknown activation: {activation!r}")
    analytic = activation == "identity" and cfg.x_samples_per_weight == 0
    accs = [_Welford() for _ in range(layers)]
    for t in range(cfg.trials):
        rng = _trial_rng(cfg.seed, t)
        if analytic:
            prod = np.eye(width)
            for ell in range(layers):
                w = gaussian_matrix(width, width, sigmas[ell], rng)
                prod = normalize_layer(w, layer) @ prod
                accs[ell].add(float((prod * prod).sum()) / width)
        else:
            n_x = max(1, cfg.x_samples_per_weight)
            x = rng.standard_normal((width, n_x))
            for ell in range(layers):
                w = gaussian_matrix(width, width, sigmas[ell], rng)
                x = normalize_layer(w, layer) @ x
                if activation == "elu":
                    x = _elu(x)
                accs[ell].add(float((x * x).sum()) / (width * n_x))
    return [acc.estimate() for acc in accs]
