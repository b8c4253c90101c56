"""Monte Carlo oracle: normalization bound, estimators, consistency checks."""

import math

import numpy as np
import pytest

from wishartvar.linalg import spectral_norm, trace_of_inverse
from wishartvar.mc import (
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
from wishartvar.series import (
    LayerSpec,
    WishartSpec,
    marginal_variance_series,
    truncated_inverse_trace,
)


def _combined_se(a: McEstimate, b: McEstimate) -> float:
    return math.hypot(a.std_error, b.std_error)


# --- normalize_layer ----------------------------------------------------------


def test_zero_weight_normalizes_to_zero():
    assert not normalize_layer(np.zeros((4, 6)), LayerSpec()).any()


def test_norm_bound_on_random_layers():
    rng = np.random.default_rng(17)
    for _ in range(100):
        m, n = (int(v) for v in rng.integers(2, 96, 2))
        sigma = 10.0 ** rng.uniform(-2, 2)
        gamma = float(rng.uniform(0.3, 4.0))
        w = sigma * rng.standard_normal((m, n))
        mat = normalize_layer(w, LayerSpec(alpha=1.0, gamma=gamma))
        assert spectral_norm(mat) <= gamma * (1 + 1e-10)


def test_large_scale_orthogonal_weight_saturates_the_bound():
    rng = np.random.default_rng(23)
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    mat = normalize_layer(1e3 * q, LayerSpec(alpha=1.0, gamma=2.0))
    norm = spectral_norm(mat)
    assert 2.0 * (1 - 1e-4) <= norm <= 2.0 * (1 + 1e-12)


def test_singular_value_map_matches_normalized_spectrum():
    rng = np.random.default_rng(29)
    w = rng.standard_normal((6, 6)) * 3.0
    mu = np.linalg.svd(w, compute_uv=False)
    mat = normalize_layer(w, LayerSpec(alpha=1.3, gamma=1.7))
    mapped = np.sort(singular_value_map(mu, alpha=1.3, gamma=1.7))[::-1]
    got = np.linalg.svd(mat, compute_uv=False)
    np.testing.assert_allclose(got, mapped, rtol=1e-10)


# --- mc_inverse_trace -----------------------------------------------------------


def test_inverse_trace_is_exact_for_sigma_zero():
    est = mc_inverse_trace(
        WishartSpec(m=5, n=3, sigma2=0.0), LayerSpec(), McConfig(trials=10, seed=0)
    )
    assert est.mean == 5.0
    assert est.std_error == 0.0
    assert est.trials == 10


def test_inverse_trace_agrees_with_series_at_small_sigma():
    spec = WishartSpec(m=2, n=2, sigma2=0.01)
    layer = LayerSpec()
    est = mc_inverse_trace(spec, layer, McConfig(trials=100_000, seed=101))
    series, _ = truncated_inverse_trace(spec, layer, 10, "fixed")
    assert abs(est.mean - series) <= 3 * est.std_error


def test_inverse_trace_vanishes_for_huge_sigma():
    est = mc_inverse_trace(
        WishartSpec(m=8, n=8, sigma2=1e4), LayerSpec(), McConfig(trials=4000, seed=5)
    )
    assert est.mean <= 0.01 * 8.0


def test_gram_side_reduction_identity():
    rng = np.random.default_rng(31)
    for m, n in [(7, 3), (12, 5), (4, 4)]:
        w = rng.standard_normal((m, n)) * 0.7
        direct = trace_of_inverse(1.5 * np.eye(m) + w @ w.T)
        reduced = gram_inverse_trace(w, 1.5)
        assert abs(direct - reduced) <= 1e-10 * direct


# --- mc_output_variance ----------------------------------------------------------


def test_output_variance_identity_with_inverse_trace_same_seeds():
    spec = WishartSpec(m=6, n=9, sigma2=0.02)
    layer = LayerSpec(alpha=1.2, gamma=1.8)
    cfg = McConfig(trials=500, seed=77)
    var = mc_output_variance(spec, layer, cfg)
    inv = mc_inverse_trace(spec, layer, cfg)
    gamma2 = layer.gamma**2
    predicted = gamma2 - gamma2 * layer.alpha / spec.m * inv.mean
    assert abs(var.mean - predicted) <= 3 * _combined_se(var, inv) + 1e-10


def test_output_variance_explicit_inputs_agree_with_analytic():
    spec = WishartSpec(m=8, n=8, sigma2=0.05)
    layer = LayerSpec()
    analytic = mc_output_variance(spec, layer, McConfig(trials=3000, seed=3))
    sampled = mc_output_variance(
        spec, layer, McConfig(trials=3000, seed=4, x_samples_per_weight=20)
    )
    assert abs(analytic.mean - sampled.mean) <= 3 * _combined_se(analytic, sampled)


def test_output_variance_monotone_in_sigma2_with_common_seeds():
    layer = LayerSpec()
    cfg = McConfig(trials=300, seed=9)
    grid = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]
    means = [
        mc_output_variance(WishartSpec(m=8, n=8, sigma2=s2), layer, cfg).mean
        for s2 in grid
    ]
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert means[-1] <= layer.gamma**2


def test_output_variance_approaches_gamma_squared():
    est = mc_output_variance(
        WishartSpec(m=16, n=16, sigma2=1e6),
        LayerSpec(gamma=3.0),
        McConfig(trials=2000, seed=11),
    )
    assert 8.9 <= est.mean <= 9.0


# --- backward_variance -------------------------------------------------------------


def test_backward_is_zero_for_sigma_zero():
    est = backward_variance(
        WishartSpec(m=4, n=4, sigma2=0.0), LayerSpec(), McConfig(trials=10, seed=0)
    )
    assert est.mean == 0.0


def test_backward_equals_forward_for_square_layers():
    spec = WishartSpec(m=12, n=12, sigma2=0.03)
    layer = LayerSpec()
    fwd = mc_output_variance(spec, layer, McConfig(trials=4000, seed=21))
    bwd = backward_variance(spec, layer, McConfig(trials=4000, seed=22))
    assert abs(fwd.mean - bwd.mean) <= 3 * _combined_se(fwd, bwd)


def test_backward_matches_series_with_swapped_dimensions():
    spec = WishartSpec(m=128, n=512, sigma2=1.0 / 512)
    layer = LayerSpec()
    bwd = backward_variance(spec, layer, McConfig(trials=400, seed=33))
    swapped = WishartSpec(m=spec.n, n=spec.m, sigma2=spec.sigma2)
    report = marginal_variance_series(swapped, layer, 10, "optimal")
    # the swapped point sits outside the series validity region, so the
    # asymptotic error estimate (first omitted term) joins the tolerance
    tol = 3 * bwd.std_error + report.error_estimate
    assert abs(bwd.mean - report.value) <= tol


# --- depth_simulate ------------------------------------------------------------------


def test_single_identity_layer_matches_output_variance():
    spec = WishartSpec(m=16, n=16, sigma2=0.01)
    layer = LayerSpec()
    direct = mc_output_variance(spec, layer, McConfig(trials=2000, seed=41))
    depth = depth_simulate(
        16, 1, spec.sigma, layer, "identity",
        McConfig(trials=2000, seed=42, x_samples_per_weight=1),
    )[0]
    assert abs(direct.mean - depth.mean) <= 3 * _combined_se(direct, depth)


def test_identity_depth_decays_geometrically():
    n, layers = 32, 6
    layer = LayerSpec()
    cfg = McConfig(trials=300, seed=51)
    estimates = depth_simulate(n, layers, 1.0 / math.sqrt(n), layer, "identity", cfg)
    single = mc_output_variance(
        WishartSpec(m=n, n=n, sigma2=1.0 / n), layer, McConfig(trials=4000, seed=52)
    )
    log_means = [math.log(e.mean) for e in estimates]
    xs = list(range(1, layers + 1))
    slope, _ = np.polyfit(xs, log_means, 1)
    r = np.corrcoef(xs, log_means)[0, 1]
    assert r * r >= 0.99
    assert abs(slope - math.log(single.mean)) <= 0.05 * abs(math.log(single.mean))


@pytest.mark.parametrize("activation", ["identity", "elu"])
def test_depth_sequences_non_increasing_for_unit_gamma(activation):
    cfg = McConfig(trials=100, seed=61, x_samples_per_weight=2)
    estimates = depth_simulate(24, 5, 0.5, LayerSpec(), activation, cfg)
    means = [e.mean for e in estimates]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(means, means[1:]))


def test_depth_accepts_per_layer_sigmas():
    estimates = depth_simulate(
        8, 3, [0.1, 0.2, 0.3], LayerSpec(), "identity", McConfig(trials=50, seed=71)
    )
    assert len(estimates) == 3


def test_depth_validates_arguments():
    with pytest.raises(ValueError):
        depth_simulate(8, 0, 0.1, LayerSpec())
    with pytest.raises(ValueError):
        depth_simulate(8, 2, [0.1], LayerSpec())
    with pytest.raises(ValueError):
        depth_simulate(8, 2, 0.1, LayerSpec(), "relu")


# --- config/estimate types ------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(trials=1)
    with pytest.raises(ValueError):
        McConfig(trials=10, seed=-1)
    with pytest.raises(ValueError):
        McConfig(trials=10, x_samples_per_weight=-1)


def test_estimate_serialization():
    est = McEstimate(mean=1.5, std_error=0.1, trials=100)
    assert est.to_dict() == {"mean": 1.5, "std_error": 0.1, "trials": 100}


def test_estimates_are_reproducible_across_runs():
    spec = WishartSpec(m=6, n=6, sigma2=0.1)
    cfg = McConfig(trials=50, seed=123)
    a = mc_output_variance(spec, LayerSpec(), cfg)
    b = mc_output_variance(spec, LayerSpec(), cfg)
    assert a == b
