import math

import numpy as np
import pytest
from fbm_reference import davies_harte, fgn_autocovariance
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from qanalog.apps import (
    SwapSpec,
    TamsdTestConfig,
    eb_parameter,
    generalized_chisq_quantiles,
    increment_covariance,
    null_eigenvalues,
    spectral_paths,
    tamsd,
    tamsd_band,
    test_power as tamsd_power,
    variance_swap_strike,
    window_indices,
    window_second_moment,
)
from qanalog.errors import DegeneratePostselectionError
from qanalog.spectral_bm import ProcessSpec, loglog_slope

# --- TAMSD -------------------------------------------------------------------------

def test_tamsd_examples():
    assert tamsd(np.full(20, 3.0), 4) == 0.0
    assert tamsd(np.arange(30.0), 2) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        tamsd(np.arange(5.0), 5)
    with pytest.raises(ValueError):
        tamsd(np.arange(5.0), 0)


def test_tamsd_batches_rows(rng):
    x = rng.standard_normal((3, 50))
    assert np.allclose(tamsd(x, 3), [tamsd(r, 3) for r in x])


def test_reference_generator_covariance(rng):
    x = davies_harte(0.7, 64, 40_000, rng)
    d = np.diff(x, axis=1)
    emp = np.array([np.mean(d[:, :-k or None] * d[:, k:]) for k in range(4)])
    assert np.allclose(emp, fgn_autocovariance(4, 0.7), atol=0.02)


@pytest.mark.parametrize("hurst", [0.5, 0.8])
def test_tamsd_scaling_slope(rng, hurst):
    x = spectral_paths(hurst, 4096, 500, rng, match_lag=4)
    taus = np.array([1, 2, 4, 8, 16, 32, 64])
    m = [np.mean(tamsd(x, int(t))) for t in taus]
    assert abs(loglog_slope(taus, m) - 2 * hurst) < 0.1


@pytest.mark.parametrize("hurst", [0.5, 0.8])
def test_spectral_paths_match_reference_at_lag(rng, hurst):
    # mean TAMSD at the matched lag agrees with the exact generator
    tau = 4
    a = tamsd(spectral_paths(hurst, 512, 2000, rng, match_lag=tau), tau)
    b = tamsd(davies_harte(hurst, 512, 2000, rng), tau)
    se = math.hypot(a.std(), b.std()) / math.sqrt(2000)
    assert abs(a.mean() - b.mean()) < 3 * se + 0.02 * b.mean()


# --- covariance and quantiles ---------------------------------------------------------

def test_covariance_diagonal_and_zeros():
    for H in (0.3, 0.5, 0.8):
        C = increment_covariance(64, 4, 2.0, H)
        assert np.allclose(np.diag(C), 2.0 * 4 ** (2 * H))
    C = increment_covariance(64, 4, 1.0, 0.5)
    i, j = np.indices(C.shape)
    assert np.all(C[np.abs(i - j) >= 4] == 0)


@pytest.mark.parametrize("H", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("T", [16, 64, 256])
def test_covariance_psd(H, T):
    assert np.linalg.eigvalsh(increment_covariance(T, 4, 1.0, H)).min() >= -1e-10


def test_covariance_matches_sampled_increments(rng):
    H, tau = 0.8, 3
    x = davies_harte(H, 40, 40_000, rng)
    inc = x[:, tau:] - x[:, :-tau]
    emp = np.cov(inc[:, :6], rowvar=False)
    assert np.allclose(emp, increment_covariance(40, tau, 1.0, H)[:6, :6], rtol=0.05, atol=0.05)


def test_quantiles_single_eigenvalue(rng):
    lo, hi = generalized_chisq_quantiles([1.0], 0.05, 100_000, rng)
    assert lo == pytest.approx(stats.chi2(1).ppf(0.025), rel=0.05)
    assert hi == pytest.approx(stats.chi2(1).ppf(0.975), rel=0.02)
    lo, hi = generalized_chisq_quantiles([1.0], 0.999, 100_000, rng)
    # both quantiles collapse onto the median
    assert lo == pytest.approx(0.455, abs=0.015) and hi == pytest.approx(0.455, abs=0.015)


def test_quantiles_equal_eigenvalues_scale(rng):
    lo, hi = generalized_chisq_quantiles(np.full(5, 2.0), 0.1, 100_000, rng)
    assert lo == pytest.approx(2 * stats.chi2(5).ppf(0.05), rel=0.02)
    assert hi == pytest.approx(2 * stats.chi2(5).ppf(0.95), rel=0.02)


def test_quantiles_stabilise(rng):
    lam = null_eigenvalues(512, 4, 0.5)
    a = generalized_chisq_quantiles(lam, 0.05, 10_000, rng)
    b = generalized_chisq_quantiles(lam, 0.05, 100_000, rng)
    assert abs(a[0] / b[0] - 1) < 0.02 and abs(a[1] / b[1] - 1) < 0.02


def test_quantiles_cache(tmp_path, rng):
    a = generalized_chisq_quantiles([1.0, 2.0], 0.05, 2000, rng, cache_dir=str(tmp_path))
    b = generalized_chisq_quantiles([1.0, 2.0], 0.05, 2000, np.random.default_rng(0),
                                    cache_dir=str(tmp_path))
    assert a == b


def test_quantiles_guards(rng):
    with pytest.raises(ValueError):
        generalized_chisq_quantiles([1.0], 0.05, 100, rng)
    with pytest.raises(ValueError):
        generalized_chisq_quantiles([1.0], 1.5, 1000, rng)


def test_config_validation():
    with pytest.raises(ValueError):
        TamsdTestConfig(steps=8, tau=8)
    with pytest.raises(ValueError):
        TamsdTestConfig(steps=8, alpha_sig=0.0)
    with pytest.raises(ValueError):
        TamsdTestConfig(steps=8, alternative="levy")


# --- size and power ----------------------------------------------------------------------

def test_size_under_null(rng):
    cfg = TamsdTestConfig(steps=512, hurst_alt=0.5)
    trials = 2000
    size = tamsd_power(cfg, trials, rng)
    assert abs(size - 0.05) < 3 * math.sqrt(0.05 * 0.95 / trials)


def test_size_with_exact_reference_paths(rng):
    # bound on the spectral approximation: the exact generator gives the same size
    cfg = TamsdTestConfig(steps=512)
    lo, hi = tamsd_band(cfg, rng)
    m = tamsd(davies_harte(0.5, 512, 2000, rng), cfg.tau)
    size = np.mean((m < lo) | (m > hi))
    assert abs(size - 0.05) < 3 * math.sqrt(0.05 * 0.95 / 2000)


def test_power_against_persistent_fbm(rng):
    cfg = TamsdTestConfig(steps=512, hurst_alt=0.8)
    power, det = tamsd_power(cfg, 1000, rng, return_details=True)
    assert power > 0.8
    assert det["band"][0] < det["band"][1]


def test_power_against_compound_poisson(rng):
    cfg = TamsdTestConfig(steps=512, alternative="cpoisson", rate=0.1)
    power = tamsd_power(cfg, 1000, rng)
    size = tamsd_power(TamsdTestConfig(steps=512, hurst_alt=0.5), 1000, rng)
    assert power > size + 3 * math.sqrt(0.05 * 0.95 / 1000)


def test_power_needs_trials(rng):
    with pytest.raises(ValueError):
        tamsd_power(TamsdTestConfig(steps=64), 10, rng)


# --- ergodicity breaking -----------------------------------------------------------------

def test_eb_identical_trajectories(rng):
    x = np.tile(rng.standard_normal(100).cumsum(), (12, 1))
    assert eb_parameter(x, 4) == pytest.approx(0.0, abs=1e-12)


def test_eb_two_point_ensemble():
    ramp = np.arange(50.0)
    x = np.array([ramp] * 5 + [math.sqrt(3) * ramp] * 5)
    assert eb_parameter(x, 2) == pytest.approx(0.25)
    # literal orientation: xi = <M> / M in {2, 2/3}
    assert eb_parameter(x, 2, literal=True) == pytest.approx((4 + 4 / 9) / 2 - 1)


def test_eb_decreases_with_length(rng):
    eb = {T: eb_parameter(spectral_paths(0.5, T, 500, rng, match_lag=4), 4) for T in (1024, 4096)}
    assert eb[4096] < eb[1024]
    # Brownian limit (4/3) tau / T
    assert eb[4096] == pytest.approx(4 / 3 * 4 / 4096, rel=0.35)


def test_eb_guards():
    with pytest.raises(ValueError):
        eb_parameter(np.ones((5, 20)), 2)
    with pytest.raises(ValueError):
        eb_parameter(np.ones((12, 20)), 2)


# --- variance swap -------------------------------------------------------------------------

SWAP_PROC = ProcessSpec(0.5, 4, 16)


def test_full_window_strike_is_zeta2(rng):
    res = variance_swap_strike(SwapSpec(), SWAP_PROC, 0.05, "direct", rng)
    assert res.estimate == pytest.approx(math.pi**2 / 6, abs=1e-9)
    cl = variance_swap_strike(SwapSpec(), ProcessSpec(0.5, 64, 256), 0.05, "classical", rng,
                              samples=50_000)
    assert abs(cl.estimate - math.pi**2 / 6) < cl.error_bound + cl.truncation_bound


def _quad_window(L, H, a, b):
    g = lambda t: (2 / np.pi) * sum(np.sin(k * t) ** 2 / k ** (2 * H + 1) for k in range(1, L + 1))  # noqa: E731
    return integrate.quad(g, a, b)[0]


def test_sub_window_vs_quadrature(rng):
    eps, W = 0.05, (0.5, 2.0)
    want = _quad_window(4, 0.5, *W)
    assert window_second_moment(SWAP_PROC, W) == pytest.approx(want, rel=1e-12)
    direct = variance_swap_strike(SwapSpec(window=W), SWAP_PROC, eps, "direct", rng, extrapolate=False)
    assert abs(direct.estimate - want) < eps
    cl = variance_swap_strike(SwapSpec(window=W), ProcessSpec(0.5, 4, 256), eps, "classical", rng,
                              extrapolate=False)
    assert abs(cl.estimate - want) < eps


def test_postselected_quantum_vs_classical(rng):
    norm_window = (0.9, 1.4)
    swap = SwapSpec(window=(0.5, 2.0), norm_window=norm_window)
    q = variance_swap_strike(swap, SWAP_PROC, 0.05, "direct", rng)
    c = variance_swap_strike(swap, SWAP_PROC, 0.05, "classical", rng, samples=400_000)
    assert abs(q.estimate - c.estimate) < 3 * c.details["standard_error"]


def test_ae_strike_within_bound(rng):
    W = (0.5, 2.0)
    direct = variance_swap_strike(SwapSpec(window=W), SWAP_PROC, 0.05, "direct", rng)
    hits = 0
    for _ in range(10):
        ae = variance_swap_strike(SwapSpec(window=W), SWAP_PROC, 0.05, "ae", rng)
        hits += abs(ae.estimate - direct.estimate) <= ae.error_bound
    # each factor meets its bound with probability >= 8 / pi^2, so a run
    # does with probability >= 0.66
    assert hits >= 5


@given(st.floats(0.0, 2.5), st.floats(0.05, 0.6))
def test_strike_positive_and_monotone(a, w):
    b = min(a + w, math.pi)
    inner = window_second_moment(SWAP_PROC, (a, b))
    outer = window_second_moment(SWAP_PROC, (max(a - 0.2, 0.0), b))
    assert inner >= 0
    assert outer >= inner - 1e-12


def test_strike_monotone_on_grid(rng):
    vals = [variance_swap_strike(SwapSpec(window=(0.0, b)), SWAP_PROC, 0.05, "direct", rng,
                                 extrapolate=False).estimate for b in (0.5, 1.0, 2.0, math.pi)]
    assert vals[0] >= 0 and np.all(np.diff(vals) >= -1e-12)


def test_swap_guards(rng):
    with pytest.raises(ValueError):
        SwapSpec(window=(2.0, 1.0))
    with pytest.raises(ValueError):
        SwapSpec(intervals=0)
    with pytest.raises(ValueError):
        variance_swap_strike(SwapSpec(hurst=0.7), SWAP_PROC, 0.05, "direct", rng)
    with pytest.raises(DegeneratePostselectionError):
        variance_swap_strike(SwapSpec(window=(0.01, 0.02)), SWAP_PROC, 0.05, "direct", rng)
    with pytest.raises(DegeneratePostselectionError):
        variance_swap_strike(SwapSpec(norm_window=(50.0, 60.0)), SWAP_PROC, 0.05, "direct", rng)
    assert window_indices(16, (0.0, math.pi)).min() == 1
