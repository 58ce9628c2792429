"""The ten acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line (printed in the terminal summary) and
then asserts.  All randomness comes from fixed seeds chosen up front.
"""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats
from stat_helpers import ACCEPTANCE, energy_test

from qanalog import circuits
from qanalog.apps import (
    SwapSpec,
    TamsdTestConfig,
    eb_parameter,
    spectral_paths,
    tamsd,
    test_power as tamsd_power,
    variance_swap_strike,
)
from qanalog.cli import main, table1_rows
from qanalog.levy import (
    KernelVec,
    LevyNoiseSpec,
    noise_spectrum,
    sample_levy_noise,
    stochastic_integral_classical,
    stochastic_integral_quantum,
)
from qanalog.qmc import (
    TestFunction,
    amplitude_estimate,
    benchmark_functions,
    classical_mc_estimate,
    estimate_normalized_inner,
)
from qanalog.randgauss import haar_vectors, independence_check, node_distributions, sample_angle_trees
from qanalog.spectral_bm import (
    ProcessSpec,
    coherent_encoding_build,
    loglog_slope,
    mixture_oracle,
    sample_trajectories,
    simulate_trajectory_dense,
    simulate_trajectory_fast,
    truncation_error_report,
)
from qanalog.statevector import from_amplitudes, new_basis_state, trace_distance


@contextmanager
def criterion(cid):
    """Record PASS/FAIL for criterion ``cid``; the body appends (name, ok, detail) to the list."""
    checks = []
    t0 = time.perf_counter()
    try:
        yield checks
    except Exception as exc:  # record the crash, then re-raise
        checks.append(("error", False, f"{type(exc).__name__}: {exc}"))
        raise
    finally:
        ok = bool(checks) and all(c[1] for c in checks)
        bad = [f"{n}: {d}" for n, o, d in checks if not o]
        detail = "; ".join(bad) if bad else "; ".join(f"{n}: {d}" for n, _, d in checks)
        ACCEPTANCE[cid] = (ok, f"[{time.perf_counter() - t0:.1f}s] {detail}")
    for name, ok, detail in checks:
        assert ok, f"C{cid} {name}: {detail}"


def _runtime(checks, name, t0, limit):
    dt = time.perf_counter() - t0
    checks.append((name, dt < limit, f"{dt:.2f}s < {limit}s"))


# --- 1 -------------------------------------------------------------------------------

def test_c1_table1():
    with criterion(1) as checks:
        t0 = time.perf_counter()
        rows = table1_rows()
        _runtime(checks, "runtime", t0, 1.0)
        worst = max(r["relative_deviation"] for r in rows)
        checks.append(("nine cells within 15%", len(rows) == 9 and worst <= 0.15, f"worst {worst:.3f}"))
        exact = all(r["terms"] == r["reference"] for r in rows if r["hurst"] == 0.5)
        checks.append(("exact at H=0.5", exact, str([r["terms"] for r in rows if r["hurst"] == 0.5])))


# --- 2 -------------------------------------------------------------------------------

def test_c2_truncation_scaling():
    with criterion(2) as checks:
        t0 = time.perf_counter()
        Ls = [16, 32, 64, 128, 256, 512, 1024]
        rng = np.random.default_rng(2002)
        for H in (0.5, 0.8):
            rows = truncation_error_report(H, Ls, paths=10_000, rng=rng)
            slope = loglog_slope(Ls, [r["empirical"] for r in rows])
            checks.append((f"slope H={H}", abs(slope + 2 * H) < 0.1, f"{slope:.3f} vs {-2 * H}"))
        r200 = truncation_error_report(0.5, [200], paths=10_000, rng=rng)[0]
        resid = r200["empirical"] / (math.pi**2 / 6)
        checks.append(("L=200 residual ~0.3%", 0.0015 <= resid <= 0.006, f"{100 * resid:.3f}%"))
        _runtime(checks, "runtime", t0, 120)


# --- 3 -------------------------------------------------------------------------------

def test_c3_bridge_law():
    with criterion(3) as checks:
        t0 = time.perf_counter()
        spec = ProcessSpec(0.5, 1024, 2048)
        idx = np.array([256, 512, 1024, 1536, 1792])
        times = idx * np.pi / spec.steps
        rng = np.random.default_rng(3003)
        vals = np.vstack([sample_trajectories(spec, 20_000, rng, True, indices=idx).values
                          for _ in range(5)])
        worst = 0.0
        for a in range(5):
            for b in range(5):
                prod = vals[:, a] * vals[:, b]
                se = prod.std() / math.sqrt(prod.size)
                want = min(times[a], times[b]) - times[a] * times[b] / np.pi
                worst = max(worst, abs(prod.mean() - want) / se)
        checks.append(("5x5 covariance", worst < 3, f"max |z| = {worst:.2f}"))
        var = float(np.mean(vals[:, 2] ** 2))
        checks.append(("Var B(pi/2)", abs(var - np.pi / 4) < 0.02, f"{var:.4f} vs {np.pi / 4:.4f}"))
        _runtime(checks, "runtime", t0, 60)


# --- 4 -------------------------------------------------------------------------------

def test_c4_circuit_oracles():
    with criterion(4) as checks:
        t0 = time.perf_counter()
        qerr = derr = 0.0
        for k in range(1, 7):
            n = 2**k
            F, D = circuits.dft_matrix(n), circuits.dst1_matrix(n)
            qc = circuits.qft_circuit(k)
            for i in range(n):
                qerr = max(qerr, np.abs(qc.apply(new_basis_state(k, i)).amplitudes - F[:, i]).max())
                if i:
                    out = circuits.dst_apply(new_basis_state(k, i), n)
                    derr = max(derr, np.abs(out.amplitudes - D[:, i]).max())
        checks.append(("QFT vs DFT", qerr < 1e-9, f"{qerr:.1e}"))
        checks.append(("DST vs matrix", derr < 1e-9, f"{derr:.1e}"))
        spec = ProcessSpec(0.5, 8, 32)
        ferr = 0.0
        for seed in range(50):
            traj, _, _ = simulate_trajectory_dense(spec, np.random.default_rng(seed))
            fast = simulate_trajectory_fast(spec, np.random.default_rng(seed))
            ferr = max(ferr, np.abs(traj.values - fast.values).max())
        checks.append(("dense vs fast, 50 seeds", ferr < 1e-9, f"{ferr:.1e}"))
        _runtime(checks, "runtime", t0, 60)


# --- 5 -------------------------------------------------------------------------------

def test_c5_angle_suite():
    with criterion(5) as checks:
        rng = np.random.default_rng(5005)
        ang, _ = sample_angle_trees(8, 100_000, rng)
        dists = node_distributions(8)
        pmin = min(stats.kstest(np.sin(ang[:, j]) ** 2, stats.beta(dists[j].a, dists[j].b).cdf).pvalue
                   for j in range(1, 8))
        checks.append(("node KS", pmin > 0.01, f"min p = {pmin:.3f}"))
        v = haar_vectors(8, 800, rng)
        g = rng.standard_normal((800, 8))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        p = energy_test(v, g, rng)
        checks.append(("energy two-sample", p > 0.01, f"p = {p:.3f}"))
        rep = independence_check(ang[:10_000, 1:])
        checks.append(("distance correlation", rep["max_dcor"] < 0.02, f"max {rep['max_dcor']:.4f}"))


# --- 6 -------------------------------------------------------------------------------

def test_c6_coherent_encoding():
    with criterion(6) as checks:
        t0 = time.perf_counter()
        spec = ProcessSpec(0.5, 4, 16)
        rng = np.random.default_rng(6006)
        for corr in (False, True):
            enc = coherent_encoding_build(spec, 4, shift_correction=corr)
            oracle = mixture_oracle(spec, 100_000, rng, precision_bits=4, shift_correction=corr)
            d = trace_distance(enc.value_density(), oracle)
            checks.append((f"trace distance (correction={corr})", d < 3e-2, f"{d:.4f}"))
        _runtime(checks, "runtime", t0, 300)


# --- 7 -------------------------------------------------------------------------------

def test_c7_levy():
    with criterion(7) as checks:
        rng = np.random.default_rng(7007)
        worst = 1.0
        for T in (2, 4, 8, 16, 32, 64):
            k = KernelVec.power_law(T, -0.3)
            for kind in ("gaussian", "cpoisson", "mixed"):
                z = sample_levy_noise(LevyNoiseSpec(kind, T, rate=2.0), rng)
                if not np.any(z):
                    continue
                res = stochastic_integral_quantum(k, z, rng)
                c = stochastic_integral_classical(k, z)
                worst = min(worst, abs(np.vdot(res.output, c)) / np.linalg.norm(c))
        checks.append(("cosine vs Toeplitz", worst > 1 - 1e-8, f"min {worst:.12f}"))

        # per run: the Born probability of the flag postselection
        k = KernelVec.power_law(16, -0.4)
        margins = []
        for _ in range(1000):
            res = stochastic_integral_quantum(k, LevyNoiseSpec("gaussian", 16), rng)
            margins.append(res.flag_probability - res.spectrum_ratio**2)
        checks.append(("acceptance >= ratio^2 on 1000 runs", min(margins) >= -1e-12,
                       f"min margin {min(margins):.3g}"))
        # pooled frequency on one fixed noise draw matches the Born value
        z = sample_levy_noise(LevyNoiseSpec("gaussian", 16), rng)
        runs = [stochastic_integral_quantum(k, z, rng) for _ in range(1000)]
        p = runs[0].acceptance_probability
        freq = len(runs) / sum(r.attempts for r in runs)
        se = math.sqrt(p * p * (1 - p) / len(runs))  # delta method for 1 / mean(geometric)
        ok = abs(freq - p) < 3 * se and freq >= runs[0].spectrum_ratio**2 * runs[0].block_probability - 3 * se
        checks.append(("empirical acceptance frequency", ok, f"{freq:.4f} vs Born {p:.4f}"))

        for kind in ("gaussian", "cpoisson"):
            s = noise_spectrum(LevyNoiseSpec(kind, 256, rate=2.0), 10_000, rng)
            cv = s.std() / s.mean()
            checks.append((f"{kind} spectrum CV", cv < 0.05, f"{cv:.4f}"))


# --- 8 -------------------------------------------------------------------------------

def test_c8_qmc_consistency():
    with criterion(8) as checks:
        spec = ProcessSpec(0.5, 4, 16)
        rng = np.random.default_rng(8008)
        for est in ("mean_square", "mean"):
            for f in benchmark_functions(16):
                common = dict(estimand=est, precision_bits=4, strict_budget=False)
                d = estimate_normalized_inner(spec, f, 0.05, "direct", rng, **common)
                a = estimate_normalized_inner(spec, f, 0.05, "ae", rng, ancilla_bits=8, **common)
                c = estimate_normalized_inner(spec, f, 0.05, "classical", rng, samples=1_000_000, **common)
                # AE recovers magnitudes for the signed estimand
                dv = abs(d.estimate) if est == "mean" else d.estimate
                cv = abs(c.estimate) if est == "mean" else c.estimate
                pairs = [(dv, 0.0, a.estimate, a.error_bound), (dv, 0.0, cv, c.error_bound),
                         (a.estimate, a.error_bound, cv, c.error_bound)]
                ok = all(abs(x - y) <= ex + ey for x, ex, y, ey in pairs)
                checks.append((f"{est} {f.name}", ok,
                               f"direct {d.estimate:.4f} ae {a.estimate:.4f} classical {c.estimate:.4f}"))
                checks.append((f"queries {est} {f.name}", a.oracle_queries <= 2**8, str(a.oracle_queries)))

        ms = np.arange(3, 11)
        med = []
        for m in ms:
            err = []
            for _ in range(300):
                amp = rng.uniform(0.05, 0.95)
                st = from_amplitudes(np.array([math.sqrt(1 - amp), math.sqrt(amp)]))
                err.append(abs(amplitude_estimate(st, [1], int(m), rng).estimate - amp))
            med.append(np.median(err))
        slope = float(np.polyfit(ms, np.log2(med), 1)[0])
        checks.append(("AE error slope in m", abs(slope + 1) < 0.1, f"{slope:.3f}"))

        Ts = [256, 1024, 4096]
        times = []
        for T in Ts:
            s, g = ProcessSpec(0.5, 4, T), TestFunction.from_callable(np.sin, T)
            best = np.inf
            for _ in range(3):
                t0 = time.perf_counter()
                classical_mc_estimate(s, g, 10_000, rng, estimand="mean_square")
                best = min(best, time.perf_counter() - t0)
            times.append(best)
        ts = loglog_slope(Ts, times)
        checks.append(("classical runtime ~ T", 0.75 < ts < 1.25, f"slope {ts:.2f}"))


# --- 9 -------------------------------------------------------------------------------

def test_c9_applications():
    with criterion(9) as checks:
        rng = np.random.default_rng(9009)
        s = variance_swap_strike(SwapSpec(), ProcessSpec(0.5, 4, 16), 0.05, "direct", rng)
        rel = abs(s.estimate / (math.pi**2 / 6) - 1)
        checks.append(("swap full window", rel < 0.02, f"{s.estimate:.6f} (rel {rel:.1e})"))
        taus = np.array([1, 2, 4, 8, 16, 32, 64])
        for H in (0.5, 0.8):
            x = spectral_paths(H, 4096, 500, rng, match_lag=4)
            slope = loglog_slope(taus, [np.mean(tamsd(x, int(t))) for t in taus])
            checks.append((f"TAMSD slope H={H}", abs(slope - 2 * H) < 0.1, f"{slope:.3f}"))
        size = tamsd_power(TamsdTestConfig(steps=512, hurst_alt=0.5), 1000, rng)
        se = math.sqrt(0.05 * 0.95 / 1000)
        checks.append(("test size", abs(size - 0.05) < 3 * se, f"{size:.3f} (3 SE = {3 * se:.3f})"))
        power = tamsd_power(TamsdTestConfig(steps=512, hurst_alt=0.8), 1000, rng)
        checks.append(("power H 0.5 vs 0.8", power > 0.8, f"{power:.3f}"))
        eb = [eb_parameter(spectral_paths(0.5, T, 500, rng, match_lag=4), 4) for T in (256, 1024, 4096)]
        checks.append(("EB decreasing in T", eb[0] > eb[1] > eb[2], ", ".join(f"{e:.2e}" for e in eb)))


# --- 10 ------------------------------------------------------------------------------

COMMANDS = [
    ["trajectory", "--terms", "64", "--steps", "256", "--count", "4", "--seed", "11"],
    ["trajectory", "--terms", "8", "--steps", "32", "--path", "dense", "--format", "json"],
    ["table1"],
    ["verify", "--quick"],
    ["qmc", "--mode", "classical", "--samples", "20000", "--seed", "5"],
    ["qmc", "--mode", "ae", "--estimand", "mean_square", "--seed", "5"],
    ["levy", "--kind", "mixed", "--steps", "64", "--truncation", "40", "--seed", "3"],
    ["tamsd", "--steps", "128", "--trials", "200", "--quantile-samples", "2000", "--seed", "4"],
    ["swap", "--method", "classical", "--samples", "20000", "--window", "0.2:0.7", "--seed", "9"],
]


def test_c10_determinism(tmp_path):
    with criterion(10) as checks:
        for argv in COMMANDS:
            dirs = [tmp_path / f"{argv[0]}-{len(checks)}-{r}" for r in (0, 1)]
            codes = [main(argv + ["--output-dir", str(d)]) for d in dirs]
            names = sorted(p.name for p in dirs[0].iterdir())
            same = codes == [0, 0] and names == sorted(p.name for p in dirs[1].iterdir()) and all(
                (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names)
            checks.append((" ".join(argv[:3]), same, f"{len(names)} files"))


@pytest.fixture(autouse=True)
def _quiet(capsys):
    # commands print their output paths; keep the acceptance log readable
    yield
    capsys.readouterr()
