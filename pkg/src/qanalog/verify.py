"""Self-checks run by ``qanalog verify``: circuits against direct matrices,
dense against fast trajectories, and the angle-distribution KS suite.

Functions are looked up through their modules at call time, so a patched
implementation is what gets checked.
"""
from __future__ import annotations

import numpy as np
from scipy import stats

from . import circuits, randgauss, spectral_bm
from .statevector import new_basis_state


def _check(name: str, measured: float, tolerance: float, kind: str = "max_abs_error") -> dict:
    ok = bool(np.isfinite(measured) and measured <= tolerance)
    return {"name": name, "measure": kind, "measured": float(measured), "tolerance": tolerance, "pass": ok}


def check_qft(max_k: int = 6, tol: float = 1e-9) -> dict:
    err = 0.0
    for k in range(1, max_k + 1):
        U = circuits.qft_circuit(k).unitary()
        err = max(err, float(np.abs(U - circuits.dft_matrix(2**k)).max()))
    return _check("qft_vs_dft_matrix", err, tol)


def _transform_error(apply, matrix, max_k: int, skip_zero: bool) -> float:
    err = 0.0
    for k in range(1, max_k + 1):
        n = 2**k
        ref = matrix(n)
        for i in range(1 if skip_zero else 0, n):
            out = apply(new_basis_state(k, i), n)
            err = max(err, float(np.abs(out.amplitudes - ref[:, i]).max()))
    return err


def check_dst(max_k: int = 6, tol: float = 1e-9) -> dict:
    err = _transform_error(circuits.dst_apply, circuits.dst1_matrix, max_k, True)
    return _check("dst_circuit_vs_matrix", err, tol)


def check_dct(max_k: int = 6, tol: float = 1e-9) -> dict:
    err = _transform_error(circuits.dct_apply, circuits.dct4_matrix, max_k, False)
    return _check("dct_circuit_vs_matrix", err, tol)


def check_loader(rng: np.random.Generator, max_k: int = 6, tol: float = 1e-9) -> dict:
    err = 0.0
    for k in range(1, max_k + 1):
        x = rng.standard_normal(2**k)
        out = circuits.load_binary_amplitudes(x)
        err = max(err, float(np.abs(out - x / np.linalg.norm(x)).max()))
    return _check("loader_round_trip", err, tol)


def check_dense_vs_fast(seeds: int = 10, terms: int = 8, steps: int = 32, tol: float = 1e-9) -> dict:
    spec = spectral_bm.ProcessSpec(0.5, terms, steps)
    err = 0.0
    for seed in range(seeds):
        traj, state, j = spectral_bm.simulate_trajectory_dense(spec, np.random.default_rng(seed))
        fast = spectral_bm.simulate_trajectory_fast(spec, np.random.default_rng(seed))
        err = max(err, float(np.abs(traj.values - fast.values).max()))
        err = max(err, float(np.abs(state.amplitudes - fast.encoding).max()))
        if j != fast.shift:
            err = np.inf
    return _check("dense_vs_fast_trajectories", err, tol)


def check_angle_ks(rng: np.random.Generator, leaves: int = 8, samples: int = 20_000,
                   p_min: float = 0.01) -> dict:
    angles, _ = randgauss.sample_angle_trees(leaves, samples, rng)
    dists = randgauss.node_distributions(leaves)
    worst = 1.0
    for j in range(1, leaves):
        d = dists[j]
        p = stats.kstest(np.sin(angles[:, j]) ** 2, stats.beta(d.a, d.b).cdf).pvalue
        worst = min(worst, float(p))
    return {"name": "angle_beta_ks", "measure": "min_p_value", "measured": worst,
            "tolerance": p_min, "pass": worst > p_min}


def run_all(seed: int = 0, quick: bool = False) -> dict:
    rng = np.random.default_rng(seed)
    k = 4 if quick else 6
    checks = [
        check_qft(k),
        check_dst(k),
        check_dct(k),
        check_loader(rng, k),
        check_dense_vs_fast(3 if quick else 10),
        check_angle_ks(rng),
    ]
    failed = [c["name"] for c in checks if not c["pass"]]
    return {"checks": checks, "failed": failed, "pass": not failed}
