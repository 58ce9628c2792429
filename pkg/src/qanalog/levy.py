"""Stochastic integrals against Levy white noise.

The discrete integral out_t = sum_{s<=t} K(t-s) z_s is a lower-triangular
Toeplitz product.  Embedded in a 2T circulant it becomes a convolution,
which the quantum route evaluates as

    |K, 0>  --QFT^dagger-->  diag(b / max|b|) via a flag qubit  --QFT-->

with b the DFT of the zero-padded noise.  Only the flag-0 branch carries
the product, and only the lower half of the 2T register holds the
Toeplitz result; both are postselected with retries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .circuits import Circuit, _log2_exact, load_binary_amplitudes, qft_circuit
from .errors import DegeneratePostselectionError, LoadingError, PostselectionCapError
from .statevector import (
    GateOp,
    QuantumState,
    discard_qubits,
    from_amplitudes,
    measure_subset,
    new_basis_state,
    tensor,
)

NOISE_KINDS = ("gaussian", "cpoisson", "mixed")
RETRY_CAP = 10_000


@dataclass(frozen=True)
class LevyNoiseSpec:
    """Centred Levy white noise on T steps of width dt.

    gaussian: sigma dB;  cpoisson: compound Poisson with N(jump_mean,
    jump_std^2) jumps at ``rate``;  mixed: drift + both.  Each step reports
    (dX - E dX) / dt.
    """

    kind: str
    steps: int
    sigma: float = 1.0
    rate: float = 1.0
    jump_std: float = 1.0
    jump_mean: float = 0.0
    drift: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.steps < 1:
            raise ValueError("steps must be positive")
        if self.sigma < 0 or self.rate < 0 or self.jump_std < 0:
            raise ValueError("sigma, rate and jump_std must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def step_variance(self) -> float:
        """Var of one noise value."""
        v = 0.0
        if self.kind in ("gaussian", "mixed"):
            v += self.sigma**2 * self.dt
        if self.kind in ("cpoisson", "mixed"):
            v += self.rate * self.dt * (self.jump_std**2 + self.jump_mean**2)
        return v / self.dt**2


@dataclass(frozen=True)
class KernelVec:
    """Kernel samples K(t_i), i = 0..T-1."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        if not np.all(np.isfinite(s)):
            raise ValueError("kernel has non-finite entries")
        object.__setattr__(self, "samples", s)

    @classmethod
    def power_law(cls, steps: int, exponent: float, dt: float = 1.0) -> "KernelVec":
        """K(t) = t^exponent on t = (i + 1) dt (shifted so K(0) is finite)."""
        return cls(((np.arange(steps) + 1) * dt) ** exponent)

    def __len__(self):
        return self.samples.size


def _kernel(k) -> np.ndarray:
    return k.samples if isinstance(k, KernelVec) else np.asarray(k, dtype=float).ravel()


def sample_levy_noise(spec: LevyNoiseSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """One realisation (length T), or ``size`` of them stacked."""
    shape = (spec.steps,) if size is None else (size, spec.steps)
    dx = np.zeros(shape)
    if spec.kind in ("gaussian", "mixed"):
        dx += spec.sigma * math.sqrt(spec.dt) * rng.standard_normal(shape)
    if spec.kind in ("cpoisson", "mixed"):
        counts = rng.poisson(spec.rate * spec.dt, size=shape)
        # sum of n iid N(m, s^2) jumps is N(n m, n s^2)
        dx += counts * spec.jump_mean + spec.jump_std * np.sqrt(counts) * rng.standard_normal(shape)
        dx -= spec.rate * spec.dt * spec.jump_mean
    # the drift is deterministic and cancels on centring
    return dx / spec.dt


def power_spectrum(noise) -> np.ndarray:
    """Average periodogram |DFT_k|^2 / T over the rows of ``noise``."""
    z = np.atleast_2d(np.asarray(noise, dtype=float))
    T = z.shape[1]
    return np.mean(np.abs(np.fft.fft(z, axis=1)) ** 2, axis=0) / T


def noise_spectrum(spec: LevyNoiseSpec, ensemble: int, rng: np.random.Generator) -> np.ndarray:
    if ensemble < 100:
        raise ValueError("ensemble must be at least 100")
    return power_spectrum(sample_levy_noise(spec, rng, size=ensemble))


def stochastic_integral_classical(kernel, noise) -> np.ndarray:
    """out_t = sum_{s <= t} K(t - s) z_s (diagonal included)."""
    k = _kernel(kernel)
    z = np.asarray(noise, dtype=float).ravel()
    if k.size != z.size:
        raise ValueError(f"kernel length {k.size} != noise length {z.size}")
    return np.convolve(k, z)[: z.size]


def toeplitz_matrix(kernel) -> np.ndarray:
    k = _kernel(kernel)
    return linalg.toeplitz(k, np.zeros_like(k))


def circulant_embed(column) -> np.ndarray:
    """First column (c, 0) of the 2T circulant holding the Toeplitz block."""
    c = np.asarray(column, dtype=float).ravel()
    return np.concatenate([c, np.zeros_like(c)])


def circulant_matrix(column) -> np.ndarray:
    return linalg.circulant(np.asarray(column))


@dataclass(frozen=True, eq=False)
class QuantumIntegralResult:
    """Output of the quantum integral: the T-amplitude state and its bookkeeping."""

    state: QuantumState
    noise: np.ndarray
    retained: np.ndarray
    flag_probability: float
    block_probability: float
    attempts: int
    spectrum_ratio: float

    @property
    def acceptance_probability(self) -> float:
        """Probability that one attempt passes both postselections."""
        return self.flag_probability * self.block_probability

    @property
    def output(self) -> np.ndarray:
        """Amplitudes; real unless truncation split a conjugate frequency pair."""
        a = self.state.amplitudes
        return a.real.copy() if np.allclose(a.imag, 0, atol=1e-12) else a.copy()


def filtered_integral(kernel, noise, retained=None) -> np.ndarray:
    """Classical twin of the quantum route: Toeplitz product through the 2T FFT,
    keeping only the ``retained`` noise frequencies."""
    k = _kernel(kernel)
    z = np.asarray(noise, dtype=float)
    b = np.fft.fft(circulant_embed(z))
    if retained is not None:
        mask = np.zeros(b.size, dtype=bool)
        mask[retained] = True
        b = np.where(mask, b, 0)
    full = np.fft.ifft(np.fft.fft(circulant_embed(k)) * b)[: k.size]
    return full.real if np.allclose(full.imag, 0, atol=1e-12 * np.abs(full).max()) else full


def stochastic_integral_quantum(kernel, noise, rng: np.random.Generator, truncation: int | None = None,
                                max_attempts: int = RETRY_CAP) -> QuantumIntegralResult:
    """Integral of ``kernel`` against one noise realisation, as a quantum state.

    ``noise`` is a sample vector or a LevyNoiseSpec (sampled once).
    ``truncation`` keeps the L largest-magnitude noise frequencies.  Each
    attempt measures the flag (one uniform) and, if it reads 0, the top
    register qubit (one more uniform); attempts repeat until both read 0.
    """
    k = _kernel(kernel)
    if isinstance(noise, LevyNoiseSpec):
        noise = sample_levy_noise(noise, rng)
    z = np.asarray(noise, dtype=float).ravel()
    T = k.size
    if z.size != T:
        raise ValueError(f"kernel length {T} != noise length {z.size}")
    _log2_exact(T, "steps")
    if not np.any(k != 0):
        raise LoadingError("cannot load the zero kernel")
    n = _log2_exact(2 * T)

    b = np.fft.fft(circulant_embed(z))
    order = np.argsort(-np.abs(b), kind="stable")
    L = b.size if truncation is None else int(truncation)
    if not 1 <= L <= b.size:
        raise ValueError(f"truncation must lie in [1, {b.size}]")
    retained = np.sort(order[:L])
    kept = np.zeros_like(b)
    kept[retained] = b[retained]
    bmax = float(np.max(np.abs(kept)))
    if bmax == 0:
        raise DegeneratePostselectionError("noise spectrum vanishes on the retained frequencies")
    ratio = float(np.min(np.abs(kept[retained])) / bmax)

    reg = list(range(n))
    flag = n
    load = from_amplitudes(load_binary_amplitudes(circulant_embed(k), fanout=False))
    qft = qft_circuit(n, reg, n + 1)
    mult = Circuit(n + 1, (
        GateOp("DIAG", tuple(reg), (np.angle(kept),)),
        GateOp("UCRY", tuple(reg) + (flag,), (2 * np.arccos(np.clip(np.abs(kept) / bmax, 0, 1)),)),
    ))
    prepared = (qft.inverse() + mult).apply(tensor(new_basis_state(1, 0), load))
    p_flag = float(np.sum(np.abs(prepared.amplitudes[: 2**n]) ** 2))
    if p_flag < 1e-300:
        raise DegeneratePostselectionError("flag-0 branch has zero weight")

    attempts = 0
    while True:
        attempts += 1
        if attempts > max_attempts:
            raise PostselectionCapError(f"no success in {max_attempts} attempts")
        rec, st = measure_subset(prepared, [flag], rng)
        if rec.value != 0:
            continue
        st = discard_qubits(st, [flag], 0)
        st = qft_circuit(n).apply(st)
        p_block = float(np.sum(np.abs(st.amplitudes[:T]) ** 2))
        rec, st = measure_subset(st, [n - 1], rng)
        if rec.value == 0:
            break
    out = discard_qubits(st, [n - 1], 0)
    return QuantumIntegralResult(out, z, retained, p_flag, p_block, attempts, ratio)


def ito_process(sigma_kernel, drift, rng: np.random.Generator, x0: float = 0.0,
                noise: LevyNoiseSpec | None = None, dt: float = 1.0) -> np.ndarray:
    """X_t = x0 + sum_{s<=t} sigma(t-s) dB_s + sum_{s<=t} mu_s dt."""
    sig = _kernel(sigma_kernel)
    mu = np.asarray(drift, dtype=float).ravel()
    if sig.size != mu.size:
        raise ValueError(f"kernel length {sig.size} != drift length {mu.size}")
    spec = noise or LevyNoiseSpec("gaussian", sig.size, dt=dt)
    if spec.kind != "gaussian":
        raise ValueError("ito_process drives with Gaussian noise")
    z = sample_levy_noise(spec, rng)
    return x0 + stochastic_integral_classical(sig, z * spec.dt) + np.cumsum(mu) * spec.dt
