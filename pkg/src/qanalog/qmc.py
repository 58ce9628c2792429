"""Monte-Carlo estimation of inner products <f | B> / (|f| |B|) over random paths.

The coherent encoding holds sum_b sqrt(p_b) |b> |psi_b> with garbage b
(shift and angle cells) and psi_b the analog encoding of branch b.
Applying the loader inverse V_f^dagger to the value register puts
x_b = <f/|f|, psi_b> on the all-zero value index, so

* mean_square  E[x^2] = P(value register reads 0);
* mean         E[x]   = amplitude of |0...0> after also reflecting the garbage
  onto sum_b sqrt(p_b)|b> (this keeps the sign).

Amplitude estimation only recovers magnitudes, so for ``mean`` it reports
|E[x]|.  ``b_max`` adds a flag whose 0-amplitude is |B_b| / b_max, turning the
estimands into unnormalised ones; a norm window adds a flag that marks
branches with |B_b| outside [lo, hi].

|B_b| here is the L2[0, pi] norm of the unit-radius branch path,
sqrt(sum_k (u_{k^j} k^-alpha)^2), the only norm the garbage determines.
Expectations are over the Born law of the encoding (see ``spectral_bm``);
ClassicalMC samples the same law unless told otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .circuits import Circuit, _log2_exact, binary_loader_unitary, qft_circuit
from .errors import BudgetError, LoadingError
from .randgauss import cell_width
from .spectral_bm import (
    COHERENT_QUBIT_LIMIT,
    CoherentEncoding,
    ProcessSpec,
    coherent_encoding_build,
    coherent_qubit_count,
    frequency_state,
    sample_trajectories,
    terms_for_accuracy,
)
from .statevector import (
    DENSE_QUBIT_LIMIT,
    GateOp,
    QuantumState,
    apply_gate,
    measure_subset,
    new_basis_state,
    tensor,
)

METHODS = ("direct", "ae", "classical")
ESTIMANDS = ("mean", "mean_square")
AE_FULL_LIMIT = 14


@dataclass(frozen=True, eq=False)
class TestFunction:
    """f(t_i) for i = 1..T-1."""

    values: np.ndarray
    name: str = "f"

    __test__ = False  # not a pytest class

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("test function has non-finite values")
        _log2_exact(v.size + 1, "len(values) + 1")
        object.__setattr__(self, "values", v)

    @property
    def steps(self) -> int:
        return self.values.size + 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([[0.0], self.values])

    @property
    def encoding(self) -> np.ndarray:
        if self.norm == 0:
            raise LoadingError("cannot load the zero function")
        return self.full / self.norm

    def loader(self) -> np.ndarray:
        """V with V|0> = |f> (real orthogonal, T x T)."""
        if self.norm == 0:
            raise LoadingError("cannot load the zero function")
        return binary_loader_unitary(self.full)

    def loader_circuit(self, qubits=None, num_qubits: int | None = None) -> Circuit:
        n = _log2_exact(self.steps)
        qs = list(range(n)) if qubits is None else list(qubits)
        gate = GateOp("UNITARY", tuple(reversed(qs)), (self.loader(), 0))
        return Circuit(num_qubits or max(qs) + 1, (gate,))

    @classmethod
    def from_callable(cls, fn, steps: int, name: str = "f") -> "TestFunction":
        t = np.arange(1, steps) * np.pi / steps
        return cls(np.asarray(fn(t), dtype=float), name)

    @classmethod
    def window(cls, steps: int, lo: float, hi: float) -> "TestFunction":
        return cls.from_callable(lambda t: ((t >= lo) & (t <= hi)).astype(float), steps,
                                 f"window[{lo:.4g},{hi:.4g}]")

    def to_dict(self) -> dict:
        return {"name": self.name, "values": self.values.tolist()}


def benchmark_functions(steps: int) -> list[TestFunction]:
    """The three-function suite used for cross-method checks."""
    return [
        TestFunction.from_callable(np.sin, steps, "sin"),
        TestFunction.window(steps, np.pi / 4, 3 * np.pi / 4),
        TestFunction.from_callable(lambda t: t, steps, "ramp"),
    ]


@dataclass(frozen=True)
class EstimationResult:
    estimate: float
    error_bound: float
    oracle_queries: int
    shots: int
    method: str
    truncation_bound: float = 0.0
    discretization_bound: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def total_bound(self) -> float:
        return self.error_bound + self.truncation_bound + self.discretization_bound

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "error_bound": self.error_bound,
            "truncation_bound": self.truncation_bound,
            "discretization_bound": self.discretization_bound,
            "queries": self.oracle_queries,
            "shots": self.shots,
            "method": self.method,
            "details": self.details,
        }


# --- oracle A --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OracleA:
    """A|0> together with the qubits that must read 0 for the good outcome.

    ``amplitude`` is the signed amplitude of the good subspace when it is a
    single basis state (``target_qubits`` = all qubits), which is how the
    ``mean`` estimand is laid out.
    """

    state: QuantumState
    target_qubits: tuple[int, ...]
    estimand: str
    branch_values: np.ndarray
    branch_weights: np.ndarray
    branch_norms: np.ndarray
    window_mask: np.ndarray | None = None
    b_max: float | None = None

    @property
    def num_qubits(self) -> int:
        return self.state.num_qubits

    def target_probability(self) -> float:
        mask = 0
        for q in self.target_qubits:
            mask |= 1 << q
        idx = np.arange(self.state.amplitudes.size)
        good = (idx & mask) == 0
        return float(np.sum(np.abs(self.state.amplitudes[good]) ** 2))

    @property
    def amplitude(self) -> float:
        if len(self.target_qubits) != self.num_qubits:
            raise ValueError("signed amplitude needs a single-basis-state target")
        return float(self.state.amplitudes[0].real)

    def branch_average(self) -> float:
        """sum_b p_b g(x_b) with the same flags as the state: the estimand computed branchwise."""
        x = self.branch_values
        w = self.branch_weights.copy()
        if self.window_mask is not None:
            w = w * self.window_mask
        scale = self.branch_norms / self.b_max if self.b_max else 1.0
        if self.estimand == "mean":
            return float(np.sum(w * scale * x))
        return float(np.sum(w * (scale * x) ** 2))


@lru_cache(maxsize=4)
def _cached_encoding(spec: ProcessSpec, precision_bits: int) -> CoherentEncoding:
    return coherent_encoding_build(spec, precision_bits)


def _branch_data(enc: CoherentEncoding, f: TestFunction):
    M = enc.branch_matrix().real
    p = np.sum(M**2, axis=1)
    proj = M @ f.encoding
    x = np.divide(proj, np.sqrt(p), out=np.zeros_like(p), where=p > 0)
    p_theta = enc.angle_probability()
    ratio = np.divide(p, p_theta, out=np.zeros_like(p), where=p_theta > 0)
    c_raw = enc.spec.frequency_weights()
    norms = np.linalg.norm(c_raw) * np.sqrt(ratio)
    return M, p, x, norms


def grid_norm_max(spec: ProcessSpec, precision_bits: int) -> float:
    enc = _cached_encoding(spec, precision_bits)
    M = enc.branch_matrix().real
    p = np.sum(M**2, axis=1)
    ratio = np.divide(p, enc.angle_probability(), out=np.zeros_like(p), where=p > 0)
    return float(np.linalg.norm(spec.frequency_weights()) * np.sqrt(ratio.max()))


def default_b_max(spec: ProcessSpec, precision_bits: int) -> float:
    """3 sqrt(E|B|^2), raised to the grid maximum if that is larger."""
    enc = _cached_encoding(spec, precision_bits)
    M = enc.branch_matrix().real
    p = np.sum(M**2, axis=1)
    c2 = np.sum(spec.frequency_weights() ** 2)
    ratio = np.divide(p, enc.angle_probability(), out=np.zeros_like(p), where=p > 0)
    mean_sq = float(np.sum(p * c2 * ratio))
    return max(3 * math.sqrt(mean_sq), grid_norm_max(spec, precision_bits))


def build_oracle_A(spec: ProcessSpec, f: TestFunction, precision_bits: int = 4,
                   estimand: str = "mean_square", b_max: float | None = None,
                   norm_window: tuple[float, float] | None = None) -> OracleA:
    """Prepare A|0> from the coherent encoding of ``spec``.

    Layout (qubit indices): the encoding's value, shift and angle registers,
    then an optional norm flag and an optional window flag on top.
    """
    if estimand not in ESTIMANDS:
        raise ValueError(f"estimand must be one of {ESTIMANDS}")
    if f.steps != spec.steps:
        raise ValueError("test function and process use different grids")
    extra = int(b_max is not None) + int(norm_window is not None)
    need = coherent_qubit_count(spec, precision_bits) + extra
    if need > DENSE_QUBIT_LIMIT or need - extra > COHERENT_QUBIT_LIMIT:
        raise BudgetError(f"oracle needs {need} qubits; use method='classical'")
    enc = _cached_encoding(spec, precision_bits)
    M, p, x, norms = _branch_data(enc, f)
    value = list(enc.value_qubits)
    garbage = list(enc.garbage_qubits)
    n = enc.state.num_qubits

    # V_f^dagger on the value register: column 0 of M V becomes <f|psi_b> sqrt(p_b)
    V = f.loader()
    Mv = M @ V
    if estimand == "mean":
        # reflect the garbage so sum_b sqrt(p_b)|b> maps to |0>
        chi = np.sqrt(p)
        e0 = np.zeros_like(chi)
        e0[0] = 1.0
        w = e0 - chi
        if np.linalg.norm(w) > 1e-15:
            w /= np.linalg.norm(w)
            Mv = Mv - 2 * np.outer(w, w @ Mv)
    state = _state_from_matrix(Mv, value, garbage, n)

    target = list(value) if estimand == "mean_square" else list(range(n))
    mask = None
    if b_max is not None:
        if b_max <= 0 or np.max(norms) > b_max * (1 + 1e-12):
            raise ValueError(f"b_max={b_max} is below the grid maximum {np.max(norms):.6g}")
        ratio = np.clip(norms / b_max, 0.0, 1.0)
        state = _flag_rotation(state, garbage, 2 * np.arccos(ratio))
        target.append(state.num_qubits - 1)
    if norm_window is not None:
        lo, hi = norm_window
        mask = ((norms >= lo) & (norms <= hi)).astype(float)
        state = _flag_rotation(state, garbage, np.where(mask > 0, 0.0, np.pi))
        target.append(state.num_qubits - 1)
    if estimand == "mean":
        target = list(range(state.num_qubits))
    return OracleA(state, tuple(target), estimand, x, p, norms, mask, b_max)


def build_oracle_A_norm(spec: ProcessSpec, f: TestFunction, precision_bits: int = 4,
                        b_max: float | None = None, estimand: str = "mean_square",
                        norm_window: tuple[float, float] | None = None) -> OracleA:
    b = default_b_max(spec, precision_bits) if b_max is None else b_max
    return build_oracle_A(spec, f, precision_bits, estimand, b, norm_window)


def _state_from_matrix(M: np.ndarray, value, garbage, n: int) -> QuantumState:
    """Inverse of the (garbage, value) reshape."""
    rows, cols = list(garbage), list(value)
    order = [n - 1 - q for q in reversed(rows)] + [n - 1 - q for q in reversed(cols)]
    psi = M.reshape((2,) * n)
    inv = np.argsort(order)
    return QuantumState(n, np.transpose(psi, inv).reshape(-1).astype(complex))


def _flag_rotation(state: QuantumState, controls, angles) -> QuantumState:
    n = state.num_qubits
    st = tensor(new_basis_state(1, 0), state)
    return apply_gate(st, GateOp("UCRY", tuple(controls) + (n,), (np.asarray(angles, dtype=float),)))


# --- amplitude estimation ------------------------------------------------------

def ae_error_bound(m: int) -> float:
    M = 2**m
    return math.pi / M + math.pi**2 / M**2


def _target_probability(A, target) -> tuple[float, QuantumState | None, np.ndarray | None]:
    if isinstance(A, OracleA):
        return A.target_probability(), A.state, None
    if isinstance(A, Circuit):
        st = A.apply(new_basis_state(A.num_qubits, 0))
    elif isinstance(A, QuantumState):
        st = A
    else:
        raise TypeError("A must be an OracleA, Circuit or QuantumState")
    if target is None:
        raise ValueError("a target index set is required")
    idx = np.unique(np.asarray(target, dtype=np.int64).ravel())
    return float(np.sum(np.abs(st.amplitudes[idx]) ** 2)), st, idx


def _phase_estimation(unitary_powers, sys_qubits: int, init: np.ndarray, m: int,
                      rng: np.random.Generator) -> int:
    """Canonical phase estimation: phase register on the low m qubits."""
    n = m + sys_qubits
    sys = list(range(m, n))
    state = tensor(QuantumState(sys_qubits, init.astype(complex)), new_basis_state(m, 0))
    for k in range(m):
        state = apply_gate(state, GateOp("H", (k,)))
    for k in range(m):
        U = unitary_powers(2**k)
        state = apply_gate(state, GateOp("UNITARY", (k,) + tuple(reversed(sys)), (U, 1)))
    state = qft_circuit(m, list(range(m)), n).inverse().apply(state)
    rec, _ = measure_subset(state, list(range(m)), rng)
    return rec.value


def _rotation(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]], dtype=complex)


def amplitude_estimate(A, target=None, ancilla_bits: int = 8, rng: np.random.Generator | None = None,
                       mode: str = "auto") -> EstimationResult:
    """Phase-estimation amplitude estimation of a = P(target) for A|0>.

    ``reduced`` runs the phase-estimation circuit on the two-dimensional
    good/bad subspace that the Grover iterate Q = -A S_0 A^dagger S_good
    leaves invariant (Q is a rotation by 2 theta there, sin^2 theta = a).
    ``full`` builds Q from the circuit's unitary and runs phase estimation on
    all qubits; it is only available for small circuits.  Both measure the
    same outcome distribution.
    """
    m = int(ancilla_bits)
    if m < 1:
        raise ValueError("ancilla_bits must be at least 1")
    rng = rng if rng is not None else np.random.default_rng()
    a, state, idx = _target_probability(A, target)
    a = min(max(a, 0.0), 1.0)
    theta = math.asin(math.sqrt(a))
    if mode == "auto":
        mode = "reduced"
    if mode == "reduced":
        if m + 1 > DENSE_QUBIT_LIMIT:
            raise ValueError("too many phase qubits")
        init = np.array([math.cos(theta), math.sin(theta)])
        y = _phase_estimation(lambda p: _rotation(2 * theta * p), 1, init, m, rng)
    elif mode == "full":
        if not isinstance(A, Circuit):
            raise ValueError("full mode needs A as a Circuit")
        n = A.num_qubits
        if n + m > AE_FULL_LIMIT:
            raise ValueError(f"full mode limited to {AE_FULL_LIMIT} total qubits")
        U = A.unitary()
        good = np.zeros(2**n)
        good[idx] = 1.0
        s_good = np.diag(1 - 2 * good)
        s0 = np.eye(2**n)
        s0[0, 0] = -1
        Q = -U @ s0 @ U.conj().T @ s_good
        init = U[:, 0]
        y = _phase_estimation(lambda p: np.linalg.matrix_power(Q, p), n, init, m, rng)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    M = 2**m
    a_hat = math.sin(math.pi * y / M) ** 2
    return EstimationResult(
        a_hat, ae_error_bound(m), M, 1, "ae",
        details={"outcome": int(y), "phase_bits": m, "grover_calls": M - 1, "mode": mode,
                 "quantity": "probability"},
    )


# --- estimators ------------------------------------------------------------

def discretization_bound(spec: ProcessSpec, precision_bits: int, estimand: str) -> float:
    """Worst-case change of x = <f, psi> when every angle moves by half a cell.

    The unit vector moves by at most log2(L) * width / 2; the shifted,
    weighted vector v by c_max times that; normalising costs a factor
    2 / |v| with |v| >= c_min.
    """
    L = spec.terms
    c = frequency_state(spec)
    du = _log2_exact(L) * cell_width(precision_bits) / 2
    dx = min(2.0, 2 * c.max() * du / c.min())
    return dx if estimand == "mean" else min(1.0, 2 * dx)


def _required_bits(spec: ProcessSpec, estimand: str, eps: float) -> int:
    for K in range(1, 40):
        if discretization_bound(spec, K, estimand) <= eps:
            return K
    return 40


def estimate_normalized_inner(spec: ProcessSpec, f: TestFunction, epsilon: float, method: str,
                              rng: np.random.Generator, estimand: str = "mean",
                              precision_bits: int | None = None, ancilla_bits: int | None = None,
                              samples: int | None = None, b_max: float | None = None,
                              norm_window: tuple[float, float] | None = None,
                              strict_budget: bool = True) -> EstimationResult:
    """E[<f|B>/(|f||B|)] (``mean``) or its second moment, with a budget split
    eps/3 truncation, eps/3 discretisation, eps/3 estimation.

    With ``strict_budget`` the given spec and precision must meet the split,
    otherwise a BudgetError names what would be needed.  Without it the
    run goes ahead and the bounds are reported as they are.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if estimand not in ESTIMANDS:
        raise ValueError(f"estimand must be one of {ESTIMANDS}")
    part = epsilon / 3
    trunc = float(spec.terms ** (-2 * spec.hurst))
    if strict_budget and trunc > part:
        need = terms_for_accuracy(part, spec.hurst, power_of_two=True)
        raise BudgetError(f"truncation needs L >= {need} for eps/3 = {part:.3g}")
    K = precision_bits
    if K is None:
        K = _required_bits(spec, estimand, part) if method != "classical" else None
    disc = discretization_bound(spec, K, estimand) if K is not None else 0.0
    if strict_budget and disc > part:
        raise BudgetError(f"discretisation bound {disc:.3g} exceeds eps/3 = {part:.3g}")
    if method != "classical":
        qubits = coherent_qubit_count(spec, K) + (b_max is not None) + (norm_window is not None)
        if qubits > COHERENT_QUBIT_LIMIT + 2 or coherent_qubit_count(spec, K) > COHERENT_QUBIT_LIMIT:
            raise BudgetError(
                f"{method} needs {qubits} qubits (K={K}); the classical fallback is method='classical'"
            )

    if method == "classical":
        n = samples if samples is not None else math.ceil(81 / part**2)
        res = classical_mc_estimate(spec, f, n, rng, estimand=estimand, precision_bits=K,
                                    b_max=b_max, norm_window=norm_window)
        return _with_bounds(res, trunc, disc)

    oracle = build_oracle_A(spec, f, K, estimand, b_max, norm_window)
    window_p = None
    if norm_window is not None:
        window_p = float(np.sum(oracle.branch_weights * oracle.window_mask))
        if window_p <= 0:
            raise ValueError("the norm window holds no branch")
    if method == "direct":
        if estimand == "mean":
            val = oracle.amplitude
        else:
            val = oracle.target_probability()
        if window_p is not None:
            val /= window_p
        res = EstimationResult(val, 0.0, 1, 1, "direct",
                               details={"precision_bits": K, "estimand": estimand})
        return _with_bounds(res, trunc, disc)

    m = ancilla_bits
    if m is None:
        m = 1
        while ae_error_bound(m) > part and m < 24:
            m += 1
    ae = amplitude_estimate(oracle, None, m, rng)
    if estimand == "mean":
        # a = E[x]^2, report |E[x]|; |sin t' - sin t| <= |t' - t| <= pi / M
        val = math.sqrt(ae.estimate)
        err = math.pi / 2**m
    else:
        val, err = ae.estimate, ae.error_bound
    queries = ae.oracle_queries
    if window_p is not None:
        # normalise by an estimate of the window probability from a second run
        wa = _window_oracle(oracle)
        w = amplitude_estimate(wa, None, m, rng)
        queries += w.oracle_queries
        denom = max(w.estimate - w.error_bound, 1e-300)
        err = (err + w.error_bound) / denom
        val = val / max(w.estimate, 1e-300)
    res = EstimationResult(val, err, queries, 1 if window_p is None else 2, "ae",
                           details={"precision_bits": K, "phase_bits": m, "estimand": estimand,
                                    "magnitude_only": estimand == "mean"})
    return _with_bounds(res, trunc, disc)


def _window_oracle(oracle: OracleA) -> OracleA:
    """Same state, good outcome = window flag reads 0."""
    top = oracle.state.num_qubits - 1
    return OracleA(oracle.state, (top,), "mean_square", oracle.branch_values,
                   oracle.branch_weights, oracle.branch_norms, oracle.window_mask)


def _with_bounds(res: EstimationResult, trunc: float, disc: float) -> EstimationResult:
    return EstimationResult(res.estimate, res.error_bound, res.oracle_queries, res.shots,
                            res.method, trunc, disc, res.details)


def classical_mc_estimate(spec: ProcessSpec, f: TestFunction, samples: int, rng: np.random.Generator,
                          estimand: str = "mean", precision_bits: int | None = None,
                          shift_correction: bool = False, b_max: float | None = None,
                          norm_window: tuple[float, float] | None = None,
                          chunk: int | None = None) -> EstimationResult:
    """Sample mean over simulated paths, error bound 3 standard errors.

    Defaults match the coherent encoding: Born-law shifts, and the cell grid
    of ``precision_bits`` when given (continuous angles otherwise).
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    if estimand not in ESTIMANDS:
        raise ValueError(f"estimand must be one of {ESTIMANDS}")
    if f.steps != spec.steps:
        raise ValueError("test function and process use different grids")
    fe = f.encoding[1:]
    if chunk is None:
        # keep each batch of paths near 4M values
        chunk = max(1, min(100_000, 2**22 // spec.steps))
    total = total_sq = 0.0
    kept = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        batch = sample_trajectories(spec, m, rng, shift_correction, precision_bits, with_radius=False)
        v = batch.values
        x = (v @ fe) / np.linalg.norm(v, axis=1)
        nb = np.linalg.norm(batch.fourier_coeffs, axis=1)
        g = x if estimand == "mean" else x**2
        if b_max is not None:
            g = g * (nb / b_max if estimand == "mean" else (nb / b_max) ** 2)
        if norm_window is not None:
            sel = (nb >= norm_window[0]) & (nb <= norm_window[1])
            g = g[sel]
        total += float(g.sum())
        total_sq += float((g**2).sum())
        kept += g.size
        done += m
    if kept < 2:
        raise ValueError("fewer than two samples fell in the norm window")
    mean = total / kept
    var = max(total_sq / kept - mean**2, 0.0) * kept / (kept - 1)
    se = math.sqrt(var / kept)
    return EstimationResult(mean, 3 * se, 0, samples, "classical",
                            details={"standard_error": se, "accepted": kept,
                                     "precision_bits": precision_bits, "estimand": estimand})
