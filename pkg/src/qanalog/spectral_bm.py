"""Brownian and fractional Brownian bridges from stochastic sine series.

B(t) = sqrt(2/pi) * sum_k a_k sin(k t) / k^alpha on [0, pi], alpha = H + 1/2,
sampled on t_i = i pi / T for i = 1..T-1.  Three routes produce the same
trajectories:

* ``classical_wiener_trajectory`` - iid normals and a fast sine transform;
* ``simulate_trajectory_dense``  - the circuit pipeline: two unary loaders,
  unary-to-binary, an XOR of the registers, a Born-rule measurement of the
  shift j, padding, a +1 frequency offset and the circuit sine transform;
* ``simulate_trajectory_fast``   - the same pipeline on plain vectors.

Measuring the shift j with Born probabilities P(j|u) = sum_k c_k^2 u_{k^j}^2
biases the output towards coefficient vectors whose large entries line up
with the large frequency weights.  With ``shift_correction`` (the default)
a classical accept/reject step with acceptance P_min / P(j|u) removes the bias
exactly: accepted (u, j) pairs have u uniform on the sphere and j uniform,
independent of u.  Without it the outputs follow the Born-weighted law, which
is what the coherent encoding holds in superposition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy import special

from .circuits import (
    _log2_exact,
    increment_circuit,
    increment_gates,
    load_binary_amplitudes,
    reconstruct_from_angles,
    dst_apply,
    unary_to_binary_circuit,
    unary_to_binary_layout,
    Circuit,
)
from .errors import DivergentSeriesError, ResourceError
from .randgauss import (
    cell_width,
    discretised_angle_trees,
    node_cell_distribution,
    register_bits,
    sample_angle_tree,
    sample_angle_trees,
    sample_gamma,
)
from .statevector import (
    DENSE_QUBIT_LIMIT,
    GateOp,
    QuantumState,
    discard_qubits,
    from_amplitudes,
    measure_subset,
    new_basis_state,
    reduced_density,
    reduced_diagonal,
    sample_index,
    tensor,
    _project,
)

DENSE_TERMS_LIMIT = 2**6
DENSE_STEPS_LIMIT = 2**10
FAST_STEPS_LIMIT = 2**20
COHERENT_QUBIT_LIMIT = 24


def _check_hurst(hurst: float) -> None:
    if hurst == 0:
        raise DivergentSeriesError(
            "H = 0 gives coefficients 1/sqrt(k): the variance series sum 1/k diverges"
        )
    if not 0 < hurst <= 1:
        raise ValueError(f"Hurst parameter must lie in (0, 1], got {hurst}")


@dataclass(frozen=True)
class ProcessSpec:
    """A truncated sine-series bridge: Hurst H, L terms, T time steps."""

    hurst: float
    terms: int
    steps: int
    scale: float = 1.0

    def __post_init__(self):
        _check_hurst(self.hurst)
        _log2_exact(self.terms, "terms")
        _log2_exact(self.steps, "steps")
        if self.terms < 1:
            raise ValueError("terms must be at least 1")
        if self.terms >= self.steps:
            raise ValueError(
                f"terms ({self.terms}) must be below steps ({self.steps}); "
                "frequency T would sit on the pinned endpoint"
            )

    @property
    def decay_exponent(self) -> float:
        return self.hurst + 0.5

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.steps) * np.pi / self.steps

    def frequency_weights(self) -> np.ndarray:
        """k^(-alpha), k = 1..L."""
        return np.arange(1, self.terms + 1, dtype=float) ** (-self.decay_exponent)

    def to_dict(self) -> dict:
        return {"hurst": self.hurst, "terms": self.terms, "steps": self.steps, "scale": self.scale}


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Values v_1..v_{T-1} on t_i = i pi / T and the coefficients behind them."""

    values: np.ndarray
    fourier_coeffs: np.ndarray
    spec: ProcessSpec
    shift: int | None = None
    attempts: int = 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    @property
    def encoding(self) -> np.ndarray:
        """Analog encoding over the full register, index 0 (t = 0) is 0."""
        out = np.zeros(self.spec.steps)
        out[1:] = self.values / self.norm
        return out

    @property
    def times(self) -> np.ndarray:
        return self.spec.times


def terms_for_accuracy(epsilon: float, hurst: float, power_of_two: bool = False) -> int:
    """Smallest L with L^(-2H) <= epsilon, i.e. ceil(epsilon^(-1/(2H)))."""
    _check_hurst(hurst)
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    raw = epsilon ** (-1.0 / (2 * hurst))
    # guard against 100.00000000000001 -> 101
    n = max(1, math.ceil(round(raw, 9)))
    if power_of_two:
        n = 1 << (n - 1).bit_length()
    return n


def sine_series_values(coeffs, steps: int, scale: float = 1.0) -> np.ndarray:
    """sqrt(2/pi) sum_k coeffs_k sin(k t_i) for i = 1..steps-1 (last axis)."""
    coeffs = np.asarray(coeffs, dtype=float)
    L = coeffs.shape[-1]
    if L > steps - 1:
        raise ValueError("more coefficients than interior grid points")
    pad = np.zeros(coeffs.shape[:-1] + (steps - 1,))
    pad[..., :L] = coeffs
    return scale * np.sqrt(2 / np.pi) * sfft.dst(pad, type=1, axis=-1) / 2


def sine_series_at(coeffs, times, scale: float = 1.0) -> np.ndarray:
    """Direct evaluation at arbitrary times (used for a few points only)."""
    coeffs = np.asarray(coeffs, dtype=float)
    k = np.arange(1, coeffs.shape[-1] + 1)
    basis = np.sin(np.outer(k, np.asarray(times, dtype=float)))
    return scale * np.sqrt(2 / np.pi) * coeffs @ basis


def classical_wiener_trajectory(spec: ProcessSpec, rng: np.random.Generator | None = None,
                                gaussians=None) -> Trajectory:
    """Oracle path: iid N(0,1) coefficients (or the given ones) through the sine transform."""
    if gaussians is None:
        gaussians = rng.standard_normal(spec.terms)
    a = np.asarray(gaussians, dtype=float)
    if a.shape != (spec.terms,):
        raise ValueError(f"expected {spec.terms} coefficients")
    coeffs = a * spec.frequency_weights()
    return Trajectory(sine_series_values(coeffs, spec.steps, spec.scale), coeffs, spec)


# --- sampling paths ------------------------------------------------------------

def walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis."""
    v = np.array(v, dtype=float)
    n = v.shape[-1]
    _log2_exact(n)
    h = 1
    while h < n:
        s = v.reshape(v.shape[:-1] + (n // (2 * h), 2, h))
        a = s[..., 0, :].copy()
        b = s[..., 1, :]
        s[..., 0, :] = a + b
        s[..., 1, :] = a - b
        v = s.reshape(v.shape)
        h *= 2
    return v


def frequency_state(spec: ProcessSpec) -> np.ndarray:
    c = spec.frequency_weights()
    return c / np.linalg.norm(c)


def shift_probabilities(u: np.ndarray, c: np.ndarray) -> np.ndarray:
    """P(j) = sum_k c_k^2 u_{k xor j}^2, the Born law of the XOR register."""
    n = u.shape[-1]
    p = walsh_hadamard(walsh_hadamard(c**2) * walsh_hadamard(u**2)) / n
    return np.clip(p, 0.0, None)


def _trajectory_from(spec: ProcessSpec, u: np.ndarray, radius: float, j: int,
                     attempts: int) -> Trajectory:
    k = np.arange(spec.terms)
    w = radius * u[k ^ j]
    coeffs = w * spec.frequency_weights()
    return Trajectory(sine_series_values(coeffs, spec.steps, spec.scale), coeffs, spec, j, attempts)


def _check_dense(spec: ProcessSpec) -> None:
    if spec.terms > DENSE_TERMS_LIMIT or spec.steps > DENSE_STEPS_LIMIT:
        raise ResourceError(
            f"dense path limited to L <= {DENSE_TERMS_LIMIT}, T <= {DENSE_STEPS_LIMIT}"
        )
    if spec.terms < 2:
        raise ValueError("the circuit pipeline needs at least two terms")


def _accept(rng: np.random.Generator, p_min: float, p_j: float) -> bool:
    return rng.random() * p_j < p_min


def simulate_trajectory_dense(spec: ProcessSpec, rng: np.random.Generator,
                              shift_correction: bool = True, forced_shift: int | None = None,
                              max_attempts: int = 10**7):
    """Circuit-level run; returns (Trajectory, final QuantumState, shift j).

    The final state lives on log2(T) qubits and its amplitudes are the analog
    encoding (index i <-> t_i).
    """
    _check_dense(spec)
    L, T = spec.terms, spec.steps
    l, t = _log2_exact(L), _log2_exact(T)
    c = frequency_state(spec)
    c_amp = load_binary_amplitudes(c)
    p_min = float(np.min(c**2))
    attempts = 0
    while True:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError("shift correction exceeded its attempt cap")
        tree = sample_angle_tree(L, rng)
        radius = math.sqrt(2 * sample_gamma(L / 2, rng))
        u_amp = load_binary_amplitudes(tree)
        state = tensor(from_amplitudes(u_amp), from_amplitudes(c_amp))
        reg_k = list(range(l))
        reg_r = list(range(l, 2 * l))
        xor = Circuit(2 * l, tuple(GateOp("CNOT", (reg_k[m], reg_r[m])) for m in range(l)))
        state = xor.apply(state)
        if forced_shift is not None:
            j = int(forced_shift)
            amps, p_j = _project(state, reg_r, j)
            state = QuantumState(state.num_qubits, amps / math.sqrt(p_j))
            break
        rec, state = measure_subset(state, reg_r, rng)
        j = rec.value
        if not shift_correction or _accept(rng, p_min, rec.probability):
            break
    state = discard_qubits(state, reg_r, j)
    state = tensor(new_basis_state(t - l, 0), state)
    state = increment_circuit(t).apply(state)
    state = dst_apply(state, T)
    traj = _trajectory_from(spec, tree.reconstruct(), radius, j, attempts)
    return traj, state, j


def simulate_trajectory_fast(spec: ProcessSpec, rng: np.random.Generator,
                             shift_correction: bool = True, forced_shift: int | None = None,
                             max_attempts: int = 10**7) -> Trajectory:
    """Vector-level run consuming the random stream exactly like the dense path."""
    if spec.steps > FAST_STEPS_LIMIT:
        raise ResourceError(f"fast path limited to T <= {FAST_STEPS_LIMIT}")
    L = spec.terms
    c = frequency_state(spec)
    p_min = float(np.min(c**2))
    attempts = 0
    while True:
        attempts += 1
        if attempts > max_attempts:
            raise RuntimeError("shift correction exceeded its attempt cap")
        tree = sample_angle_tree(L, rng) if L > 1 else None
        u = tree.reconstruct() if tree is not None else np.array([1.0])
        radius = math.sqrt(2 * sample_gamma(L / 2, rng))
        if forced_shift is not None:
            j = int(forced_shift)
            break
        p = shift_probabilities(u, c)
        j = sample_index(p, rng.random())
        if not shift_correction or _accept(rng, p_min, p[j]):
            break
    return _trajectory_from(spec, u, radius, j, attempts)


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    values: np.ndarray
    fourier_coeffs: np.ndarray
    shifts: np.ndarray
    unit: np.ndarray
    spec: ProcessSpec
    indices: np.ndarray | None = None
    radius: np.ndarray | None = None

    def direction_norms(self) -> np.ndarray:
        """|(u_{k^j} k^-alpha)_k|: the L2[0, pi] norm of each path at unit radius."""
        r = self.radius if self.radius is not None else 1.0
        return np.linalg.norm(self.fourier_coeffs, axis=1) / r

    def encodings(self) -> np.ndarray:
        """Analog encodings over the full T-register (requires full-grid values)."""
        if self.indices is not None:
            raise ValueError("encodings need the full grid")
        out = np.zeros((self.values.shape[0], self.spec.steps))
        out[:, 1:] = self.values / np.linalg.norm(self.values, axis=1, keepdims=True)
        return out


def _born_shifts(u: np.ndarray, c: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorised Born draws: j = i xor k with i ~ u^2 and k ~ c^2 independent."""
    n, L = u.shape
    cdf_u = np.cumsum(u**2, axis=1)
    i = (cdf_u < rng.random((n, 1)) * cdf_u[:, -1:]).sum(axis=1)
    k = np.searchsorted(np.cumsum(c**2), rng.random(n) * np.sum(c**2), side="right")
    return np.minimum(i, L - 1) ^ np.minimum(k, L - 1)


def sample_trajectories(spec: ProcessSpec, count: int, rng: np.random.Generator,
                        shift_correction: bool = True, precision_bits: int | None = None,
                        indices=None, with_radius: bool = True) -> TrajectoryBatch:
    """Many independent fast-path outputs at once.

    Same law as repeated ``simulate_trajectory_fast`` calls (not the same draws).
    With the correction on, accepted pairs have j uniform and independent of
    u, so j is drawn that way directly.  ``precision_bits`` swaps the
    continuous angles for the cell-midpoint grid of the coherent encoding.
    """
    L = spec.terms
    c = frequency_state(spec)
    if precision_bits is None:
        if L > 1:
            angles, signs = sample_angle_trees(L, count, rng)
            u = reconstruct_from_angles(angles, signs)
        else:
            u = np.ones((count, 1))
    else:
        angles = discretised_angle_trees(L, count, precision_bits, rng)
        u = reconstruct_from_angles(angles, np.ones_like(angles))
    if shift_correction:
        j = rng.integers(0, L, size=count)
    else:
        j = _born_shifts(u, c, rng)
    radius = np.sqrt(2 * rng.standard_gamma(L / 2, size=count)) if with_radius else np.ones(count)
    k = np.arange(L)
    w = u[np.arange(count)[:, None], k[None, :] ^ j[:, None]] * radius[:, None]
    coeffs = w * spec.frequency_weights()
    if indices is None:
        values = sine_series_values(coeffs, spec.steps, spec.scale)
        idx = None
    else:
        idx = np.asarray(indices)
        values = sine_series_at(coeffs, idx * np.pi / spec.steps, spec.scale)
    return TrajectoryBatch(values, coeffs, j, u, spec, idx, radius)


# --- coherent encoding ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoherentEncoding:
    """Superposition over discretised angle heaps and shifts of analog encodings."""

    state: QuantumState
    precision_bits: int
    spec: ProcessSpec
    value_qubits: tuple[int, ...]
    shift_qubits: tuple[int, ...]
    angle_qubits: tuple[tuple[int, ...], ...]
    shift_correction: bool = False
    correction_probability: float = 1.0

    @property
    def garbage_qubits(self) -> tuple[int, ...]:
        out = list(self.shift_qubits)
        for reg in self.angle_qubits:
            out += list(reg)
        return tuple(out)

    def value_density(self) -> np.ndarray:
        return reduced_density(self.state, self.value_qubits)

    def value_diagonal(self) -> np.ndarray:
        return reduced_diagonal(self.state, self.value_qubits)

    def branch_matrix(self) -> np.ndarray:
        """Amplitudes as (garbage index, value index); garbage = shift then angle bits."""
        return _register_matrix(self.state, list(self.value_qubits), list(self.garbage_qubits))

    def angle_probability(self) -> np.ndarray:
        """p(theta) per garbage index (product of cell masses), shift bits ignored."""
        p = np.ones(1)
        for j in range(1, self.spec.terms):
            pj, _ = node_cell_distribution(self.spec.terms, j, self.precision_bits)
            p = np.kron(pj, p)
        return np.repeat(p, 2 ** len(self.shift_qubits))


def _register_matrix(state: QuantumState, cols: list[int], rows: list[int]) -> np.ndarray:
    """Reshape amplitudes into M[row register value, col register value]."""
    n = state.num_qubits
    if sorted(cols + rows) != list(range(n)):
        raise ValueError("registers must partition the qubits")
    psi = state.amplitudes.reshape((2,) * n)
    order = [n - 1 - q for q in reversed(rows)] + [n - 1 - q for q in reversed(cols)]
    return np.transpose(psi, order).reshape(2 ** len(rows), 2 ** len(cols))


def coherent_qubit_count(spec: ProcessSpec, precision_bits: int) -> int:
    bits = register_bits(spec.terms, precision_bits)
    return sum(bits) + _log2_exact(spec.terms) + _log2_exact(spec.steps)


def coherent_encoding_build(spec: ProcessSpec, precision_bits: int = 4,
                            shift_correction: bool = False) -> CoherentEncoding:
    """Coherent version of the trajectory pipeline over discretised angles.

    Each heap node gets a register holding sum_c sqrt(p_c)|c> (prepared with
    the data loader itself).  Register bits drive controlled beam splitters on
    the unary Gaussian register: cell c realises angle (c + 1/2) * width as one
    fixed half-width rotation plus one controlled rotation per bit.  Deepest
    nodes use two extra bits spanning the full circle so leaf signs are
    encoded too.  The shift register is kept as garbage.
    """
    L, T, K = spec.terms, spec.steps, precision_bits
    if L < 2:
        raise ValueError("coherent encoding needs at least two terms")
    if K < 1:
        raise ValueError("precision_bits must be at least 1")
    l, t = _log2_exact(L), _log2_exact(T)
    total = coherent_qubit_count(spec, K)
    if total > COHERENT_QUBIT_LIMIT:
        raise ResourceError(f"coherent encoding needs {total} qubits (> {COHERENT_QUBIT_LIMIT})")
    bits = register_bits(L, K)
    width = cell_width(K)
    lay = unary_to_binary_layout(L, fanout=False)
    base = lay["num_qubits"]

    # angle registers, each loaded with sqrt(cell masses)
    regs = []
    ang_state = None
    pos = 0
    for j in range(1, L):
        p, _ = node_cell_distribution(L, j, K)
        reg_amp = load_binary_amplitudes(np.sqrt(p))
        st = from_amplitudes(reg_amp)
        ang_state = st if ang_state is None else tensor(st, ang_state)
        regs.append(tuple(range(base + pos, base + pos + bits[j])))
        pos += bits[j]
    n1 = base + pos
    if n1 > DENSE_QUBIT_LIMIT:
        raise ResourceError(f"{n1} qubits during Gaussian-register preparation")
    state = tensor(ang_state, new_basis_state(base, 0))

    # controlled loader on the unary register, then unary -> binary
    u = lay["unary"]
    gates = [GateOp("X", (u[0],))]
    for j in range(1, L):
        d = j.bit_length() - 1
        size = L >> d
        lo = (j - 2**d) * size
        mid = lo + size // 2
        gates.append(GateOp("RBS", (u[lo], u[mid]), (width / 2,)))
        for b, q in enumerate(regs[j - 1]):
            gates.append(GateOp("CRBS", (q, u[lo], u[mid]), (width * 2**b,)))
    prep = Circuit(n1, tuple(gates)) + unary_to_binary_circuit(L, fanout=False)
    state = prep.apply(state)
    state = discard_qubits(state, u, 0)
    # now: binary R register at 0..l-1, angle registers above
    regs = [tuple(q - L for q in reg) for reg in regs]

    # frequency register below, XOR into the Gaussian register
    c_amp = load_binary_amplitudes(frequency_state(spec))
    state = tensor(state, from_amplitudes(c_amp))
    reg_k = list(range(l))
    reg_r = list(range(l, 2 * l))
    regs = [tuple(q + l for q in reg) for reg in regs]
    n2 = state.num_qubits
    xor = Circuit(n2, tuple(GateOp("CNOT", (reg_k[m], reg_r[m])) for m in range(l)))
    state = xor.apply(state)

    # pad the frequency register to log2(T) qubits on top, offset by one, transform
    pad = list(range(n2, n2 + t - l))
    state = tensor(new_basis_state(t - l, 0), state)
    value = reg_k + pad
    n3 = state.num_qubits
    state = Circuit(n3, tuple(increment_gates(value))).apply(state)
    state = dst_apply(state, T, qubits=value)

    enc = CoherentEncoding(state, K, spec, tuple(value), tuple(reg_r), tuple(regs))
    if shift_correction:
        enc = _correct_shift(enc)
    return enc


def _correct_shift(enc: CoherentEncoding) -> CoherentEncoding:
    """Flag rotation with amplitude sqrt(P_min / P(j|theta)) and postselection.

    P(j|theta) is the branch weight divided by the angle-tuple probability,
    a function of the garbage basis state alone.
    """
    spec = enc.spec
    M = enc.branch_matrix()
    branch = np.sum(np.abs(M) ** 2, axis=1)
    p_theta = enc.angle_probability()
    p_j = np.divide(branch, p_theta, out=np.zeros_like(branch), where=p_theta > 0)
    p_min = float(np.min(frequency_state(spec) ** 2))
    ratio = np.divide(p_min, p_j, out=np.ones_like(p_j), where=p_j > 0)
    ratio = np.clip(ratio, 0.0, 1.0)
    angles = 2 * np.arccos(np.sqrt(ratio))
    n = enc.state.num_qubits
    flag = n
    garbage = list(enc.garbage_qubits)
    state = tensor(new_basis_state(1, 0), enc.state)
    state = Circuit(n + 1, (GateOp("UCRY", tuple(garbage) + (flag,), (angles,)),)).apply(state)
    amps, p = _project(state, [flag], 0)
    kept = QuantumState(n + 1, amps / math.sqrt(p))
    out = discard_qubits(kept, [flag], 0)
    return CoherentEncoding(out, enc.precision_bits, spec, enc.value_qubits, enc.shift_qubits,
                            enc.angle_qubits, True, p)


def mixture_oracle(spec: ProcessSpec, samples: int, rng: np.random.Generator,
                   precision_bits: int | None = None, shift_correction: bool = False,
                   chunk: int = 20_000) -> np.ndarray:
    """Monte-Carlo mean of |psi><psi| over sampled analog encodings (T x T)."""
    T = spec.steps
    rho = np.zeros((T, T))
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        batch = sample_trajectories(spec, m, rng, shift_correction, precision_bits,
                                    with_radius=False)
        psi = batch.encodings()
        rho += psi.T @ psi
        done += m
    return rho / samples


def exact_mixture(spec: ProcessSpec, shift_correction: bool = False) -> np.ndarray:
    """Closed-form mixtures for continuous angles.

    Born shifts: sum_k c_k^2 |phi_k><phi_k| (c normalised, phi_k the k-th sine
    mode).  Corrected shifts: the plain Gaussian mixture has no closed form and
    is not returned here.
    """
    if shift_correction:
        raise NotImplementedError("only the Born-shift mixture has a closed form")
    T = spec.steps
    modes = np.zeros((spec.terms, T))
    k = np.arange(1, spec.terms + 1)
    i = np.arange(T)
    modes = np.sqrt(2 / T) * np.sin(np.pi * np.outer(k, i) / T)
    c2 = frequency_state(spec) ** 2
    return (modes.T * c2) @ modes


# --- truncation -------------------------------------------------------------

def tail_sum(hurst: float, L: int) -> float:
    """sum_{k>L} k^-(1+2H)."""
    _check_hurst(hurst)
    return float(special.zeta(1 + 2 * hurst, L + 1))


def truncation_error_report(hurst: float, L_values, paths: int = 10_000,
                            rng: np.random.Generator | None = None, cutoff: int = 2**15,
                            chunk: int = 250) -> list[dict]:
    """Analytic and paired-path mean-square truncation error in L2[0, pi].

    Paths share their coefficients across truncation levels.  The sine modes
    are orthogonal on [0, pi] with norm^2 pi/2, so the L2 error of a path is
    sum_{L<k<=cutoff} a_k^2 k^(-2 alpha) exactly; ``cutoff`` stands in for
    the untruncated series.
    """
    _check_hurst(hurst)
    L_values = [int(L) for L in L_values]
    if min(L_values) < 2:
        raise ValueError("L values must be at least 2")
    if max(L_values) >= cutoff:
        raise ValueError("cutoff must exceed every L")
    rng = rng if rng is not None else np.random.default_rng(0)
    alpha = hurst + 0.5
    w = np.arange(1, cutoff + 1, dtype=float) ** (-2 * alpha)
    sums = np.zeros(len(L_values))
    sq = np.zeros(len(L_values))
    done = 0
    while done < paths:
        m = min(chunk, paths - done)
        a2 = rng.standard_normal((m, cutoff)) ** 2 * w
        tail = np.cumsum(a2[:, ::-1], axis=1)[:, ::-1]  # tail[:, i] = sum_{k >= i+1}
        for n, L in enumerate(L_values):
            e = tail[:, L]
            sums[n] += e.sum()
            sq[n] += (e**2).sum()
        done += m
    total = float(special.zeta(1 + 2 * hurst, 1))
    rows = []
    for n, L in enumerate(L_values):
        mean = sums[n] / paths
        se = math.sqrt(max(sq[n] / paths - mean**2, 0.0) / paths)
        analytic = tail_sum(hurst, L)
        rows.append({
            "L": L,
            "analytic": analytic,
            "empirical": mean,
            "stderr": se,
            "relative_residual": analytic / total,
            "ratio": mean / analytic,
        })
    return rows


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
