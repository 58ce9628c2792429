"""Dense and sparse statevector simulation.

Qubit 0 is the least-significant bit of a basis index.  A gate's local matrix
is written in the basis of its listed qubits with the first listed qubit as the
most-significant local bit, so ``RBS`` on ``(a, b)`` maps ``|1_a 0_b>`` to
``cos|10> + sin|01>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegeneratePostselectionError, ResourceError

DENSE_QUBIT_LIMIT = 26
REDUCED_DIAGONAL_LIMIT = 12
REDUCED_DENSITY_LIMIT = 8
POSTSELECT_FLOOR = 1e-14

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def _phase(phi: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * phi)]], dtype=complex)


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rbs_matrix(theta: float) -> np.ndarray:
    """Beam-splitter rotation on the {|01>, |10>} subspace."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [[1, 0, 0, 0], [0, c, s, 0], [0, -s, c, 0], [0, 0, 0, 1]], dtype=complex
    )


# kind -> (number of control qubits or None for "all but the targets", target arity)
_KINDS = {
    "H": 0,
    "X": 0,
    "Z": 0,
    "P": 0,
    "RY": 0,
    "SWAP": 0,
    "RBS": 0,
    "CP": 1,
    "CNOT": 1,
    "CSWAP": 1,
    "MCX": None,
    "CRY": None,
    "CRBS": None,
    "UCRY": None,
    "UNITARY": None,
    "DIAG": 0,
}
_TARGET_ARITY = {
    "H": 1, "X": 1, "Z": 1, "P": 1, "RY": 1, "CP": 1, "CNOT": 1, "MCX": 1,
    "CRY": 1, "UCRY": 1, "SWAP": 2, "CSWAP": 2, "RBS": 2, "CRBS": 2,
}

ALIASES = {
    "Diagonal": "DIAG",
    "Hadamard": "H",
    "PauliX": "X",
    "PauliZ": "Z",
    "Phase": "P",
    "ControlledPhase": "CP",
    "Swap": "SWAP",
    "ControlledSwap": "CSWAP",
    "ControlledRotationY": "CRY",
    "ControlledRBS": "CRBS",
    "MultiControlledX": "MCX",
    "UniformlyControlledRY": "UCRY",
}


@dataclass(frozen=True, eq=False)
class GateOp:
    """One gate: a kind, the qubits it touches, and its parameters.

    Controlled kinds list their controls first.  ``UCRY`` carries one angle per
    control value (controls little-endian); ``UNITARY`` carries
    ``(matrix, n_controls)``.  ``DIAG`` carries one phase per register value
    (qubits little-endian).
    """

    kind: str
    qubits: tuple[int, ...]
    params: tuple = field(default_factory=tuple)

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in _KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if not isinstance(self.params, tuple):
            object.__setattr__(self, "params", (self.params,))
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubits in {self.kind}: {self.qubits}")
        if kind == "UNITARY":
            mat = np.asarray(self.params[0], dtype=complex)
            nc = int(self.params[1]) if len(self.params) > 1 else 0
            if mat.shape != (2 ** (len(self.qubits) - nc),) * 2:
                raise ValueError("UNITARY matrix does not match its target count")
        elif kind == "UCRY":
            nc = len(self.qubits) - 1
            if len(np.asarray(self.params[0])) != 2**nc:
                raise ValueError("UCRY needs one angle per control value")
        elif kind == "DIAG":
            if len(np.asarray(self.params[0])) != 2 ** len(self.qubits):
                raise ValueError("DIAG needs one phase per register value")
        else:
            n_ctrl = self.num_controls
            if len(self.qubits) != n_ctrl + _TARGET_ARITY[kind] or n_ctrl < 0:
                raise ValueError(f"{kind} acts on the wrong number of qubits: {self.qubits}")
            if kind in ("MCX", "CRY", "CRBS") and n_ctrl < 1:
                raise ValueError(f"{kind} needs at least one control")

    @property
    def num_controls(self) -> int:
        fixed = _KINDS[self.kind]
        if fixed is not None:
            return fixed
        if self.kind == "UNITARY":
            return int(self.params[1]) if len(self.params) > 1 else 0
        if self.kind in ("CRBS",):
            return len(self.qubits) - 2
        return len(self.qubits) - 1

    @property
    def controls(self) -> tuple[int, ...]:
        return self.qubits[: self.num_controls]

    @property
    def targets(self) -> tuple[int, ...]:
        return self.qubits[self.num_controls:]

    def target_matrix(self) -> np.ndarray:
        """Matrix applied to the targets when every control is 1."""
        k, p = self.kind, self.params
        if k == "H":
            return _H
        if k in ("X", "CNOT", "MCX"):
            return _X
        if k == "Z":
            return _Z
        if k in ("P", "CP"):
            return _phase(float(p[0]))
        if k in ("RY", "CRY"):
            return _ry(float(p[0]))
        if k in ("SWAP", "CSWAP"):
            return _SWAP
        if k in ("RBS", "CRBS"):
            return rbs_matrix(float(p[0]))
        if k == "UNITARY":
            return np.asarray(p[0], dtype=complex)
        raise ValueError(f"{k} has no single target matrix")

    def matrix(self) -> np.ndarray:
        """Full local matrix over ``qubits`` (first qubit most significant)."""
        n = len(self.qubits)
        dim = 2**n
        if self.kind == "UCRY":
            out = np.zeros((dim, dim), dtype=complex)
            angles = np.asarray(self.params[0], dtype=float)
            nc = n - 1
            for local in range(2 ** nc):
                # local index bits: qubits[0] is the top bit
                ctrl_val = 0
                for i in range(nc):
                    if (local >> (nc - 1 - i)) & 1:
                        ctrl_val |= 1 << i
                blk = _ry(angles[ctrl_val])
                out[2 * local: 2 * local + 2, 2 * local: 2 * local + 2] = blk
            return out
        if self.kind == "DIAG":
            phases = np.asarray(self.params[0], dtype=float)
            local = np.arange(dim)
            val = np.zeros(dim, dtype=int)
            for i in range(n):
                val |= ((local >> (n - 1 - i)) & 1) << i
            return np.diag(np.exp(1j * phases[val]))
        nc = self.num_controls
        u = self.target_matrix()
        out = np.eye(dim, dtype=complex)
        t = dim // 2**nc
        out[dim - t:, dim - t:] = u
        return out

    def inverse(self) -> "GateOp":
        k, p = self.kind, self.params
        if k in ("H", "X", "Z", "CNOT", "MCX", "SWAP", "CSWAP"):
            return self
        if k in ("P", "CP", "RY", "CRY", "RBS", "CRBS"):
            return GateOp(k, self.qubits, (-float(p[0]),))
        if k in ("UCRY", "DIAG"):
            return GateOp(k, self.qubits, (-np.asarray(p[0], dtype=float),))
        return GateOp(k, self.qubits, (np.asarray(p[0]).conj().T, self.num_controls))

    def to_dict(self) -> dict:
        params = []
        for v in self.params:
            arr = np.asarray(v)
            if np.iscomplexobj(arr):
                params.append({"re": arr.real.tolist(), "im": arr.imag.tolist()})
            else:
                params.append(arr.tolist())
        return {"kind": self.kind, "qubits": list(self.qubits), "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> "GateOp":
        params = []
        for v in d.get("params", []):
            if isinstance(v, dict):
                params.append(np.asarray(v["re"]) + 1j * np.asarray(v["im"]))
            elif isinstance(v, list):
                params.append(np.asarray(v, dtype=float))
            else:
                params.append(v)
        return cls(d["kind"], tuple(d["qubits"]), tuple(params))

    def __repr__(self):
        if self.kind in ("UCRY", "UNITARY", "DIAG"):
            return f"GateOp({self.kind}, {self.qubits})"
        return f"GateOp({self.kind}, {self.qubits}, {self.params})"


@dataclass(frozen=True, eq=False)
class QuantumState:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.num_qubits,):
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes, got shape {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __len__(self):
        return self.amplitudes.size


def _check_guard(num_qubits: int) -> None:
    if num_qubits > DENSE_QUBIT_LIMIT:
        raise ResourceError(
            f"{num_qubits} qubits exceeds the dense limit of {DENSE_QUBIT_LIMIT}"
        )


def _check_qubits(num_qubits: int, qubits: Iterable[int]) -> list[int]:
    qs = [int(q) for q in qubits]
    if len(set(qs)) != len(qs):
        raise ValueError(f"duplicate qubit indices {qs}")
    for q in qs:
        if not 0 <= q < num_qubits:
            raise ValueError(f"qubit {q} out of range for {num_qubits} qubits")
    return qs


def new_basis_state(num_qubits: int, index: int = 0) -> QuantumState:
    _check_guard(num_qubits)
    if num_qubits < 0:
        raise ValueError("num_qubits must be non-negative")
    if not 0 <= index < 2**num_qubits:
        raise ValueError(f"index {index} out of range for {num_qubits} qubits")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[index] = 1.0
    return QuantumState(num_qubits, amps)


def from_amplitudes(amplitudes, normalize: bool = False) -> QuantumState:
    amps = np.asarray(amplitudes, dtype=complex).ravel()
    n = int(round(np.log2(amps.size))) if amps.size else -1
    if n < 0 or 2**n != amps.size:
        raise ValueError("amplitude vector length must be a power of 2")
    _check_guard(n)
    if normalize:
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        amps = amps / nrm
    return QuantumState(n, amps)


def _apply_controlled(psi: np.ndarray, n: int, controls, targets, u: np.ndarray) -> np.ndarray:
    """Apply ``u`` to ``targets`` on the slice where all ``controls`` are 1."""
    out = psi.reshape((2,) * n).copy()
    idx = [slice(None)] * n
    for c in controls:
        idx[n - 1 - c] = 1
    idx = tuple(idx)
    sub = out[idx]
    removed = sorted(n - 1 - c for c in controls)
    t_axes = []
    for q in targets:
        ax = n - 1 - q
        t_axes.append(ax - sum(1 for r in removed if r < ax))
    t = len(targets)
    ut = u.reshape((2,) * (2 * t))
    res = np.tensordot(ut, sub, axes=(list(range(t, 2 * t)), t_axes))
    res = np.moveaxis(res, list(range(t)), t_axes)
    if controls:
        out[idx] = res
    else:
        out = res
    return out.reshape(-1)


def _apply_ucry(psi: np.ndarray, n: int, controls, target: int, angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    idx = np.arange(psi.size)
    i0 = idx[((idx >> target) & 1) == 0]
    i1 = i0 | (1 << target)
    ctrl = np.zeros_like(i0)
    for k, c in enumerate(controls):
        ctrl |= ((i0 >> c) & 1) << k
    th = angles[ctrl] / 2
    c, s = np.cos(th), np.sin(th)
    out = psi.copy()
    a0, a1 = psi[i0], psi[i1]
    out[i0] = c * a0 - s * a1
    out[i1] = s * a0 + c * a1
    return out


def _register_values(size: int, qubits) -> np.ndarray:
    idx = np.arange(size)
    val = np.zeros(size, dtype=np.int64)
    for k, q in enumerate(qubits):
        val |= ((idx >> q) & 1) << k
    return val


def apply_gate(state: QuantumState, gate: GateOp) -> QuantumState:
    n = state.num_qubits
    _check_qubits(n, gate.qubits)
    if gate.kind == "DIAG":
        phases = np.asarray(gate.params[0], dtype=float)
        val = _register_values(state.amplitudes.size, gate.qubits)
        amps = state.amplitudes * np.exp(1j * phases[val])
    elif gate.kind == "UCRY":
        amps = _apply_ucry(state.amplitudes, n, gate.controls, gate.targets[0], gate.params[0])
    else:
        amps = _apply_controlled(
            state.amplitudes, n, gate.controls, gate.targets, gate.target_matrix()
        )
    return QuantumState(n, amps)


def apply_gates(state: QuantumState, gates: Iterable[GateOp]) -> QuantumState:
    for g in gates:
        state = apply_gate(state, g)
    return state


def marginal_probabilities(state: QuantumState, qubits: Sequence[int]) -> np.ndarray:
    """Probabilities of each value of ``qubits`` (qubits[0] is the low bit)."""
    qs = _check_qubits(state.num_qubits, qubits)
    probs = state.probabilities()
    idx = np.arange(probs.size)
    val = np.zeros_like(idx)
    for k, q in enumerate(qs):
        val |= ((idx >> q) & 1) << k
    return np.bincount(val, weights=probs, minlength=2 ** len(qs))


def sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF pick of an outcome given one uniform draw ``u``."""
    cdf = np.cumsum(probs)
    k = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    k = min(k, probs.size - 1)
    while probs[k] <= 0 and k > 0:
        k -= 1
    return k


@dataclass(frozen=True)
class MeasurementRecord:
    measured_qubits: tuple[int, ...]
    outcome: str
    probability: float

    @property
    def value(self) -> int:
        """Outcome as an integer with measured_qubits[0] as the low bit."""
        return sum(int(b) << k for k, b in enumerate(self.outcome))


def _project(state: QuantumState, qubits: Sequence[int], value: int) -> tuple[np.ndarray, float]:
    idx = np.arange(state.amplitudes.size)
    mask = np.ones(idx.size, dtype=bool)
    for k, q in enumerate(qubits):
        mask &= ((idx >> q) & 1) == ((value >> k) & 1)
    amps = np.where(mask, state.amplitudes, 0)
    p = float(np.sum(np.abs(amps) ** 2))
    return amps, p


def measure_subset(state: QuantumState, qubits: Sequence[int], rng: np.random.Generator):
    """Born-rule measurement of ``qubits``; consumes exactly one uniform draw."""
    qs = _check_qubits(state.num_qubits, qubits)
    probs = marginal_probabilities(state, qs)
    value = sample_index(probs, rng.random())
    amps, p = _project(state, qs, value)
    outcome = "".join(str((value >> k) & 1) for k in range(len(qs)))
    rec = MeasurementRecord(tuple(qs), outcome, p)
    return rec, QuantumState(state.num_qubits, amps / np.sqrt(p))


def postselect(state: QuantumState, qubit: int, outcome: int) -> tuple[QuantumState, float]:
    _check_qubits(state.num_qubits, [qubit])
    amps, p = _project(state, [qubit], int(outcome))
    if p < POSTSELECT_FLOOR:
        raise DegeneratePostselectionError(
            f"branch qubit {qubit}={outcome} has probability {p:.3e}"
        )
    return QuantumState(state.num_qubits, amps / np.sqrt(p)), p


def _keep_matrix(state: QuantumState, keep: Sequence[int]) -> np.ndarray:
    """Amplitudes as a (2^|keep|, rest) matrix; row index little-endian in keep."""
    n = state.num_qubits
    psi = state.amplitudes.reshape((2,) * n)
    keep_axes = [n - 1 - q for q in reversed(keep)]  # most significant first
    rest_axes = [a for a in range(n) if a not in keep_axes]
    return np.transpose(psi, keep_axes + rest_axes).reshape(2 ** len(keep), -1)


def reduced_diagonal(state: QuantumState, keep_qubits: Sequence[int]) -> np.ndarray:
    qs = _check_qubits(state.num_qubits, keep_qubits)
    if len(qs) > REDUCED_DIAGONAL_LIMIT:
        raise ResourceError(f"reduced diagonal limited to {REDUCED_DIAGONAL_LIMIT} qubits")
    return marginal_probabilities(state, qs)


def reduced_density(state: QuantumState, keep_qubits: Sequence[int]) -> np.ndarray:
    qs = _check_qubits(state.num_qubits, keep_qubits)
    if len(qs) > REDUCED_DENSITY_LIMIT:
        raise ResourceError(f"reduced density limited to {REDUCED_DENSITY_LIMIT} qubits")
    m = _keep_matrix(state, qs)
    return m @ m.conj().T


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    ev = np.linalg.eigvalsh((rho - sigma + (rho - sigma).conj().T) / 2)
    return float(0.5 * np.sum(np.abs(ev)))


def tensor(high: QuantumState, low: QuantumState) -> QuantumState:
    """Append ``high``'s qubits above ``low``'s (low keeps indices 0..)."""
    _check_guard(high.num_qubits + low.num_qubits)
    return QuantumState(
        high.num_qubits + low.num_qubits, np.kron(high.amplitudes, low.amplitudes)
    )


def discard_qubits(state: QuantumState, qubits: Sequence[int], value: int = 0,
                   atol: float = 1e-9) -> QuantumState:
    """Remove qubits known to be in the basis state ``value`` (little-endian in ``qubits``)."""
    qs = _check_qubits(state.num_qubits, qubits)
    amps, p = _project(state, qs, value)
    if abs(1 - p) > atol:
        raise ValueError(f"qubits {qs} are not in basis state {value} (weight {p})")
    keep = [q for q in range(state.num_qubits) if q not in qs]
    m = _keep_matrix(QuantumState(state.num_qubits, amps), keep)
    col = 0
    # the column index of the discarded register (most significant first)
    for q in sorted(qs, reverse=True):
        col = (col << 1) | ((value >> qs.index(q)) & 1)
    return QuantumState(len(keep), m[:, col].copy())


def register_amplitudes(state: QuantumState, qubits: Sequence[int]) -> np.ndarray:
    """Amplitudes of a register when every other qubit is |0>."""
    qs = _check_qubits(state.num_qubits, qubits)
    m = _keep_matrix(state, qs)
    return m[:, 0].copy()


class SparseState:
    """Dictionary statevector for circuits whose support stays small.

    Used for loaders and the unary-to-binary converter, where the register is
    wide but only a handful of basis states are ever occupied.
    """

    def __init__(self, num_qubits: int, amplitudes: dict[int, complex] | None = None):
        self.num_qubits = num_qubits
        self.amps: dict[int, complex] = dict(amplitudes or {0: 1.0 + 0j})

    @classmethod
    def basis(cls, num_qubits: int, index: int = 0) -> "SparseState":
        return cls(num_qubits, {index: 1.0 + 0j})

    def copy(self) -> "SparseState":
        return SparseState(self.num_qubits, self.amps)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amps.values())))

    def apply(self, gate: GateOp, tol: float = 0.0) -> "SparseState":
        _check_qubits(self.num_qubits, gate.qubits)
        k = gate.kind
        ctrl_mask = 0
        for c in gate.controls:
            ctrl_mask |= 1 << c
        new: dict[int, complex] = {}
        if k in ("X", "CNOT", "MCX"):
            t = 1 << gate.targets[0]
            for i, a in self.amps.items():
                j = i ^ t if (i & ctrl_mask) == ctrl_mask else i
                new[j] = a
        elif k == "DIAG":
            phases = np.asarray(gate.params[0], dtype=float)
            for i, a in self.amps.items():
                v = 0
                for m, q in enumerate(gate.qubits):
                    v |= ((i >> q) & 1) << m
                new[i] = a * np.exp(1j * phases[v])
        elif k in ("SWAP", "CSWAP"):
            qa, qb = gate.targets
            for i, a in self.amps.items():
                if (i & ctrl_mask) == ctrl_mask and ((i >> qa) & 1) != ((i >> qb) & 1):
                    i ^= (1 << qa) | (1 << qb)
                new[i] = a
        else:
            if k == "UCRY":
                angles = np.asarray(gate.params[0], dtype=float)
            else:
                u = gate.target_matrix()
            tq = gate.targets
            tmask = 0
            for q in tq:
                tmask |= 1 << q
            groups: dict[int, dict[int, complex]] = {}
            for i, a in self.amps.items():
                if k != "UCRY" and (i & ctrl_mask) != ctrl_mask:
                    new[i] = new.get(i, 0) + a
                    continue
                base = i & ~tmask
                local = 0
                for q in tq:
                    local = (local << 1) | ((i >> q) & 1)
                groups.setdefault(base, {})[local] = a
            t = len(tq)
            for base, loc in groups.items():
                vec = np.zeros(2**t, dtype=complex)
                for l, a in loc.items():
                    vec[l] = a
                if k == "UCRY":
                    cv = 0
                    for m, c in enumerate(gate.controls):
                        cv |= ((base >> c) & 1) << m
                    vec = _ry(angles[cv]) @ vec
                else:
                    vec = u @ vec
                for l in range(2**t):
                    if vec[l] != 0:
                        idx = base
                        for pos, q in enumerate(tq):
                            if (l >> (t - 1 - pos)) & 1:
                                idx |= 1 << q
                        new[idx] = new.get(idx, 0) + vec[l]
        if tol > 0:
            new = {i: a for i, a in new.items() if abs(a) > tol}
        self.amps = new
        return self

    def apply_all(self, gates: Iterable[GateOp], tol: float = 1e-15) -> "SparseState":
        for g in gates:
            self.apply(g, tol)
        return self

    def register(self, qubits: Sequence[int], atol: float = 1e-9) -> np.ndarray:
        """Amplitudes of ``qubits`` (qubits[0] low bit); all other qubits must be |0>."""
        qs = list(qubits)
        mask = 0
        for q in qs:
            mask |= 1 << q
        out = np.zeros(2 ** len(qs), dtype=complex)
        for i, a in self.amps.items():
            if i & ~mask:
                if abs(a) > atol:
                    raise ValueError(f"amplitude {a} outside the register at index {i}")
                continue
            v = 0
            for k, q in enumerate(qs):
                v |= ((i >> q) & 1) << k
            out[v] += a
        return out

    def to_dense(self) -> QuantumState:
        _check_guard(self.num_qubits)
        amps = np.zeros(2**self.num_qubits, dtype=complex)
        for i, a in self.amps.items():
            amps[i] = a
        return QuantumState(self.num_qubits, amps)
