"""Structured circuits: QFT, sine/cosine transforms, unary loaders, unary-to-binary.

Every construction here has a matrix oracle next to it (``dft_matrix``,
``dst1_matrix``, ``dct4_matrix``, ``AngleTree.reconstruct``) so tests can
check the gate-level route against direct linear algebra.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LoadingError, ResourceError
from .statevector import (
    GateOp,
    QuantumState,
    SparseState,
    apply_gate,
    discard_qubits,
    new_basis_state,
    tensor,
)

DENSE_LOADER_LIMIT = 24
UNARY_TO_BINARY_LIMIT = 2**12
QFT_LIMIT = 24


@dataclass(frozen=True, eq=False)
class Circuit:
    num_qubits: int
    gates: tuple[GateOp, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.num_qubits:
                    raise ValueError(f"{g} touches qubit {q} outside {self.num_qubits}")

    def __len__(self):
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(max(self.num_qubits, other.num_qubits), self.gates + other.gates)

    @property
    def depth(self) -> int:
        level: dict[int, int] = {}
        depth = 0
        for g in self.gates:
            d = 1 + max((level.get(q, 0) for q in g.qubits), default=0)
            for q in g.qubits:
                level[q] = d
            depth = max(depth, d)
        return depth

    def count(self, kind: str | None = None) -> int:
        if kind is None:
            return len(self.gates)
        return sum(1 for g in self.gates if g.kind == kind)

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def remap(self, mapping: Sequence[int], num_qubits: int) -> "Circuit":
        """Relabel qubit q as mapping[q] inside a register of ``num_qubits``."""
        gates = tuple(GateOp(g.kind, tuple(mapping[q] for q in g.qubits), g.params)
                      for g in self.gates)
        return Circuit(num_qubits, gates)

    def apply(self, state: QuantumState) -> QuantumState:
        if state.num_qubits != self.num_qubits:
            raise ValueError(
                f"circuit has {self.num_qubits} qubits, state has {state.num_qubits}"
            )
        for g in self.gates:
            state = apply_gate(state, g)
        return state

    def run_sparse(self, state: SparseState | None = None, tol: float = 1e-15) -> SparseState:
        st = state.copy() if state is not None else SparseState.basis(self.num_qubits)
        return st.apply_all(self.gates, tol)

    def unitary(self) -> np.ndarray:
        """Dense matrix, column by column (small circuits only)."""
        if self.num_qubits > 12:
            raise ResourceError("unitary() is limited to 12 qubits")
        dim = 2**self.num_qubits
        cols = [self.apply(new_basis_state(self.num_qubits, i)).amplitudes for i in range(dim)]
        return np.array(cols).T

    def to_json(self) -> str:
        return json.dumps(
            {"num_qubits": self.num_qubits, "gates": [g.to_dict() for g in self.gates]},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        d = json.loads(text)
        return cls(d["num_qubits"], tuple(GateOp.from_dict(g) for g in d["gates"]))


def _log2_exact(n: int, what: str = "size") -> int:
    k = int(n).bit_length() - 1
    if n < 1 or 2**k != n:
        raise ValueError(f"{what} must be a power of 2, got {n}")
    return k


# --- Fourier transform -------------------------------------------------------

def dft_matrix(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def _qft_gates(qs: Sequence[int]) -> list[GateOp]:
    k = len(qs)
    if k == 1:
        return [GateOp("H", (qs[0],))]
    gates = _qft_gates(qs[1:])
    n = 2**k
    for m in range(k - 1):
        gates.append(GateOp("CP", (qs[0], qs[m + 1]), (2 * np.pi * 2**m / n,)))
    gates.append(GateOp("H", (qs[0],)))
    # move the half-index bit from the bottom wire to the top wire
    for m in range(k - 1):
        gates.append(GateOp("SWAP", (qs[m], qs[m + 1])))
    return gates


def qft_circuit(k: int, qubits: Sequence[int] | None = None, num_qubits: int | None = None) -> Circuit:
    """Fourier transform with entries exp(2 pi i jk/N)/sqrt(N) on 2^k amplitudes."""
    if not 1 <= k <= QFT_LIMIT:
        raise ValueError(f"k must be in [1, {QFT_LIMIT}], got {k}")
    qs = list(range(k)) if qubits is None else list(qubits)
    if len(qs) != k:
        raise ValueError("need exactly k qubits")
    return Circuit(num_qubits or max(qs) + 1, tuple(_qft_gates(qs)))


# --- arithmetic helpers -------------------------------------------------------

def increment_gates(qubits: Sequence[int], controls: Sequence[int] = ()) -> list[GateOp]:
    """|j> -> |j+1 mod 2^k> on ``qubits`` (little-endian), optionally controlled."""
    qs = list(qubits)
    ctrl = list(controls)
    gates = []
    for m in range(len(qs) - 1, -1, -1):
        cs = ctrl + qs[:m]
        if cs:
            gates.append(GateOp("MCX" if len(cs) > 1 else "CNOT", tuple(cs) + (qs[m],)))
        else:
            gates.append(GateOp("X", (qs[m],)))
    return gates


def negate_gates(qubits: Sequence[int], control: int) -> list[GateOp]:
    """Controlled |j> -> |-j mod 2^k>: invert every bit, then add one."""
    gates = [GateOp("CNOT", (control, q)) for q in qubits]
    return gates + increment_gates(qubits, (control,))


def increment_circuit(k: int) -> Circuit:
    return Circuit(k, tuple(increment_gates(range(k))))


# --- sine and cosine transforms ----------------------------------------------

def dst1_matrix(size: int) -> np.ndarray:
    """Orthonormal DST-I of order size-1, embedded so rows/cols 0 are zero."""
    i = np.arange(size)
    m = np.sqrt(2 / size) * np.sin(np.pi * np.outer(i, i) / size)
    m[0, :] = 0
    m[:, 0] = 0
    return m


def dct4_matrix(size: int) -> np.ndarray:
    i = np.arange(size) + 0.5
    return np.sqrt(2 / size) * np.cos(np.pi * np.outer(i, i) / size)


def dst_circuit(k: int) -> Circuit:
    """Sine transform on qubits 0..k-1 using qubit k as the doubling ancilla.

    The ancilla enters and leaves in |0>: the input x (with x_0 = 0) is
    antisymmetrised into the 2N register, Fourier transformed, and the sine
    half is folded back so the output is |0>|D x>.
    """
    v = list(range(k))
    a = k
    gates = [GateOp("H", (a,)), GateOp("Z", (a,))]
    gates += negate_gates(v, a)
    gates += _qft_gates(v + [a])
    gates += negate_gates(v, a)
    gates += [GateOp("H", (a,)), GateOp("P", (a,), (-np.pi / 2,)), GateOp("X", (a,))]
    return Circuit(k + 1, tuple(gates))


def dct_circuit(k: int) -> Circuit:
    """Orthonormal DCT-IV on qubits 0..k-1 with qubit k as ancilla."""
    v = list(range(k))
    a = k
    n2 = 2 ** (k + 1)
    twiddle = [GateOp("P", (q,), (np.pi * 2**m / n2,)) for m, q in enumerate(v + [a])]
    gphase = np.pi / (2 * n2)
    gates = [GateOp("H", (a,)), GateOp("Z", (a,))]
    gates += [GateOp("CNOT", (a, q)) for q in v]
    gates += twiddle
    gates += _qft_gates(v + [a])
    gates += twiddle
    gates += [GateOp("P", (a,), (gphase,)), GateOp("X", (a,)),
              GateOp("P", (a,), (gphase,)), GateOp("X", (a,))]
    gates += [GateOp("CNOT", (a, q)) for q in v]
    gates += [GateOp("H", (a,)), GateOp("X", (a,))]
    return Circuit(k + 1, tuple(gates))


def _transform_apply(state: QuantumState, size: int, build, qubits, strict: bool,
                     pin_zero: bool, tol: float) -> QuantumState:
    k = _log2_exact(size)
    if k < 1:
        raise ValueError("size must be at least 2")
    qs = list(range(k)) if qubits is None else list(qubits)
    if len(qs) != k:
        raise ValueError(f"need {k} register qubits for size {size}")
    amps = state.amplitudes
    if strict:
        if np.max(np.abs(amps.imag), initial=0.0) > tol:
            raise ValueError("transform input must be real in strict mode")
        if pin_zero:
            idx = np.arange(amps.size)
            at0 = np.ones(amps.size, dtype=bool)
            for q in qs:
                at0 &= ((idx >> q) & 1) == 0
            if np.max(np.abs(amps[at0]), initial=0.0) > tol:
                raise ValueError("sine transform input must vanish at index 0")
    n = state.num_qubits
    anc = n
    big = tensor(new_basis_state(1, 0), state)
    circ = build(k).remap(qs + [anc], n + 1)
    big = circ.apply(big)
    leak = float(np.sum(np.abs(big.amplitudes[2**n:]) ** 2))
    if strict and leak > tol:
        raise ValueError(f"ancilla leakage {leak:.3e}: input outside the transform's domain")
    if leak > 0:
        kept = big.amplitudes[: 2**n]
        nrm = np.linalg.norm(kept)
        if nrm == 0:
            raise ValueError("nothing survives the ancilla projection")
        return QuantumState(n, kept / nrm)
    return discard_qubits(big, [anc], 0)


def dst_apply(state: QuantumState, size: int, qubits: Sequence[int] | None = None,
              strict: bool = True, tol: float = 1e-9) -> QuantumState:
    """Orthonormal DST-I on the register ``qubits`` (default: the low log2(size) qubits)."""
    return _transform_apply(state, size, dst_circuit, qubits, strict, True, tol)


def dct_apply(state: QuantumState, size: int, qubits: Sequence[int] | None = None,
              strict: bool = True, tol: float = 1e-9) -> QuantumState:
    """Orthonormal DCT-IV on the register, same conventions as ``dst_apply``."""
    return _transform_apply(state, size, dct_circuit, qubits, strict, False, tol)


# --- unary data loader -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AngleTree:
    """Binary heap of loader angles.

    ``node_angles[j]`` for heap positions j = 1..L-1 (index 0 unused);
    ``node_norms[j]`` is r(j) for j = 1..2L-1, leaves at L..2L-1.
    """

    leaf_count: int
    node_angles: np.ndarray
    leaf_signs: np.ndarray
    node_norms: np.ndarray

    def __post_init__(self):
        _log2_exact(self.leaf_count, "leaf_count")
        object.__setattr__(self, "node_angles", np.asarray(self.node_angles, dtype=float))
        object.__setattr__(self, "leaf_signs", np.asarray(self.leaf_signs, dtype=float))
        object.__setattr__(self, "node_norms", np.asarray(self.node_norms, dtype=float))
        if self.node_angles.shape != (self.leaf_count,):
            raise ValueError("node_angles must have length leaf_count")
        if self.leaf_signs.shape != (self.leaf_count,):
            raise ValueError("leaf_signs must have length leaf_count")

    @classmethod
    def from_angles(cls, node_angles, leaf_signs) -> "AngleTree":
        angles = np.asarray(node_angles, dtype=float)
        signs = np.asarray(leaf_signs, dtype=float)
        n = angles.size
        amp = reconstruct_from_angles(angles[None, :], signs[None, :])[0]
        r = np.zeros(2 * n)
        r[n:] = amp**2
        for j in range(n - 1, 0, -1):
            r[j] = r[2 * j] + r[2 * j + 1]
        return cls(n, angles, signs, r)

    def reconstruct(self) -> np.ndarray:
        return reconstruct_from_angles(self.node_angles[None, :], self.leaf_signs[None, :])[0]

    def circuit_angles(self) -> np.ndarray:
        """Angles with leaf signs folded into the deepest level."""
        return fold_signs(self.node_angles[None, :], self.leaf_signs[None, :])[0]


def reconstruct_from_angles(angles: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Vectorised leaf amplitudes for a batch of heaps, shape (batch, L)."""
    angles = np.atleast_2d(angles)
    signs = np.atleast_2d(signs)
    b, n = angles.shape
    amp = np.ones((b, 1))
    level = 1
    while level < n:
        th = angles[:, level: 2 * level]
        amp = np.stack([amp * np.cos(th), amp * np.sin(th)], axis=2).reshape(b, 2 * level)
        level *= 2
    return amp * signs


def fold_signs(angles: np.ndarray, signs: np.ndarray) -> np.ndarray:
    angles = np.array(np.atleast_2d(angles), dtype=float)
    signs = np.atleast_2d(signs)
    n = angles.shape[1]
    if n < 2:
        return angles
    deep = np.arange(n // 2, n)
    s_left = signs[:, 2 * deep - n]
    s_right = signs[:, 2 * deep + 1 - n]
    th = angles[:, deep]
    angles[:, deep] = np.arctan2(s_right * np.sin(th), s_left * np.cos(th))
    return angles


def compute_loader_angles(x) -> AngleTree:
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    _log2_exact(n, "vector length")
    if not np.all(np.isfinite(x)):
        raise LoadingError("vector has non-finite entries")
    if not np.any(x != 0):
        raise LoadingError("cannot load the zero vector")
    r = np.zeros(2 * n)
    r[n:] = x**2
    for j in range(n - 1, 0, -1):
        r[j] = r[2 * j] + r[2 * j + 1]
    angles = np.zeros(n)
    for j in range(1, n):
        if r[j] > 0:
            angles[j] = np.arccos(np.sqrt(np.clip(r[2 * j] / r[j], 0.0, 1.0)))
    signs = np.where(x < 0, -1.0, 1.0)
    return AngleTree(n, angles, signs, r / r[1])


def loader_gates(angles: np.ndarray, qubits: Sequence[int], sign: float = 1.0) -> list[GateOp]:
    """Gates of the unary loader for already sign-folded heap ``angles``."""
    n = len(qubits)
    gates = [GateOp("X", (qubits[0],))]
    if n == 1 and sign < 0:
        gates.append(GateOp("Z", (qubits[0],)))
    for j in range(1, n):
        d = j.bit_length() - 1
        size = n >> d
        lo = (j - 2**d) * size
        mid = lo + size // 2
        gates.append(GateOp("RBS", (qubits[lo], qubits[mid]), (float(angles[j]),)))
    return gates


def unary_loader_circuit(angles: AngleTree, num_qubits: int | None = None) -> Circuit:
    """Log-depth RBS cascade producing sum_i x_i |e_i> from |0...0>."""
    n = angles.leaf_count
    gates = loader_gates(angles.circuit_angles(), list(range(n)), float(angles.leaf_signs[0]))
    return Circuit(num_qubits or n, tuple(gates))


# --- unary to binary ---------------------------------------------------------

def unary_to_binary_layout(n: int, fanout: bool = True) -> dict:
    k = _log2_exact(n)
    anc = n // 2 - 1 if (fanout and n >= 4) else 0
    return {
        "unary": list(range(n)),
        "binary": list(range(n, n + k)),
        "ancilla": list(range(n + k, n + k + anc)),
        "num_qubits": n + k + anc,
    }


def _fanout(src: int, copies: list[int]) -> list[GateOp]:
    have = [src]
    todo = list(copies)
    gates = []
    while todo:
        layer = []
        for h in list(have):
            if not todo:
                break
            t = todo.pop(0)
            layer.append(GateOp("CNOT", (h, t)))
            have.append(t)
        gates += layer
    return gates


def unary_to_binary_circuit(n: int, fanout: bool = True) -> Circuit:
    """Map sum_i x_i|e_i>|0> to |0^n> sum_i x_i |i> (binary little-endian).

    Each level computes the parity of the upper half with an in-place CNOT
    tree, copies it into the binary bit, uncomputes the tree, then swaps the
    upper half down under control of that bit.  With ``fanout`` the control is
    copied to ancillas first so the swaps run in parallel.
    """
    if n > UNARY_TO_BINARY_LIMIT:
        raise ResourceError(f"n={n} exceeds the unary-to-binary limit {UNARY_TO_BINARY_LIMIT}")
    k = _log2_exact(n)
    lay = unary_to_binary_layout(n, fanout)
    u, b, anc = lay["unary"], lay["binary"], lay["ancilla"]
    gates: list[GateOp] = []
    m = n
    bit = k - 1
    while m > 1:
        half = m // 2
        upper = list(range(half, m))
        tree = []
        s = 1
        while s < half:
            for i in range(0, half, 2 * s):
                if i + s < half:
                    tree.append(GateOp("CNOT", (u[upper[i + s]], u[upper[i]])))
            s *= 2
        gates += tree
        gates.append(GateOp("CNOT", (u[upper[0]], b[bit])))
        gates += list(reversed(tree))
        ctrls = [b[bit]] + (anc[: half - 1] if fanout and anc else [])
        fan = _fanout(b[bit], ctrls[1:]) if len(ctrls) > 1 else []
        gates += fan
        for i in range(half):
            c = ctrls[i] if i < len(ctrls) else b[bit]
            gates.append(GateOp("CSWAP", (c, u[i], u[i + half])))
        gates += list(reversed(fan))
        m = half
        bit -= 1
    gates.append(GateOp("X", (u[0],)))
    return Circuit(lay["num_qubits"], tuple(gates))


def load_binary_amplitudes(x_or_tree, fanout: bool = True) -> np.ndarray:
    """Run loader + unary-to-binary with the sparse evaluator; return the binary register."""
    tree = x_or_tree if isinstance(x_or_tree, AngleTree) else compute_loader_angles(x_or_tree)
    n = tree.leaf_count
    lay = unary_to_binary_layout(n, fanout)
    circ = unary_loader_circuit(tree, lay["num_qubits"]) + unary_to_binary_circuit(n, fanout)
    out = circ.run_sparse()
    return out.register(lay["binary"]).real


def binary_loader_unitary(x) -> np.ndarray:
    """A real orthogonal V on log2(len x) qubits with V|0> = x/|x| (Householder)."""
    x = np.asarray(x, dtype=float).ravel()
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise LoadingError("cannot load the zero vector")
    f = x / nrm
    e0 = np.zeros_like(f)
    e0[0] = 1.0
    w = e0 - f
    wn = np.linalg.norm(w)
    if wn < 1e-15:
        return np.eye(f.size)
    w /= wn
    return np.eye(f.size) - 2 * np.outer(w, w)
