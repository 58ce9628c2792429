"""Gamma, beta and loader-angle distributions.

A heap of independent angles, one per internal node, loads a uniformly random
unit vector when each node's angle satisfies sin^2(theta) ~ Beta(n_R/2, n_L/2)
for its left/right subtree leaf counts.  This module samples those angles,
evaluates their density, and discretises them for coherent preparation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .circuits import AngleTree, _log2_exact, reconstruct_from_angles


def _check_shape(name: str, v: float) -> None:
    if not np.all(np.asarray(v) > 0):
        raise ValueError(f"{name} must be positive, got {v}")


def sample_gamma(a, rng: np.random.Generator, size=None):
    """Gamma(shape a, scale 1) draws."""
    _check_shape("a", a)
    return rng.standard_gamma(a, size=size)


def sample_beta(a, b, rng: np.random.Generator, size=None):
    """Beta(a, b) through the ratio Y1 / (Y1 + Y2) of independent gammas."""
    _check_shape("a", a)
    _check_shape("b", b)
    y1 = sample_gamma(a, rng, size)
    y2 = sample_gamma(b, rng, size)
    return y1 / (y1 + y2)


@dataclass(frozen=True)
class AngleDistribution:
    """Law of the loader angle at a node with n_L / n_R leaves below it."""

    left_leaves: int
    right_leaves: int

    def __post_init__(self):
        if self.left_leaves < 1 or self.right_leaves < 1:
            raise ValueError("leaf counts must be at least 1")

    @property
    def a(self) -> float:
        return self.right_leaves / 2

    @property
    def b(self) -> float:
        return self.left_leaves / 2

    def density(self, t):
        return angle_density(self, t)

    def cdf(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, np.pi / 2)
        return special.betainc(self.a, self.b, np.sin(t) ** 2)

    def sample(self, rng: np.random.Generator, size=None):
        return np.arcsin(np.sqrt(sample_beta(self.a, self.b, rng, size)))

    def cell_probabilities(self, bits: int) -> np.ndarray:
        """Mass of each of the 2^bits equal cells of [0, pi/2]."""
        edges = np.linspace(0, np.pi / 2, 2**bits + 1)
        p = np.diff(self.cdf(edges))
        return p / p.sum()


def angle_density(dist: AngleDistribution, t):
    """2/B(a,b) sin^(2a-1)(t) cos^(2b-1)(t) on [0, pi/2]."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > np.pi / 2)):
        raise ValueError("t must lie in [0, pi/2]")
    a, b = dist.a, dist.b
    # xlogy keeps 0 * log(0) = 0 at the endpoints when an exponent vanishes
    with np.errstate(divide="ignore"):
        logd = (
            np.log(2.0)
            - special.betaln(a, b)
            + special.xlogy(2 * a - 1, np.sin(t))
            + special.xlogy(2 * b - 1, np.cos(t))
        )
    out = np.exp(logd)
    return out if out.ndim else float(out)


def node_distributions(leaf_count: int) -> list[AngleDistribution | None]:
    """Per heap position (index 0 unused) the angle law of that node."""
    k = _log2_exact(leaf_count, "leaf_count")
    out: list[AngleDistribution | None] = [None]
    for j in range(1, leaf_count):
        d = j.bit_length() - 1
        half = 2 ** (k - d - 1)
        out.append(AngleDistribution(half, half))
    return out


def _node_shapes(leaf_count: int) -> np.ndarray:
    k = _log2_exact(leaf_count, "leaf_count")
    j = np.arange(1, leaf_count)
    d = np.floor(np.log2(j)).astype(int)
    return 2.0 ** (k - d - 1) / 2


def sample_angle_trees(leaf_count: int, count: int, rng: np.random.Generator):
    """Batch of independent heaps: (angles (count, L), signs (count, L)).

    Per heap the draws are: right-subtree gammas, left-subtree gammas, then the
    leaf signs.  ``sample_angle_tree`` uses exactly this order.
    """
    if leaf_count < 1:
        raise ValueError("leaf_count must be at least 1")
    angles = np.zeros((count, leaf_count))
    if leaf_count > 1:
        shape = _node_shapes(leaf_count)
        both = np.concatenate([shape, shape])
        y = rng.standard_gamma(np.broadcast_to(both, (count, both.size)))
        yr, yl = y[:, : leaf_count - 1], y[:, leaf_count - 1:]
        angles[:, 1:] = np.arcsin(np.sqrt(yr / (yr + yl)))
    signs = 2.0 * rng.integers(0, 2, size=(count, leaf_count)) - 1.0
    return angles, signs


def sample_angle_tree(leaf_count: int, rng: np.random.Generator) -> AngleTree:
    if leaf_count < 2:
        raise ValueError("leaf_count must be at least 2")
    angles, signs = sample_angle_trees(leaf_count, 1, rng)
    return AngleTree.from_angles(angles[0], signs[0])


def haar_vectors(leaf_count: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Unit vectors from sampled heaps, shape (count, leaf_count)."""
    angles, signs = sample_angle_trees(leaf_count, count, rng)
    return reconstruct_from_angles(angles, signs)


def _abs_row_sums(x: np.ndarray) -> np.ndarray:
    """sum_j |x_i - x_j| for every i, by sorting."""
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    csum = np.cumsum(xs)
    k = np.arange(n)
    below = k * xs - np.concatenate([[0.0], csum[:-1]])
    above = (csum[-1] - csum) - (n - 1 - k) * xs
    out = np.empty(n)
    out[order] = below + above
    return out


def distance_correlation(x, y, block: int = 1024, bias_corrected: bool = True) -> float:
    """Sample distance correlation of two 1-d samples, in O(n) memory blocks.

    The bias-corrected form (U-centred distance matrices) is near 0 for
    independent samples at any n; the plain V-statistic sits around
    n^(-1/2) above it.  Negative corrected estimates are reported as 0.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if y.size != n or n < 4:
        raise ValueError("need two samples of equal size >= 4")
    row_x, row_y = _abs_row_sums(x), _abs_row_sums(y)
    # sum_ij |x_i - x_j|^2 has a closed form; only the cross term needs pairs
    sxx = 2 * n * float(x @ x) - 2 * float(x.sum()) ** 2
    syy = 2 * n * float(y @ y) - 2 * float(y.sum()) ** 2
    sxy = 0.0
    for s in range(0, n, block):
        sxy += float(np.sum(np.abs(x[s: s + block, None] - x) * np.abs(y[s: s + block, None] - y)))
    tx, ty = row_x.sum(), row_y.sum()

    def dcov2(s_ab, ra, rb, ta, tb):
        if bias_corrected:
            return (s_ab - 2 * np.dot(ra, rb) / (n - 2) + ta * tb / ((n - 1) * (n - 2))) / (n * (n - 3))
        return s_ab / n**2 - 2 * np.dot(ra, rb) / n**3 + ta * tb / n**4

    vxy = dcov2(sxy, row_x, row_y, tx, ty)
    vxx = dcov2(sxx, row_x, row_x, tx, tx)
    vyy = dcov2(syy, row_y, row_y, ty, ty)
    if vxx <= 0 or vyy <= 0:
        return 0.0
    return float(np.sqrt(max(vxy, 0.0) / np.sqrt(vxx * vyy)))


def independence_check(samples: np.ndarray, threshold: float = 0.02, labels=None) -> dict:
    """Pairwise distance correlation between the columns of ``samples``."""
    samples = np.asarray(samples, dtype=float)
    n, m = samples.shape
    if n < 10_000:
        raise ValueError(f"independence_check needs >= 10^4 samples, got {n}")
    labels = list(labels) if labels is not None else [str(i) for i in range(m)]
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            dc = distance_correlation(samples[:, i], samples[:, j])
            pairs.append({"a": labels[i], "b": labels[j], "dcor": dc, "pass": dc < threshold})
    return {
        "samples": n,
        "threshold": threshold,
        "pairs": pairs,
        "max_dcor": max((p["dcor"] for p in pairs), default=0.0),
        "pass": all(p["pass"] for p in pairs),
    }


# --- discretised angles for coherent preparation --------------------------

def cell_width(bits: int) -> float:
    return (np.pi / 2) / 2**bits


def register_bits(leaf_count: int, precision_bits: int) -> list[int]:
    """Qubits per heap node: deepest nodes carry the sign quadrant (2 extra bits)."""
    out = [0]
    for j in range(1, leaf_count):
        out.append(precision_bits + 2 if 2 * j >= leaf_count else precision_bits)
    return out


def node_cell_distribution(leaf_count: int, j: int, precision_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """(probabilities, midpoint angles) of heap node j's discretised register.

    Interior nodes cover [0, pi/2].  Deepest nodes absorb both leaf signs, so
    their folded angle is uniform on [0, 2 pi) when each child is one leaf.
    """
    dists = node_distributions(leaf_count)
    w = cell_width(precision_bits)
    if 2 * j >= leaf_count:
        cells = 2 ** (precision_bits + 2)
        return np.full(cells, 1.0 / cells), (np.arange(cells) + 0.5) * w
    p = dists[j].cell_probabilities(precision_bits)
    return p, (np.arange(2**precision_bits) + 0.5) * w


def discretised_angle_trees(leaf_count: int, count: int, precision_bits: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Sign-folded heaps drawn from the cell distribution (midpoint values)."""
    angles = np.zeros((count, leaf_count))
    for j in range(1, leaf_count):
        p, mids = node_cell_distribution(leaf_count, j, precision_bits)
        angles[:, j] = mids[rng.choice(p.size, size=count, p=p)]
    return angles
