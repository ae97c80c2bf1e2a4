"""Graph Hamiltonians for walks on trees.

The matrix follows the rate-gamma convention: diagonal entries are
gamma * degree, off-diagonal entries are -gamma on edges and zero
elsewhere, so every row sums to zero and the spectrum sits inside the
Gershgorin interval [0, 2 * gamma * max_degree].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ReductionError
from .trees import BaseBushForm, DecisionTree, ExplicitBush, NoBush, PerfectBush

DENSE_EIGH_LIMIT = 10_000
SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class RunwayWeights:
    """Per-site profile applied to runway (level < 0 or > n) sites.

    Interior runway sites get ``diagonal * gamma``; the outermost site of a
    finite runway gets ``(diagonal - |neighbor|) * gamma`` (its missing
    neighbor removed, matching the degree rule). Edges between two runway
    sites carry ``neighbor * gamma``; the junction edge onto the tree always
    stays at -gamma. The default (2, -1) reproduces the plain degree rule.
    """

    diagonal: float = 2.0
    neighbor: float = -1.0

    @classmethod
    def alternative(cls) -> "RunwayWeights":
        """Profile with diagonal 3 and -3/2 couplings: continuum band [0, 6]."""
        return cls(3.0, -1.5)

    @property
    def is_default(self) -> bool:
        return self.diagonal == 2.0 and self.neighbor == -1.0


class GraphHamiltonian:
    """Real symmetric matrix in coordinate storage, immutable after build.

    ``levels`` (when present) maps matrix index -> tree level and lets
    downstream code locate the root, the target, and runway sites.
    """

    def __init__(self, diag, pairs, weights, gamma=1.0, levels=None, n_levels=None):
        self.diag = np.asarray(diag, dtype=float)
        self.pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(weights, dtype=float)
        self.gamma = float(gamma)
        self.levels = None if levels is None else np.asarray(levels, dtype=np.int64)
        self.n_levels = n_levels
        self._csr = None
        self._eig = None

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            i = np.concatenate([self.pairs[:, 0], self.pairs[:, 1], np.arange(self.dim)])
            j = np.concatenate([self.pairs[:, 1], self.pairs[:, 0], np.arange(self.dim)])
            v = np.concatenate([self.weights, self.weights, self.diag])
            self._csr = sp.csr_matrix((v, (i, j)), shape=(self.dim, self.dim))
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.csr().toarray()

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.csr() @ v

    def eigh(self):
        """Cached dense eigendecomposition (guarded by DENSE_EIGH_LIMIT)."""
        if self._eig is None:
            if self.dim > DENSE_EIGH_LIMIT:
                raise CapacityError(f"dense eigendecomposition refused for dim {self.dim}")
            w, v = np.linalg.eigh(self.to_dense())
            self._eig = (w, v)
        return self._eig

    def offdiag_abs_row_sums(self) -> np.ndarray:
        s = np.zeros(self.dim)
        np.add.at(s, self.pairs[:, 0], np.abs(self.weights))
        np.add.at(s, self.pairs[:, 1], np.abs(self.weights))
        return s

    def gershgorin_interval(self) -> tuple[float, float]:
        r = self.offdiag_abs_row_sums()
        return float(np.min(self.diag - r)), float(np.max(self.diag + r))

    def index_of_level(self, level: int) -> int:
        """Unique matrix index at a given tree level (root=0, target=n)."""
        if self.levels is None:
            raise ValueError("this Hamiltonian carries no level metadata")
        idx = np.flatnonzero(self.levels == level)
        if len(idx) != 1:
            raise ValueError(f"level {level} is held by {len(idx)} sites, need exactly 1")
        return int(idx[0])

    def export_coordinates(self, path) -> None:
        """Debug dump: one 'row col value' line per stored entry."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, d in enumerate(self.diag):
                fh.write(f"{i} {i} {d!r}\n")
            for (i, j), w in zip(self.pairs, self.weights):
                fh.write(f"{i} {j} {w!r}\n")


def hamiltonian_from_tree(
    t: DecisionTree, gamma: float = 1.0, runway_weights: RunwayWeights | None = None
) -> GraphHamiltonian:
    """Degree-diagonal, -gamma-offdiagonal matrix over the tree's node ids."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rw = runway_weights if runway_weights is not None else RunwayWeights()
    n = t.n_levels
    levels = np.asarray(t.levels)
    is_runway = (levels < 0) | (levels > n)
    deg = np.zeros(t.n_nodes)
    pairs = []
    weights = []
    for a, b in t.edges:
        deg[a] += 1
        deg[b] += 1
        w = rw.neighbor * gamma if (is_runway[a] and is_runway[b]) else -gamma
        pairs.append((a, b))
        weights.append(w)
    diag = gamma * deg
    if not rw.is_default:
        for v in np.flatnonzero(is_runway):
            interior = deg[v] == 2
            diag[v] = gamma * (rw.diagonal if interior else rw.diagonal - abs(rw.neighbor))
    return GraphHamiltonian(diag, pairs, weights, gamma, levels, n)


def zero_mode_check(h: GraphHamiltonian) -> float:
    """Max-norm residual of H acting on the normalized all-ones vector."""
    u = np.full(h.dim, 1.0 / np.sqrt(h.dim))
    return float(np.max(np.abs(h.matvec(u))))


def spectrum(h: GraphHamiltonian, with_vectors: bool = False):
    """Sorted eigenvalues (and optionally eigenvectors) of the dense matrix."""
    w, v = h.eigh()
    return (w.copy(), v.copy()) if with_vectors else w.copy()


@dataclass(frozen=True)
class EffectiveChain:
    """Weighted graph replacing each perfect bush by its symmetric-subspace chain.

    ``origins[i]`` is (base position, bush height) for bush sites and
    (level, 0) for base/runway sites; ``hamiltonian.levels`` keeps the tree
    level of every site.
    """

    hamiltonian: GraphHamiltonian
    origins: tuple[tuple[int, int], ...]


def reduce_perfect_bushes(b: BaseBushForm, gamma: float = 1.0) -> EffectiveChain:
    """Collapse perfect bushes to chains with 3-gamma diagonals and -sqrt(2)-gamma links.

    The reduced dynamics agrees exactly with the full tree for any initial
    state supported on the base and runways (or symmetric over bush layers).
    Bush height 1 keeps the leaf diagonal gamma and the -gamma link; taller
    bushes carry diagonal 3*gamma at heights 1..k-1 and gamma at the top,
    with -sqrt(2)*gamma between consecutive heights.
    """
    for spec in b.bushes:
        if isinstance(spec, ExplicitBush):
            raise ReductionError("explicit (non-perfect) bushes cannot be reduced")
    n = b.base_length
    heights = b.bush_heights()
    index = {}
    origins = []
    levels = []
    for j in range(-b.start_runway, n + b.end_runway + 1):
        index[("b", j)] = len(origins)
        origins.append((j, 0))
        levels.append(j)
    for m, k in enumerate(heights):
        for ell in range(1, k + 1):
            index[("u", m, ell)] = len(origins)
            origins.append((m, ell))
            levels.append(m + ell)
    dim = len(origins)
    diag = np.zeros(dim)
    pairs = []
    weights = []

    def link(a, bkey, w):
        pairs.append((index[a], index[bkey]))
        weights.append(w)

    for j in range(-b.start_runway, n + b.end_runway):
        link(("b", j), ("b", j + 1), -gamma)
    for m, k in enumerate(heights):
        if k == 0:
            continue
        link(("b", m), ("u", m, 1), -gamma)
        for ell in range(1, k):
            link(("u", m, ell), ("u", m, ell + 1), -SQRT2 * gamma)
    for j in range(-b.start_runway, n + b.end_runway + 1):
        d = int(j > -b.start_runway) + int(j < n + b.end_runway)
        if 0 <= j <= n - 2 and heights[j] > 0:
            d += 1
        diag[index[("b", j)]] = gamma * d
    for m, k in enumerate(heights):
        for ell in range(1, k + 1):
            diag[index[("u", m, ell)]] = gamma * (3.0 if ell < k else 1.0)
    h = GraphHamiltonian(diag, pairs, weights, gamma, levels, n)
    return EffectiveChain(h, tuple(origins))
