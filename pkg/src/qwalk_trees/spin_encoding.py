"""Few-bit encodings of tree Hamiltonians on 2n+1 bits.

Registers are ordered [y_0 .. y_n, x_1 .. x_n]; bit k of a basis-state
index is register k (y_i at index i, x_j at index n + j). A tree node at
level i with prefix bits x_1..x_i is the basis state with y_i = 1, the
prefix written into the x register, and every other bit 0.

The untrimmed tree needs terms on at most 3 bits; trimming by a
restricted exact-cover instance multiplies the hops by the 6-local
constraint functions, for 9-bit terms at worst.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, LocalityError
from .exact_cover import ExactCoverInstance, constraint_c0, constraint_c1
from .trees import DecisionTree

MAX_SPIN_N = 6
MAX_STATE_BITS = 14
TREE_TERM_BITS = 3
TRIMMED_TERM_BITS = 9


@dataclass(frozen=True)
class BitBasisState:
    """(y, x) bit pattern; valid tree states have one y_i = 1 and a prefix x."""

    y: tuple[int, ...]
    x: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.y + self.x):
            raise ValueError("bits must be 0/1")
        if len(self.y) != len(self.x) + 1:
            raise ValueError("need n+1 y bits and n x bits")

    @property
    def n(self) -> int:
        return len(self.x)

    def is_valid_tree_state(self) -> bool:
        if sum(self.y) != 1:
            return False
        level = self.y.index(1)
        return all(b == 0 for b in self.x[level:])

    def index(self) -> int:
        s = 0
        for i, b in enumerate(self.y):
            s |= b << i
        for j, b in enumerate(self.x, start=1):
            s |= b << (self.n + j)
        return s


@dataclass(frozen=True)
class LocalTerm:
    """Hermitian block acting on the listed bit registers (ascending order).

    Local basis index sum_p bit(support[p]) * 2^p.
    """

    support: tuple[int, ...]
    block: np.ndarray

    def __post_init__(self):
        b = len(self.support)
        if self.block.shape != (2 ** b, 2 ** b):
            raise ValueError("block shape does not match the support size")
        if tuple(sorted(self.support)) != self.support:
            raise ValueError("support must be sorted")
        if not np.allclose(self.block, self.block.conj().T, atol=1e-12):
            raise ValueError("local term must be Hermitian")


@dataclass(frozen=True)
class TrotterPlan:
    t: float
    m: int
    order: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one slice")


def apply_term(term: LocalTerm, matrix: np.ndarray, psi: np.ndarray, n_bits: int) -> np.ndarray:
    """Apply ``matrix`` (same support layout as ``term``) to a dense state."""
    b = len(term.support)
    tensor = psi.reshape([2] * n_bits)
    axes = [n_bits - 1 - s for s in reversed(term.support)]
    rest = [a for a in range(n_bits) if a not in axes]
    perm = axes + rest
    moved = np.transpose(tensor, perm).reshape(2 ** b, -1)
    out = (matrix @ moved).reshape([2] * b + [2] * (n_bits - b))
    return np.transpose(out, np.argsort(perm)).reshape(-1)


def apply_hamiltonian(terms: list[LocalTerm], psi: np.ndarray, n_bits: int) -> np.ndarray:
    out = np.zeros_like(psi, dtype=complex)
    for term in terms:
        out += apply_term(term, term.block, psi, n_bits)
    return out


def terms_to_dense(terms: list[LocalTerm], n_bits: int) -> np.ndarray:
    """Materialize sum_k H_k; guarded, for validation at small n only."""
    if n_bits > 12:
        raise CapacityError("dense materialization refused beyond 12 bits")
    dim = 1 << n_bits
    h = np.zeros((dim, dim), dtype=complex)
    g = np.arange(dim)
    for term in terms:
        mask = 0
        for s in term.support:
            mask |= 1 << s
        loc = np.zeros(dim, dtype=np.int64)
        for p, s in enumerate(term.support):
            loc |= ((g >> s) & 1) << p
        ctx = g & ~mask
        ljs, lis = np.nonzero(term.block)
        for lj, li in zip(ljs, lis):
            src = g[loc == li]
            dst = (src & ~mask) | _spread(lj, term.support)
            h[dst, src] += term.block[lj, li]
        del ctx
    return h


def _spread(local_value: int, support: tuple[int, ...]) -> int:
    s = 0
    for p, reg in enumerate(support):
        if (local_value >> p) & 1:
            s |= 1 << reg
    return s


# ---------------------------------------------------------------------------
# term assembly


def _diag_y_term(i: int, coeff: float) -> LocalTerm:
    return LocalTerm((i,), np.diag([0.0, float(coeff)]).astype(complex))


def _x_support_registers(inst: ExactCoverInstance | None, i: int, n: int) -> list[int]:
    """x registers the promoted C^0_i / C^1_i functions may touch."""
    if inst is None:
        return []
    cols = set()
    for row in inst.rows:
        if i in row:  # rows with a one in paper column i+1
            cols.update(k for k in row if k < i)
    return sorted(n + k + 1 for k in cols)  # paper column k+1 -> register n+k+1


def _constraint_value(inst, i, kind: str, x_bits_by_register, n) -> int:
    """Evaluate C^kind_i on a full-length prefix reconstructed from the
    support bits (untouched positions are irrelevant and set to 0)."""
    prefix = [0] * i
    for reg, bit in x_bits_by_register.items():
        k = reg - n - 1  # register n+j holds paper bit x_j = prefix[j-1]
        if k < i:
            prefix[k] = bit
    if kind == "0":
        return constraint_c0(inst, i, tuple(prefix))
    return constraint_c1(inst, i, tuple(prefix))


def _hop_term(i: int, n: int, branch: str, inst: ExactCoverInstance | None) -> LocalTerm:
    """Level i -> i+1 hop; branch '0' keeps x_{i+1}=0, branch '1' raises it.

    With an instance, the hop amplitude is multiplied by the promoted
    C^branch_i evaluated on the x bits in support.
    """
    y_lo, y_hi, x_new = i, i + 1, n + i + 1
    extra = _x_support_registers(inst, i, n)
    support = tuple(sorted({y_lo, y_hi, x_new} | set(extra)))
    limit = TREE_TERM_BITS if inst is None else TRIMMED_TERM_BITS
    if len(support) > limit:
        raise LocalityError(
            f"hop at level {i} needs {len(support)} bits (> {limit}); offending rows: "
            f"{[r for r in (inst.rows if inst else []) if i in r]}"
        )
    pos = {s: p for p, s in enumerate(support)}
    dim = 1 << len(support)
    block = np.zeros((dim, dim))
    for s in range(dim):
        bit = lambda reg: (s >> pos[reg]) & 1
        if bit(y_lo) != 1 or bit(y_hi) != 0 or bit(x_new) != 0:
            continue
        if inst is None:
            c = 1
        else:
            xbits = {reg: bit(reg) for reg in extra}
            c = _constraint_value(inst, i, branch, xbits, n)
        if c == 0:
            continue
        s2 = s ^ (1 << pos[y_lo]) ^ (1 << pos[y_hi])
        if branch == "1":
            s2 ^= 1 << pos[x_new]
        block[s2, s] += -float(c)
    block = block + block.T
    return LocalTerm(support, block.astype(complex))


def _trimmed_diag_term(i: int, n: int, inst: ExactCoverInstance) -> LocalTerm:
    """y_i (1 + C^0_i + C^1_i): the degree of a level-i node in the trimmed tree."""
    extra = _x_support_registers(inst, i, n)
    support = tuple(sorted({i} | set(extra)))
    if len(support) > TRIMMED_TERM_BITS:
        raise LocalityError(f"diagonal at level {i} needs {len(support)} bits")
    pos = {s: p for p, s in enumerate(support)}
    dim = 1 << len(support)
    diag = np.zeros(dim)
    for s in range(dim):
        if (s >> pos[i]) & 1:
            xbits = {reg: (s >> pos[reg]) & 1 for reg in extra}
            c0 = _constraint_value(inst, i, "0", xbits, n)
            c1 = _constraint_value(inst, i, "1", xbits, n)
            diag[s] = 1.0 + c0 + c1
    return LocalTerm(support, np.diag(diag).astype(complex))


def assemble_tree_terms(n: int) -> list[LocalTerm]:
    """Terms realizing the underlying-tree Hamiltonian on 2n+1 bits.

    Diagonal: 2 y_0 + 3 sum_{1..n-1} y_i + y_n. Hops: for each level, one
    term fixing x_{i+1}=0 and one raising x_{i+1}, both on 3 bits.
    """
    if n > MAX_SPIN_N:
        raise CapacityError(f"spin encoding limited to n <= {MAX_SPIN_N}")
    terms = [_diag_y_term(0, 2.0)]
    terms += [_diag_y_term(i, 3.0) for i in range(1, n)]
    terms.append(_diag_y_term(n, 1.0))
    for i in range(n):
        terms.append(_hop_term(i, n, "0", None))
        terms.append(_hop_term(i, n, "1", None))
    return terms


def assemble_trimmed_terms(inst: ExactCoverInstance, n: int) -> list[LocalTerm]:
    """Terms for the tree trimmed by a restricted instance (<= 9-bit support)."""
    if n > MAX_SPIN_N:
        raise CapacityError(f"spin encoding limited to n <= {MAX_SPIN_N}")
    if inst.n_cols != n:
        raise ValueError("instance column count must equal n")
    if not inst.is_restricted():
        raise ValueError("trimmed assembly requires the restricted form")
    terms = [_diag_y_term(0, 2.0)]
    terms += [_trimmed_diag_term(i, n, inst) for i in range(1, n)]
    terms.append(_diag_y_term(n, 1.0))
    for i in range(n):
        terms.append(_hop_term(i, n, "0", inst))
        terms.append(_hop_term(i, n, "1", inst))
    return terms


# ---------------------------------------------------------------------------
# subspace mapping and Trotter evolution


def node_state_index(n: int, level: int, prefix_bits) -> int:
    s = 1 << level
    for j, b in enumerate(prefix_bits, start=1):
        if b:
            s |= 1 << (n + j)
    return s


def tree_state_indices(tree: DecisionTree, n: int) -> np.ndarray:
    """Bit-state index of every tree node (needs prefix labels on the tree)."""
    if tree.labels is None:
        raise ValueError("tree carries no prefix labels")
    out = []
    for node in range(tree.n_nodes):
        label = tree.labels[node]
        bits = tuple(int(c) for c in label)
        out.append(node_state_index(n, tree.levels[node], bits))
    return np.asarray(out, dtype=np.int64)


def subspace_matrix(terms: list[LocalTerm], tree: DecisionTree, n: int) -> np.ndarray:
    """V^dagger (sum_k H_k) V over the tree's valid bit states, node-ordered."""
    n_bits = 2 * n + 1
    idx = tree_state_indices(tree, n)
    dim = 1 << n_bits
    out = np.zeros((len(idx), len(idx)), dtype=complex)
    for col, i in enumerate(idx):
        psi = np.zeros(dim, dtype=complex)
        psi[i] = 1.0
        out[:, col] = apply_hamiltonian(terms, psi, n_bits)[idx]
    return out


def trotter_evolve(terms: list[LocalTerm], psi0: np.ndarray, plan: TrotterPlan) -> np.ndarray:
    """First-order product [prod_k exp(-i t H_k / m)]^m applied to psi0."""
    n_bits = int(np.log2(len(psi0)))
    if 1 << n_bits != len(psi0):
        raise ValueError("state length must be a power of two")
    if n_bits > MAX_STATE_BITS:
        raise CapacityError(f"dense states limited to {MAX_STATE_BITS} bits")
    order = plan.order if plan.order is not None else tuple(range(len(terms)))
    if sorted(order) != list(range(len(terms))):
        raise ValueError("order must be a permutation of the term indices")
    dt = plan.t / plan.m
    unitaries = []
    for k in order:
        w, v = np.linalg.eigh(terms[k].block)
        unitaries.append((terms[k], (v * np.exp(-1j * dt * w)) @ v.conj().T))
    psi = np.asarray(psi0, dtype=complex).copy()
    for _ in range(plan.m):
        for term, u in unitaries:
            psi = apply_term(term, u, psi, n_bits)
    return psi
