"""Exact cover instances, the restricted three-per-row form, constraint
functions for tree trimming, and the structured solver for the
marked-path families.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .trees import ConstraintFamily

BRUTE_FORCE_LIMIT = 24
GENERATOR_RETRY_CAP = 10_000


@dataclass(frozen=True)
class ExactCoverInstance:
    """0/1 matrix A with rows stored as sorted column-index tuples.

    ``restricted`` instances carry exactly three ones per row and at most
    three per column, the shape whose constraint functions stay 6-local.
    """

    n_rows: int
    n_cols: int
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n_rows > self.n_cols:
            raise ValueError("instances must have rows <= columns")
        if len(self.rows) != self.n_rows:
            raise ValueError("row count mismatch")
        for r in self.rows:
            if any(not (0 <= c < self.n_cols) for c in r):
                raise ValueError("column index out of range")
            if tuple(sorted(set(r))) != r:
                raise ValueError("rows must be sorted tuples of distinct columns")

    @property
    def matrix(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_cols), dtype=int)
        for j, r in enumerate(self.rows):
            a[j, list(r)] = 1
        return a

    def is_restricted(self) -> bool:
        if any(len(r) != 3 for r in self.rows):
            return False
        counts = np.zeros(self.n_cols, dtype=int)
        for r in self.rows:
            counts[list(r)] += 1
        return bool(np.all(counts <= 3))

    def to_json(self) -> str:
        return json.dumps({"m": self.n_rows, "n": self.n_cols, "rows": [list(r) for r in self.rows]})

    @classmethod
    def from_json(cls, text: str) -> "ExactCoverInstance":
        obj = json.loads(text)
        return cls(int(obj["m"]), int(obj["n"]), tuple(tuple(sorted(r)) for r in obj["rows"]))


def brute_force_solve(inst: ExactCoverInstance) -> list[str]:
    """All x in {0,1}^n with every row summing to exactly 1, as bitstrings."""
    n = inst.n_cols
    if n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"brute force refused beyond n={BRUTE_FORCE_LIMIT}")
    a = inst.matrix
    sols = []
    chunk = 1 << min(n, 18)
    for base in range(0, 1 << n, chunk):
        xs = np.arange(base, min(base + chunk, 1 << n), dtype=np.uint32)
        bits = (xs[:, None] >> np.arange(n, dtype=np.uint32)[None, ::-1]) & 1
        ok = np.all(bits @ a.T == 1, axis=1)
        sols.extend(format(int(x), f"0{n}b") for x in xs[ok])
    return sols


class TracedPrefix:
    """Read-only bit accessor recording which positions were touched."""

    def __init__(self, bits):
        self.bits = tuple(bits)
        self.touched: set[int] = set()

    def __len__(self):
        return len(self.bits)

    def get(self, k: int) -> int:
        """1-based column access x_k."""
        self.touched.add(k)
        return self.bits[k - 1]


def constraint_c1(inst: ExactCoverInstance, i: int, x_prefix) -> int:
    """1 iff the level-i node x_prefix may extend with x_{i+1} = 1.

    Product over rows of [1 - sum_{k<=i} A_jk x_k] A_{j,i+1} + [1 - A_{j,i+1}];
    only rows containing column i+1 are inspected, so the restricted form
    touches at most six prefix bits. Pass a TracedPrefix to observe which.
    """
    x = x_prefix if isinstance(x_prefix, TracedPrefix) else TracedPrefix(x_prefix)
    if len(x) != i:
        raise ValueError("prefix length must equal i")
    value = 1
    for row in inst.rows:
        if i not in row:  # paper column i+1 is 0-based index i
            continue
        s = sum(x.get(k + 1) for k in row if k < i)
        value *= 1 - s
        if value == 0:
            return 0
    return value


def constraint_c0(inst: ExactCoverInstance, i: int, x_prefix) -> int:
    """1 iff the level-i node x_prefix may extend with x_{i+1} = 0.

    Uses d_i^j = sum_{k<=i} A_jk (1 - x_k) through the factor
    d(1-d)/2 + 1, which is 0 exactly at d = 2; the restricted shape
    guarantees d in {0, 1, 2} for the rows inspected.
    """
    if not inst.is_restricted():
        raise ValueError("C^0 requires the restricted (three ones per row) form")
    x = x_prefix if isinstance(x_prefix, TracedPrefix) else TracedPrefix(x_prefix)
    if len(x) != i:
        raise ValueError("prefix length must equal i")
    value = 1
    for row in inst.rows:
        if i not in row:  # paper column i+1, 0-based
            continue
        d = sum(1 - x.get(k + 1) for k in row if k < i)
        factor = (d * (1 - d)) // 2 + 1
        value *= factor
        if value == 0:
            return 0
    return value


def constraint_family(inst: ExactCoverInstance) -> ConstraintFamily:
    """Trimming family: f_i(x_1..x_i) = C^{x_i}_{i-1}(x_1..x_{i-1})."""

    def f(i, bits):
        if bits[-1] == 1:
            return constraint_c1(inst, i - 1, bits[:-1])
        return constraint_c0(inst, i - 1, bits[:-1])

    return ConstraintFamily(inst.n_cols, f)


def feasibility_family(inst: ExactCoverInstance) -> ConstraintFamily:
    """Direct partial-sum rule: a prefix dies when a row reaches sum 2, or
    when a row's support is exhausted at sum 0. Oracle counterpart of the
    C^0/C^1 route."""

    def f(i, bits):
        for row in inst.rows:
            s = sum(bits[k] for k in row if k < i)
            if s >= 2:
                return 0
            if s == 0 and all(k < i for k in row):
                return 0
        return 1

    return ConstraintFamily(inst.n_cols, f)


def generate_restricted_instance(
    n: int, seed: int, n_rows: int | None = None
) -> ExactCoverInstance:
    """Random restricted instance: three ones per row, column degree <= 3."""
    if n < 6:
        raise ValueError("restricted instances need n >= 6")
    m = n_rows if n_rows is not None else n // 2
    if not (1 <= m <= n):
        raise ValueError("need 1 <= rows <= columns")
    rng = np.random.default_rng(seed)
    retries = 0
    while True:
        counts = np.zeros(n, dtype=int)
        rows: list[tuple[int, ...]] = []
        ok = True
        for _ in range(m):
            placed = False
            for _ in range(64):
                cols = tuple(sorted(rng.choice(n, size=3, replace=False).tolist()))
                if np.all(counts[list(cols)] < 3) and cols not in rows:
                    rows.append(cols)
                    counts[list(cols)] += 1
                    placed = True
                    break
                retries += 1
                if retries > GENERATOR_RETRY_CAP:
                    raise RuntimeError("restricted-instance generation exhausted its retry cap")
            if not placed:
                ok = False
                break
        if ok:
            return ExactCoverInstance(m, n, tuple(rows))
        retries += 1
        if retries > GENERATOR_RETRY_CAP:
            raise RuntimeError("restricted-instance generation exhausted its retry cap")


# ---------------------------------------------------------------------------
# marked-path families and the structured solver


@dataclass
class MarkedPathFamily:
    """Hidden-string family behind the marked-node trees.

    grover: f_i = 1 below level n, f_n = 1 only at w (when marked).
    even_bush: level n-1 additionally keeps only nodes whose longest common
    prefix with w is odd (n even), which trims every bush to even height.
    """

    n: int
    w: tuple[int, ...]
    variant: str = "grover"
    marked: bool = True
    calls: int = field(default=0, compare=False)

    def __post_init__(self):
        self.w = tuple(int(b) for b in self.w)
        if len(self.w) != self.n or any(b not in (0, 1) for b in self.w):
            raise ValueError(f"w must be a bitstring of length {self.n}")
        if self.variant not in ("grover", "even_bush"):
            raise ValueError("variant must be 'grover' or 'even_bush'")
        if self.variant == "even_bush" and self.n % 2 != 0:
            raise ValueError("even-bush families are defined for even n only")

    def evaluate(self, i: int, bits) -> int:
        bits = tuple(bits)
        if len(bits) != i:
            raise ValueError("prefix length must equal the level")
        self.calls += 1
        if i < self.n - 1 or (i == self.n - 1 and self.variant == "grover"):
            return 1
        if i == self.n:
            return int(self.marked and bits == self.w)
        m = _match_length(bits, self.w)
        return int(m == self.n - 1 or m % 2 == 1)

    def constraint_family(self) -> ConstraintFamily:
        fam = ConstraintFamily(self.n, lambda i, bits: self.evaluate(i, bits))
        return fam


def _match_length(bits, w) -> int:
    m = 0
    for b, wb in zip(bits, w):
        if b != wb:
            break
        m += 1
    return m


@dataclass(frozen=True)
class SipserResult:
    w_prefix: tuple[int, ...]
    marked: bool
    calls: int


def sipser_solve(fam: MarkedPathFamily, seed: int = 0, search_cap: int = 4096) -> SipserResult:
    """Recover w_1..w_{n-1} of an even-bush family, then decide with two
    f_n calls.

    The level-(n-1) predicate is 1 exactly when the common prefix with w
    has odd length, so (i) any accepted string pins w_1, and (ii) knowing
    w_1..w_j, probing both extensions against two tail variants isolates
    w_{j+1} with at most four calls.
    """
    if fam.variant != "even_bush":
        raise ValueError("the structured solver applies to the even-bush families")
    n = fam.n
    start_calls = fam.calls
    rng = np.random.default_rng(seed)

    probe_len = n - 1
    found = None
    for _ in range(search_cap):
        x = tuple(int(b) for b in rng.integers(0, 2, size=probe_len))
        if fam.evaluate(probe_len, x):
            found = x
            break
    if found is None:
        raise RuntimeError(
            f"no accepted level-{probe_len} input found in {search_cap} seeded probes; "
            "family looks inconsistent"
        )
    known = [found[0]]

    while len(known) < probe_len:
        j = len(known)
        if j == probe_len - 1:
            # no tail left: full-prefix acceptance decides the last bit
            bit = 1 if fam.evaluate(probe_len, tuple(known) + (1,)) else 0
            known.append(bit)
            continue
        tail_len = probe_len - j - 1
        decided = None
        for lead in (0, 1):
            tail = (lead,) + (0,) * (tail_len - 1)
            hits = [fam.evaluate(probe_len, tuple(known) + (b,) + tail) for b in (0, 1)]
            if j % 2 == 1:
                # wrong bit always accepted; the unique rejection marks w_{j+1}
                if hits.count(0) == 1:
                    decided = hits.index(0)
                    break
            else:
                # wrong bit always rejected; the unique acceptance marks w_{j+1}
                if hits.count(1) == 1:
                    decided = hits.index(1)
                    break
        if decided is None:
            raise RuntimeError("probe rounds failed to isolate a bit; family looks inconsistent")
        known.append(decided)

    marked = bool(
        fam.evaluate(n, tuple(known) + (0,)) or fam.evaluate(n, tuple(known) + (1,))
    )
    return SipserResult(tuple(known), marked, fam.calls - start_calls)
