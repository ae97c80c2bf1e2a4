"""Energy-domain transmission through base-bush trees.

The scattering state at energy E = 4 sin^2(theta/2) obeys a three-term
recurrence along the base; each bush enters only through the real ratio
y_m(E) of the amplitude one level above the base to the amplitude at the
base node. Stepping the recurrence with the 2x2 matrices
``[[3 - E - y_m, -1], [1, 0]]`` and matching plane waves on the two
runways yields T(E) and R(E).

Transfer products grow like 2^(n/2) at blocked energies, so the product
is accumulated in scaled form (entries normalized each step, log of the
scale tracked separately).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import CapacityError, PoleError
from .evolution import StateVector, quantum_propagate
from .hamiltonian import GraphHamiltonian, hamiltonian_from_tree, reduce_perfect_bushes
from .trees import BaseBushForm, ExplicitBush, NoBush, PerfectBush, from_base_bush_form

SQRT2 = np.sqrt(2.0)
GENERIC_BUSH_LIMIT = 4096
POLE_DENOMINATOR_TOL = 1e-14
POLE_RCOND_TOL = 1e-12


@dataclass(frozen=True)
class BushRatio:
    energy: float
    value: float
    pole_flag: bool = False


@dataclass(frozen=True)
class TransferMatrix:
    """Real 2x2 step product; true matrix is exp(log_scale) * [[a, b], [c, d]]."""

    a: float
    b: float
    c: float
    d: float
    log_scale: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.exp(self.log_scale) * np.array([[self.a, self.b], [self.c, self.d]])

    def det(self) -> float:
        return (self.a * self.d - self.b * self.c) * np.exp(2.0 * self.log_scale)


@dataclass(frozen=True)
class ScatteringResult:
    energy: float
    theta: float
    transmission: complex
    reflection: complex
    unitarity_residual: float
    pole_flag: bool = False


def theta_from_energy(E):
    """Principal-branch theta with E = 4 sin^2(theta/2), theta in [0, pi]."""
    return 2.0 * np.arcsin(np.sqrt(np.asarray(E)) / 2.0)


# ---------------------------------------------------------------------------
# bush ratios


def bush_ratio_perfect(k: int, E: float) -> BushRatio:
    """Closed-form ratio for the perfectly bifurcating bush of height k.

    Parametrize E = 3 - 2 sqrt(2) cos(theta'); outside the band
    [3 - 2 sqrt(2), 3 + 2 sqrt(2)] theta' turns complex and the expression
    continues hyperbolically while staying real.
    """
    if k < 1:
        raise ValueError("bush height must be >= 1")
    y = _perfect_ratio_array(k, np.asarray([float(E)]))
    return BushRatio(float(E), float(y[0]), False)


def _perfect_ratio_array(k: int, E: np.ndarray) -> np.ndarray:
    """Vectorized closed form; raises PoleError on a vanishing denominator."""
    th = np.emath.arccos((3.0 - E) / (2.0 * SQRT2))
    num = SQRT2 * np.sin((k - 1) * th) - np.sin(k * th)
    den = SQRT2 * (SQRT2 * np.sin(k * th) - np.sin((k + 1) * th))
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.real(num / den)
    small = np.abs(np.sin(th)) < 1e-7
    if np.any(small):
        near_zero = np.real(np.cos(th)) > 0
        y = np.where(small & near_zero, _limit_theta_zero(k), y)
        y = np.where(small & ~near_zero, _limit_theta_pi(k), y)
        den = np.where(small, 1.0, den)
    bad = np.abs(den) < POLE_DENOMINATOR_TOL
    if np.any(bad):
        e_bad = float(np.asarray(E, dtype=float).ravel()[np.argmax(bad)])
        raise PoleError(
            f"perfect bush k={k} resonates at E={e_bad!r}", e_bad, _nearest_bush_eigenvalue(k, e_bad)
        )
    return y


def _limit_theta_zero(k: int) -> float:
    return (SQRT2 * (k - 1) - k) / (SQRT2 * (SQRT2 * k - (k + 1)))


def _limit_theta_pi(k: int) -> float:
    return -(SQRT2 * (k - 1) + k) / (SQRT2 * (SQRT2 * k + k + 1))


def _nearest_bush_eigenvalue(k: int, E: float) -> float:
    h = _perfect_bush_block(k)
    w = np.linalg.eigvalsh(h)
    return float(w[np.argmin(np.abs(w - E))])


def _perfect_bush_block(k: int) -> np.ndarray:
    """Symmetric-subspace block of a perfect bush; y_m poles are its eigenvalues."""
    h = np.zeros((k, k))
    for ell in range(k):
        h[ell, ell] = 3.0 if ell < k - 1 else 1.0
    for ell in range(k - 1):
        h[ell, ell + 1] = h[ell + 1, ell] = -SQRT2
    return h


def bush_ratio_generic(bush: ExplicitBush, E: float) -> BushRatio:
    """Ratio from the (H_bush - E) linear system with a unit base source.

    The bush block has full-tree degrees on the diagonal (each node keeps
    its parent edge); the base node enters as the right-hand side on the
    height-1 node. pole_flag marks condition numbers beyond 1e12.
    """
    n_nodes = bush.n_nodes()
    if n_nodes > GENERIC_BUSH_LIMIT:
        raise CapacityError(f"bush with {n_nodes} nodes exceeds {GENERIC_BUSH_LIMIT}")
    a = _bush_block(bush) - float(E) * np.eye(n_nodes)
    rhs = np.zeros(n_nodes)
    rhs[0] = 1.0
    anorm = np.linalg.norm(a, 1)
    lu, piv, info = lapack.dgetrf(a)
    rcond = 0.0
    if info == 0:
        rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    if info > 0 or rcond == 0.0 or not np.isfinite(rcond):
        w = np.linalg.eigvalsh(_bush_block(bush))
        nearest = float(w[np.argmin(np.abs(w - E))])
        raise PoleError(f"E={E!r} is a bush eigenvalue ({nearest!r})", float(E), nearest)
    x = sla.lu_solve((lu, piv), rhs)
    return BushRatio(float(E), float(x[0]), bool(rcond < POLE_RCOND_TOL))


def _bush_block(bush: ExplicitBush) -> np.ndarray:
    n_nodes = bush.n_nodes()
    h = np.zeros((n_nodes, n_nodes))
    child_count = np.zeros(n_nodes)
    for i, p in enumerate(bush.parents):
        if p >= 0:
            h[i, p] = h[p, i] = -1.0
            child_count[p] += 1
    for i in range(n_nodes):
        h[i, i] = child_count[i] + 1.0  # +1 for the parent edge (base for node 0)
    return h


def _ratio_rows(b: BaseBushForm, energies: np.ndarray):
    """y_m(E) for m = 0..n-1 as an (n, len(E)) array plus a pole mask."""
    n = b.base_length
    rows = np.ones((n, len(energies)))
    pole = np.zeros(len(energies), dtype=bool)
    for m in range(max(n - 1, 0)):
        spec = b.bushes[m]
        if isinstance(spec, NoBush):
            continue
        if isinstance(spec, PerfectBush):
            try:
                rows[m] = _perfect_ratio_array(spec.height, energies)
            except PoleError:
                for i, e in enumerate(energies):
                    try:
                        rows[m, i] = _perfect_ratio_array(spec.height, np.array([e]))[0]
                    except PoleError:
                        pole[i] = True
        else:
            for i, e in enumerate(energies):
                try:
                    rows[m, i] = bush_ratio_generic(spec, float(e)).value
                except PoleError:
                    pole[i] = True
    return rows, pole


# ---------------------------------------------------------------------------
# transfer matrices and transmission


def transfer_matrix(b: BaseBushForm, E: float) -> TransferMatrix:
    """Ordered product M_{n-1} ... M_0 of the base step matrices at energy E."""
    abcd, log_scale, pole = _transfer_many(b, np.asarray([float(E)]))
    if pole[0]:
        raise PoleError(f"bush resonance at E={E!r}", float(E))
    a, bb, c, d = (float(x[0]) for x in abcd)
    return _absorb_scale(a, bb, c, d, float(log_scale[0]))


def _absorb_scale(a, bb, c, d, ls) -> TransferMatrix:
    if abs(ls) < 600.0:
        s = np.exp(ls)
        return TransferMatrix(a * s, bb * s, c * s, d * s, 0.0)
    return TransferMatrix(a, bb, c, d, ls)


def _transfer_many(b: BaseBushForm, energies: np.ndarray):
    n = b.base_length
    rows, pole = _ratio_rows(b, energies)
    pa = np.ones_like(energies)
    pb = np.zeros_like(energies)
    pc = np.zeros_like(energies)
    pd = np.ones_like(energies)
    log_scale = np.zeros_like(energies)
    for m in range(n):
        y = rows[m] if m < n - 1 else np.ones_like(energies)
        q = 3.0 - energies - y
        pa, pb, pc, pd = q * pa - pc, q * pb - pd, pa, pb
        s = np.maximum.reduce([np.abs(pa), np.abs(pb), np.abs(pc), np.abs(pd)])
        s = np.where(s > 0, s, 1.0)
        pa, pb, pc, pd = pa / s, pb / s, pc / s, pd / s
        log_scale += np.log(s)
    return (pa, pb, pc, pd), log_scale, pole


def transmission(b: BaseBushForm, E: float) -> ScatteringResult:
    """T(E) and R(E) from the transfer matrix and plane-wave matching."""
    results = transmission_sweep(b, np.asarray([float(E)]))
    r = results[0]
    if r.pole_flag:
        raise PoleError(f"bush resonance at E={E!r}", float(E))
    return r


def transmission_sweep(
    b: BaseBushForm,
    energies,
    csv_path=None,
    max_workers: int | None = None,
    version: str = "0.1.0",
) -> list[ScatteringResult]:
    """Per-energy scattering results; pole points are flagged, not filled."""
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    if np.any((energies <= 0.0) | (energies >= 4.0)):
        raise ValueError("energies must lie strictly inside the band (0, 4)")
    if max_workers is None:
        env = os.environ.get("QWALK_THREADS", "")
        max_workers = int(env) if env.isdigit() and int(env) > 0 else min(4, os.cpu_count() or 1)
    chunks = np.array_split(np.arange(len(energies)), max(1, min(max_workers * 4, len(energies))))
    chunks = [c for c in chunks if len(c)]

    def work(idx):
        return _sweep_chunk(b, energies[idx])

    if max_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    results = [r for part in parts for r in part]
    if csv_path is not None:
        write_sweep_csv(csv_path, results, version)
    return results


def _sweep_chunk(b: BaseBushForm, energies: np.ndarray) -> list[ScatteringResult]:
    n = b.base_length
    (pa, pb, pc, pd), log_scale, pole = _transfer_many(b, energies)
    theta = theta_from_energy(energies)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    eith = np.exp(1j * theta)
    denom = (pc - pb) + (pd - pa) * cos_t + 1j * (pd + pa) * sin_t
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        t_coef = np.exp(-1j * n * theta) * 2j * sin_t * np.exp(-log_scale) / denom
        big_d = pa + pb * eith - pc * eith - pd * eith ** 2
        r_coef = -2j * sin_t * (pd * eith - pb) / big_d - 1.0
    out = []
    for i, e in enumerate(energies):
        if pole[i]:
            out.append(ScatteringResult(float(e), float(theta[i]), np.nan, np.nan, np.nan, True))
            continue
        resid = abs(abs(r_coef[i]) ** 2 + abs(t_coef[i]) ** 2 - 1.0)
        out.append(
            ScatteringResult(
                float(e), float(theta[i]), complex(t_coef[i]), complex(r_coef[i]), float(resid)
            )
        )
    return out


def log_energy_grid(lo: float = 1e-14, hi: float = 4.0 * (1.0 - 1e-9), num: int = 2000):
    """Default figure-grade grid: log-spaced to resolve the near-zero collapse."""
    return np.logspace(np.log10(lo), np.log10(hi), num)


def write_sweep_csv(path, results: list[ScatteringResult], version: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# qwalk-trees v{version}\n")
        fh.write("E,theta,ReT,ImT,absT,ReR,ImR,unitarity_residual,pole_flag\n")
        for r in results:
            t, rr = r.transmission, r.reflection
            fh.write(
                f"{r.energy!r},{r.theta!r},{np.real(t)!r},{np.imag(t)!r},{abs(t)!r},"
                f"{np.real(rr)!r},{np.imag(rr)!r},{r.unitarity_residual!r},{int(r.pole_flag)}\n"
            )


# ---------------------------------------------------------------------------
# wave packets and the time-domain cross-check


@dataclass(frozen=True)
class WavePacket:
    """Right-moving Gaussian packet on the starting runway.

    ``levels[i]`` is the (negative) tree level carrying ``amplitudes[i]``;
    sigma is the position width in sites and theta0 the carrier momentum.
    """

    center_level: int
    theta0: float
    sigma: float
    levels: tuple[int, ...]
    amplitudes: np.ndarray

    @property
    def energy(self) -> float:
        return float(4.0 * np.sin(self.theta0 / 2.0) ** 2)


def make_packet(h: GraphHamiltonian, center_level: int, theta0: float, sigma: float) -> WavePacket:
    if h.levels is None:
        raise ValueError("Hamiltonian carries no level metadata")
    if not (0.0 < theta0 < np.pi):
        raise ValueError("theta0 must lie in (0, pi)")
    runway_levels = np.sort(h.levels[h.levels < 0])
    if len(runway_levels) == 0:
        raise ValueError("no starting runway to host the packet")
    outer = int(runway_levels[0])
    if center_level - outer < 5 * sigma or -center_level < 5 * sigma:
        raise ValueError(
            f"packet center {center_level} is closer than 5 sigma to a runway end "
            f"(runway spans {outer}..-1)"
        )
    js = runway_levels.astype(float)
    amps = np.exp(-((js - center_level) ** 2) / (4.0 * sigma ** 2)) * np.exp(1j * js * theta0)
    amps /= np.linalg.norm(amps)
    return WavePacket(center_level, float(theta0), float(sigma), tuple(int(j) for j in runway_levels), amps)


def packet_transmission(b: BaseBushForm, packet: WavePacket, t_final: float) -> float:
    """Evolve the packet and integrate probability on the ending runway.

    Uses the effective-chain reduction whenever every bush is perfect (the
    packet never has support on bush sites, so the reduction is exact).
    """
    if b.end_runway == 0:
        raise ValueError("packet transmission needs an ending runway")
    if any(isinstance(s, ExplicitBush) for s in b.bushes):
        h = hamiltonian_from_tree(from_base_bush_form(b))
    else:
        h = reduce_perfect_bushes(b).hamiltonian
    psi0 = np.zeros(h.dim, dtype=complex)
    for level, amp in zip(packet.levels, packet.amplitudes):
        psi0[h.index_of_level(level)] = amp
    final = quantum_propagate(h, StateVector(psi0, 0.0), t_final)
    prob = np.abs(final.amplitudes) ** 2
    n = b.base_length
    transmitted = float(prob[h.levels > n].sum())
    edge_sites = np.concatenate(
        [
            np.flatnonzero(h.levels <= -(b.start_runway - 4)),
            np.flatnonzero(h.levels >= n + b.end_runway - 4),
        ]
    )
    if prob[edge_sites].sum() > 1e-6:
        raise ValueError(
            f"packet-support violation: {prob[edge_sites].sum():.2e} probability reached "
            "the outer runway ends"
        )
    return transmitted


# ---------------------------------------------------------------------------
# bound states


@dataclass(frozen=True)
class BoundState:
    energy: float
    alpha: float
    fit_residual: float


def bound_state_scan(h: GraphHamiltonian) -> list[BoundState]:
    """Eigenstates in (4, 6] with staggered exponential runway tails.

    alpha is fitted from the tail profile (-1)^d e^{-alpha d} moving away
    from the tree; the model residual is reported alongside.
    """
    if h.levels is None or h.n_levels is None:
        raise ValueError("Hamiltonian carries no level metadata")
    runs = []
    start = [h.index_of_level(-d) for d in range(1, 1 + int(np.sum(h.levels < 0)))]
    end = [
        h.index_of_level(h.n_levels + d)
        for d in range(1, 1 + int(np.sum(h.levels > h.n_levels)))
    ]
    for sites in (start, end):
        if len(sites) >= 50:
            runs.append(np.asarray(sites))
    if not runs:
        raise ValueError("bound-state scan needs a runway of length >= 50")
    w, vecs = h.eigh()
    out = []
    for idx in np.flatnonzero((w >= 4.0 + 1e-6) & (w <= 6.0)):
        tails = [vecs[r, idx] for r in runs]
        tail = max(tails, key=lambda v: np.linalg.norm(v))
        if np.linalg.norm(tail) < 1e-12:
            out.append(BoundState(float(w[idx]), np.nan, np.inf))
            continue
        alpha, resid = _fit_staggered_decay(tail)
        out.append(BoundState(float(w[idx]), alpha, resid))
    return out


def _fit_staggered_decay(tail: np.ndarray) -> tuple[float, float]:
    v = np.real(tail)  # eigenvectors of a real symmetric matrix
    mags = np.abs(v)
    # restrict to the clean decay region: the outer truncation end admixes a
    # growing e^{+alpha d} component of relative size e^{-2 alpha (L - d)}
    usable = np.flatnonzero(mags > mags.max() * 1e-5)
    usable = usable[usable < len(v) // 2]
    if len(usable) < 3:
        return np.nan, np.inf
    d = usable.astype(float) + 1.0
    slope, intercept = np.polyfit(d, np.log(mags[usable]), 1)
    # v_d / ((-1)^d e^{-alpha d}) should be one constant; its spread is the misfit
    coef = v[usable] * (-1.0) ** d / np.exp(intercept + slope * d)
    resid = float(np.std(coef) / max(abs(np.mean(coef)), 1e-300))
    return float(-slope), resid
