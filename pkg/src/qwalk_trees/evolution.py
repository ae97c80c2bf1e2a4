"""Classical (Markov) and quantum propagation on graph Hamiltonians.

Both evolutions share one engine: a cached dense eigendecomposition below
``DENSE_PROP_LIMIT`` sites, and a Chebyshev expansion of the matrix
exponential above it. The Chebyshev path carries a rigorous truncation
bound derived from |J_k(z)| <= (z/2)^k / k! on the Gershgorin interval.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.special import gammaln, ive, jv

from .hamiltonian import GraphHamiltonian

DENSE_PROP_LIMIT = 2000
QUANTUM_TOL = 1e-12


@dataclass
class ProbabilityVector:
    """Classical occupation probabilities over node ids at one time."""

    values: np.ndarray
    time: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.min() < -1e-12:
            raise ValueError(f"negative probability {self.values.min():.3e}")
        if abs(self.values.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {self.values.sum()!r}, not 1")


@dataclass
class StateVector:
    """Quantum amplitudes over node ids at one time.

    ``error_bound`` reports the propagator's truncation bound for the step
    that produced this state (0 for exact/eigenbasis construction).
    """

    amplitudes: np.ndarray
    time: float
    error_bound: float = field(default=0.0, compare=False)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state norm {norm!r} deviates from 1")


@dataclass
class PenetrabilityReport:
    n: int
    mode: str
    t_grid: np.ndarray
    p_target: np.ndarray
    max_prob: float
    argmax_t: float
    norm_residuals: np.ndarray = None


def node_indicator(dim: int, index: int) -> StateVector:
    amp = np.zeros(dim, dtype=complex)
    amp[index] = 1.0
    return StateVector(amp, 0.0)


# ---------------------------------------------------------------------------
# propagation engines


def _chebyshev_coeffs(z: float, kind: str, tol: float):
    """Expansion coefficients of exp(-i z y) (quantum) or exp(-z (y+1))'s
    scaled version (classical) over y in [-1, 1], plus a rigorous tail bound.
    """
    n_terms = int(abs(z)) + 24
    while True:
        k = np.arange(n_terms + 1)
        if kind == "quantum":
            coef = (2.0 - (k == 0)) * (-1j) ** k * jv(k, z)
        else:
            coef = (2.0 - (k == 0)) * (-1.0) ** k * ive(k, z)
        tail = _bessel_tail_bound(n_terms + 1, z)
        if tail < tol or n_terms > 20 * (abs(z) + 50):
            return coef, tail
        n_terms = int(1.3 * n_terms) + 16


def _bessel_tail_bound(k0: int, z: float) -> float:
    """Upper bound for 2 * sum_{k >= k0} (z/2)^k / k! (valid once k0 > z/2)."""
    z = abs(z)
    if z == 0:
        return 0.0
    log_b = k0 * np.log(z / 2.0) - gammaln(k0 + 1)
    r = z / (2.0 * (k0 + 1))
    if r >= 0.9:
        return np.inf
    return float(2.0 * np.exp(log_b) / (1.0 - r))


def _chebyshev_apply(h: GraphHamiltonian, v: np.ndarray, t: float, kind: str, tol: float):
    lo, hi = h.gershgorin_interval()
    span = max(hi - lo, 1e-12)
    c = 0.5 * (hi + lo)
    a = 0.5 * span
    z = a * t
    coef, tail = _chebyshev_coeffs(z, kind, tol)
    if kind == "quantum":
        prefactor = np.exp(-1j * c * t)
    else:
        prefactor = np.exp(-lo * t)  # e^{-ct} I_k(z) = ive(k, z) e^{-lo t}
    mat = h.csr()

    def y_apply(x):
        return (mat @ x - c * x) / a

    t_prev = v.astype(complex if kind == "quantum" else float)
    t_cur = y_apply(t_prev)
    acc = coef[0] * t_prev + coef[1] * t_cur
    for k in range(2, len(coef)):
        t_nxt = 2.0 * y_apply(t_cur) - t_prev
        acc += coef[k] * t_nxt
        t_prev, t_cur = t_cur, t_nxt
    return prefactor * acc, tail * np.linalg.norm(v)


def _evolve_grid_dense(h: GraphHamiltonian, v0: np.ndarray, ts: np.ndarray, kind: str):
    """All-times evolution through the cached eigenbasis: (len(ts), dim)."""
    w, vecs = h.eigh()
    c = vecs.T @ v0
    if kind == "quantum":
        phases = np.exp(-1j * np.outer(ts, w))
    else:
        phases = np.exp(-np.outer(ts, w))
    return (phases * c[None, :]) @ vecs.T


def classical_propagate(h: GraphHamiltonian, start: int, t: float) -> ProbabilityVector:
    """Markov-process occupation exp(-H t) e_start at time t."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    e0 = np.zeros(h.dim)
    e0[start] = 1.0
    if h.dim <= DENSE_PROP_LIMIT:
        p = _evolve_grid_dense(h, e0, np.array([t]), "classical")[0].real
    else:
        p, _ = _chebyshev_apply(h, e0, t, "classical", 1e-12)
        p = p.real
    return ProbabilityVector(np.clip(p, 0.0, None), t)


def quantum_propagate(
    h: GraphHamiltonian, psi0: StateVector, t: float, method: str = "auto"
) -> StateVector:
    """Unitary evolution exp(-i H t) applied to psi0 (approximation <= 1e-10)."""
    v0 = psi0.amplitudes
    if method == "dense" or (method == "auto" and h.dim <= DENSE_PROP_LIMIT):
        psi = _evolve_grid_dense(h, v0.astype(complex), np.array([t]), "quantum")[0]
        bound = h.dim * np.finfo(float).eps * (1.0 + abs(t) * h.gershgorin_interval()[1])
    else:
        psi, bound = _chebyshev_apply(h, v0, t, "quantum", QUANTUM_TOL)
        if bound > 1e-10:
            raise ArithmeticError(f"propagator truncation bound {bound:.2e} exceeds 1e-10")
    return StateVector(psi, psi0.time + t, float(bound))


# ---------------------------------------------------------------------------
# reference solutions and probes


def bessel_reference(d: int, t: float) -> complex:
    """Infinite-line amplitude e^{-2it} i^d J_d(2t) for hop offset d."""
    if abs(d) > 200:
        raise ValueError("offset |d| must not exceed 200")
    if not (0 <= t <= 100):
        raise ValueError("time must lie in [0, 100]")
    return complex(np.exp(-2j * t) * (1j) ** d * jv(d, 2.0 * t))


def penetrability_probe(
    h: GraphHamiltonian, mode: str, t_max: float, dt: float = 0.1, start_index: int | None = None
) -> PenetrabilityReport:
    """Sample the target-node probability on a uniform time grid.

    The target is the unique level-n site; evolution starts at the root
    (level 0) unless ``start_index`` overrides it.
    """
    if mode not in ("classical", "quantum"):
        raise ValueError("mode must be 'classical' or 'quantum'")
    if h.n_levels is None:
        raise ValueError("Hamiltonian carries no level metadata")
    target = h.index_of_level(h.n_levels)
    start = h.index_of_level(0) if start_index is None else start_index
    ts = np.arange(0.0, t_max + dt / 2.0, dt)
    v0 = np.zeros(h.dim)
    v0[start] = 1.0
    if h.dim <= DENSE_PROP_LIMIT:
        states = _evolve_grid_dense(h, v0.astype(complex), ts, mode)
        if mode == "classical":
            p = states[:, target].real
            resid = np.abs(states.real.sum(axis=1) - 1.0)
        else:
            p = np.abs(states[:, target]) ** 2
            resid = np.abs((np.abs(states) ** 2).sum(axis=1) - 1.0)
    else:
        p = np.empty(len(ts))
        resid = np.empty(len(ts))
        state = v0.astype(complex if mode == "quantum" else float)
        for i in range(len(ts)):
            if i:
                state, _ = _chebyshev_apply(h, state, dt, mode, 1e-12)
            if mode == "quantum":
                p[i] = abs(state[target]) ** 2
                resid[i] = abs((np.abs(state) ** 2).sum() - 1.0)
            else:
                p[i] = state[target].real
                resid[i] = abs(state.real.sum() - 1.0)
    imax = int(np.argmax(p))
    return PenetrabilityReport(
        h.n_levels, mode, ts, p, float(p[imax]), float(ts[imax]), resid
    )


def cauchy_relation_check(
    h: GraphHamiltonian, a: int, b: int, t: float, t_cut: float, dt: float = 0.005
) -> float:
    """|quadrature of (1/pi) Re int_0^{T} A(t')/(t - i t') dt' - p(t)|.

    The E=0 mode is completed analytically: its truncated-integral remainder
    plus the half-weight boundary term are added before comparing against
    the classical p(t). The residual discrepancy comes from the oscillatory
    tails of the E>0 modes and shrinks as t_cut grows.
    """
    if t <= 0:
        raise ValueError("divergent quadrature: need t > 0")
    if t_cut <= t:
        raise ValueError("t_cut must exceed t")
    w, vecs = h.eigh()
    wt = vecs[b, :] * vecs[a, :]
    p_t = float((wt * np.exp(-w * t)).sum())
    w0 = float(wt[np.abs(w) < 1e-12].sum())
    ts = np.arange(0.0, t_cut + dt / 2.0, dt)
    amp = (wt[None, :] * np.exp(-1j * np.outer(ts, w))).sum(axis=1)
    integrand = (amp / (t - 1j * ts)).real
    if not np.all(np.isfinite(integrand)):
        raise ArithmeticError("divergent quadrature detected")
    quad = simpson(integrand, x=ts) / np.pi
    zero_mode_tail = w0 * (0.5 - np.arctan(t_cut / t) / np.pi)
    boundary_half_weight = 0.5 * w0
    return abs(quad + zero_mode_tail + boundary_half_weight - p_t)


def write_evolution_csv(path, ts, probs, norm_residuals, version: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# qwalk-trees v{version}\n")
        fh.write("t,prob_target,norm_residual\n")
        for t, p, r in zip(ts, probs, norm_residuals):
            fh.write(f"{t!r},{p!r},{r!r}\n")
