"""Isotropic XY chain: exact small-chain dynamics and the free-fermion reduction.

Basis convention: the first site of ``Lambda`` is the leftmost Kronecker
factor, and bit ``0`` of a site is spin up (``sigma^z = +1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .dynamics import q_fiber_sup, required_half_width
from .exceptions import ValidationError, WindowOverflowError
from .lattice import (
    LimitPeriodicFamily,
    PeriodicJacobi,
    TruncatedOperator,
    as_periodic,
    build_truncation,
)

MAX_SITES = 12

PAULI = {
    "I": np.eye(2),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "y": np.array([[0.0, -1j], [1j, 0.0]]),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}


@dataclass(frozen=True, eq=False)
class SpinChainSpec:
    """Couplings ``mu_j`` on bonds and fields ``nu_j`` on sites of ``[m, m + L - 1]``."""

    mu: np.ndarray
    nu: np.ndarray
    first_site: int = 1

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, float))
        nu = np.atleast_1d(np.asarray(self.nu, float))
        if nu.size < 1 or mu.size != nu.size - 1:
            raise ValidationError("need one field per site and one coupling per bond")
        if mu.size and mu.min() <= 0:
            raise ValidationError("couplings must be strictly positive")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(nu))):
            raise ValidationError("couplings and fields must be finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "first_site", int(self.first_site))

    @classmethod
    def uniform(cls, L: int, mu: float = 1.0, nu: float = 0.0) -> "SpinChainSpec":
        return cls(np.full(L - 1, mu), np.full(L, nu))

    @property
    def length(self) -> int:
        return self.nu.size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.first_site, self.first_site + self.length)

    def index(self, site: int) -> int:
        k = int(site) - self.first_site
        if not 0 <= k < self.length:
            raise ValidationError(f"site {site} is outside the chain {self.sites[[0, -1]].tolist()}")
        return k


def _check_size(spec: SpinChainSpec) -> None:
    if spec.length > MAX_SITES:
        raise ValidationError(f"chain of {spec.length} sites exceeds the exact limit {MAX_SITES}")


def _local(op: np.ndarray, k: int, L: int) -> sp.csr_matrix:
    return sp.kron(
        sp.kron(sp.identity(2**k, format="csr"), sp.csr_matrix(op)),
        sp.identity(2 ** (L - k - 1), format="csr"),
        format="csr",
    )


def build_many_body(spec: SpinChainSpec) -> sp.csr_matrix:
    """``H = -sum mu_j (X_j X_{j+1} + Y_j Y_{j+1}) - sum nu_j Z_j`` (sparse, real)."""
    _check_size(spec)
    L = spec.length
    sp_plus = np.array([[0.0, 1.0], [0.0, 0.0]])
    sp_minus = sp_plus.T
    H = sp.csr_matrix((2**L, 2**L))
    for j, m in enumerate(spec.mu):
        # XX + YY = 2 (s+ s- + s- s+)
        hop = _local(sp_plus, j, L) @ _local(sp_minus, j + 1, L)
        H = H - 2.0 * m * (hop + hop.T)
    for j, n in enumerate(spec.nu):
        H = H - n * _local(PAULI["z"], j, L)
    return H.tocsr()


def magnetization(L: int) -> np.ndarray:
    """Diagonal of ``sum_j Z_j`` in the computational basis."""
    bits = (np.arange(2**L)[:, None] >> np.arange(L - 1, -1, -1)[None, :]) & 1
    return (L - 2 * bits.sum(axis=1)).astype(float)


def _down_count(L: int) -> np.ndarray:
    return (L - magnetization(L).astype(int)) // 2


def single_excitation_block(spec: SpinChainSpec) -> np.ndarray:
    """``H`` restricted to states with one down spin, ordered by its site."""
    L = spec.length
    H = build_many_body(spec)
    idx = [1 << (L - 1 - k) for k in range(L)]
    return H[idx][:, idx].toarray()


@dataclass(frozen=True, eq=False)
class OneParticleHamiltonian:
    """Hopping ``2 mu``, onsite ``2 nu`` and the scalar ``offset = -sum nu``.

    The single-excitation block equals ``G H1 G + offset`` with the sign
    gauge ``G = diag((-1)^j)``; propagator magnitudes are gauge-blind.
    """

    operator: TruncatedOperator
    offset: float

    @property
    def size(self) -> int:
        return self.operator.size

    def gauge(self) -> np.ndarray:
        return (-1.0) ** np.arange(self.size)

    def sector_matrix(self) -> np.ndarray:
        g = self.gauge()
        return g[:, None] * self.operator.to_dense() * g[None, :] + self.offset * np.eye(self.size)

    @cached_property
    def _eig(self):
        return self.operator.eigensystem

    def propagator(self, t: float) -> np.ndarray:
        """``e^{-i t H1}`` (without the offset phase)."""
        w, V = self._eig
        return (V * np.exp(-1j * t * w)) @ V.T


def jordan_wigner_one_particle(spec: SpinChainSpec) -> OneParticleHamiltonian:
    op = TruncatedOperator(spec.first_site, 2.0 * spec.nu, 2.0 * spec.mu)
    return OneParticleHamiltonian(op, -float(spec.nu.sum()))


def one_particle_chain(J: PeriodicJacobi, T: float) -> OneParticleHamiltonian:
    """One-particle Hamiltonian for periodic couplings ``mu = J.a, nu = J.b``.

    The window ``[-N, N]`` is sized like an evolution plan for horizon ``T``.
    """
    H1 = PeriodicJacobi(J.q, 2.0 * J.a, 2.0 * J.b)
    N = required_half_width(H1, T)
    op = build_truncation(H1, N)
    return OneParticleHamiltonian(op, -0.5 * float(op.diag.sum()))


class _Evolver:
    # eigen-decomposition of H restricted to the blocks of a conserved diagonal label
    def __init__(self, H: sp.csr_matrix, labels: np.ndarray):
        self.blocks = []
        for lab in np.unique(labels):
            idx = np.flatnonzero(labels == lab)
            w, V = np.linalg.eigh(H[idx][:, idx].toarray())
            self.blocks.append((idx, w, V))


def _spec_cache(spec: SpinChainSpec, key: str, build):
    cache = spec.__dict__.setdefault("_cache", {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def commutator_norm(spec: SpinChainSpec, A: tuple, B: tuple, t: float) -> float:
    """``|| [e^{itH} A_j e^{-itH}, B_k] ||`` for single-site Paulis ``(site, label)``.

    ``z``-``z`` pairs are done sector by sector (``H`` conserves the
    magnetization); other labels use one dense eigendecomposition.
    """
    _check_size(spec)
    (j, la), (k, lb) = A, B
    if la not in PAULI or lb not in PAULI:
        raise ValidationError(f"Pauli labels must be among {sorted(PAULI)}")
    if int(j) == int(k):
        raise ValidationError("the two observables must sit on different sites")
    jj, kk = spec.index(j), spec.index(k)
    if la == "I" or lb == "I":
        return 0.0
    L = spec.length
    a_op = _local(PAULI[la], jj, L)
    b_op = _local(PAULI[lb], kk, L)
    if la == "z" and lb == "z":
        ev = _spec_cache(
            spec, "sectors", lambda: _Evolver(build_many_body(spec), _down_count(L))
        )
        a_diag, b_diag = a_op.diagonal(), b_op.diagonal()
        best = 0.0
        for idx, w, V in ev.blocks:
            U = (V * np.exp(1j * t * w)) @ V.T
            At = U @ (a_diag[idx][:, None] * np.conj(U.T))
            C = At * b_diag[idx][None, :] - b_diag[idx][:, None] * At
            best = max(best, float(np.max(np.abs(np.linalg.eigvalsh(1j * C)))))
        return best
    ev = _spec_cache(spec, "dense", lambda: np.linalg.eigh(build_many_body(spec).toarray()))
    w, V = ev
    U = (V * np.exp(1j * t * w)) @ V.T
    At = U @ (a_op @ np.conj(U.T))
    Bd = b_op.toarray()
    C = At @ Bd - Bd @ At
    return float(np.max(np.abs(np.linalg.eigvalsh(1j * C))))


@dataclass(frozen=True, eq=False)
class LightConeReport:
    times: np.ndarray
    distances: np.ndarray
    v_hat: float
    epsilon: float


def _fit_tail_slope(times: np.ndarray, d: np.ndarray) -> float:
    half = times.size // 2
    tt, dd = times[half:], d[half:]
    if tt.size < 2:
        raise ValidationError("need at least 4 times for the velocity fit")
    return float(np.polyfit(tt, dd, 1)[0])


def light_cone_scan(
    H1: OneParticleHamiltonian, epsilon: float = 1e-3, times=None, period: int = 1, edge: int = 8
) -> LightConeReport:
    """``d_eps(t) = max{|j - k| : |(e^{-itH1})_{jk}| >= eps}`` over central sources.

    Sources are the ``period`` sites at the centre of the window. ``v_hat``
    is the least-squares slope over the last half of the time grid.
    """
    if not 0 < epsilon < 1:
        raise ValidationError("epsilon must lie in (0, 1)")
    times = np.linspace(20.0, 200.0, 40) if times is None else np.asarray(times, float)
    if np.any(np.diff(times) <= 0):
        raise ValidationError("times must be increasing")
    n = H1.size
    src = n // 2 - period // 2 + np.arange(period)
    w, V = H1._eig
    cols = V[src, :].T
    pos = np.arange(n)
    dist = np.empty(times.size)
    for i, t in enumerate(times):
        amp = np.abs((V * np.exp(-1j * t * w)) @ cols)
        d = 0
        for s in range(period):
            hit = np.flatnonzero(amp[:, s] >= epsilon)
            if hit.size == 0:
                continue
            if hit[0] < edge or hit[-1] >= n - edge:
                raise WindowOverflowError(
                    f"light cone reaches the window boundary at t={t}; enlarge the chain"
                )
            d = max(d, int(np.max(np.abs(pos[hit] - src[s]))))
        dist[i] = d
    return LightConeReport(times, dist, _fit_tail_slope(times, dist), float(epsilon))


@dataclass(frozen=True, eq=False)
class VelocityReport:
    v_hat: float
    q_ceiling: float
    margin: float
    cone: LightConeReport | None = None

    def to_dict(self) -> dict:
        return {"v_hat": self.v_hat, "q_ceiling": self.q_ceiling, "margin": self.margin}


def lr_velocity_lower_bound(
    couplings, epsilon: float = 1e-3, times=None, M: int = 1024
) -> VelocityReport:
    """Light-cone speed of the deepest coupling stage and the group-velocity ceiling.

    ``couplings`` is a :class:`PeriodicJacobi` or :class:`LimitPeriodicFamily`
    whose ``a`` carries ``mu`` and ``b`` carries ``nu``. ``margin`` is
    ``(q_ceiling - v_hat) / q_ceiling``.
    """
    P = as_periodic(couplings)
    times = np.linspace(20.0, 200.0, 40) if times is None else np.asarray(times, float)
    H1 = one_particle_chain(P, float(times[-1]))
    rep = light_cone_scan(H1, epsilon, times, period=P.q)
    ceiling = q_fiber_sup(PeriodicJacobi(P.q, 2.0 * P.a, 2.0 * P.b), M)
    return VelocityReport(rep.v_hat, ceiling, (ceiling - rep.v_hat) / ceiling, rep)


def first_crossing(times, values, threshold: float) -> float:
    """First time ``values`` reaches ``threshold``, linearly interpolated; ``nan`` if never."""
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    above = np.flatnonzero(values >= threshold)
    if above.size == 0:
        return math.nan
    i = above[0]
    if i == 0:
        return float(times[0])
    t0, t1, v0, v1 = times[i - 1], times[i], values[i - 1], values[i]
    return float(t0 + (threshold - v0) * (t1 - t0) / (v1 - v0))


@dataclass(frozen=True)
class ConeComparison:
    many_body_arrival: float
    one_particle_arrival: float
    relative_difference: float


def cone_arrival_comparison(
    spec: SpinChainSpec, epsilon: float = 1e-2, times=None, epsilon_prime: float | None = None
) -> ConeComparison:
    """Arrival of ``||[Z_first(t), Z_last]||`` at ``epsilon`` versus ``|U_{1L}|^2`` at ``epsilon'``.

    For one excitation the commutator norm is ``4|u| sqrt(1 - |u|^2)`` with
    ``u`` the end-to-end propagator entry, so ``epsilon' = (epsilon/4)^2``
    is the matched default.
    """
    L = spec.length
    times = np.linspace(0.0, 1.5 * L, 30 * L + 1) if times is None else np.asarray(times, float)
    eps_p = (epsilon / 4.0) ** 2 if epsilon_prime is None else epsilon_prime
    first, last = spec.sites[0], spec.sites[-1]
    mb = np.array([commutator_norm(spec, (first, "z"), (last, "z"), t) for t in times])
    H1 = jordan_wigner_one_particle(spec)
    op = np.array([abs(H1.propagator(t)[0, -1]) ** 2 for t in times])
    t_mb = first_crossing(times, mb, epsilon)
    t_op = first_crossing(times, op, eps_p)
    return ConeComparison(t_mb, t_op, abs(t_mb - t_op) / max(t_mb, t_op))
