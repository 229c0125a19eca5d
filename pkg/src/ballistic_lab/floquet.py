"""Floquet fibers, the q-adic Fourier transform, bands and density of states.

For a ``q``-periodic operator the transform ``delta_{j + l q} -> e^{-i l theta} e_j``
conjugates ``J`` to multiplication by the ``q x q`` fiber ``J_theta`` and
``A = i[J, X]`` to ``A_theta``. All theta grids used here are midpoint grids
``theta_m = 2 pi (m + 1/2) / M``, which never contain ``0`` or ``pi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from ._transfer import discriminant
from .exceptions import (
    FiberDegeneracyError,
    OrderingError,
    ResolutionError,
    UndefinedFiberError,
    ValidationError,
)
from .lattice import Operator, PeriodicJacobi, WavePacket, as_periodic

GAP_CLOSED_TOL = 1e-9
DEGENERACY_TOL = 1e-13


def theta_grid(M: int) -> np.ndarray:
    """Midpoint grid ``2 pi (m + 1/2) / M``, ``m = 0 .. M-1``."""
    if M < 1:
        raise ValidationError("grid size must be positive")
    return 2.0 * np.pi * (np.arange(M) + 0.5) / M


def _on_axis(theta) -> np.ndarray:
    return np.abs(np.sin(np.asarray(theta, float))) < 1e-14


def fiber_matrices(J: PeriodicJacobi, thetas):
    """Stacked ``J_theta``, ``A_theta`` and ``dJ_theta / dtheta``.

    Bond ``k`` couples fiber slot ``k`` to slot ``k + 1``; the last bond wraps
    to slot 1 and picks up ``e^{i theta}``. For ``q = 1, 2`` the wrapped bond
    lands on an entry already in use, which reproduces the collapsed small-q
    forms (``b + 2a cos theta`` and ``a_1 + e^{-i theta} a_2``).
    """
    thetas = np.atleast_1d(np.asarray(thetas, float))
    q = J.q
    shape = thetas.shape + (q, q)
    jt = np.zeros(shape, complex)
    at = np.zeros(shape, complex)
    dj = np.zeros(shape, complex)
    idx = np.arange(q)
    jt[..., idx, idx] = J.b
    phase = np.exp(1j * thetas)
    for i in range(q):
        t = (i + 1) % q
        a = J.a[i]
        if i == q - 1:
            ph = phase
            dph = 1j * phase
        else:
            ph = np.ones_like(phase)
            dph = np.zeros_like(phase)
        jt[..., i, t] += a * ph
        jt[..., t, i] += a * np.conj(ph)
        at[..., i, t] += 1j * a * ph
        at[..., t, i] += -1j * a * np.conj(ph)
        dj[..., i, t] += a * dph
        dj[..., t, i] += a * np.conj(dph)
    return jt, at, dj


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    # largest-modulus component of each column made real positive (first wins ties)
    mag = np.abs(vectors)
    k = np.argmax(mag, axis=-2)
    pick = np.take_along_axis(vectors, k[..., None, :], axis=-2)
    ph = pick / np.abs(pick)
    out = vectors * np.conj(ph)
    np.put_along_axis(out, k[..., None, :], np.abs(pick), axis=-2)
    return out


@dataclass(frozen=True, eq=False)
class FiberStack:
    """Eigensystems of ``J_theta`` on a grid of thetas (leading axis)."""

    thetas: np.ndarray
    j_theta: np.ndarray
    a_theta: np.ndarray
    lambdas: np.ndarray
    vectors: np.ndarray
    lambda_dots: np.ndarray

    @property
    def q(self) -> int:
        return self.lambdas.shape[-1]

    def a_eigenbasis(self) -> np.ndarray:
        """``<v_j, A_theta v_k>`` for every grid point."""
        vh = np.conj(np.swapaxes(self.vectors, -1, -2))
        return vh @ self.a_theta @ self.vectors

    def q_matrices(self) -> np.ndarray:
        """``Q_theta = q sum_j lambda_dot_j P_j`` for every grid point."""
        v = self.vectors
        vh = np.conj(np.swapaxes(v, -1, -2))
        return (v * (self.q * self.lambda_dots)[..., None, :]) @ vh


def fiber_stack(J: Operator, thetas, check_simple: bool = True) -> FiberStack:
    J = as_periodic(J)
    thetas = np.atleast_1d(np.asarray(thetas, float))
    jt, at, dj = fiber_matrices(J, thetas)
    lam, vec = np.linalg.eigh(jt)
    vec = _fix_phases(vec)
    ldot = np.real(np.einsum("...ij,...ik,...kj->...j", np.conj(vec), dj, vec))
    if check_simple and J.q > 1:
        gaps = np.diff(lam, axis=-1).min(axis=-1)
        scale = max(1.0, J.norm_bound)
        bad = (gaps <= DEGENERACY_TOL * scale) & ~_on_axis(thetas)
        if np.any(bad):
            th = thetas[np.flatnonzero(bad)[0]]
            raise FiberDegeneracyError(
                f"fiber at theta={th:.17g} has a repeated eigenvalue; "
                "coefficients are pathological or theta is too close to 0 or pi"
            )
    return FiberStack(thetas, jt, at, lam, vec, ldot)


@dataclass(frozen=True, eq=False)
class FloquetFiber:
    """One fiber: ``J_theta``, ``A_theta``, sorted eigenpairs and ``lambda_dot``."""

    theta: float
    j_theta: np.ndarray
    a_theta: np.ndarray
    lambdas: np.ndarray
    vectors: np.ndarray
    lambda_dots: np.ndarray

    @property
    def q(self) -> int:
        return self.lambdas.size

    def to_dict(self) -> dict:
        def cplx(m):
            return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}

        return {
            "theta": self.theta,
            "j_theta": cplx(self.j_theta),
            "a_theta": cplx(self.a_theta),
            "lambdas": self.lambdas.tolist(),
            "vectors": cplx(self.vectors),
            "lambda_dots": self.lambda_dots.tolist(),
        }


def build_fiber(J: Operator, theta: float) -> FloquetFiber:
    """Fiber matrices and eigen-data at one quasi-momentum.

    Eigenvalue derivatives come from Hellmann-Feynman,
    ``lambda_dot_j = <v_j, (d/dtheta J_theta) v_j>``.
    """
    theta = float(theta)
    if not 0.0 <= theta < 2.0 * np.pi:
        raise ValidationError(f"theta must lie in [0, 2pi), got {theta!r}")
    st = fiber_stack(J, [theta])
    return FloquetFiber(
        theta, st.j_theta[0], st.a_theta[0], st.lambdas[0], st.vectors[0], st.lambda_dots[0]
    )


def fiber_q(f: FloquetFiber) -> np.ndarray:
    """``Q_theta = q sum_j lambda_dot_j v_j v_j^*``; undefined at 0 and pi."""
    if _on_axis(f.theta):
        raise UndefinedFiberError(f"Q_theta is undefined at theta={f.theta!r}")
    v = f.vectors
    return (v * (f.q * f.lambda_dots)) @ np.conj(v.T)


# ---------------------------------------------------------------------------
# q-adic Fourier transform


def _packet_blocks(phi: WavePacket, q: int):
    sites = phi.sites
    ell = (sites - 1) // q
    j = (sites - 1) % q
    l_min = int(ell.min())
    blocks = np.zeros((int(ell.max()) - l_min + 1, q), complex)
    blocks[ell - l_min, j] = phi.amplitudes
    return l_min, blocks


def fourier_forward(phi: WavePacket, q: int, thetas) -> np.ndarray:
    """``[F_q phi](theta) = sum_l e^{-i l theta} (phi_{1+lq}, ..., phi_{q+lq})``.

    ``thetas`` is either an explicit array or an integer ``M`` meaning the
    midpoint grid of size ``M`` (evaluated by FFT). Returns shape ``(M, q)``.
    """
    l_min, blocks = _packet_blocks(phi, q)
    ell = l_min + np.arange(blocks.shape[0])
    if np.ndim(thetas) == 0:
        M = int(thetas)
        theta_grid(M)
        g = np.zeros((M, q), complex)
        np.add.at(g, ell % M, blocks * np.exp(-1j * np.pi * ell / M)[:, None])
        return np.fft.fft(g, axis=0)
    thetas = np.asarray(thetas, float)
    return np.exp(-1j * np.outer(thetas, ell)) @ blocks


def fourier_inverse(vectors: np.ndarray, q: int, ell_range=None) -> WavePacket:
    """Left inverse of :func:`fourier_forward` on the midpoint grid.

    ``vectors`` has shape ``(M, q)`` sampled on ``theta_grid(M)``. Cells
    ``l`` in ``ell_range`` (inclusive pair, default the ``M`` cells centred
    on zero) are recovered; more than ``M`` cells cannot be resolved.
    """
    vectors = np.asarray(vectors, complex)
    M = vectors.shape[0]
    if vectors.shape[1:] != (q,):
        raise ValidationError(f"expected vectors of shape (M, {q}), got {vectors.shape}")
    if ell_range is None:
        l_lo = -(M // 2)
        l_hi = l_lo + M - 1
    else:
        l_lo, l_hi = int(ell_range[0]), int(ell_range[1])
    if l_hi - l_lo + 1 > M:
        raise ResolutionError(
            f"grid of {M} points cannot resolve {l_hi - l_lo + 1} cells; increase M"
        )
    ell = np.arange(l_lo, l_hi + 1)
    coeffs = np.fft.ifft(vectors, axis=0)[ell % M] * np.exp(1j * np.pi * ell / M)[:, None]
    return WavePacket(1 + l_lo * q, coeffs.reshape(-1))


# ---------------------------------------------------------------------------
# bands and density of states


@dataclass(frozen=True, eq=False)
class BandSet:
    """Union of closed bands ``[alpha_j, beta_j]`` with gap critical points.

    ``crit[j]`` lies in the closed gap ``[beta_j, alpha_{j+1}]``.
    """

    bands: np.ndarray
    crit: np.ndarray
    increasing: np.ndarray = None

    def __post_init__(self):
        bands = np.asarray(self.bands, float).reshape(-1, 2)
        if bands.size == 0:
            raise ValidationError("a band set needs at least one band")
        if np.any(bands[:, 1] < bands[:, 0]):
            raise ValidationError("band endpoints must be ordered")
        crit = np.asarray(self.crit, float).reshape(-1)
        inc = self.increasing
        if inc is not None:
            inc = np.asarray(inc, bool)
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "crit", crit)
        object.__setattr__(self, "increasing", inc)

    @classmethod
    def from_intervals(cls, intervals) -> "BandSet":
        """Band set from bare intervals (merged and sorted; midpoints as crit)."""
        iv = sorted((float(lo), float(hi)) for lo, hi in intervals)
        merged = [list(iv[0])]
        for lo, hi in iv[1:]:
            if lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        m = np.array(merged)
        crit = 0.5 * (m[:-1, 1] + m[1:, 0])
        return cls(m, crit)

    @property
    def alpha(self) -> np.ndarray:
        return self.bands[:, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.bands[:, 1]

    def gap_open(self, tol: float = GAP_CLOSED_TOL) -> np.ndarray:
        return self.alpha[1:] - self.beta[:-1] > tol

    def merged(self, tol: float = GAP_CLOSED_TOL):
        """Bands joined across closed gaps, and the crit points of open gaps."""
        open_ = self.gap_open(tol)
        out = [list(self.bands[0])]
        for j, is_open in enumerate(open_):
            if is_open:
                out.append(list(self.bands[j + 1]))
            else:
                out[-1][1] = max(out[-1][1], self.bands[j + 1, 1])
        return np.array(out), self.crit[open_]

    @property
    def measure(self) -> float:
        m, _ = self.merged(0.0)
        return float(np.sum(m[:, 1] - m[:, 0]))

    def contains(self, E) -> np.ndarray:
        E = np.asarray(E, float)
        m, _ = self.merged(0.0)
        return np.any((E[..., None] >= m[:, 0]) & (E[..., None] <= m[:, 1]), axis=-1)

    def rows(self):
        """CSV rows ``(alpha_j, beta_j, x_j)``; the last band has no ``x``."""
        out = []
        for j, (lo, hi) in enumerate(self.bands):
            x = self.crit[j] if j < self.crit.size else None
            out.append((lo, hi, x))
        return out


def band_structure(J: Operator, M: int = 256) -> BandSet:
    """Bands from the periodic and antiperiodic eigenvalues.

    Edges are the eigenvalues of ``J_0`` and ``J_pi``; a midpoint sweep of
    ``M`` thetas only validates that each ``lambda_j(theta)`` stays inside its
    band. Critical points ``x_j`` are zeros of ``Delta'`` inside open gaps.
    """
    J = as_periodic(J)
    if M < 2 * J.q:
        raise ValidationError(f"sweep grid must have at least 2q={2 * J.q} points")
    lam0 = np.linalg.eigvalsh(fiber_matrices(J, [0.0])[0][0])
    lampi = np.linalg.eigvalsh(fiber_matrices(J, [np.pi])[0][0])
    alpha = np.minimum(lam0, lampi)
    beta = np.maximum(lam0, lampi)
    scale = max(1.0, J.norm_bound)
    tol = 1e-10 * scale
    if np.any(beta[:-1] > alpha[1:] + tol):
        raise OrderingError("bands overlap; periodic/antiperiodic eigenvalues misordered")
    beta[:-1] = np.minimum(beta[:-1], alpha[1:])
    sweep = fiber_stack(J, theta_grid(M), check_simple=False).lambdas
    if np.any(sweep < alpha - 1e-9 * scale) or np.any(sweep > beta + 1e-9 * scale):
        raise OrderingError("theta sweep leaves the band edges; fiber eigenvalues misordered")
    crit = np.empty(J.q - 1)
    for j in range(J.q - 1):
        lo, hi = beta[j], alpha[j + 1]
        if hi - lo <= GAP_CLOSED_TOL:
            crit[j] = lo
            continue
        crit[j] = _gap_critical_point(J, lo, hi)
    return BandSet(np.column_stack([alpha, beta]), crit, lam0 < lampi)


def _gap_critical_point(J: PeriodicJacobi, lo: float, hi: float) -> float:
    def dd(E):
        return float(np.real(discriminant(J.a, J.b, np.array(E), True)[1]))

    f_lo, f_hi = dd(lo), dd(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        # bracket lost to rounding in a nearly closed gap: fall back to |Delta| extremum
        sgn = np.sign(float(np.real(discriminant(J.a, J.b, np.array(0.5 * (lo + hi))))))
        res = optimize.minimize_scalar(
            lambda E: -sgn * float(np.real(discriminant(J.a, J.b, np.array(E)))),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-14},
        )
        return float(res.x)
    return float(optimize.brentq(dd, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _resolve_bands(J, bands):
    if bands is None:
        if J is None:
            raise ValidationError("need either an operator or a band set")
        return band_structure(J)
    return bands


def dos_density(J, bands: BandSet | None, E):
    """``dk/dE`` from the explicit product formula.

    Closed gaps are cancelled before evaluation. Outside the spectrum the
    density is ``0.0`` (a value, not an error).
    """
    bands = _resolve_bands(J, bands)
    m, x = bands.merged()
    E = np.asarray(E, float)
    scalar = E.ndim == 0
    E = np.atleast_1d(E)
    inside = np.any((E[:, None] > m[:, 0]) & (E[:, None] < m[:, 1]), axis=1)
    out = np.zeros(E.shape)
    Ei = E[inside]
    if Ei.size:
        log_num = np.sum(np.log(np.abs(Ei[:, None] - x[None, :])), axis=1) if x.size else 0.0
        log_den = np.sum(
            np.log(np.abs(Ei[:, None] - m[None, :, 0])) + np.log(np.abs(Ei[:, None] - m[None, :, 1])),
            axis=1,
        )
        out[inside] = np.exp(log_num - 0.5 * log_den) / np.pi
    return float(out[0]) if scalar else out


def _band_integrand(m: np.ndarray, x: np.ndarray, r: int):
    lo, hi = m[r]
    others = np.delete(m, r, axis=0)

    def g(u):
        E = lo + 0.5 * (hi - lo) * (1.0 - np.cos(u))
        val = 1.0 / np.pi
        if x.size:
            val *= np.prod(np.abs(E - x))
        if others.size:
            val /= np.sqrt(np.prod(np.abs(E - others[:, 0]) * np.abs(E - others[:, 1])))
        return val

    return g


def dos_interval(J, bands: BandSet | None, interval) -> float:
    """``k(I)`` by quadrature of :func:`dos_density`.

    Each band ``[alpha, beta]`` is mapped by ``E = alpha + (beta - alpha)(1 -
    cos u)/2``, which absorbs the inverse-square-root edge singularities.
    """
    bands = _resolve_bands(J, bands)
    lo_i, hi_i = float(interval[0]), float(interval[1])
    if hi_i < lo_i:
        raise ValidationError("interval endpoints must be ordered")
    m, x = bands.merged()
    total = 0.0
    for r, (lo, hi) in enumerate(m):
        a, b = max(lo, lo_i), min(hi, hi_i)
        if a >= b:
            continue

        def to_u(E, lo=lo, hi=hi):
            return float(np.arccos(np.clip(1.0 - 2.0 * (E - lo) / (hi - lo), -1.0, 1.0)))

        val, _ = integrate.quad(
            _band_integrand(m, x, r), to_u(a), to_u(b), limit=200, epsabs=1e-13, epsrel=1e-12
        )
        total += val
    return float(total)


def integrated_dos(J: Operator, bands: BandSet | None, E):
    """``k((-inf, E])`` through the rotation number ``theta = arccos(Delta/2)``.

    Independent of the product formula: uses only the discriminant and the
    monotonicity of each ``lambda_j`` on ``[0, pi]``.
    """
    P = as_periodic(J)
    bands = bands if bands is not None and bands.increasing is not None else band_structure(P)
    E = np.asarray(E, float)
    scalar = E.ndim == 0
    E = np.atleast_1d(E)
    q = P.q
    out = np.empty(E.shape)
    delta = np.real(discriminant(P.a, P.b, E))
    theta = np.arccos(np.clip(delta / 2.0, -1.0, 1.0))
    alpha, beta = bands.alpha, bands.beta
    for i, e in enumerate(E):
        if e <= alpha[0]:
            out[i] = 0.0
            continue
        if e >= beta[-1]:
            out[i] = 1.0
            continue
        hit = np.flatnonzero((e >= alpha) & (e <= beta))
        if hit.size == 0:
            out[i] = float(np.searchsorted(beta, e)) / q
            continue
        j = hit[0]
        if e == alpha[j] or e == beta[j]:
            # arccos is sqrt-sensitive at the edges; use the exact count there
            out[i] = (j + float(e == beta[j])) / q
            continue
        frac = theta[i] / np.pi if bands.increasing[j] else 1.0 - theta[i] / np.pi
        out[i] = (j + frac) / q
    return float(out[0]) if scalar else out


def dos_interval_rotation(J: Operator, bands: BandSet | None, interval) -> float:
    """``k(I)`` as a difference of :func:`integrated_dos` values."""
    lo, hi = interval
    return float(integrated_dos(J, bands, hi) - integrated_dos(J, bands, lo))


def dos_constant_witness(bands: BandSet) -> float:
    """``C`` with ``k(I) <= C^q |I|^{1/2}`` for every interval ``I``.

    Within band ``r`` the density is dominated by
    ``1/(pi sqrt((E - alpha_r)(beta_r - E)))``, whose mass on any subinterval
    of length ``s`` is at most ``sqrt(s / len_r)``; summing over bands gives
    ``C^q = sum_r len_r^{-1/2}``.
    """
    lengths = bands.beta - bands.alpha
    q = lengths.size
    return float(np.sum(lengths ** -0.5) ** (1.0 / q))


def eigenderivative_witness(J: Operator, M: int = 1024, bands: BandSet | None = None) -> float:
    """Empirical ``C3`` for this operator.

    The larger of ``(min |lambda_dot| / |sin theta|)^{-1/q}`` over a midpoint
    grid and ``(2 / min band length)^{1/q}``, floored at 1. Measured per
    operator; not certified uniform over a class.
    """
    P = as_periodic(J)
    st = fiber_stack(P, theta_grid(M), check_simple=False)
    ratio = np.min(np.abs(st.lambda_dots) / np.abs(np.sin(st.thetas))[:, None])
    bands = band_structure(P) if bands is None else bands
    min_len = float(np.min(bands.beta - bands.alpha))
    q = P.q
    c = max(ratio ** (-1.0 / q), (2.0 / min_len) ** (1.0 / q), 1.0)
    return float(c)


def band_length_witness(stages) -> float:
    """Smallest ``C`` with every band of stage ``n`` at least ``C^{-q_n}`` long."""
    c = 1.0
    for st in stages:
        b = band_structure(st)
        c = max(c, float(np.min(b.beta - b.alpha)) ** (-1.0 / st.q))
    return c
