"""Transfer matrices, Lyapunov exponents, Dirichlet DOS and spectral geometry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._transfer import discriminant, transfer_product
from .exceptions import ValidationError
from .floquet import BandSet, band_structure, integrated_dos
from .lattice import LimitPeriodicFamily, Operator, PeriodicJacobi, as_periodic


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    z: complex
    n: int
    m: np.ndarray

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.m))


def transfer(J: Operator, z, n: int) -> TransferMatrix:
    """``A_z(n) = T_n ... T_1`` with ``T_k = (1/a_k) [[z - b_k, -1], [a_k^2, 0]]``.

    Maps ``(u_1, a_0 u_0)`` to ``(u_{n+1}, a_n u_n)`` for any solution of
    ``J u = z u``.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"step count must be a positive integer, got {n!r}")
    P = as_periodic(J)
    sites = np.arange(1, n + 1)
    m = transfer_product(P.a_at(sites), P.b_at(sites), np.asarray(z))
    return TransferMatrix(z, int(n), m)


def lyapunov(J: Operator, z):
    """``L(z) = (1/q) log max(|mu_+|, |mu_-|, 1)`` from the one-period monodromy.

    ``mu_pm`` are the roots of ``mu^2 - Delta(z) mu + 1``. Vectorised over ``z``;
    a family is represented by its deepest stage.
    """
    P = as_periodic(J)
    z = np.asarray(z)
    scalar = z.ndim == 0
    tr = discriminant(P.a, P.b, np.atleast_1d(z).astype(complex))
    root = np.sqrt(tr * tr - 4.0 + 0j)
    mu = np.maximum(np.abs(tr + root), np.abs(tr - root)) / 2.0
    out = np.log(np.maximum(mu, 1.0)) / P.q
    return float(out[0]) if scalar else out


def lyapunov_vanishing_scan(
    F: Operator, energies=None, tol: float = 1e-6, per_band: int = 200
) -> float:
    """Fraction of band-interior energies of the deepest stage with ``L < tol``."""
    P = as_periodic(F)
    bands = band_structure(P)
    if energies is None:
        u = (np.arange(per_band) + 0.5) / per_band
        energies = np.concatenate([lo + (hi - lo) * u for lo, hi in bands.bands if hi > lo])
    energies = np.asarray(energies, float)
    inside = np.any(
        (energies[:, None] > bands.alpha) & (energies[:, None] < bands.beta), axis=1
    )
    e = energies[inside]
    if e.size == 0:
        raise ValidationError("no grid energies inside the bands")
    return float(np.mean(lyapunov(P, e) < tol))


@dataclass(frozen=True, eq=False)
class DirichletDOS:
    """Empirical eigenvalue CDF of an ``n``-site Dirichlet truncation."""

    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def cdf(self, E):
        return np.searchsorted(self.eigenvalues, np.asarray(E, float), side="right") / self.n

    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.eigenvalues)))


def dirichlet_dos(J: Operator, n: int) -> DirichletDOS:
    """Eigenvalues of ``J`` restricted to sites ``1 .. n``."""
    from scipy.linalg import eigvalsh_tridiagonal

    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise ValidationError("n must be an integer >= 2")
    P = as_periodic(J)
    sites = np.arange(1, n + 1)
    ev = eigvalsh_tridiagonal(P.b_at(sites).astype(float), P.a_at(sites[:-1]).astype(float))
    return DirichletDOS(np.sort(ev))


def dos_sup_distance(J: Operator, n: int, bands: BandSet | None = None) -> float:
    """Kolmogorov distance between the Dirichlet CDF and the Floquet IDS."""
    P = as_periodic(J)
    d = dirichlet_dos(P, n)
    f = integrated_dos(P, bands, d.eigenvalues)
    i = np.arange(1, d.n + 1)
    return float(max(np.max(np.abs(i / d.n - f)), np.max(np.abs((i - 1) / d.n - f))))


def _intervals(S: BandSet) -> np.ndarray:
    return S.merged(0.0)[0]


def _dist_to(x: np.ndarray, iv: np.ndarray) -> np.ndarray:
    lo, hi = iv[:, 0], iv[:, 1]
    d = np.maximum(np.maximum(lo[None, :] - x[:, None], x[:, None] - hi[None, :]), 0.0)
    return d.min(axis=1)


def _directed(S1: np.ndarray, S2: np.ndarray) -> float:
    # sup over S1 of dist(., S2) is attained at an endpoint of S1 or a gap midpoint of S2
    cand = [S1.ravel()]
    mids = 0.5 * (S2[:-1, 1] + S2[1:, 0])
    inside = np.any((mids[:, None] >= S1[:, 0]) & (mids[:, None] <= S1[:, 1]), axis=1)
    cand.append(mids[inside])
    x = np.concatenate(cand)
    return float(np.max(_dist_to(x, S2)))


def hausdorff_distance(S1: BandSet, S2: BandSet) -> float:
    """Exact Hausdorff distance between two finite unions of closed intervals."""
    a, b = _intervals(S1), _intervals(S2)
    if a.size == 0 or b.size == 0:
        raise ValidationError("Hausdorff distance needs nonempty sets")
    return max(_directed(a, b), _directed(b, a))


def ball_measure(S: BandSet, x, delta: float) -> np.ndarray:
    """``|[x - delta, x + delta] intersected with S|`` exactly."""
    iv = _intervals(S)
    x = np.atleast_1d(np.asarray(x, float))
    lo = np.maximum(iv[None, :, 0], (x - delta)[:, None])
    hi = np.minimum(iv[None, :, 1], (x + delta)[:, None])
    return np.clip(hi - lo, 0.0, None).sum(axis=1)


def min_ball_ratio(S: BandSet, delta: float, normalization: str = "delta") -> float:
    """``min_{x in S} |B_delta(x) cap S| / delta`` (or ``/(2 delta)``).

    The measure is piecewise linear in ``x`` with kinks where ``x +- delta``
    crosses an endpoint, so the minimum over ``S`` is attained among the
    endpoints ``e`` and the shifts ``e +- delta`` that lie in ``S``.
    """
    if not delta > 0:
        raise ValidationError("delta must be positive")
    if normalization not in ("delta", "diameter"):
        raise ValidationError("normalization must be 'delta' or 'diameter'")
    iv = _intervals(S)
    e = iv.ravel()
    cand = np.concatenate([e, e - delta, e + delta])
    cand = cand[np.any((cand[:, None] >= iv[:, 0]) & (cand[:, None] <= iv[:, 1]), axis=1)]
    scale = delta if normalization == "delta" else 2.0 * delta
    return float(np.min(ball_measure(S, cand, delta)) / scale)


def homogeneity_scan(S: BandSet, deltas, normalization: str = "delta") -> np.ndarray:
    """Minimum ball ratio for each ``delta``."""
    return np.array([min_ball_ratio(S, float(d), normalization) for d in np.atleast_1d(deltas)])


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Spectrum of a periodic operator, or of every stage of a family."""

    bands: BandSet
    stage_bands: tuple

    @property
    def measure(self) -> float:
        return self.bands.measure


def spectrum_estimate(J: Operator) -> SpectrumEstimate:
    if isinstance(J, LimitPeriodicFamily):
        stages = tuple(band_structure(st) for st in J.stages)
        return SpectrumEstimate(stages[-1], stages)
    if isinstance(J, PeriodicJacobi):
        b = band_structure(J)
        return SpectrumEstimate(b, (b,))
    raise ValidationError("expected a PeriodicJacobi or LimitPeriodicFamily")
