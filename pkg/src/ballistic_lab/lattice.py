"""Coefficient sequences, Jacobi operators, truncations and wave packets.

Site convention: lattice position ``n`` carries ``a_n`` and ``b_n`` with
``a[(n - 1) % q]`` and ``b[(n - 1) % q]``, i.e. array slot 0 is site 1.
``a_n`` couples sites ``n`` and ``n + 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import ValidationError


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PeriodicJacobi:
    """A ``q``-periodic Jacobi matrix given by one period of coefficients.

    Parameters
    ----------
    q : int
        Period.
    a : sequence of float
        Off-diagonal coefficients ``a_1 .. a_q``; all strictly positive.
    b : sequence of float
        Diagonal coefficients ``b_1 .. b_q``.
    """

    q: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        q = self.q
        if isinstance(q, bool) or not isinstance(q, (int, np.integer)) or q < 1:
            raise ValidationError(f"period q must be a positive integer, got {q!r}")
        a = _frozen(self.a)
        b = _frozen(self.b)
        if a.size != q or b.size != q:
            raise ValidationError(
                f"expected {q} coefficients, got len(a)={a.size}, len(b)={b.size}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("coefficients must be finite")
        if a.min() <= 0:
            raise ValidationError("off-diagonal coefficients must be strictly positive")
        object.__setattr__(self, "q", int(q))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def free(cls, q: int = 1) -> "PeriodicJacobi":
        """The free Laplacian ``a = 1, b = 0`` written with period ``q``."""
        return cls(q, np.ones(q), np.zeros(q))

    def a_at(self, n):
        return self.a[(np.asarray(n) - 1) % self.q]

    def b_at(self, n):
        return self.b[(np.asarray(n) - 1) % self.q]

    @property
    def norm_bound(self) -> float:
        """Upper bound ``max|b| + 2 max a`` for the operator norm."""
        return float(np.abs(self.b).max() + 2.0 * self.a.max())

    @property
    def class_bound(self) -> float:
        """Smallest ``R`` certified by the coefficients with ``J`` in J(R)."""
        return max(self.norm_bound, 1.0 / float(self.a.min()))

    def in_class(self, R: float) -> bool:
        return self.norm_bound <= R and float(self.a.min()) >= 1.0 / R

    def repeat(self, times: int) -> "PeriodicJacobi":
        """The same operator described with period ``q * times``."""
        return PeriodicJacobi(self.q * times, np.tile(self.a, times), np.tile(self.b, times))

    def to_dict(self) -> dict:
        return {"q": self.q, "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "PeriodicJacobi":
        try:
            return cls(data["q"], data["a"], data["b"])
        except KeyError as exc:
            raise ValidationError(f"periodic operator is missing field {exc.args[0]!r}") from None

    def __eq__(self, other):
        if not isinstance(other, PeriodicJacobi):
            return NotImplemented
        return (
            self.q == other.q
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.q, self.a.tobytes(), self.b.tobytes()))

    def __repr__(self):
        return f"PeriodicJacobi(q={self.q}, a={self.a.tolist()}, b={self.b.tolist()})"


def coefficient_distance(J1: PeriodicJacobi, J2: PeriodicJacobi) -> float:
    """Computable stand-in for ``||J1 - J2||``.

    Returns ``3 * max(sup|a - a'|, sup|b - b'|)`` over a common period. Every
    row of a tridiagonal difference has at most three entries, so this is an
    upper bound for the operator norm, not an equality.
    """
    period = math.lcm(J1.q, J2.q)
    sites = np.arange(1, period + 1)
    da = np.abs(J1.a_at(sites) - J2.a_at(sites)).max()
    db = np.abs(J1.b_at(sites) - J2.b_at(sites)).max()
    return 3.0 * float(max(da, db))


def _format_power(c0: float, exponent: float) -> str:
    """Render ``c0 ** exponent`` without overflow."""
    if float(c0).is_integer() and float(exponent).is_integer():
        return str(int(c0) ** int(exponent))
    log10 = exponent * math.log10(c0)
    mantissa_exp = math.floor(log10)
    mantissa = 10 ** (log10 - mantissa_exp)
    return f"{mantissa:.15f}e+{mantissa_exp}"


@dataclass(frozen=True, eq=False)
class LimitPeriodicFamily:
    """Periodic approximants ``J_0, J_1, ...`` of a limit-periodic operator.

    The deepest stored stage stands in for the limit operator.

    Parameters
    ----------
    stages : sequence of PeriodicJacobi
        Consecutive periods must divide each other and be distinct.
    eta : float
        Exponential-class rate, ``> 0``.
    kappa : float
        Time-scale exponent, ``> 10``.
    c0 : float
        Base of the time-scale schedule, ``> 1``.
    """

    stages: tuple
    eta: float
    kappa: float = 11.0
    c0: float = 6.0

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValidationError("a limit-periodic family needs at least one stage")
        for st in stages:
            if not isinstance(st, PeriodicJacobi):
                raise ValidationError("stages must be PeriodicJacobi instances")
        for prev, nxt in zip(stages, stages[1:]):
            if nxt.q % prev.q != 0 or nxt.q == prev.q:
                raise ValidationError(
                    f"periods must strictly divide upward, got {prev.q} then {nxt.q}"
                )
        if not self.eta > 0:
            raise ValidationError("eta must be positive")
        if not self.kappa > 10:
            raise ValidationError("kappa must exceed 10")
        if not self.c0 > 1:
            raise ValidationError("c0 must exceed 1")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "c0", float(self.c0))

    def __len__(self):
        return len(self.stages)

    @property
    def deepest(self) -> PeriodicJacobi:
        return self.stages[-1]

    @property
    def periods(self) -> list:
        return [st.q for st in self.stages]

    @property
    def class_bound(self) -> float:
        return max(st.class_bound for st in self.stages)

    def stage_distances(self) -> np.ndarray:
        """``d_n``: distance surrogate from stage ``n`` to the deepest stage."""
        return np.array([coefficient_distance(st, self.deepest) for st in self.stages])

    def ec_weights(self, eta: float | None = None) -> np.ndarray:
        """``exp(eta q_{n+1}) d_n`` for every stage that has a successor."""
        eta = self.eta if eta is None else eta
        d = self.stage_distances()
        q_next = np.array(self.periods[1:], dtype=float)
        return np.exp(eta * q_next) * d[:-1]

    def log10_time_scales(self) -> np.ndarray:
        """``log10 t_n`` with ``t_n = c0 ** (kappa q_{n+1})``."""
        q_next = np.array(self.periods[1:], dtype=float)
        return self.kappa * q_next * math.log10(self.c0)

    def time_scales(self) -> list:
        """``t_n`` rendered as decimal strings (they overflow floats quickly)."""
        return [_format_power(self.c0, self.kappa * q) for q in self.periods[1:]]

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "kappa": self.kappa,
            "c0": self.c0,
            "stages": [st.to_dict() for st in self.stages],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LimitPeriodicFamily":
        try:
            stages = [PeriodicJacobi.from_dict(s) for s in data["stages"]]
            return cls(stages, data["eta"], data.get("kappa", 11.0), data.get("c0", 6.0))
        except KeyError as exc:
            raise ValidationError(f"family is missing field {exc.args[0]!r}") from None


Operator = Union[PeriodicJacobi, LimitPeriodicFamily]


def as_periodic(J: Operator) -> PeriodicJacobi:
    """The periodic operator used to realise ``J`` numerically."""
    if isinstance(J, LimitPeriodicFamily):
        return J.deepest
    if isinstance(J, PeriodicJacobi):
        return J
    raise ValidationError(f"expected a Jacobi operator, got {type(J).__name__}")


def load_operator(data: Union[dict, str]) -> Operator:
    """Parse the JSON document of a periodic operator or a family."""
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise ValidationError("operator document must be a JSON object")
    if "stages" in data:
        return LimitPeriodicFamily.from_dict(data)
    return PeriodicJacobi.from_dict(data)


def dump_operator(J: Operator) -> str:
    return json.dumps(J.to_dict())


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """Real symmetric tridiagonal restriction to ``[offset, offset + size)``.

    Dirichlet boundary conditions: no wrap-around.
    """

    offset: int
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = _frozen(self.diag)
        offdiag = _frozen(self.offdiag)
        if diag.size == 0 or offdiag.size != diag.size - 1:
            raise ValidationError("offdiag must be one shorter than a nonempty diag")
        if offdiag.size and offdiag.min() <= 0:
            raise ValidationError("off-diagonal entries must be positive")
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.size)

    @property
    def half_width(self) -> int:
        """``N`` for a symmetric window ``[-N, N]``."""
        return (self.size - 1) // 2

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        if self.size > 1:
            m += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return m

    def to_sparse(self) -> sp.csr_matrix:
        return sp.diags([self.offdiag, self.diag, self.offdiag], [-1, 0, 1], format="csr")

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    @cached_property
    def eigensystem(self):
        """Eigenvalues and orthonormal eigenvectors (columns), ascending."""
        from scipy.linalg import eigh_tridiagonal

        if self.size == 1:
            return self.diag.copy(), np.ones((1, 1))
        return eigh_tridiagonal(self.diag, self.offdiag)

    def shifted(self, c: float) -> "TruncatedOperator":
        return TruncatedOperator(self.offset, self.diag + c, self.offdiag)


def build_truncation(J: Operator, N: int) -> TruncatedOperator:
    """Restrict ``J`` to the window ``[-N, N]`` with Dirichlet ends.

    For a :class:`LimitPeriodicFamily` the deepest stage is used.
    """
    if isinstance(J, LimitPeriodicFamily) and len(J) == 0:
        raise ValidationError("empty family")
    P = as_periodic(J)
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)) or N < 0:
        raise ValidationError(f"window half-width must be a non-negative integer, got {N!r}")
    sites = np.arange(-N, N + 1)
    return TruncatedOperator(-int(N), P.b_at(sites), P.a_at(sites[:-1]))


def commutator_operator(T: TruncatedOperator) -> sp.csr_matrix:
    """``A = i[J, X]`` on the window: ``(A phi)_n = i(a_n phi_{n+1} - a_{n-1} phi_{n-1})``."""
    off = T.offdiag.astype(complex)
    return sp.diags([-1j * off, 1j * off], [-1, 1], shape=(T.size, T.size), format="csr")


@dataclass(frozen=True, eq=False)
class WavePacket:
    """Finitely supported amplitudes; ``amplitudes[k]`` sits at ``offset + k``."""

    offset: int
    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(1, complex))

    def __post_init__(self):
        amp = _frozen(self.amplitudes, complex)
        if amp.size == 0:
            raise ValidationError("a wave packet needs at least one amplitude")
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def delta(cls, n: int = 0) -> "WavePacket":
        return cls(n, [1.0])

    @classmethod
    def from_sites(cls, values: dict) -> "WavePacket":
        """Build from a ``{site: amplitude}`` mapping."""
        lo, hi = min(values), max(values)
        amp = np.zeros(hi - lo + 1, complex)
        for n, v in values.items():
            amp[n - lo] = v
        return cls(lo, amp)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.amplitudes.size)

    @property
    def support(self) -> tuple:
        return self.offset, self.offset + self.amplitudes.size - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def norm1(self) -> float:
        return float(np.abs(self.amplitudes).sum())

    def moment(self, p: float) -> float:
        return packet_moment(self, p)

    def at(self, n: int) -> complex:
        k = n - self.offset
        if 0 <= k < self.amplitudes.size:
            return complex(self.amplitudes[k])
        return 0j

    def on_window(self, lo: int, hi: int) -> np.ndarray:
        """Dense amplitudes on sites ``lo .. hi``; raises if support escapes."""
        s_lo, s_hi = self.support
        nz = np.flatnonzero(self.amplitudes)
        if nz.size and (s_lo + nz[0] < lo or s_lo + nz[-1] > hi):
            raise ValidationError(f"packet support {self.support} exceeds window [{lo}, {hi}]")
        out = np.zeros(hi - lo + 1, complex)
        k0 = max(lo, s_lo)
        k1 = min(hi, s_hi)
        if k0 <= k1:
            out[k0 - lo : k1 - lo + 1] = self.amplitudes[k0 - s_lo : k1 - s_lo + 1]
        return out

    def position(self) -> "WavePacket":
        """``X phi``."""
        return WavePacket(self.offset, self.sites * self.amplitudes)

    def inner(self, other: "WavePacket") -> complex:
        """``<self, other>``, antilinear in ``self``."""
        lo = min(self.offset, other.offset)
        hi = max(self.support[1], other.support[1])
        return complex(np.vdot(self.on_window(lo, hi), other.on_window(lo, hi)))

    def __sub__(self, other: "WavePacket") -> "WavePacket":
        lo = min(self.offset, other.offset)
        hi = max(self.support[1], other.support[1])
        return WavePacket(lo, self.on_window(lo, hi) - other.on_window(lo, hi))

    def __add__(self, other: "WavePacket") -> "WavePacket":
        lo = min(self.offset, other.offset)
        hi = max(self.support[1], other.support[1])
        return WavePacket(lo, self.on_window(lo, hi) + other.on_window(lo, hi))

    def __mul__(self, c) -> "WavePacket":
        return WavePacket(self.offset, self.amplitudes * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"WavePacket(offset={self.offset}, size={self.amplitudes.size})"


def packet_moment(phi: WavePacket, p: float) -> float:
    """``sum_n (|n|^p + 1) |phi_n|^2``."""
    if not p > 0:
        raise ValidationError(f"moment order p must be positive, got {p!r}")
    n = np.abs(phi.sites).astype(float)
    return float(np.sum((n**p + 1.0) * np.abs(phi.amplitudes) ** 2))


def random_jacobi(
    rng: np.random.Generator,
    q: int,
    R: float = 4.0,
) -> PeriodicJacobi:
    """A random ``q``-periodic operator in J(R).

    Used by the property sweeps; the coefficients are drawn so that the
    class bound never exceeds ``R``.
    """
    a_lo = 1.0 / R
    a_hi = max(a_lo * 1.01, R / 3.0)
    a = rng.uniform(a_lo * 1.05, a_hi, size=q)
    b_max = max(R - 2.0 * a.max(), 0.0)
    b = rng.uniform(-b_max, b_max, size=q)
    return PeriodicJacobi(q, a, b)
