"""Wave-packet dynamics, transport exponents and the asymptotic velocity operator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    NumericalToleranceError,
    ResolutionError,
    ValidationError,
    WindowOverflowError,
)
from .floquet import (
    FloquetFiber,
    fiber_stack,
    fourier_forward,
    fourier_inverse,
    theta_grid,
)
from .lattice import (
    LimitPeriodicFamily,
    Operator,
    PeriodicJacobi,
    TruncatedOperator,
    WavePacket,
    as_periodic,
    build_truncation,
    coefficient_distance,
    commutator_operator,
    packet_moment,
)

WINDOW_FACTOR = 1.2
WINDOW_BUFFER = 64
T_MAX = 1e3


def required_half_width(J: Operator, T: float) -> int:
    """Smallest window half-width allowed for horizon ``T``."""
    amax = float(as_periodic(J).a.max())
    return int(math.ceil(WINDOW_FACTOR * 2.0 * amax * abs(T))) + WINDOW_BUFFER


@dataclass(frozen=True, eq=False)
class EvolutionPlan:
    """A truncation sized for horizon ``T`` plus its cached eigensystem."""

    operator: TruncatedOperator
    horizon: float
    half_width: int
    boundary_tol: float = 1e-10

    @property
    def edge(self) -> int:
        return max(8, self.operator.size // 10)

    @property
    def eigensystem(self):
        return self.operator.eigensystem

    def window(self, phi: WavePacket) -> np.ndarray:
        N = self.half_width
        lo, hi = phi.support
        inner = N // 2
        nz = np.flatnonzero(phi.amplitudes)
        if nz.size and (lo + nz[0] < -inner or lo + nz[-1] > inner):
            raise ValidationError(
                f"packet support must lie in the inner half [-{inner}, {inner}] of the window"
            )
        return phi.on_window(-N, N)

    def check_boundary(self, psi: np.ndarray, norm2: float) -> None:
        e = self.edge
        mass = np.sum(np.abs(psi[..., :e]) ** 2, axis=-1) + np.sum(
            np.abs(psi[..., -e:]) ** 2, axis=-1
        )
        worst = float(np.max(mass)) / max(norm2, np.finfo(float).tiny)
        if worst > self.boundary_tol:
            raise WindowOverflowError(
                f"boundary mass {worst:.3e} exceeds {self.boundary_tol:.1e}; "
                f"increase the window half-width beyond {self.half_width}"
            )


def make_plan(J: Operator, T: float, N: int | None = None, boundary_tol: float = 1e-10) -> EvolutionPlan:
    """Plan evolution of ``J`` up to ``|t| <= T`` on ``[-N, N]``."""
    if not (np.isfinite(T) and T >= 0):
        raise ValidationError("horizon must be finite and non-negative")
    n_min = required_half_width(J, T)
    if N is None:
        N = n_min
    elif N < n_min:
        raise ValidationError(f"window half-width {N} is below the minimum {n_min} for T={T}")
    return EvolutionPlan(build_truncation(J, int(N)), float(T), int(N), float(boundary_tol))


def _check_time(plan: EvolutionPlan, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, float))
    if np.any(np.abs(t) > plan.horizon * (1 + 1e-12)):
        raise ValidationError(f"time exceeds the plan horizon {plan.horizon}")
    return t


def _propagate(plan: EvolutionPlan, v: np.ndarray, t: np.ndarray) -> np.ndarray:
    # rows: e^{-i t J} v for each t
    w, V = plan.eigensystem
    c = V.T @ v
    out = (np.exp(-1j * np.outer(t, w)) * c) @ V.T
    out[t == 0] = v
    return out


def evolve_many(plan: EvolutionPlan, phi: WavePacket, times) -> np.ndarray:
    """``e^{-itJ} phi`` on the window for each time; shape ``(len(times), 2N+1)``."""
    t = _check_time(plan, times)
    v = plan.window(phi)
    psi = _propagate(plan, v, t)
    plan.check_boundary(psi, phi.norm() ** 2)
    return psi


def evolve(plan: EvolutionPlan, phi: WavePacket, t: float) -> WavePacket:
    """``psi(t) = e^{-itJ} phi`` from the spectral decomposition of the truncation."""
    psi = evolve_many(plan, phi, [t])[0]
    return WavePacket(-plan.half_width, psi)


def heisenberg_position(plan: EvolutionPlan, phi: WavePacket, t: float) -> WavePacket:
    """``X_J(t) phi = e^{itJ} X e^{-itJ} phi``."""
    t_arr = _check_time(plan, t)
    v = plan.window(phi)
    psi = _propagate(plan, v, t_arr)[0]
    plan.check_boundary(psi, phi.norm() ** 2)
    xpsi = plan.operator.sites * psi
    return WavePacket(-plan.half_width, _propagate(plan, xpsi, -t_arr)[0])


def integral_representation_residual(
    plan: EvolutionPlan, phi: WavePacket, t: float, order: int = 8
) -> float:
    """``|| X(t)phi - X phi - int_0^t e^{isJ} A e^{-isJ} phi ds ||``.

    The integral is done by composite Gauss-Legendre with panels no wider
    than ``1 / (2 ||J||)``, in the eigenbasis of the truncation.
    """
    t = float(t)
    lhs = heisenberg_position(plan, phi, t).on_window(-plan.half_width, plan.half_width)
    v = plan.window(phi)
    w, V = plan.eigensystem
    a_eig = V.T @ (commutator_operator(plan.operator) @ V)
    c = V.T @ v
    norm_j = float(np.max(np.abs(w)))
    panels = max(1, int(math.ceil(abs(t) * 2.0 * max(norm_j, 1e-12))))
    x, wts = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, t, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    s = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * wts[None, :]).ravel()
    acc = np.zeros(w.size, complex)
    for k0 in range(0, s.size, 256):
        sk = s[k0 : k0 + 256]
        ph = np.exp(-1j * np.outer(sk, w))
        g = np.conj(ph) * ((ph * c) @ a_eig.T)
        acc += ws[k0 : k0 + 256] @ g
    rhs = plan.operator.sites * v + V @ acc
    return float(np.linalg.norm(lhs - rhs))


# ---------------------------------------------------------------------------
# moments and transport exponents


@dataclass(frozen=True, eq=False)
class MomentSeries:
    times: np.ndarray
    p: float
    values: np.ndarray

    def envelope(self) -> np.ndarray:
        return np.maximum.accumulate(self.values)


def moment_series(plan: EvolutionPlan, phi: WavePacket, p: float, times) -> MomentSeries:
    """``|X|^p_phi(t) = sum_n (|n|^p + 1) |psi_n(t)|^2`` on a time grid."""
    times = np.asarray(times, float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValidationError("times must be a nonempty increasing 1-d grid")
    packet_moment(phi, p)
    psi = evolve_many(plan, phi, times)
    weight = np.abs(plan.operator.sites).astype(float) ** p + 1.0
    vals = np.abs(psi) ** 2 @ weight
    return MomentSeries(times, float(p), vals)


def position_growth(plan: EvolutionPlan, phi: WavePacket, times) -> np.ndarray:
    """``||X(t) phi|| / t`` (``nan`` at ``t = 0``)."""
    psi = evolve_many(plan, phi, times)
    # ||X(t)phi|| = ||X e^{-itJ} phi|| since e^{itJ} is unitary
    norms = np.linalg.norm(psi * plan.operator.sites, axis=1)
    times = np.asarray(times, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(times > 0, norms / np.where(times > 0, times, 1.0), np.nan)


@dataclass(frozen=True)
class TransportReport:
    p: float
    beta_plus_hat: float
    beta_minus_hat: float
    fit_window: tuple
    slopes: tuple
    residuals: tuple


def transport_exponents(
    series: MomentSeries,
    span_decades: float = 1.0,
    window_decades: float = 0.5,
    stride_decades: float = 0.25,
    min_decades: float = 2.0,
) -> TransportReport:
    """Windowed log-log slopes over the last decade, divided by ``p``.

    ``beta_plus_hat`` is the largest window slope and ``beta_minus_hat`` the
    smallest, the finite-horizon stand-ins for limsup and liminf.
    """
    t = np.asarray(series.times, float)
    v = np.asarray(series.values, float)
    pos = t > 0
    t, v = t[pos], v[pos]
    if t.size < 2 or math.log10(t[-1] / t[0]) < min_decades - 1e-9:
        raise ValidationError(f"need at least {min_decades} decades of positive times")
    if not np.all(v > 0) or np.ptp(v) == 0 and v[0] == 0:
        raise NumericalToleranceError("degenerate moment series")
    lt, lv = np.log10(t), np.log10(v)
    top = lt[-1]
    start = top - span_decades
    slopes, res = [], []
    k = 0
    while True:
        lo = start + k * stride_decades
        hi = lo + window_decades
        if hi > top + 1e-9:
            break
        sel = (lt >= lo - 1e-9) & (lt <= hi + 1e-9)
        if np.count_nonzero(sel) >= 2:
            coef, r, *_ = np.polyfit(lt[sel], lv[sel], 1, full=True)
            slopes.append(coef[0] / series.p)
            res.append(float(np.sqrt(r[0] / sel.sum())) if r.size else 0.0)
        k += 1
    if not slopes:
        raise ValidationError("time grid too sparse for the fit windows")
    return TransportReport(
        series.p,
        float(max(slopes)),
        float(min(slopes)),
        (float(10**start), float(10**top)),
        tuple(float(s) for s in slopes),
        tuple(res),
    )


# ---------------------------------------------------------------------------
# time averages and the convergence experiment


def _phi(x: np.ndarray) -> np.ndarray:
    # (e^{ix} - 1)/(ix), with the removable singularity filled
    x = np.asarray(x, float)
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    out = np.where(small, 1.0 + 0.5j * x, (np.exp(1j * xs) - 1.0) / (1j * xs))
    return out


def time_averaged_fiber(f: FloquetFiber, t: float) -> np.ndarray:
    """``(1/t) int_0^t e^{isJ_theta} A_theta e^{-isJ_theta} ds`` in closed form.

    In the eigenbasis entry ``(j, k)`` is ``<v_j, A_theta v_k> phi(t (lambda_j
    - lambda_k))`` with ``phi(x) = (e^{ix} - 1)/(ix)``.
    """
    if not t > 0:
        raise ValidationError("t must be positive")
    v = f.vectors
    a_eig = np.conj(v.T) @ f.a_theta @ v
    d = f.lambdas[:, None] - f.lambdas[None, :]
    return v @ (a_eig * _phi(t * d)) @ np.conj(v.T)


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    times: np.ndarray
    curve: np.ndarray
    exponent: float
    c_hat: float
    floor: float


def dyadic_times(k_max: int = 10) -> np.ndarray:
    return 2.0 ** np.arange(k_max + 1)


def convergence_experiment(
    J: PeriodicJacobi, times=None, M: int = 512, floor: float = 1e-13
) -> ConvergenceReport:
    """``( mean_m ||Q_theta - avg_t(A_theta)||^2 )^{1/2}`` for each time.

    The exponent is a least-squares log-log slope over points above
    ``floor``; with fewer than two such points (the curve vanishes) it is
    ``-inf``. ``c_hat`` is the smallest constant with ``curve <= c t^{-1/5}``.
    """
    J = as_periodic(J)
    times = dyadic_times() if times is None else np.asarray(times, float)
    if np.any(times <= 0):
        raise ValidationError("times must be positive")
    st = fiber_stack(J, theta_grid(M))
    a_eig = st.a_eigenbasis()
    q = J.q
    off = a_eig * (1.0 - np.eye(q))
    d = st.lambdas[:, :, None] - st.lambdas[:, None, :]
    curve = np.empty(times.size)
    for i, t in enumerate(times):
        diff = off * _phi(t * d)
        ev = np.linalg.eigvalsh(diff) if q > 1 else np.zeros((M, 1))
        curve[i] = math.sqrt(float(np.mean(np.max(np.abs(ev), axis=-1) ** 2)))
    keep = curve > floor
    if np.count_nonzero(keep) >= 2:
        exponent = float(np.polyfit(np.log(times[keep]), np.log(curve[keep]), 1)[0])
    else:
        exponent = -math.inf
    c_hat = float(np.max(curve * times**0.2))
    return ConvergenceReport(times, curve, exponent, c_hat, floor)


# ---------------------------------------------------------------------------
# the asymptotic velocity operator


@dataclass(frozen=True, eq=False)
class QOperatorApprox:
    """Matrix-free ``Q`` on a common window of ``L`` sites.

    For a periodic source the grid has ``M = L / q`` points. For a family,
    stage ``n`` uses ``M_n = L / q_n`` so every stage lands on the same sites
    ``[1 - L/2, L/2]`` and stage outputs can be subtracted.
    """

    source: object
    M: int
    L: int = field(init=False)

    def __post_init__(self):
        qs = self.periods
        M = int(self.M)
        if M < 2 or M % 2:
            raise ValidationError("theta grid size M must be an even integer >= 2")
        L = M * qs[-1]
        if any(L % (2 * q) for q in qs):
            raise ValidationError("window must hold an even number of cells at every stage")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "L", L)

    @property
    def stages(self) -> list:
        if isinstance(self.source, LimitPeriodicFamily):
            return list(self.source.stages)
        if isinstance(self.source, PeriodicJacobi):
            return [self.source]
        raise ValidationError("Q source must be a PeriodicJacobi or LimitPeriodicFamily")

    @property
    def periods(self) -> list:
        return [st.q for st in self.stages]

    @property
    def window(self) -> tuple:
        return (1 - self.L // 2, self.L // 2)

    def apply_stage(self, n: int, phi: WavePacket) -> WavePacket:
        st = self.stages[n]
        M_n = self.L // st.q
        lo, hi = self.window
        s_lo, s_hi = phi.support
        if s_lo < lo or s_hi > hi:
            raise ResolutionError(
                f"packet support {phi.support} exceeds the resolvable window {self.window}; "
                "increase M"
            )
        stack = fiber_stack(st, theta_grid(M_n))
        vec = fourier_forward(phi, st.q, M_n)
        out = np.einsum("mij,mj->mi", stack.q_matrices(), vec)
        return fourier_inverse(out, st.q)

    def stage_results(self, phi: WavePacket) -> list:
        return [self.apply_stage(n, phi) for n in range(len(self.stages))]

    def cauchy_increments(self, phi: WavePacket) -> np.ndarray:
        res = self.stage_results(phi)
        return np.array([(x - y).norm() for x, y in zip(res, res[1:])])


def make_q_operator(J: Operator, M: int = 4096) -> QOperatorApprox:
    """``Q`` for a periodic operator, or the stage sequence ``Q_n`` of a family."""
    return QOperatorApprox(J, M)


def q_apply(Q: QOperatorApprox, phi: WavePacket) -> WavePacket:
    """``Q phi`` via the fibers; for a family, the deepest stage."""
    return Q.apply_stage(len(Q.stages) - 1, phi)


def q_fiber_sup(J: PeriodicJacobi, M: int = 1024) -> float:
    """``sup_theta rho(Q_theta)`` on a midpoint grid: the group-velocity ceiling."""
    st = fiber_stack(as_periodic(J), theta_grid(M), check_simple=False)
    return float(np.max(np.abs(J.q * st.lambda_dots)))


@dataclass(frozen=True)
class StageRow:
    n: int
    q: int
    t_n: str | None
    log10_t_n: float | None
    simulable: bool | None
    increment: float | None
    q_norm: float


@dataclass(frozen=True)
class StageTable:
    rows: tuple
    geometric: bool
    kernel_ok: bool

    def to_dict(self) -> dict:
        return {
            "rows": [r.__dict__ for r in self.rows],
            "geometric": self.geometric,
            "kernel_ok": self.kernel_ok,
        }


def limit_q_diagnostics(
    F: LimitPeriodicFamily,
    phi: WavePacket | None = None,
    M: int = 256,
    ratio: float = 0.5,
    kernel_floor: float = 0.1,
    strict: bool = False,
) -> StageTable:
    """Stage table of ``Q_n phi``: increments, norms and the time scales ``t_n``.

    ``geometric`` records whether each increment is at most ``ratio`` times
    the previous one; ``kernel_ok`` whether every ``||Q_n phi||`` exceeds
    ``kernel_floor``. With ``strict`` a failed check raises.
    """
    if not isinstance(F, LimitPeriodicFamily) or len(F) < 2:
        raise ValidationError("limit-Q diagnostics need a family with at least 2 stages")
    phi = WavePacket.delta(0) if phi is None else phi
    Q = QOperatorApprox(F, M)
    res = Q.stage_results(phi)
    inc = [(x - y).norm() for x, y in zip(res, res[1:])]
    t_str = F.time_scales()
    t_log = F.log10_time_scales()
    rows = []
    for n, st in enumerate(F.stages):
        has_next = n < len(F) - 1
        rows.append(
            StageRow(
                n,
                st.q,
                t_str[n] if has_next else None,
                float(t_log[n]) if has_next else None,
                bool(t_log[n] <= math.log10(T_MAX)) if has_next else None,
                float(inc[n]) if has_next else None,
                res[n].norm(),
            )
        )
    geometric = all(b <= ratio * a + 1e-13 for a, b in zip(inc, inc[1:]))
    kernel_ok = all(r.q_norm > kernel_floor for r in rows)
    if strict and not (geometric and kernel_ok):
        raise NumericalToleranceError(
            f"stage diagnostics failed: geometric={geometric}, kernel_ok={kernel_ok}"
        )
    return StageTable(tuple(rows), geometric, kernel_ok)


def build_ec_family(
    eta: float,
    kappa: float = 11.0,
    depth: int = 3,
    base: PeriodicJacobi | None = None,
    c0: float | None = None,
) -> LimitPeriodicFamily:
    """Exponential-class family by successive cosine perturbations of ``b``.

    ``q_n = q_base 2^n`` and stage ``n + 1`` adds ``eps_n cos(2 pi n' / q_{n+1})``
    at site ``n'``, ``eps_n = min(0.1, exp(-eta q_{n+1}))``. The off-diagonal
    coefficients are never touched. ``c0`` defaults to ``max(6, R + 1)``.
    """
    if not eta > 0:
        raise ValidationError("eta must be positive")
    if isinstance(depth, bool) or not isinstance(depth, (int, np.integer)) or not 0 <= depth <= 6:
        raise ValidationError("depth must be an integer in [0, 6]")
    base = PeriodicJacobi.free(1) if base is None else base
    stages = [base]
    for n in range(depth):
        cur = stages[-1]
        q_next = cur.q * 2
        eps = min(0.1, math.exp(-eta * q_next))
        sites = np.arange(1, q_next + 1)
        b = np.tile(cur.b, 2) + eps * np.cos(2.0 * np.pi * sites / q_next)
        stages.append(PeriodicJacobi(q_next, np.tile(cur.a, 2), b))
    R = max(st.class_bound for st in stages)
    c0 = max(6.0, R + 1.0) if c0 is None else c0
    return LimitPeriodicFamily(stages, eta, kappa, c0)


def ec_epsilons(F: LimitPeriodicFamily) -> np.ndarray:
    """Perturbation sizes ``eps_n`` read back from consecutive stages."""
    out = []
    for cur, nxt in zip(F.stages, F.stages[1:]):
        db = nxt.b - np.tile(cur.b, nxt.q // cur.q)
        out.append(float(np.max(np.abs(db))))
    return np.array(out)


@dataclass(frozen=True, eq=False)
class DivergenceReport:
    times: np.ndarray
    distance: float
    R: float
    evolution_lhs: np.ndarray
    evolution_bound: np.ndarray
    position_lhs: np.ndarray
    position_bound: np.ndarray

    @property
    def violations(self) -> int:
        tol = 1e-12
        return int(
            np.count_nonzero(self.evolution_lhs > self.evolution_bound + tol)
            + np.count_nonzero(self.position_lhs > self.position_bound + tol)
        )


def propagation_divergence_check(
    J: PeriodicJacobi, J2: PeriodicJacobi, phi: WavePacket, times, N: int | None = None
) -> DivergenceReport:
    """Compare dynamics of two operators on a shared window against the bounds

    ``|t| d ||phi||`` (propagators) and ``2 (R t^2 + |t|) d ||phi||``
    (Heisenberg position), where ``d`` is the coefficient-distance surrogate.
    """
    times = np.atleast_1d(np.asarray(times, float))
    T = float(np.max(np.abs(times)))
    n_min = max(required_half_width(J, T), required_half_width(J2, T))
    N = n_min if N is None else N
    p1, p2 = make_plan(J, T, N), make_plan(J2, T, N)
    d = coefficient_distance(J, J2)
    R = max(J.class_bound, J2.class_bound)
    nrm = phi.norm()
    e1 = evolve_many(p1, phi, times)
    e2 = evolve_many(p2, phi, times)
    ev_lhs = np.linalg.norm(e1 - e2, axis=1)
    pos_lhs = np.array(
        [
            (heisenberg_position(p1, phi, t) - heisenberg_position(p2, phi, t)).norm()
            for t in times
        ]
    )
    at = np.abs(times)
    return DivergenceReport(
        times, d, R, ev_lhs, at * d * nrm, pos_lhs, 2.0 * (R * at**2 + at) * d * nrm
    )
