"""Estimator-style wrappers around the functional core.

The wrappers follow the scikit-learn conventions (constructor holds only
hyper-parameters, ``fit`` returns ``self``, learned state ends in ``_``) so
they compose with ``get_params``/``set_params`` and ``clone``. The fitted
object is an operator, not a feature matrix, so they are not meant for
pipelines over tabular data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import MomentSeries, make_q_operator, q_apply, transport_exponents
from .exceptions import ValidationError
from .floquet import band_structure, dos_density, integrated_dos
from .lattice import LimitPeriodicFamily, PeriodicJacobi, WavePacket, load_operator
from .xy_chain import lr_velocity_lower_bound


def check_operator(J):
    """Coerce ``J`` to a :class:`PeriodicJacobi` or :class:`LimitPeriodicFamily`.

    Accepts an operator, its JSON document (dict or string), or an ``(a, b)``
    pair of equal-length sequences.
    """
    if isinstance(J, (PeriodicJacobi, LimitPeriodicFamily)):
        return J
    if isinstance(J, (dict, str)):
        return load_operator(J)
    if isinstance(J, (tuple, list)) and len(J) == 2:
        a = np.atleast_1d(np.asarray(J[0], float))
        b = np.atleast_1d(np.asarray(J[1], float))
        return PeriodicJacobi(a.size, a, b)
    raise ValidationError(f"cannot interpret {type(J).__name__} as a Jacobi operator")


def check_packet(phi, offset: int = 0) -> WavePacket:
    """Coerce a packet or a 1-d amplitude array starting at ``offset``."""
    if isinstance(phi, WavePacket):
        return phi
    amp = np.asarray(phi, dtype=complex)
    if amp.ndim != 1 or amp.size == 0:
        raise ValidationError("packet amplitudes must be a nonempty 1-d array")
    if not np.all(np.isfinite(amp)):
        raise ValidationError("packet amplitudes must be finite")
    return WavePacket(int(offset), amp)


def check_times(times, positive: bool = False) -> np.ndarray:
    """A finite, strictly increasing 1-d time grid."""
    t = check_array(np.asarray(times, float).reshape(-1, 1), ensure_min_samples=1).ravel()
    if np.any(np.diff(t) <= 0):
        raise ValidationError("times must be strictly increasing")
    if positive and t[0] <= 0:
        raise ValidationError("times must be positive")
    return t


class BandStructure(TransformerMixin, BaseEstimator):
    """Fit the bands of a periodic operator; transform energies to ``(dk/dE, k)``."""

    def __init__(self, sweep_M: int = 256):
        self.sweep_M = sweep_M

    def fit(self, J, y=None):
        op = check_operator(J)
        P = op.deepest if isinstance(op, LimitPeriodicFamily) else op
        self.operator_ = P
        self.band_set_ = band_structure(P, self.sweep_M)
        self.bands_ = self.band_set_.bands
        self.critical_points_ = self.band_set_.crit
        return self

    def transform(self, E):
        check_is_fitted(self, "band_set_")
        e = check_array(np.asarray(E, float).reshape(-1, 1)).ravel()
        return np.column_stack(
            [
                dos_density(self.operator_, self.band_set_, e),
                integrated_dos(self.operator_, self.band_set_, e),
            ]
        )


class VelocityOperator(TransformerMixin, BaseEstimator):
    """Fit ``Q`` for an operator; transform rows of packet amplitudes to ``Q phi``.

    Each input row holds amplitudes starting at site ``origin``. Output rows
    live on the sites ``window_``.
    """

    def __init__(self, M: int = 4096, origin: int = 0):
        self.M = M
        self.origin = origin

    def fit(self, J, y=None):
        self.q_operator_ = make_q_operator(check_operator(J), self.M)
        self.window_ = self.q_operator_.window
        return self

    def transform(self, X):
        check_is_fitted(self, "q_operator_")
        # check_array refuses complex input; rows are validated by check_packet
        X = np.asarray(X, dtype=complex)
        if X.ndim != 2:
            raise ValidationError("expected a 2-d array of packet amplitudes")
        lo, hi = self.window_
        rows = [q_apply(self.q_operator_, check_packet(x, self.origin)).on_window(lo, hi) for x in X]
        return np.array(rows)


class TransportExponentFit(RegressorMixin, BaseEstimator):
    """Fit ``beta_hat_pm(p)`` to a moment series; predict the fitted power law."""

    def __init__(
        self,
        p: float = 2.0,
        span_decades: float = 1.0,
        window_decades: float = 0.5,
        stride_decades: float = 0.25,
    ):
        self.p = p
        self.span_decades = span_decades
        self.window_decades = window_decades
        self.stride_decades = stride_decades

    def fit(self, times, values):
        t = check_times(times)
        v = check_array(np.asarray(values, float).reshape(-1, 1)).ravel()
        if v.size != t.size:
            raise ValidationError("times and values must have the same length")
        rep = transport_exponents(
            MomentSeries(t, float(self.p), v),
            self.span_decades,
            self.window_decades,
            self.stride_decades,
        )
        self.report_ = rep
        self.beta_plus_ = rep.beta_plus_hat
        self.beta_minus_ = rep.beta_minus_hat
        lo, hi = rep.fit_window
        sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
        self.coef_, self.intercept_ = np.polyfit(np.log10(t[sel]), np.log10(v[sel]), 1)
        return self

    def predict(self, times):
        check_is_fitted(self, "coef_")
        t = check_array(np.asarray(times, float).reshape(-1, 1)).ravel()
        return 10.0 ** (self.intercept_ + self.coef_ * np.log10(t))


class LightConeEstimator(BaseEstimator):
    """Fit the light-cone speed of periodic XY couplings (``a = mu``, ``b = nu``)."""

    def __init__(self, epsilon: float = 1e-3, horizon: float = 200.0, n_times: int = 40, M: int = 1024):
        self.epsilon = epsilon
        self.horizon = horizon
        self.n_times = n_times
        self.M = M

    def fit(self, couplings, y=None):
        op = check_operator(couplings)
        times = np.linspace(self.horizon / self.n_times, self.horizon, self.n_times)
        rep = lr_velocity_lower_bound(op, self.epsilon, times, self.M)
        self.v_hat_ = rep.v_hat
        self.q_ceiling_ = rep.q_ceiling
        self.margin_ = rep.margin
        self.times_ = rep.cone.times
        self.distances_ = rep.cone.distances
        half = self.times_.size // 2
        self.intercept_ = float(
            np.polyfit(self.times_[half:], self.distances_[half:], 1)[1]
        )
        return self

    def predict(self, times):
        check_is_fitted(self, "v_hat_")
        t = np.asarray(times, float)
        return self.v_hat_ * t + self.intercept_
