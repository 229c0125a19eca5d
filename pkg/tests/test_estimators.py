import numpy as np
import pytest
from sklearn.base import clone

from ballistic_lab.dynamics import make_plan, moment_series
from ballistic_lab.estimators import (
    BandStructure,
    LightConeEstimator,
    TransportExponentFit,
    VelocityOperator,
    check_operator,
    check_packet,
    check_times,
)
from ballistic_lab.exceptions import ValidationError
from ballistic_lab.lattice import LimitPeriodicFamily, PeriodicJacobi, WavePacket
from sklearn.exceptions import NotFittedError


def test_check_operator(dimer):
    assert check_operator(dimer) is dimer
    assert check_operator(([1, 1], [1, -1])) == dimer
    assert check_operator({"q": 2, "a": [1, 1], "b": [1, -1]}) == dimer
    assert check_operator('{"q": 2, "a": [1, 1], "b": [1, -1]}') == dimer
    with pytest.raises(ValidationError):
        check_operator(3.0)


def test_check_packet():
    p = check_packet([1.0, 0.0, 2.0], offset=-1)
    assert p.offset == -1 and p.at(1) == 2
    w = WavePacket.delta(0)
    assert check_packet(w) is w
    for bad in ([], [[1, 2]], [np.nan]):
        with pytest.raises(ValidationError):
            check_packet(bad)


def test_check_times():
    np.testing.assert_array_equal(check_times([0, 1, 2]), [0, 1, 2])
    with pytest.raises(ValidationError):
        check_times([1, 1])
    with pytest.raises(ValidationError):
        check_times([0, 1], positive=True)
    with pytest.raises(ValueError):
        check_times([0, np.inf])


@pytest.mark.parametrize(
    "est",
    [BandStructure(sweep_M=64), VelocityOperator(M=128, origin=-2), TransportExponentFit(p=1.0),
     LightConeEstimator(epsilon=1e-2)],
)
def test_params_and_clone(est):
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(**est.get_params())
    with pytest.raises(NotFittedError):
        (c.predict if hasattr(c, "predict") else c.transform)([1.0])


def test_band_structure(dimer):
    est = BandStructure().fit(dimer)
    r5 = np.sqrt(5)
    np.testing.assert_allclose(est.bands_, [[-r5, -1], [1, r5]], atol=1e-12)
    out = est.transform([0.0, 1.5, 10.0])
    assert out.shape == (3, 2)
    assert out[0, 0] == 0 and out[0, 1] == pytest.approx(0.5)
    assert out[1, 0] > 0 and out[2, 1] == 1


def test_band_structure_family(dimer):
    F = LimitPeriodicFamily([dimer, PeriodicJacobi(4, [1, 1, 1, 1], [1, -1, 1.01, -1.01])], eta=1.0)
    assert BandStructure().fit(F).operator_.q == 4


def test_velocity_operator(dimer):
    est = VelocityOperator(M=1024, origin=0).fit(PeriodicJacobi.free(1))
    out = est.transform([[1.0]])
    lo, hi = est.window_
    sites = np.arange(lo, hi + 1)
    # free case: Q delta_0 = A delta_0 = i delta_{-1} - i delta_1
    np.testing.assert_allclose(out[0, sites == 1], [-1j], atol=1e-10)
    np.testing.assert_allclose(out[0, sites == -1], [1j], atol=1e-10)
    assert np.sum(np.abs(out[0]) ** 2) == pytest.approx(2.0, abs=1e-9)


def test_transport_fit(dimer):
    plan = make_plan(dimer, 100.0)
    t = np.geomspace(1, 100, 41)
    s = moment_series(plan, WavePacket.delta(0), 2.0, t)
    est = TransportExponentFit(p=2.0).fit(t, s.values)
    assert 0.9 <= est.beta_minus_ <= est.beta_plus_ <= 1.1
    assert est.coef_ == pytest.approx(2.0, abs=0.2)
    pred = est.predict(t[-10:])
    np.testing.assert_allclose(pred, s.values[-10:], rtol=0.2)
    assert est.score(t[-10:], s.values[-10:]) > 0.9
    with pytest.raises(ValidationError):
        TransportExponentFit().fit(t, s.values[:-1])


def test_light_cone_estimator():
    est = LightConeEstimator(epsilon=1e-3, horizon=120, n_times=24).fit(([0.5], [0.0]))
    assert est.v_hat_ == pytest.approx(est.q_ceiling_, rel=0.1)
    t = est.times_[-5:]
    np.testing.assert_allclose(est.predict(t), est.distances_[-5:], rtol=0.05)
