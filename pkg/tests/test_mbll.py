import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroflux.core import TimeSeries
from neuroflux.errors import LengthMismatch, SingularExtinction
from neuroflux.mbll import OpticalConfig, hemoglobin_to_od, intensity_to_od, od_to_hemoglobin


def random_config(rng, max_cond=1e4):
    while True:
        eps = rng.uniform(0.1, 3.0, (2, 2))
        if np.linalg.cond(eps) < max_cond:
            return OpticalConfig((760.0, 850.0), eps, tuple(rng.uniform(4, 8, 2)),
                                 rng.uniform(2, 4))


def test_default_constants_load():
    cfg = OpticalConfig.default().validate()
    assert cfg.wavelengths == (760.0, 850.0)
    # HbR absorbs more than HbO at 760 nm, less at 850 nm
    assert cfg.extinction[0, 1] > cfg.extinction[0, 0]
    assert cfg.extinction[1, 1] < cfg.extinction[1, 0]


def test_zero_od_gives_zero():
    hbo, hbr = od_to_hemoglobin(np.zeros(20), np.zeros(20), OpticalConfig.default())
    assert np.all(hbo == 0) and np.all(hbr == 0)


def test_identity_system(rng):
    cfg = OpticalConfig((1, 2), np.eye(2), (1.0, 1.0), 1.0)
    a, b = rng.standard_normal(30), rng.standard_normal(30)
    hbo, hbr = od_to_hemoglobin(TimeSeries(a, 10.4), TimeSeries(b, 10.4), cfg)
    assert np.array_equal(hbo.samples, a) and np.array_equal(hbr.samples, b)
    assert hbo.unit_label == "mM" and hbo.fs == 10.4


def test_round_trip_against_independent_forward(rng):
    for _ in range(50):
        cfg = random_config(rng)
        hbo, hbr = rng.standard_normal((2, 100)) * 1e-3
        # forward model written out explicitly per wavelength
        L = cfg.separation * np.asarray(cfg.dpf)
        od1 = L[0] * (cfg.extinction[0, 0] * hbo + cfg.extinction[0, 1] * hbr)
        od2 = L[1] * (cfg.extinction[1, 0] * hbo + cfg.extinction[1, 1] * hbr)
        o, r = od_to_hemoglobin(od1, od2, cfg)
        assert np.max(np.abs(o - hbo)) < 1e-12 and np.max(np.abs(r - hbr)) < 1e-12


@given(st.floats(-100, 100), st.integers(0, 2**32 - 1))
def test_linearity(alpha, seed):
    r = np.random.default_rng(seed)
    cfg = random_config(r)
    a, b = r.standard_normal((2, 40))
    o1, h1 = od_to_hemoglobin(a, b, cfg)
    o2, h2 = od_to_hemoglobin(alpha * a, alpha * b, cfg)
    assert np.allclose(o2, alpha * o1, rtol=1e-12, atol=1e-12)
    assert np.allclose(h2, alpha * h1, rtol=1e-12, atol=1e-12)


def test_singular_extinction():
    cfg = OpticalConfig((1, 2), [[1.0, 2.0], [2.0, 4.0]], (6, 6), 3.0)
    with pytest.raises(SingularExtinction):
        od_to_hemoglobin(np.zeros(3), np.zeros(3), cfg)


def test_length_mismatch():
    with pytest.raises(LengthMismatch):
        od_to_hemoglobin(np.zeros(3), np.zeros(4), OpticalConfig.default())
    with pytest.raises(LengthMismatch):
        od_to_hemoglobin(TimeSeries(np.zeros(3), 10), TimeSeries(np.zeros(4), 10),
                         OpticalConfig.default())


def test_forward_helper_and_intensity(rng):
    cfg = OpticalConfig.default()
    hbo, hbr = rng.standard_normal((2, 10)) * 1e-3
    o, r = od_to_hemoglobin(*hemoglobin_to_od(hbo, hbr, cfg), cfg)
    assert np.allclose(o, hbo, atol=1e-15) and np.allclose(r, hbr, atol=1e-15)
    od = intensity_to_od(np.array([1.0, 10.0, 0.1]), baseline=1.0)
    assert np.allclose(od, [0.0, -1.0, 1.0])
