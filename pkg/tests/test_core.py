import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from neuroflux.core import (Channel, ConnectivityMatrix, EpochSet, Metric, Modality,
                            MultichannelSeries, PValueMatrix, Region, RegionMap, TimeSeries,
                            from_json, to_json, validate)
from neuroflux.errors import BadRegionMap, LengthMismatch, NonFinite, NonPositiveRate


def two_channel(data, fs=200.0):
    return MultichannelSeries((Channel("a", "EEG"), Channel("b", "EEG")), data, fs)


def test_validate_returns_same_object(rng):
    s = two_channel(rng.standard_normal((2, 50)))
    assert validate(s) is s


def test_validate_locates_nan(rng):
    d = rng.standard_normal((2, 50))
    d[1, 5] = np.nan
    with pytest.raises(NonFinite) as err:
        validate(two_channel(d))
    assert (err.value.channel, err.value.index) == (1, 5)


def test_validate_rejects_nonpositive_rate(rng):
    with pytest.raises(NonPositiveRate):
        validate(two_channel(rng.standard_normal((2, 10)), fs=0))


def test_channel_names_unique():
    with pytest.raises(LengthMismatch):
        MultichannelSeries((Channel("a", "EEG"), Channel("a", "EEG")), np.zeros((2, 3)), 1.0)


def test_arrays_are_read_only(rng):
    s = two_channel(rng.standard_normal((2, 5)))
    with pytest.raises(ValueError):
        s.data[0, 0] = 1.0


def test_default_region_map_counts():
    rm = RegionMap.default()
    counts = [len(rm.for_modality(m)) for m in Modality]
    assert counts == [9, 8, 8]
    assert [r.region_id for r in rm.regions] == [f"R{k}" for k in range(1, 26)]


def _regions(n_eeg, n_oxy, n_deoxy):
    out, k = [], 1
    for mod, n in (("EEG", n_eeg), ("OXY", n_oxy), ("DEOXY", n_deoxy)):
        for i in range(n):
            out.append(Region(f"R{k}", mod, (f"{mod}{i}",)))
            k += 1
    return tuple(out)


@pytest.mark.parametrize("counts", [(8, 8, 8), (9, 9, 7), (10, 8, 8), (9, 8, 7)])
def test_region_map_rejects_wrong_counts(counts):
    with pytest.raises(BadRegionMap):
        RegionMap(_regions(*counts))


def test_region_map_rejects_shared_channel():
    regs = list(_regions(9, 8, 8))
    regs[1] = Region("R2", "EEG", ("EEG0",))
    with pytest.raises(BadRegionMap):
        RegionMap(tuple(regs))


def test_region_map_rejects_empty_region():
    regs = list(_regions(9, 8, 8))
    regs[3] = Region("R4", "EEG", ())
    with pytest.raises(BadRegionMap):
        RegionMap(tuple(regs))


def test_region_map_dict_round_trip():
    rm = RegionMap.default()
    assert RegionMap.from_dict(json.loads(json.dumps(rm.to_dict()))) == rm


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 20)), elements=finite),
       st.floats(0.1, 1e4))
def test_multichannel_round_trip_bit_identical(data, fs):
    chans = tuple(Channel(f"c{k}", "OXY") for k in range(data.shape[0]))
    s = MultichannelSeries(chans, data, fs, "mM")
    back = from_json(to_json(s))
    assert back.data.tobytes() == s.data.tobytes()
    assert back.fs == s.fs and back.channels == s.channels and back.unit == s.unit


@given(arrays(np.float64, st.integers(1, 30), elements=finite))
def test_timeseries_round_trip(x):
    ts = TimeSeries(x, 10.4, "uV")
    back = from_json(to_json(ts))
    assert back.samples.tobytes() == ts.samples.tobytes() and back.fs == ts.fs


@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 2), st.integers(1, 8)),
              elements=finite))
def test_epochset_round_trip(data):
    chans = tuple(Channel(f"c{k}", "EEG") for k in range(data.shape[1]))
    e = EpochSet(data, 200.0, chans, "NBACK0", "TARGET", (0.5, 10.0))
    back = from_json(to_json(e))
    assert back.data.tobytes() == e.data.tobytes()
    assert back.condition == e.condition and back.window == e.window
    assert np.array_equal(back.trial_ids, e.trial_ids)


@given(arrays(np.float64, (4, 4), elements=st.floats(-1, 1)))
def test_connectivity_and_pvalue_round_trip(v):
    cm = ConnectivityMatrix(v, Metric.GPDC)
    back = from_json(to_json(cm))
    assert back.values.tobytes() == cm.values.tobytes() and back.metric == cm.metric
    assert back.directed and back.labels == cm.labels
    pm = PValueMatrix(np.abs(v), v, np.ones((4, 4), int), Metric.PCC)
    pb = from_json(to_json(pm))
    assert pb.p.tobytes() == pm.p.tobytes() and pb.statistic.tobytes() == pm.statistic.tobytes()


def test_region_map_json_round_trip():
    rm = RegionMap.default()
    assert from_json(to_json(rm)) == rm


def test_symmetric_matrix_invariants():
    v = np.eye(3)
    ConnectivityMatrix(v, Metric.PLV).check_invariants()
    v2 = v.copy()
    v2[0, 1] = 0.5
    with pytest.raises(ValueError):
        ConnectivityMatrix(v2, Metric.PLV).check_invariants()
    with pytest.raises(ValueError):
        ConnectivityMatrix(2 * v, Metric.MSC).check_invariants()
