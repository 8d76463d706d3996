import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterentropy.reference import market_lengths
from clusterentropy.series import (
    HorizonSchedule,
    Origin,
    PriceSeries,
    TickFormatError,
    linear_return,
    load_series,
    load_ticks,
    log_return,
    monthly_schedule,
    parse_schedule,
    sample_series,
    sampling_step,
    save_series,
    segment_horizons,
)


def write(tmp_path, text, name="ticks.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_ticks(tmp_path):
    ticks = load_ticks(write(tmp_path, "1,100.0\n2,101.0\n"))
    assert len(ticks) == 2
    assert ticks.prices.tolist() == [100.0, 101.0]
    assert ticks.symbol == "ticks"


def test_header_and_delimiter(tmp_path):
    ticks = load_ticks(write(tmp_path, "time;price\n1;5\n1;6\n3;7\n"), delimiter=";")
    assert ticks.timestamps.tolist() == [1, 1, 3]


def test_negative_price_reports_line(tmp_path):
    with pytest.raises(TickFormatError) as err:
        load_ticks(write(tmp_path, "1,100\n2,-3\n"))
    assert err.value.line == 2


def test_time_going_backwards(tmp_path):
    with pytest.raises(TickFormatError) as err:
        load_ticks(write(tmp_path, "t,p\n5,1\n4,1\n"))
    assert err.value.line == 3


def test_malformed_and_empty(tmp_path):
    with pytest.raises(TickFormatError):
        load_ticks(write(tmp_path, "1,abc\n2,3\n"))
    with pytest.raises(TickFormatError):
        load_ticks(write(tmp_path, ""))
    with pytest.raises(FileNotFoundError):
        load_ticks(tmp_path / "nope.csv")


def test_price_series_invariants():
    with pytest.raises(ValueError):
        PriceSeries([1.0])
    with pytest.raises(ValueError):
        PriceSeries([1.0, -1.0])
    s = PriceSeries([0.0, -1.0], Origin.synthetic(1, 0.5))
    assert len(s) == 2
    with pytest.raises(ValueError):
        s.values[0] = 3


def test_sample_hand_example():
    s = sample_series(PriceSeries(np.arange(1.0, 11.0)), 5)
    assert s.values.tolist() == [1, 3, 5, 7, 9]
    assert s.origin == Origin.sampled(2)


def test_sample_identity_and_errors():
    x = PriceSeries(np.arange(1.0, 8.0))
    assert np.array_equal(sample_series(x, 7).values, x.values)
    with pytest.raises(ValueError):
        sample_series(x, 8)
    with pytest.raises(ValueError):
        sample_series(x, 0)


def test_nasdaq_first_month_step():
    assert market_lengths("NASDAQ")[0] == 586866
    assert sampling_step(586866, 492035) == 1


@given(st.integers(2, 400), st.data())
@settings(max_examples=100, deadline=None)
def test_sample_length_and_anchor(n, data):
    target = data.draw(st.integers(2, n))
    x = PriceSeries(np.arange(1.0, n + 1))
    out = sample_series(x, target)
    k = sampling_step(n, target)
    assert k == max(1, math.floor(n / target + 0.5))
    assert out.values[0] == 1.0
    assert len(out) == min(target, len(range(0, n, k)))


def test_segment_horizons():
    x = PriceSeries(np.arange(1.0, 13.0))
    parts = segment_horizons(x, HorizonSchedule((4, 8, 12)))
    assert [len(p) for p in parts] == [4, 8, 12]
    for a, b in zip(parts, parts[1:]):
        assert np.array_equal(a.values, b.values[: len(a)])
    assert np.array_equal(segment_horizons(x, HorizonSchedule((12,)))[0].values, x.values)
    with pytest.raises(ValueError):
        segment_horizons(x, HorizonSchedule((4, 13)))


def test_schedule_invariants():
    with pytest.raises(ValueError):
        HorizonSchedule((4, 4))
    with pytest.raises(ValueError):
        HorizonSchedule(())
    assert parse_schedule("table2:NASDAQ").boundaries[-1] == 6982017
    assert parse_schedule("table2:NASDAQ/10").boundaries[0] == 58687
    assert parse_schedule("3,6").boundaries == (3, 6)


def test_monthly_schedule():
    from clusterentropy.series import TickSeries

    jan, feb, mar = 1514764800, 1517443200, 1519862400  # 2018-01/02/03-01 UTC
    ticks = TickSeries([jan, jan + 5, feb, feb + 1, mar], [1, 2, 3, 4, 5], "x")
    assert monthly_schedule(ticks).boundaries == (2, 4, 5)


def test_returns():
    s = PriceSeries([100.0, 101.0, 103.0])
    assert linear_return(s, 1).tolist() == [1.0, 2.0]
    assert linear_return(PriceSeries([5.0, 9.0])).tolist() == [4.0]
    assert np.all(linear_return(PriceSeries([3.0] * 5), 2) == 0)
    assert log_return(PriceSeries([1.0, math.e]))[0] == pytest.approx(1.0, abs=1e-15)
    assert log_return(PriceSeries([100.0, 101.0]))[0] == pytest.approx(0.00995033, abs=1e-8)
    with pytest.raises(ValueError):
        linear_return(s, 3)
    with pytest.raises(ValueError):
        linear_return(s, 0)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=60), st.integers(1, 2))
@settings(max_examples=100, deadline=None)
def test_log_return_of_exp_is_linear(xs, h):
    base = PriceSeries(np.array(xs), Origin.synthetic(0, 0.5))
    expd = PriceSeries(np.exp(xs))
    assert len(log_return(expd, h)) == len(xs) - h
    np.testing.assert_allclose(log_return(expd, h), linear_return(base, h), atol=1e-12, rtol=0)


def test_series_round_trip(tmp_path, rng):
    s = PriceSeries(rng.normal(size=500).cumsum(), Origin.synthetic(3, 0.7), "x")
    sched = HorizonSchedule((100, 500))
    path = save_series(tmp_path / "s.csv", s, sched)
    back, back_sched = load_series(path)
    assert np.array_equal(back.values, s.values)
    assert back.origin == s.origin and back.symbol == "x"
    assert back_sched == sched
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta["length"] == 500
