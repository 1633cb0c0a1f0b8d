import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from eqselect import metrics
from eqselect.control import build_controller
from eqselect.dynamics import Trajectory, controlled_field, integrate
from eqselect.game import NASH_1, NASH_2, paper_game

UNIFORM = np.full(5, 0.2)


def square_cycle():
    xy = [(0.1, 0.1), (0.2, 0.1), (0.2, 0.2), (0.1, 0.2), (0.1, 0.1)]
    return np.array([[a, b, 1 - a - b] for a, b in xy])


def test_mean_distribution_examples():
    np.testing.assert_allclose(metrics.mean_distribution(np.tile(NASH_1, (10, 1))), NASH_1)
    alt = np.array([[1, 0, 0, 0, 0], [0, 1, 0, 0, 0]] * 5, dtype=float)
    np.testing.assert_allclose(metrics.mean_distribution(alt, 0.0), [0.5, 0.5, 0, 0, 0])


def test_window_errors():
    with pytest.raises(ValueError):
        metrics.window(np.ones((4, 2)), 1.0)
    with pytest.raises(ValueError):
        metrics.window(np.ones((0, 2)), 0.0)


def test_distance_from_uniform():
    d1 = metrics.distance_series(UNIFORM[None, :], NASH_1)[0]
    d2 = metrics.distance_series(UNIFORM[None, :], NASH_2)[0]
    assert d1 == pytest.approx(np.sqrt(2 / 15))
    assert d2 == pytest.approx(np.sqrt(0.3))
    # the crossing thresholds are these half distances, rounded
    assert d1 / 2 == pytest.approx(0.184, abs=2e-3)
    assert d2 / 2 == pytest.approx(0.273, abs=2e-3)


def test_half_time_examples():
    assert metrics.half_time(np.zeros(5), 0.1, times=np.arange(3, 8)) == 3.0
    d = (10 - np.arange(11)) / 10
    assert metrics.half_time(d, 0.5) == pytest.approx(5.0)
    assert metrics.half_time(d, 0.55) == pytest.approx(4.5)
    assert metrics.half_time(np.ones(4), 0.5) is None
    with pytest.raises(ValueError):
        metrics.half_time(d, -0.1)


def test_angular_momentum_square():
    # crosses: -0.01, 0.02, 0.02, -0.01 -> mean 0.005 (counter-clockwise)
    assert metrics.angular_momentum(square_cycle(), (0, 1)) == pytest.approx(0.005)
    assert metrics.angular_momentum(square_cycle(), (1, 0)) == pytest.approx(-0.005)


def test_angular_momentum_about_center():
    c = (0.15, 0.15, 0.7)
    # about its own centre the square sweeps 4 * 2 * 0.05^2 per lap
    assert metrics.angular_momentum(square_cycle(), (0, 1), center=c) == pytest.approx(0.005)


def test_angular_momentum_constant_is_zero():
    assert metrics.angular_momentum(np.tile(NASH_1, (5, 1)), (0, 1)) == 0.0
    with pytest.raises(ValueError):
        metrics.angular_momentum(NASH_1[None, :], (0, 1))


@given(arrays(float, (12, 4), elements=st.floats(0, 1)), st.sampled_from([(0, 1), (1, 3), (0, 2)]))
def test_antisymmetry(x, pair):
    assert metrics.angular_momentum(x, pair) == -metrics.angular_momentum(x, pair[::-1])


@given(st.dictionaries(st.tuples(st.integers(0, 4), st.integers(0, 4)),
                       st.floats(-1, 1), max_size=10))
def test_cycle_strength(L):
    s = metrics.cycle_strength(L)
    assert s ** 2 == pytest.approx(sum(v * v for v in L.values()), abs=1e-12)


def test_cycle_strength_examples():
    assert metrics.cycle_strength({(0, 1): 0.0}) == 0.0
    assert metrics.cycle_strength({(0, 1): 0.3, (0, 2): 0.0}) == pytest.approx(0.3)
    assert metrics.cycle_strength(np.array([3.0, 4.0])) == pytest.approx(5.0)


def test_subspace_share():
    L = {(0, 1): 3.0, (1, 2): 0.0, (3, 4): 4.0}
    assert metrics.subspace_share(L, {0, 1, 2}) == pytest.approx(9 / 25)
    assert np.isnan(metrics.subspace_share({(0, 1): 0.0}, {0, 1}))


def test_select():
    assert metrics.select(0.01, 0.4) == "Nash_1"
    assert metrics.select(0.4, 0.01) == "Nash_2"
    assert metrics.select(0.2, 0.3) == "undecided"
    assert metrics.select(0.08, 0.5, threshold=0.1) == "Nash_1"


@pytest.mark.parametrize("b, winner, threshold", [(-0.8, "Nash_1", 0.184), (0.8, "Nash_2", 0.273)])
def test_evaluate_ode_run(b, winner, threshold):
    c = build_controller(paper_game, NASH_1, b=b)
    tr = integrate(lambda x: controlled_field(paper_game, x, c), UNIFORM, 0.01, 50.0)
    rep = metrics.evaluate(tr, NASH_1, NASH_2, (0.184, 0.273))
    assert rep.selected == winner
    target = NASH_1 if winner == "Nash_1" else NASH_2
    assert np.linalg.norm(rep.mean_distribution - target) < 0.02
    d = rep.d_nash1_series if winner == "Nash_1" else rep.d_nash2_series
    assert rep.tau_half == pytest.approx(metrics.half_time(d, threshold, tr.times))
    assert 0 < rep.tau_half < 10


def test_report_json(tmp_path):
    tr = Trajectory(np.arange(4.0), np.tile(NASH_1, (4, 1)))
    rep = metrics.evaluate(tr, NASH_1, NASH_2, discard_fraction=0.0)
    p = tmp_path / "r.json"
    rep.dump(p)
    data = json.loads(p.read_text())
    assert set(data) == {"mean_distribution", "tau_half", "L", "L_strength", "selected"}
    assert "1,2" in data["L"] and len(data["L"]) == 10
    assert data["selected"] == "Nash_1"
    assert data["tau_half"] == 0.0
