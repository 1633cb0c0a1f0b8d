import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from eqselect import control, dynamics
from eqselect.control import PAPER_CHANNEL, Controller
from eqselect.dynamics import (IntegrationError, Trajectory, controlled_field, integrate,
                               jacobian_controlled, jacobian_replicator, per_agent_adjustment,
                               replicator_field, tax)
from eqselect.game import NASH_1, NASH_2, paper_game

UNIFORM = np.full(5, 0.2)
# published gains, rows b = -0.8 and b = 0.8
K_NEG = np.array([0.5247, 0.9485, -1.4732, -1.8335, 0.2335])
K_POS = np.array([-1.4933, 0.7467, 0.7467, 1.2800, 0.3200])

J_NASH_1 = np.array([
    [-4, -4, 2, 1, 1],
    [2, -4, -4, -5, 7],
    [-4, 2, -4, 7, 4],
    [0, 0, 0, -9, 0],
    [0, 0, 0, 0, -18],
]) / 9


def ctrl(K, B=PAPER_CHANNEL, mode="channel_sum"):
    return Controller(B, K, tax_mode=mode)


# --- strategies -----------------------------------------------------------

def simplex(n=5, lo=0.0):
    return arrays(float, n, elements=st.floats(lo, 1.0)).filter(
        lambda v: v.sum() > 1e-3).map(lambda v: v / v.sum())


vec5 = arrays(float, 5, elements=st.floats(-3, 3))
channel = arrays(float, 5, elements=st.floats(0, 2)).filter(lambda v: v.sum() > 1e-3)
games = arrays(float, (5, 5), elements=st.floats(-3, 3))


# --- examples -------------------------------------------------------------

@pytest.mark.parametrize("x", [NASH_1, NASH_2])
def test_equilibria_are_rest_points(x):
    np.testing.assert_allclose(replicator_field(paper_game, x), 0, atol=1e-15)


def test_replicator_at_uniform():
    np.testing.assert_allclose(replicator_field(paper_game, UNIFORM),
                               [0, 0, 0.12, 0, -0.12], atol=1e-15)


def test_zero_gain_is_plain_replicator():
    x = np.array([0.1, 0.3, 0.2, 0.25, 0.15])
    np.testing.assert_array_equal(controlled_field(paper_game, x, Controller.zero()),
                                  replicator_field(paper_game, x))


def test_table_row_at_uniform_is_tangent():
    v = controlled_field(paper_game, UNIFORM, ctrl(K_POS))
    assert abs(v.sum()) < 1e-12
    kx = K_POS @ UNIFORM
    expected = replicator_field(paper_game, UNIFORM) + PAPER_CHANNEL * kx - 2 * kx * UNIFORM
    np.testing.assert_allclose(v, expected, atol=1e-15)


def test_tax_examples():
    assert tax(Controller.zero(), UNIFORM) == 0
    assert abs(tax(ctrl(K_POS), NASH_1)) < 1e-4
    c = ctrl([0, 0, 0, 1, 0])
    assert tax(c, NASH_2) == pytest.approx(-1.0)
    assert tax(ctrl([0, 0, 0, 1, 0], mode="plain"), NASH_2) == pytest.approx(-0.5)


def test_per_agent_adjustment_example():
    c = ctrl([0, 0, 0, 1, 0])
    np.testing.assert_allclose(per_agent_adjustment(c, NASH_2), [-1, -1, -1, 0, 0], atol=1e-15)
    np.testing.assert_array_equal(per_agent_adjustment(Controller.zero(), UNIFORM), 0)


def test_unknown_tax_mode():
    with pytest.raises(ValueError):
        dynamics.tax_factor("flat", PAPER_CHANNEL)


def test_jacobian_at_nash_1_in_ninths():
    np.testing.assert_allclose(jacobian_replicator(paper_game, NASH_1), J_NASH_1, atol=1e-12)


def test_jacobian_controlled_zero_gain():
    np.testing.assert_array_equal(jacobian_controlled(paper_game, NASH_1, Controller.zero()),
                                  jacobian_replicator(paper_game, NASH_1))


def test_table_row_shifts_the_complex_pair():
    # the published gains move the rotating pair, not the real poles
    lam = np.linalg.eigvals(jacobian_controlled(paper_game, NASH_1, ctrl(K_POS)))
    target = [0.8 - 1 / 3 + 1j / np.sqrt(3), 0.8 - 1 / 3 - 1j / np.sqrt(3), -2 / 3, -1, -2]
    from eqselect.eigen import max_pairing_error
    assert max_pairing_error(lam, target) < 1e-3


# --- properties -----------------------------------------------------------

@given(games, simplex(), vec5, channel)
def test_tangency(a, x, K, B):
    assert abs(controlled_field(a, x, ctrl(K, B)).sum()) < 1e-9


@given(games, simplex())
def test_replicator_tangent(a, x):
    assert abs(replicator_field(a, x).sum()) < 1e-9


@given(games, simplex(lo=1e-3), vec5, channel)
def test_budget_balance(a, x, K, B):
    adj = per_agent_adjustment(ctrl(K, B), x)
    assert abs(x @ adj) < 1e-9
    u = a @ x
    assert abs(x @ (u + adj) - x @ u) < 1e-9


@given(vec5, channel, st.sampled_from(["channel_sum", "plain"]))
def test_equilibrium_conservation(K, B, mode):
    # project K so that K . Nash_1 = 0
    K = K - (K @ NASH_1) / (NASH_1 @ NASH_1) * NASH_1
    v = controlled_field(paper_game, NASH_1, ctrl(K, B, mode))
    np.testing.assert_allclose(v, 0, atol=1e-9)


@given(games, simplex(), vec5, channel)
def test_column_sums_conserved(a, x, K, B):
    jc = jacobian_controlled(a, x, ctrl(K, B))
    jo = jacobian_replicator(a, x)
    np.testing.assert_allclose(jc.sum(axis=0), jo.sum(axis=0), atol=1e-9)


def test_column_sums_not_conserved_in_plain_mode():
    jc = jacobian_controlled(paper_game, NASH_1, ctrl(K_POS, mode="plain"))
    jo = jacobian_replicator(paper_game, NASH_1)
    assert np.abs(jc.sum(axis=0) - jo.sum(axis=0)).max() > 0.1


def _fd_jacobian(f, x, h=1e-6):
    n = len(x)
    out = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        out[:, j] = (f(x + e) - f(x - e)) / (2 * h)
    return out


@given(games, simplex(lo=0.01))
def test_replicator_jacobian_matches_finite_differences(a, x):
    fd = _fd_jacobian(lambda y: replicator_field(a, y), x)
    np.testing.assert_allclose(jacobian_replicator(a, x), fd, atol=1e-5)


@given(games, simplex(lo=0.01), vec5, channel, st.sampled_from(["channel_sum", "plain"]))
def test_full_controlled_jacobian_matches_finite_differences(a, x, K, B, mode):
    c = ctrl(K, B, mode)
    fd = _fd_jacobian(lambda y: controlled_field(a, y, c), x)
    np.testing.assert_allclose(jacobian_controlled(a, x, c, full=True), fd, atol=1e-5)


# --- integrator -----------------------------------------------------------

def test_rest_point_stays_put():
    tr = integrate(lambda x: replicator_field(paper_game, x), NASH_1, 0.01, 1.0)
    assert len(tr) == 101
    np.testing.assert_allclose(tr.states, np.tile(NASH_1, (101, 1)), atol=1e-9)


def test_uncontrolled_run_ends_at_an_equilibrium():
    tr = integrate(lambda x: replicator_field(paper_game, x), UNIFORM)
    assert len(tr) == 20001
    assert tr.times[-1] == pytest.approx(200.0)
    np.testing.assert_allclose(tr.states.sum(axis=1), 1, atol=1e-9)
    assert tr.states.min() >= 0
    d = min(np.linalg.norm(tr.final - NASH_1), np.linalg.norm(tr.final - NASH_2))
    assert d < 1e-3


@pytest.mark.parametrize("b", [-1.0, -0.8, 0.8, 1.0])
def test_controlled_runs_stay_on_simplex(b):
    c = control.build_controller(paper_game, NASH_1, b=b)
    tr = integrate(lambda x: controlled_field(paper_game, x, c), UNIFORM, 0.01, 20.0)
    np.testing.assert_allclose(tr.states.sum(axis=1), 1, atol=1e-9)
    assert tr.states.min() >= 0


def test_instability_detected():
    with pytest.raises(IntegrationError):
        integrate(lambda x: np.full_like(x, np.nan), [0.5, 0.5], 0.1, 1.0)


def test_bad_step():
    with pytest.raises(ValueError):
        integrate(lambda x: x * 0, UNIFORM, h=0.0)


def test_trajectory_csv_roundtrip(tmp_path):
    tr = integrate(lambda x: replicator_field(paper_game, x), UNIFORM, 0.01, 0.5)
    p = tmp_path / "t.csv"
    tr.to_csv(p, {"d1": np.linalg.norm(tr.states - NASH_1, axis=1)})
    header = p.read_text().splitlines()[0]
    assert header == "t,x1,x2,x3,x4,x5,d1"
    back = Trajectory.from_csv(p)
    np.testing.assert_allclose(back.states, tr.states, rtol=1e-11)


def test_trajectory_times_must_increase():
    with pytest.raises(ValueError):
        Trajectory([0, 0], np.zeros((2, 2)))


@given(games, simplex(), vec5, channel, st.sampled_from(["channel_sum", "plain"]))
def test_field_object_matches_function(a, x, K, B, mode):
    c = ctrl(K, B, mode)
    f = dynamics.ReplicatorField(a, c)
    ref = controlled_field(a, x, c)
    np.testing.assert_allclose(f(x), ref, atol=1e-12)
    np.testing.assert_allclose(f.scalar(x.tolist()), ref, atol=1e-12)
    np.testing.assert_allclose(dynamics.ReplicatorField(a)(x), replicator_field(a, x),
                               atol=1e-12)


def test_scalar_and_array_integrators_agree():
    c = control.build_controller(paper_game, NASH_1, b=-0.6)
    f = dynamics.ReplicatorField(paper_game, c)
    fast = integrate(f, UNIFORM, 0.01, 10.0)
    slow = integrate(lambda x: f(x), UNIFORM, 0.01, 10.0)
    np.testing.assert_allclose(fast.states, slow.states, atol=1e-12)


def test_scalar_integrator_detects_blowup():
    class Bad(dynamics.ReplicatorField):
        def scalar(self, x):
            return [float("nan")] + [0.0] * (len(x) - 1)
    with pytest.raises(IntegrationError):
        integrate(Bad(paper_game), UNIFORM, 0.01, 1.0)
