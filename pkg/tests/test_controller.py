import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catchsim.ballistics import ThrowParams, simulate_throw
from catchsim.baseline_predictor import InterceptionPoint
from catchsim.controller import (HOME, WORKSPACE, RobotState, RobotTrace, control_step, evaluate_catch, judge,
                                 update_goal)

DT = 1e-3
goal_st = st.tuples(st.floats(-0.8, 0.8), st.floats(-0.1, 1.3), st.floats(-0.7, -0.1))


def _drive(state, goal, seconds):
    cmds, dists = [], []
    for _ in range(int(round(seconds / DT))):
        cmd = control_step(state, goal, DT)
        state.advance(cmd, DT)
        cmds.append(cmd)
        dists.append(np.linalg.norm(np.asarray(goal) - state.position))
    return np.array(cmds), np.array(dists)


@given(goal_st, st.floats(0.3, 1.5), st.floats(1.0, 6.0))
def test_limits_respected(goal, v_max, a_max):
    s = RobotState(v_max=v_max, a_max=a_max)
    cmds, _ = _drive(s, goal, 1.5)
    assert np.all(np.abs(cmds) <= v_max + 1e-12)
    steps = np.diff(np.vstack([np.zeros(3), cmds]), axis=0)
    assert np.all(np.abs(steps) <= a_max * DT + 1e-12)


@settings(max_examples=15)
@given(goal_st)
def test_static_goal_converges_in_time(goal):
    s = RobotState()
    goal = np.asarray(goal)
    d0 = np.linalg.norm(goal - s.position)
    budget = d0 / s.v_max + 2 * s.v_max / s.a_max + 0.05
    errs = []
    for _ in range(int(round(budget / DT))):
        s.advance(control_step(s, goal, DT), DT)
        errs.append(np.abs(goal - s.position))
    errs = np.array(errs)
    inside = np.all(errs <= s.deadband, axis=1)
    assert inside.any(), "deadband not reached within the time bound"
    first = int(np.argmax(inside))
    dists = np.linalg.norm(errs, axis=1)
    ramp = int(round(s.v_max / s.a_max / DT))
    assert np.all(np.diff(dists[ramp:first + 1]) <= 1e-12)
    # the rate limit lets the last bit of speed carry slightly past the band edge
    assert np.all(errs[first:] <= 2 * s.deadband)


def test_workspace_clamp_and_walls():
    s = RobotState()
    g, clamped = update_goal(s.position, InterceptionPoint(5.0, 0.5, -0.4, 1.0), s)
    assert clamped and g[0] == WORKSPACE[1][0]
    same, c2 = update_goal(g, None, s)
    assert np.array_equal(same, g) and not c2
    s.advance([100.0, 0.0, 0.0], 1.0)
    assert s.position[0] == WORKSPACE[1][0] and s.velocity[0] == 0.0


def test_state_validation():
    with pytest.raises(ValueError):
        RobotState(v_max=0)
    with pytest.raises(ValueError):
        RobotState(position=(5, 0, 0))
    with pytest.raises(ValueError):
        control_step(RobotState(), HOME, dt=0)


def test_trace_interpolation_and_csv(tmp_path):
    tr = RobotTrace()
    s = RobotState()
    tr.record(0.0, s)
    s.advance([0.5, 0.0, 0.0], 0.01)
    tr.record(0.01, s)
    assert tr.state_at(0.005)[0] == pytest.approx(0.0025)
    text = tr.to_csv()
    assert text.splitlines()[0] == "t,x,y,z,vx,vy,vz"
    assert text.splitlines()[2].startswith("0.01,0.005,0.4,-0.4,0.5,0,0")
    tr.write_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_bytes() == text.encode()


def test_judge_rim_inclusive():
    ok, miss = judge((0.075, 0.0), (0.0, 0.0))
    assert ok and miss == pytest.approx(0.075)
    assert not judge((0.0751, 0.0), (0.0, 0.0))[0]


@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_success_monotone_in_radius(ex, ey, r1, dr):
    traj = simulate_throw(ThrowParams((0.0, 1.5, 5.0), (0.0, 4.2, -5.5)), floor=False, z_stop=-0.6)
    tr = RobotTrace()
    s = RobotState(position=(ex, 0.4 + ey, -0.4))
    tr.record(0.0, s)
    tr.record(2.0, s)
    small = evaluate_catch(tr, traj, basket_radius=r1)
    big = evaluate_catch(tr, traj, basket_radius=r1 + dr)
    assert big.success or not small.success
    assert small.miss_distance == big.miss_distance


@pytest.mark.parametrize("travel,budget", [(0.6, 1.206 - 0.176), (0.2, 0.974 - 0.176)])
def test_travel_envelope(travel, budget):
    # defaults must cover the reach needed for each throw distance after the first inference
    s = RobotState()
    goal = np.array(HOME) + np.array([travel, 0.0, 0.0])
    for _ in range(int(round(budget / DT))):
        s.advance(control_step(s, goal, DT), DT)
    assert abs(goal[0] - s.position[0]) <= 0.075
