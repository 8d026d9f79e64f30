import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenes import DEFAULT
from trajguard import (NoSafeCandidate, PointCloud, ReplanConfig, SelectionState, SpheroidParams,
                       State3, TubeParams, WaypointCandidate, awp_cost, candidate_waypoints,
                       plan_3d, replan_step, select_best, spheroid_waypoints, tube_waypoints,
                       validate_candidate)

CFG = ReplanConfig(mode="fixed", n_candidates=64)


# ---------------------------------------------------------------- generation

def test_spheroid_unit_flattening_is_sphere():
    c = np.array([1.0, -2.0, 3.0])
    wps = spheroid_waypoints(c, SpheroidParams(radii=(1.0, 2.5), points=(20, 30), flattening=1.0))
    assert len(wps) == 50
    for w in wps:
        r = (1.0, 2.5)[w.shell]
        assert np.linalg.norm(w.position - c) == pytest.approx(r, abs=1e-12)


@pytest.mark.parametrize("flattening", [0.25, 0.5, 0.9])
def test_spheroid_points_on_ellipsoid(flattening):
    params = SpheroidParams(radii=(1.0, 2.0, 3.0), points=(13, 22, 32), flattening=flattening)
    for w in spheroid_waypoints(np.zeros(3), params):
        r = params.radii[w.shell]
        x, y, z = w.position
        assert (x * x + y * y) / r ** 2 + z * z / (flattening * r) ** 2 == pytest.approx(1.0,
                                                                                     abs=1e-9)


def test_spheroid_validation():
    with pytest.raises(ValueError):
        SpheroidParams(radii=(2.0, 1.0))
    with pytest.raises(ValueError):
        SpheroidParams(flattening=0.0)
    with pytest.raises(ValueError):
        SpheroidParams(radii=(1.0,), points=(0,))


def test_tube_ring_around_straight_path():
    traj = plan_3d(State3.at_rest((0, 0, 0)), State3.at_rest((4, 0, 0)), DEFAULT)
    wps = tube_waypoints(traj, TubeParams(radii=(1.0,), rings=1, points=4))
    assert len(wps) == 4
    centre = traj.state_at(traj.duration / 2).position
    offsets = np.array([w.position - centre for w in wps])
    assert offsets[:, 0] == pytest.approx(0.0, abs=1e-12)
    expect = {(1, 0), (0, 1), (-1, 0), (0, -1)}
    got = {tuple(int(round(v)) for v in o[1:]) for o in offsets}
    assert got == expect
    assert np.linalg.norm(offsets, axis=1) == pytest.approx(1.0)


def test_tube_orders_goal_rings_first():
    traj = plan_3d(State3.at_rest((0, 0, 0)), State3.at_rest((6, 0, 0)), DEFAULT)
    wps = tube_waypoints(traj, TubeParams(radii=(1.0, 2.0), rings=3, points=5))
    assert len(wps) == 30
    rings = [w.shell for w in wps]
    assert rings == sorted(rings, reverse=True)
    assert [w.position[0] for w in wps[::10]] == sorted([w.position[0] for w in wps[::10]],
                                                         reverse=True)


def test_tube_needs_positive_duration():
    traj = plan_3d(State3.at_rest((0, 0, 0)), State3.at_rest((0, 0, 0)), DEFAULT)
    with pytest.raises(ValueError):
        tube_waypoints(traj, TubeParams())


def test_candidate_order_commanded_tube_spheroid():
    wps, direct = candidate_waypoints(State3.at_rest((0, 0, 2)), (8, 0, 2), CFG)
    assert wps[0].source == "commanded" and direct is not None
    sources = [w.source for w in wps]
    assert sources.index("spheroid") > sources.index("tube")
    assert len(wps) == 1 + CFG.tube.count + CFG.spheroid.count


# ---------------------------------------------------------------- selection

def test_select_best_example():
    # commanded C at the origin, previous pick B at (2, 0, 0):
    # |AC| = (1, 2), |AB| = (3, 0), so alpha = 0.5 gives costs (2, 1)
    cands = [WaypointCandidate((-1.0, 0.0, 0.0), "spheroid", 0, 0),
             WaypointCandidate((2.0, 0.0, 0.0), "spheroid", 0, 1)]
    cmd, prev = np.zeros(3), np.array([2.0, 0.0, 0.0])
    cost = awp_cost([c.position for c in cands], cmd, prev, 0.5)
    assert cost == pytest.approx([2.0, 1.0])
    assert select_best(cands, cmd, SelectionState(prev, 0.5)).index == 1


def test_select_best_without_previous_uses_goal_distance():
    cands = [WaypointCandidate((3.0, 0.0, 0.0)), WaypointCandidate((1.0, 0.0, 0.0))]
    assert select_best(cands, np.zeros(3), SelectionState(None, 0.0)) is cands[1]


def test_select_best_ties_keep_order():
    cands = [WaypointCandidate((1.0, 0.0, 0.0)), WaypointCandidate((-1.0, 0.0, 0.0))]
    assert select_best(cands, np.zeros(3), SelectionState(None, 0.5)) is cands[0]


def test_select_best_empty_raises():
    with pytest.raises(NoSafeCandidate):
        select_best([], np.zeros(3), SelectionState())


def test_alpha_must_lie_in_unit_interval():
    with pytest.raises(ValueError):
        SelectionState(None, 1.5)


points = st.lists(st.tuples(*[st.floats(-50, 50)] * 3), min_size=1, max_size=12)
point = st.tuples(*[st.floats(-50, 50)] * 3)


@settings(max_examples=300, deadline=None)
@given(points, point, point, st.floats(0, 1), st.floats(0.01, 100))
def test_selection_is_scale_invariant(pts, cmd, prev, alpha, k):
    pts, cmd, prev = np.array(pts), np.array(cmd), np.array(prev)
    c1 = awp_cost(pts, cmd, prev, alpha)
    c2 = awp_cost(pts * k, cmd * k, prev * k, alpha)
    assert c2 == pytest.approx(c1 * k, rel=1e-9, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(points, point, st.floats(0, 1))
def test_alpha_extremes(pts, cmd, alpha):
    pts, cmd = np.array(pts), np.array(cmd)
    cands = [WaypointCandidate(p, "spheroid", 0, i) for i, p in enumerate(pts)]
    prev = pts[len(pts) // 2]
    near = select_best(cands, cmd, SelectionState(prev, 1.0))
    assert near.index == int(np.argmin(np.linalg.norm(pts - cmd, axis=1)))
    keep = select_best(cands, cmd, SelectionState(prev, 0.0))
    assert np.array_equal(keep.position, prev)


# ---------------------------------------------------------------- validation and replanning

def _wall(x=4.0):
    g = np.linspace(-3, 3, 31)
    yy, zz = np.meshgrid(g, g + 2.0)
    return np.stack([np.full(yy.size, x), yy.ravel(), zz.ravel()], axis=1)


def test_validate_candidate_clear_and_blocked():
    start = State3.at_rest((0, 0, 2))
    empty = PointCloud(np.zeros((0, 3)), origin=start.position)
    assert validate_candidate(start, (3, 0, 2), empty, CFG).safe
    wall = PointCloud(_wall(), origin=start.position)
    res = validate_candidate(start, (8, 0, 2), wall, CFG)
    assert not res.safe and res.reason.startswith("collision")


def test_validate_candidate_reports_infeasible():
    start = State3.from_arrays((0, 0, 0), (5, 0, 0))
    res = validate_candidate(start, (1, 0, 0), PointCloud(np.zeros((0, 3))), CFG)
    assert not res.safe and res.trajectory is None and res.reason.startswith("infeasible")


def test_replan_keeps_safe_trajectory():
    start = State3.at_rest((0, 0, 2))
    cloud = PointCloud(np.zeros((0, 3)), origin=start.position)
    traj = plan_3d(start, State3.at_rest((5, 0, 2)), CFG.constraints)
    d = replan_step(cloud, start, traj, (5, 0, 2), SelectionState(), CFG)
    assert d.kind == "keep" and d.trajectory is traj


def test_replan_switches_around_wall():
    start = State3.at_rest((0, 0, 2))
    cloud = PointCloud(_wall(), origin=start.position)
    sel = SelectionState(None, 0.5)
    # a small tube leaves room for the spheroid shells within the count
    cfg = ReplanConfig(mode="fixed", n_candidates=64, tube=TubeParams(rings=2, points=4))
    d = replan_step(cloud, start, None, (8, 0, 2), sel, cfg)
    assert d.kind == "switch"
    assert d.waypoint.source == "spheroid"
    assert sel.previous is not None and np.array_equal(sel.previous, d.waypoint.position)
    assert d.n_candidates <= cfg.n_candidates


def test_replan_returns_to_commanded_when_clear():
    start = State3.at_rest((0, 0, 2))
    cloud = PointCloud(np.zeros((0, 3)), origin=start.position)
    detour = plan_3d(start, State3.at_rest((1, 1, 2)), CFG.constraints)
    sel = SelectionState(np.array([1.0, 1.0, 2.0]), 0.5)
    d = replan_step(cloud, start, detour, (5, 0, 2), sel, CFG)
    assert d.kind == "switch" and d.waypoint.source == "commanded" and sel.previous is None


def test_replan_emergency_when_boxed_in():
    start = State3.at_rest((0, 0, 2))
    g = np.linspace(-6, 6, 49)
    shell = np.array([(x, y, z) for x in g for y in g for z in g + 2.0
                      if max(abs(x), abs(y), abs(z - 2.0)) > 0.8
                      and max(abs(x), abs(y), abs(z - 2.0)) < 1.1])
    cloud = PointCloud(shell, origin=start.position)
    d = replan_step(cloud, start, None, (8, 0, 2), SelectionState(), CFG)
    assert d.kind == "emergency"


def test_adaptive_mode_respects_budget():
    cfg = ReplanConfig(mode="adaptive", budget=0.005)
    start = State3.at_rest((0, 0, 2))
    cloud = PointCloud(_wall(), origin=start.position)
    d = replan_step(cloud, start, None, (8, 0, 2), SelectionState(), cfg)
    total = len(candidate_waypoints(start, (8, 0, 2), cfg)[0])
    assert 1 <= d.n_candidates < total


def test_threads_give_same_decision():
    start = State3.at_rest((0, 0, 2))
    cloud = PointCloud(_wall(), origin=start.position)
    from trajguard.avoidance import make_executor
    cfg4 = ReplanConfig(mode="fixed", n_candidates=64, threads=4)
    ex = make_executor(cfg4)
    try:
        d4 = replan_step(cloud, start, None, (8, 0, 2), SelectionState(), cfg4, ex)
    finally:
        ex.shutdown()
    d1 = replan_step(cloud, start, None, (8, 0, 2), SelectionState(), CFG)
    assert d1.waypoint.label == d4.waypoint.label


def test_config_validation():
    with pytest.raises(ValueError):
        ReplanConfig(mode="sometimes")
    with pytest.raises(ValueError):
        ReplanConfig(dp=0.0)
    with pytest.raises(ValueError):
        ReplanConfig(budget=0.0)
