import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import elevation_class, inside_interval
from trajguard import (Aabb, ClearanceSpec, CloudPoint, Coverage, PointCloud, SampleVerdict,
                       SensorModel, check_moving, check_static, classify_positions,
                       classify_trajectory, coverage_class, crop_cloud, crop_indices)

SENSOR = SensorModel()
ORIGIN = np.zeros(3)


# ---------------------------------------------------------------- box tests

def test_static_inside_and_on_face():
    assert check_static((0, 0, 0), CloudPoint((0.5, 0, 0)), 1.0)
    assert not check_static((0, 0, 0), CloudPoint((1.0, 0, 0)), 1.0)
    assert not check_static((0, 0, 0), CloudPoint((0.5, 0, 2.0)), (1.0, 1.0, 1.0))


def test_static_rejects_nonpositive_extent():
    with pytest.raises(ValueError):
        check_static((0, 0, 0), CloudPoint((0, 0, 0)), 0.0)


def test_moving_toward_and_away():
    approaching = CloudPoint((-5, 0, 0), (1, 0, 0))
    leaving = CloudPoint((-5, 0, 0), (-1, 0, 0))
    assert check_moving((0, 0, 0), approaching, 1.0, (0, 10))
    assert not check_moving((0, 0, 0), leaving, 1.0, (0, 10))
    # the box is reached at t=4: a window closing at 4 only touches the face
    assert not check_moving((0, 0, 0), approaching, 1.0, (0, 4))
    assert check_moving((0, 0, 0), approaching, 1.0, (0, 4.001))


def test_moving_rejects_reversed_window():
    with pytest.raises(ValueError):
        check_moving((0, 0, 0), CloudPoint((0, 0, 0)), 1.0, (2.0, 1.0))


def test_cloud_point_needs_finite_values():
    with pytest.raises(ValueError):
        CloudPoint((0, math.nan, 0))


vec = st.tuples(*[st.floats(-10, 10)] * 3)


@settings(max_examples=300, deadline=None)
@given(vec, vec, vec, st.floats(0.1, 3), st.floats(0.0, 2.0), st.floats(0.0, 8.0))
def test_moving_is_monotone_in_extent(c, p, v, l, extra, horizon):
    pt = CloudPoint(p, v)
    if check_moving(c, pt, l, (0, horizon)):
        assert check_moving(c, pt, l + extra, (0, horizon))


@settings(max_examples=300, deadline=None)
@given(vec, vec, vec, st.floats(0.1, 3), st.floats(0.0, 8.0))
def test_moving_matches_interval_oracle(c, p, v, l, horizon):
    c, p, v = map(np.array, (c, p, v))
    enter, leave = inside_interval(p, v, c - l, c + l)
    lo, hi = max(enter, 0.0), min(leave, horizon)
    got = check_moving(c, CloudPoint(p, v), l, (0, horizon))
    # tolerate disagreement only at exact touches
    if abs(hi - lo) > 1e-9 and abs(leave - 0.0) > 1e-9 and abs(enter - horizon) > 1e-9:
        assert got == (enter < leave and enter < horizon and leave > 0.0)


# ---------------------------------------------------------------- coverage

def test_coverage_examples():
    assert coverage_class((0, 0, 5), SENSOR, ORIGIN) == Coverage.UPPER_CONE
    assert coverage_class((0, 0, -5), SENSOR, ORIGIN) == Coverage.LOWER_CONE
    assert coverage_class((1, 0, 0), SENSOR, ORIGIN) == Coverage.OBSERVABLE
    assert coverage_class((200, 0, 0), SENSOR, ORIGIN) == Coverage.OUT_OF_RANGE
    assert coverage_class((0.1, 0, 0.1), SENSOR, ORIGIN) == Coverage.INSIDE_BODY
    assert coverage_class((11, 0, 5), SENSOR, (10, 0, 5)) == Coverage.OBSERVABLE


def test_cone_ratio_from_opening_angle():
    assert SENSOR.cone_ratio == pytest.approx(math.tan(math.pi / 2 - math.radians(16.6)))


@pytest.mark.parametrize("elev_deg,expected", [(16.5, Coverage.OBSERVABLE),
                                               (16.7, Coverage.UPPER_CONE),
                                               (-16.7, Coverage.LOWER_CONE)])
def test_cone_edge(elev_deg, expected):
    e = math.radians(elev_deg)
    assert coverage_class((10 * math.cos(e), 0, 10 * math.sin(e)), SENSOR, ORIGIN) == expected


@settings(max_examples=500, deadline=None)
@given(vec)
def test_coverage_matches_elevation_oracle(q):
    ref, margin = elevation_class(q, SENSOR.opening_angle, SENSOR.max_range, SENSOR.body_radius)
    if margin > 1e-9:
        assert coverage_class(q, SENSOR, ORIGIN) == ref


def test_sensor_validation():
    with pytest.raises(ValueError):
        SensorModel(opening_angle=0.0)
    with pytest.raises(ValueError):
        SensorModel(normal=(0, 0, 2))


# ---------------------------------------------------------------- crop

def test_crop_keeps_static_inside_and_moving_entering():
    pos = [(0, 0, 0), (5, 0, 0), (-5, 0, 0), (0, 9, 0)]
    vel = [(0, 0, 0), (0, 0, 0), (2, 0, 0), (0, -1, 0)]
    cloud = PointCloud(pos, vel)
    box = Aabb((-1, -1, -1), (1, 1, 1))
    assert list(crop_indices(cloud, box, 1.0)) == [0]
    assert list(crop_indices(cloud, box, 3.0)) == [0, 2]
    assert list(crop_indices(cloud, box, 9.0)) == [0, 2, 3]
    assert len(crop_cloud(cloud, box, 9.0)) == 3


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_crop_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, 400))
    pos = rng.uniform(-20, 20, (n, 3))
    vel = rng.normal(0, 1, (n, 3)) * (rng.random((n, 1)) < 0.3)
    cloud = PointCloud(pos, vel)
    lo = rng.uniform(-10, 0, 3)
    hi = lo + rng.uniform(0, 10, 3)
    horizon = rng.uniform(0, 5)
    expect = [i for i in range(n)
              if (lambda e, l: e < l and e < horizon and l > 0)(
                  *inside_interval(pos[i], vel[i], lo, hi))
              or (not vel[i].any() and np.all((pos[i] > lo) & (pos[i] < hi)))]
    assert list(cloud.crop_indices(lo, hi, horizon)) == sorted(set(expect))


def test_cloud_validation():
    with pytest.raises(ValueError):
        PointCloud([[0, 0, math.inf]])
    with pytest.raises(ValueError):
        PointCloud([[0, 0, 0]], [[0, 0, 0], [1, 1, 1]])


# ---------------------------------------------------------------- classification

SPEC = ClearanceSpec((0.5, 0.5, 0.5), (1.0, 1.0, 1.0))


def test_classify_priorities():
    cloud = PointCloud([(0.2, 0, 0), (3.7, 0, 0)])
    samples = np.array([(0, 0, 0), (3, 0, 0), (6, 0, 0), (0, 0, 30)])
    cls = classify_positions(samples, cloud, SPEC, SENSOR, 2.0)
    assert [v.verdict for v in cls.verdicts()] == ["collide", "warn", "safe", "unobserved"]
    assert cls.verdicts()[0].offenders == (0,)
    assert cls.verdicts()[1].offenders == (1,)


def test_points_on_faces():
    # on the collision face: inside the warning box only
    on_coll = classify_positions(np.zeros((1, 3)), PointCloud([(0.5, 0, 0)]), SPEC, SENSOR, 2.0)
    assert on_coll.verdicts()[0].verdict == "warn"
    # on the warning face: outside both open boxes
    on_warn = classify_positions(np.zeros((1, 3)), PointCloud([(1.0, 0, 0)]), SPEC, SENSOR, 2.0)
    assert on_warn.verdicts()[0].verdict == "safe"


def test_clearance_spec_ordering():
    with pytest.raises(ValueError):
        ClearanceSpec((1, 1, 1), (0.5, 2, 2))


def _v(names):
    return [SampleVerdict(i, n) for i, n in enumerate(names)]


@pytest.mark.parametrize("names,context,verdict", [
    (["warn", "warn", "safe", "safe"], "candidate", "safe"),
    (["safe", "warn", "safe"], "candidate", "replan"),
    (["safe", "safe"], "executing", "safe"),
    (["warn", "warn"], "candidate", "safe"),
    (["warn", "warn"], "executing", "replan"),
    (["safe", "collide"], "candidate", "replan"),
    (["unobserved", "safe"], "candidate", "replan"),
])
def test_trajectory_verdicts(names, context, verdict):
    assert classify_trajectory(_v(names), context).verdict == verdict


def test_trajectory_verdict_errors():
    with pytest.raises(ValueError):
        classify_trajectory([], "candidate")
    with pytest.raises(ValueError):
        classify_trajectory(_v(["safe"]), "later")


def test_collision_reason_names_first_sample():
    rep = classify_trajectory(_v(["safe", "warn", "collide", "collide"]))
    assert rep.reason == "collision at sample 2" and rep.first_collision == 2
    assert rep.counts() == {"safe": 1, "unobserved": 0, "warn": 1, "collide": 2}
