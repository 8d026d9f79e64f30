"""Acceptance criteria, one test (and one PASS/FAIL line) per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary under "acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from oracles import (dense_positions, elevation_class, eval_segments, inside_interval,
                     rest_to_rest_oracle, stepping_hit)
from scenes import DEFAULT, random_constraints, random_trajectory
from trajguard import (AxisState, CloudPoint, PointCloud, ReplanConfig, SelectionState,
                       SensorModel, State3, WaypointCandidate, check_moving, compute_aabb,
                       plan_3d, plan_axis, sample_times, select_best, validate_candidate)
from trajguard.avoidance import candidate_waypoints, check_trajectory
from trajguard.bench import budget_counts, crop_ablation, synthetic_cloud
from trajguard.collision import coverage_many
from trajguard.fileio import load_scenario, shipped_scenario
from trajguard.sim import run

# tolerances and sizes pinned by the criteria
AABB_TRAJ, AABB_DT, AABB_TOL, AABB_RUNTIME = 1000, 1e-3, 1e-5, 30.0
SAMPLE_TRAJ, SAMPLE_DP, SAMPLE_TOL = 500, 0.1, 1e-9
SLAB_CASES, SLAB_DT = 10_000, 1e-3
CONE_POINTS, CONE_ANGLE, CONE_RANGE, CONE_TIE = 100_000, math.radians(33.2), 120.0, 1e-9
CROP_SCENES, CROP_POINTS, CROP_CUBE, CROP_PATH, CROP_MAX_KEPT = 200, 65536, 100.0, 5.0, 0.10
CROP_SPEEDUP = 3.0
MEAN_CANDIDATE_S, BUDGET_S, BUDGET_MIN = 1e-3, 0.05, 50
OPT_CASES, OPT_SLACK, OPT_BOUNDARY, OPT_VIOLATION = 100, 1e-4, 1e-6, 1e-9


def test_c1_aabb_sound_and_tight(record):
    rng = np.random.default_rng(1)
    worst_escape = worst_gap = 0.0
    t0 = time.perf_counter()
    for _ in range(AABB_TRAJ):
        traj = random_trajectory(rng)
        box = compute_aabb(traj)
        _, pos = dense_positions(traj, AABB_DT)
        worst_escape = max(worst_escape, float(np.max(pos - box.hi)),
                           float(np.max(box.lo - pos)))
        worst_gap = max(worst_gap, float(np.max(box.hi - pos.max(axis=0))),
                        float(np.max(pos.min(axis=0) - box.lo)))
    elapsed = time.perf_counter() - t0
    ok = worst_escape <= 1e-12 and worst_gap <= AABB_TOL and elapsed < AABB_RUNTIME
    record("C1 AABB soundness and tightness", ok,
           f"max escape {worst_escape:.2e} m, max face gap {worst_gap:.2e} m "
           f"(tol {AABB_TOL}), {AABB_TRAJ} trajectories in {elapsed:.1f} s (< {AABB_RUNTIME})")
    assert ok


def test_c2_constant_distance_sampling(record):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(SAMPLE_TRAJ):
        traj = random_trajectory(rng)
        times = sample_times(traj, SAMPLE_DP)
        ts, pos = dense_positions(traj, 1e-3)
        # every dense time joined to the interval it falls in, plus the sample times
        all_t = np.concatenate([ts, times])
        all_p = np.empty((all_t.size, 3))
        at_samples = np.empty((times.size, 3))
        for n, segs in enumerate(traj.segments):
            if segs:
                all_p[:, n] = eval_segments(segs, all_t)[0]
                at_samples[:, n] = eval_segments(segs, times)[0]
            else:
                all_p[:, n] = traj.start.position[n]
                at_samples[:, n] = traj.start.position[n]
        k = np.clip(np.searchsorted(times, all_t, side="right") - 1, 0, times.size - 1)
        worst = max(worst, float(np.max(np.abs(all_p - at_samples[k]))))
    ok = worst <= SAMPLE_DP + SAMPLE_TOL
    record("C2 constant-distance sampling", ok,
           f"max per-axis displacement within a sample interval {worst:.12f} m "
           f"(limit {SAMPLE_DP} + {SAMPLE_TOL}) on {SAMPLE_TRAJ} trajectories")
    assert ok


def test_c3_slab_test_vs_stepping(record):
    rng = np.random.default_rng(3)
    agree = conservative = wrong = 0
    for i in range(SLAB_CASES):
        c = rng.uniform(-5, 5, 3)
        half = rng.uniform(0.2, 2.0, 3)
        p = rng.uniform(-10, 10, 3)
        t_lo = rng.uniform(0.0, 2.0)
        t_hi = t_lo + rng.uniform(0.0, 5.0)
        if i % 2:
            # aim at a point near the box so many instances graze it
            aim = c + rng.uniform(-1.3, 1.3, 3) * half
            v = (aim - p) / rng.uniform(0.5, 7.0)
        else:
            v = rng.uniform(-3, 3, 3)
            v[rng.random(3) < 0.1] = 0.0
        got = check_moving(c, CloudPoint(p, v), half, (t_lo, t_hi))
        ref = stepping_hit(p, v, c - half, c + half, t_lo, t_hi, SLAB_DT)
        if got == ref:
            agree += 1
            continue
        enter, leave = inside_interval(p, v, c - half, c + half)
        lo, hi = max(enter, t_lo), min(leave, t_hi)
        if got and not ref and 0.0 < hi - lo < SLAB_DT:
            conservative += 1
        elif got and not ref and leave > t_hi and lo < hi and t_hi - lo < SLAB_DT:
            conservative += 1
        else:
            wrong += 1
    ok = wrong == 0
    record("C3 slab test vs stepping oracle", ok,
           f"{agree} agree, {conservative} conservative sub-dt disagreements, "
           f"{wrong} other disagreements of {SLAB_CASES}")
    assert ok


def test_c4_cone_classification(record):
    rng = np.random.default_rng(4)
    sensor = SensorModel(opening_angle=CONE_ANGLE, max_range=CONE_RANGE)
    n = CONE_POINTS
    # directions with elevations concentrated near the cone edge, radii near the range
    elev = np.where(rng.random(n) < 0.5, rng.uniform(-np.pi / 2, np.pi / 2, n),
                    np.sign(rng.random(n) - 0.5) * (CONE_ANGLE / 2 + rng.normal(0, 1e-3, n)))
    az = rng.uniform(0, 2 * np.pi, n)
    r = np.where(rng.random(n) < 0.7, rng.uniform(0, 160, n),
                 CONE_RANGE + rng.normal(0, 1e-3, n))
    q = np.stack([r * np.cos(elev) * np.cos(az), r * np.cos(elev) * np.sin(az),
                  r * np.sin(elev)], axis=1)
    got = coverage_many(q, sensor.normal, sensor.cone_ratio, sensor.max_range,
                        sensor.body_radius)
    mismatch = ties = 0
    for k in range(n):
        ref, margin = elevation_class(q[k], CONE_ANGLE, CONE_RANGE, sensor.body_radius)
        if margin < CONE_TIE:
            ties += 1
            continue
        mismatch += int(got[k] != ref)
    ok = mismatch == 0
    record("C4 cone classification vs elevation oracle", ok,
           f"{mismatch} mismatches of {n - ties} points ({ties} within {CONE_TIE} of a boundary)")
    assert ok


def _random_scene(rng, origin):
    # sparse enough that roughly half of the checks come out safe
    static = rng.uniform(-25, 25, (rng.integers(0, 400), 3))
    moving = rng.uniform(-25, 25, (rng.integers(0, 40), 3))
    pos = np.concatenate([static, moving])
    vel = np.concatenate([np.zeros_like(static), rng.normal(0, 1.5, moving.shape)])
    return PointCloud(pos, vel, origin)


def test_c5_crop_invariance_and_reduction(record):
    rng = np.random.default_rng(5)
    cfg = ReplanConfig()
    differing = 0
    verdicts = {"safe": 0, "replan": 0}
    for _ in range(CROP_SCENES):
        traj = random_trajectory(rng, z_scale=0.1)
        cloud = _random_scene(rng, traj.start.position)
        for ctx in ("candidate", "executing"):
            a = check_trajectory(traj, cloud, cfg, ctx, crop=True)
            b = check_trajectory(traj, cloud, cfg, ctx, crop=False)
            same = (a.verdict == b.verdict and a.reason == b.reason
                    and np.array_equal(a.codes, b.codes))
            differing += int(not same)
            verdicts[a.verdict] += 1
    cube = synthetic_cloud(CROP_POINTS, CROP_CUBE, seed=5)
    traj = plan_3d(State3.at_rest((0, 0, 0)), State3.at_rest((3.0, 3.0, 2.5)), DEFAULT)
    length = float(np.linalg.norm(traj.target.position - traj.start.position))
    lo, hi = compute_aabb(traj).lo, compute_aabb(traj).hi
    grow = cfg.clearance.l_warn + 1e-9
    kept = len(cube.crop_indices(lo - grow, hi + grow, max(traj.duration, cfg.min_horizon)))
    frac = kept / CROP_POINTS
    ok = differing == 0 and frac < CROP_MAX_KEPT
    record("C5 crop invariance and reduction", ok,
           f"{differing} differing reports over {2 * CROP_SCENES} checks {verdicts}; "
           f"{length:.1f} m path keeps {kept}/{CROP_POINTS} points ({100 * frac:.3f}%, "
           f"< {100 * CROP_MAX_KEPT:.0f}%)")
    assert ok


@pytest.fixture(scope="module")
def cube_cloud():
    return synthetic_cloud(CROP_POINTS, CROP_CUBE, seed=0)


def _bench_trajectories(rng, cfg, count):
    out = []
    while len(out) < count:
        state = State3.from_arrays(rng.uniform(-1, 1, 3), rng.uniform(-0.5, 0.5, 3))
        goal = state.position + rng.uniform(-5, 5, 3) * np.array([1.0, 1.0, 0.2])
        wps, _ = candidate_waypoints(state, goal, cfg)
        for wp in wps[:: max(1, len(wps) // 10)]:
            out.append((state, wp))
    return out[:count]


def test_c6_crop_speedup(record, cube_cloud):
    rng = np.random.default_rng(6)
    cfg = ReplanConfig()
    trajs = [plan_3d(s, State3.at_rest(w.position), cfg.constraints)
             for s, w in _bench_trajectories(rng, cfg, 30)]
    on, off, kept = crop_ablation(trajs, cube_cloud, cfg)
    speedup = off / on
    ok = speedup >= CROP_SPEEDUP
    record("C6 crop ablation speedup", ok,
           f"checking {on:.0f} us with crop vs {off:.0f} us without: {speedup:.1f}x "
           f"(>= {CROP_SPEEDUP}x), mean kept fraction {kept:.2e}")
    assert ok


def test_c7_throughput(record, cube_cloud):
    rng = np.random.default_rng(7)
    cfg = ReplanConfig()
    cases = _bench_trajectories(rng, cfg, 300)
    for s, w in cases[:5]:
        validate_candidate(s, w, cube_cloud, cfg)
    t0 = time.perf_counter()
    for s, w in cases:
        validate_candidate(s, w, cube_cloud, cfg)
    mean = (time.perf_counter() - t0) / len(cases)
    counts = budget_counts(cube_cloud, ReplanConfig(budget=BUDGET_S), 7, rng)
    median = float(np.median(counts))
    ok = mean < MEAN_CANDIDATE_S and median >= BUDGET_MIN
    record("C7 throughput", ok,
           f"mean validate_candidate {mean * 1e6:.0f} us (< {MEAN_CANDIDATE_S * 1e6:.0f} us); "
           f"candidates per {BUDGET_S * 1e3:.0f} ms budget median {median:.0f} "
           f"(>= {BUDGET_MIN}), runs {counts}")
    assert ok


def test_c8_time_optimality(record):
    rng = np.random.default_rng(8)
    worst_excess = worst_boundary = worst_violation = -math.inf
    for i in range(OPT_CASES):
        c = random_constraints(rng)
        dist = rng.uniform(-20, 20) if i % 2 else rng.uniform(-1, 1)
        segs, T = plan_axis(AxisState(0.0), AxisState(dist), c)
        worst_excess = max(worst_excess, T - rest_to_rest_oracle(dist, c))
        end = segs[-1].end
        worst_boundary = max(worst_boundary, abs(end.p - dist), abs(end.v), abs(end.a))
        ts = np.linspace(0.0, T, 4001)
        _, v, a = eval_segments(segs, ts)
        j = np.array([s.j for s in segs])
        worst_violation = max(worst_violation, float(np.max(v - c.v_max)),
                              float(np.max(c.v_min - v)), float(np.max(a - c.a_max)),
                              float(np.max(c.a_min - a)), float(np.max(j - c.j_max)),
                              float(np.max(c.j_min - j)))
    ok = (worst_excess <= OPT_SLACK and worst_boundary <= OPT_BOUNDARY
          and worst_violation <= OPT_VIOLATION)
    record("C8 time-optimality vs brute-force 7-phase search", ok,
           f"max excess over brute force {worst_excess:.2e} s (<= {OPT_SLACK}); "
           f"boundary error {worst_boundary:.2e} (<= {OPT_BOUNDARY}); "
           f"constraint violation {max(worst_violation, 0.0):.2e} (<= {OPT_VIOLATION})")
    assert ok


def _run_twice(name):
    sc = load_scenario(shipped_scenario(name))
    a, b = run(sc), run(sc)
    same = a.summary() == b.summary() and np.array_equal(a.path, b.path)
    return sc, a, same


def test_c9_closed_loop_scenarios(record):
    lines = []
    ok = True
    for name in ("ball", "wall", "empty"):
        sc, log, same = _run_twice(name)
        s = log.summary()
        if name == "empty":
            good = s["goal_reached"] and s["replans"] == 0 and not s["collision"]
        else:
            good = not s["collision"] and log.min_clearance >= 1.0
        good = good and same
        ok = ok and good
        lines.append(f"{name}: collision={s['collision']} goal={s['goal_reached']} "
                     f"replans={s['replans']} max_candidates={s['max_candidates']} "
                     f"clearance/l_coll={log.min_clearance:.2f} deterministic={same}")
    record("C9 closed-loop scenarios", ok, "; ".join(lines))
    assert ok


def test_c10_selection_metric(record):
    rng = np.random.default_rng(10)
    nearest = scaled = sticky = 0
    trials = 2000
    for _ in range(trials):
        n = int(rng.integers(2, 12))
        pts = rng.uniform(-10, 10, (n, 3))
        cands = [WaypointCandidate(p, "spheroid", 0, k) for k, p in enumerate(pts)]
        cmd = rng.uniform(-10, 10, 3)
        prev = pts[rng.integers(n)]
        alpha = rng.uniform(0, 1)
        # alpha = 1: nearest to the commanded waypoint
        pick = select_best(cands, cmd, SelectionState(prev, 1.0))
        nearest += int(pick.index == int(np.argmin(np.linalg.norm(pts - cmd, axis=1))))
        # uniform scaling of all distances keeps the argmin
        k = rng.uniform(0.01, 100)
        base = select_best(cands, cmd, SelectionState(prev, alpha))
        big = [WaypointCandidate(c.position * k, c.source, c.shell, c.index) for c in cands]
        pick_k = select_best(big, cmd * k, SelectionState(prev * k, alpha))
        scaled += int(pick_k.index == base.index)
        # alpha = 0 with the previous pick available: keep it
        pick0 = select_best(cands, cmd, SelectionState(prev, 0.0))
        sticky += int(np.array_equal(pick0.position, prev))
    ok = nearest == scaled == sticky == trials
    record("C10 selection metric properties", ok,
           f"alpha=1 nearest {nearest}/{trials}, scale invariance {scaled}/{trials}, "
           f"alpha=0 stickiness {sticky}/{trials}")
    assert ok
