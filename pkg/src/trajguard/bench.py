"""Stage timing of the candidate pipeline and the cropping ablation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .avoidance import (STAGES, ReplanConfig, SelectionState, candidate_waypoints,
                        check_trajectory, make_executor, replan_step, validate_candidate)
from .collision import PointCloud, coverage_many
from .trajectory import State3, aabb_of_pieces, positions_at_times, sample_times_kernel


def synthetic_cloud(n_points: int = 65536, size: float = 100.0, seed: int = 0) -> PointCloud:
    """Uniform static points in a cube of edge ``size`` centered on the origin."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-0.5 * size, 0.5 * size, (n_points, 3))
    return PointCloud(pts, None, (0.0, 0.0, 0.0), 0.0)


def _stats(us: np.ndarray) -> dict:
    us = np.asarray(us, dtype=float)
    if us.size == 0:
        return {"mean": 0.0, "median": 0.0, "p99": 0.0}
    return {"mean": float(us.mean()), "median": float(np.median(us)),
            "p99": float(np.percentile(us, 99))}


@dataclass
class BenchReport:
    n_points: int
    n_candidates: int
    repetitions: int
    threads: int
    stages: dict = field(default_factory=dict)
    total: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)
    crop_on_us: float = 0.0
    crop_off_us: float = 0.0
    retained_fraction: float = 0.0
    budget_ms: float = 50.0
    budget_candidates: list = field(default_factory=list)

    @property
    def crop_speedup(self) -> float:
        return self.crop_off_us / self.crop_on_us if self.crop_on_us > 0 else float("inf")

    @property
    def stage_sum(self) -> float:
        return sum(self.stages[k]["mean"] for k in STAGES)

    def as_dict(self) -> dict:
        d = {"points": self.n_points, "candidates": self.n_candidates,
             "repetitions": self.repetitions, "threads": self.threads}
        for k in STAGES:
            for s, v in self.stages[k].items():
                d[f"{k}_{s}_us"] = round(v, 3)
        for s, v in self.coverage.items():
            d[f"coverage_{s}_us"] = round(v, 3)
        for s, v in self.total.items():
            d[f"total_{s}_us"] = round(v, 3)
        d["stage_sum_us"] = round(self.stage_sum, 3)
        d["check_with_crop_us"] = round(self.crop_on_us, 3)
        d["check_without_crop_us"] = round(self.crop_off_us, 3)
        d["crop_speedup"] = round(self.crop_speedup, 3)
        d["crop_retained_fraction"] = round(self.retained_fraction, 6)
        d["budget_ms"] = self.budget_ms
        d["candidates_per_budget_min"] = int(min(self.budget_candidates, default=0))
        d["candidates_per_budget_mean"] = round(float(np.mean(self.budget_candidates))
                                                if self.budget_candidates else 0.0, 2)
        return d


def run_bench(n_points: int = 65536, n_candidates: int = 100, repetitions: int = 3,
              cfg: ReplanConfig | None = None, seed: int = 0, ablation_samples: int = 20,
              budget_runs: int = 3) -> BenchReport:
    """Time every pipeline stage over ``repetitions`` x ``n_candidates`` candidates."""
    cfg = cfg or ReplanConfig()
    rng = np.random.default_rng(seed)
    cloud = synthetic_cloud(n_points, seed=seed)
    rows = {k: [] for k in STAGES}
    totals, cover = [], []
    trajs = []
    # warm the compiled kernels before timing
    validate_candidate(State3.at_rest((0, 0, 0)), (1.0, 0.5, 0.2), cloud, cfg)
    for _ in range(repetitions):
        state = State3.from_arrays(rng.uniform(-1, 1, 3), rng.uniform(-0.5, 0.5, 3))
        goal = state.position + rng.uniform(-5, 5, 3) * np.array([1.0, 1.0, 0.2])
        wps, _ = candidate_waypoints(state, goal, cfg)
        wps = [wps[i % len(wps)] for i in range(n_candidates)]
        for wp in wps:
            timer: dict = {}
            t0 = time.perf_counter()
            res = validate_candidate(state, wp, cloud, cfg, timer)
            totals.append((time.perf_counter() - t0) * 1e6)
            for k in STAGES:
                rows[k].append(timer.get(k, 0.0) * 1e6)
            if res.trajectory is not None:
                trajs.append(res.trajectory)
                times = sample_times_kernel(res.trajectory.knots, res.trajectory.coef, cfg.dp)
                pos = positions_at_times(res.trajectory.knots, res.trajectory.coef, times)
                s = cfg.sensor
                t0 = time.perf_counter()
                coverage_many(pos - cloud.origin, s.normal, s.cone_ratio, s.max_range,
                              s.body_radius)
                cover.append((time.perf_counter() - t0) * 1e6)
    rep = BenchReport(n_points, n_candidates, repetitions, cfg.threads)
    rep.stages = {k: _stats(v) for k, v in rows.items()}
    rep.total = _stats(totals)
    rep.coverage = _stats(cover)
    on, off, kept = crop_ablation(trajs[:ablation_samples], cloud, cfg)
    rep.crop_on_us, rep.crop_off_us, rep.retained_fraction = on, off, kept
    rep.budget_ms = cfg.budget * 1e3
    rep.budget_candidates = budget_counts(cloud, cfg, budget_runs, rng)
    return rep


def crop_ablation(trajs, cloud: PointCloud, cfg: ReplanConfig):
    """Mean checking time (box, crop, sampling, classification) with and
    without the box crop. Verdicts must agree."""
    on, off, kept = [], [], []
    for i, traj in enumerate(trajs):
        if i == 0:
            check_trajectory(traj, cloud, cfg, crop=True)
            check_trajectory(traj, cloud, cfg, crop=False)
        t0 = time.perf_counter()
        a = check_trajectory(traj, cloud, cfg, crop=True)
        t1 = time.perf_counter()
        b = check_trajectory(traj, cloud, cfg, crop=False)
        t2 = time.perf_counter()
        if not np.array_equal(a.codes, b.codes):
            raise AssertionError("cropping changed a verdict")
        on.append((t1 - t0) * 1e6)
        off.append((t2 - t1) * 1e6)
        lo, hi = aabb_of_pieces(traj.knots, traj.coef)
        grow = cfg.clearance.l_warn + 1e-9
        idx = cloud.crop_indices(lo - grow, hi + grow, max(traj.duration, cfg.min_horizon))
        kept.append(len(idx) / max(len(cloud), 1))
    if not on:
        return 0.0, 0.0, 0.0
    return float(np.mean(on)), float(np.mean(off)), float(np.mean(kept))


def budget_counts(cloud: PointCloud, cfg: ReplanConfig, runs: int, rng) -> list[int]:
    """Candidates validated by one adaptive replan step within the budget."""
    big = ReplanConfig(cfg.constraints, cfg.clearance, cfg.sensor, cfg.dp, cfg.budget,
                       "adaptive", cfg.n_candidates, cfg.spheroid, cfg.tube, cfg.min_horizon,
                       cfg.threads)
    executor = make_executor(big)
    counts = []
    try:
        for _ in range(runs):
            state = State3.from_arrays(rng.uniform(-1, 1, 3), rng.uniform(-0.5, 0.5, 3))
            goal = state.position + np.array([8.0, 0.0, 0.0])
            d = replan_step(cloud, state, None, goal, SelectionState(), big, executor)
            counts.append(d.n_candidates)
    finally:
        if executor is not None:
            executor.shutdown()
    return counts
