"""Alternative waypoints, candidate validation and selection under a time budget."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .collision import (ClearanceSpec, PointCloud, SafetyReport, SensorModel,
                        classify_positions, classify_trajectory)
from .trajectory import (AxisConstraints, InfeasibleError, State3, Trajectory,
                         aabb_of_pieces, plan_3d, positions_at_times, sample_times_kernel,
                         states_at)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
STAGES = ("generation", "aabb", "crop", "rollout", "check")


@dataclass(frozen=True)
class WaypointCandidate:
    position: np.ndarray
    source: str = "commanded"
    shell: int = -1
    index: int = -1

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("waypoint must be finite")
        object.__setattr__(self, "position", p)

    @property
    def label(self) -> str:
        if self.source == "commanded":
            return "commanded"
        return f"{self.source}[{self.shell},{self.index}]"


def _check_radii(radii) -> tuple[float, ...]:
    radii = tuple(float(r) for r in radii)
    if not radii or radii[0] <= 0.0 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError(f"radii must be positive and strictly increasing, got {radii}")
    return radii


@dataclass(frozen=True)
class SpheroidParams:
    """Concentric oblate shells; ``points`` is one count or one per shell."""

    radii: tuple = (1.0, 2.0, 3.0)
    points: int | tuple = (13, 22, 32)
    flattening: float = 0.25

    def __post_init__(self):
        radii = _check_radii(self.radii)
        pts = self.points
        pts = (int(pts),) * len(radii) if np.isscalar(pts) else tuple(int(p) for p in pts)
        if len(pts) != len(radii) or min(pts) < 1:
            raise ValueError("need a positive point count per shell")
        if not 0.0 < self.flattening <= 1.0:
            raise ValueError("flattening must lie in (0, 1]")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return sum(self.points)


@dataclass(frozen=True)
class TubeParams:
    radii: tuple = (1.0, 2.0)
    rings: int = 17
    points: int = 6

    def __post_init__(self):
        object.__setattr__(self, "radii", _check_radii(self.radii))
        if self.rings < 1 or self.points < 1:
            raise ValueError("need at least one ring and one point per ring")

    @property
    def count(self) -> int:
        return len(self.radii) * self.rings * self.points


@dataclass
class SelectionState:
    previous: np.ndarray | None = None
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class ReplanConfig:
    constraints: tuple = (AxisConstraints.symmetric(2.0, 2.0, 4.0),) * 3
    clearance: ClearanceSpec = field(
        default_factory=lambda: ClearanceSpec.for_vehicle((0.4, 0.4, 0.2)))
    sensor: SensorModel = field(default_factory=SensorModel)
    dp: np.ndarray = field(default_factory=lambda: np.full(3, 0.1))
    budget: float = 0.05
    mode: str = "adaptive"
    n_candidates: int = 64
    spheroid: SpheroidParams = field(default_factory=SpheroidParams)
    tube: TubeParams = field(default_factory=TubeParams)
    min_horizon: float = 2.0
    threads: int = 1

    def __post_init__(self):
        c = self.constraints
        c = (c,) * 3 if isinstance(c, AxisConstraints) else tuple(c)
        if len(c) != 3:
            raise ValueError("need constraints for three axes")
        object.__setattr__(self, "constraints", c)
        dp = np.broadcast_to(np.asarray(self.dp, dtype=float), (3,)).copy()
        if np.any(dp <= 0.0):
            raise ValueError("dp must be positive")
        object.__setattr__(self, "dp", dp)
        if not self.budget > 0.0:
            raise ValueError("budget must be positive")
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"mode must be 'adaptive' or 'fixed', got {self.mode!r}")
        if self.n_candidates < 1:
            raise ValueError("need at least one candidate")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.min_horizon < 0.0:
            raise ValueError("min_horizon must be >= 0")


# ---------------------------------------------------------------- generation

def spheroid_waypoints(center, params: SpheroidParams) -> list[WaypointCandidate]:
    """Fibonacci-lattice points on concentric oblate shells around ``center``."""
    c = center.position if isinstance(center, State3) else np.asarray(center, dtype=float)
    out = []
    for s, (r, n) in enumerate(zip(params.radii, params.points)):
        i = np.arange(n)
        z = 1.0 - 2.0 * (i + 0.5) / n
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = i * GOLDEN_ANGLE
        pts = np.stack([r * rho * np.cos(phi), r * rho * np.sin(phi),
                        r * params.flattening * z], axis=1) + c
        out.extend(WaypointCandidate(p, "spheroid", s, k) for k, p in enumerate(pts))
    return out


def _ring_basis(direction):
    speed = float(np.linalg.norm(direction))
    if speed < 1e-6:
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    d = direction / speed
    up = np.array([0.0, 0.0, 1.0])
    u = np.cross(up, d)
    if np.linalg.norm(u) < 1e-9:
        u = np.array([1.0, 0.0, 0.0])
    u /= np.linalg.norm(u)
    w = np.cross(d, u)
    return u, w


def tube_waypoints(original: Trajectory, params: TubeParams) -> list[WaypointCandidate]:
    """Rings of points around the original trajectory.

    Ring ``k`` sits at time ``T (k + 1/2) / rings`` (the middle of its time
    slice, so no ring lands on the resting end point) in the plane
    orthogonal to the velocity there. Rings nearer the goal come first, and
    within a ring smaller radii come first.
    """
    if not original.duration > 0.0:
        raise ValueError("tube needs a trajectory of positive duration")
    times = original.duration * (np.arange(params.rings) + 0.5) / params.rings
    st = states_at(original, times)
    ang = 2.0 * np.pi * np.arange(params.points) / params.points
    out = []
    for k in reversed(range(params.rings)):
        u, w = _ring_basis(st[k, 1])
        for ri, r in enumerate(params.radii):
            for a_i, a in enumerate(ang):
                p = st[k, 0] + r * (math.cos(a) * u + math.sin(a) * w)
                out.append(WaypointCandidate(p, "tube", k, ri * params.points + a_i))
    return out


# ---------------------------------------------------------------- validation

@dataclass
class CandidateResult:
    waypoint: WaypointCandidate
    trajectory: Trajectory | None
    report: SafetyReport | None
    reason: str = ""
    order: int = 0

    @property
    def safe(self) -> bool:
        return self.report is not None and self.report.safe


def _tick(timer, key, t0):
    t1 = time.perf_counter()
    if timer is not None:
        timer[key] = timer.get(key, 0.0) + (t1 - t0)
    return t1


def check_trajectory(traj: Trajectory, cloud: PointCloud, cfg: ReplanConfig,
                     context: str = "candidate", timer: dict | None = None,
                     crop: bool = True) -> SafetyReport:
    """Bounding box, crop, constant-distance sampling and classification of ``traj``."""
    t0 = time.perf_counter()
    horizon = max(traj.duration, cfg.min_horizon)
    lo, hi = aabb_of_pieces(traj.knots, traj.coef)
    t0 = _tick(timer, "aabb", t0)
    if crop:
        # grown by the warning extent: every point that can flag a sample survives
        grow = cfg.clearance.l_warn + 1e-9
        idx = cloud.crop_indices(lo - grow, hi + grow, horizon)
        pos = cloud.positions[idx]
        vel = cloud.velocities[idx]
    else:
        idx = None
        pos, vel = cloud.positions, cloud.velocities
    t0 = _tick(timer, "crop", t0)
    times = sample_times_kernel(traj.knots, traj.coef, cfg.dp)
    samples = positions_at_times(traj.knots, traj.coef, times)
    t0 = _tick(timer, "rollout", t0)
    sub = PointCloud.__new__(PointCloud)
    for name, value in (("positions", pos), ("velocities", vel), ("origin", cloud.origin),
                        ("timestamp", cloud.timestamp)):
        object.__setattr__(sub, name, value)
    classes = classify_positions(samples, sub, cfg.clearance, cfg.sensor, horizon,
                                 collect=False, point_index=idx)
    report = classify_trajectory(classes, context, sample_times=times)
    _tick(timer, "check", t0)
    return report


def validate_candidate(start: State3, wp, cloud: PointCloud, cfg: ReplanConfig,
                       timer: dict | None = None, crop: bool = True) -> CandidateResult:
    """Plan to rest at ``wp`` and check the result as a candidate."""
    if not isinstance(wp, WaypointCandidate):
        wp = WaypointCandidate(wp)
    t0 = time.perf_counter()
    try:
        traj = plan_3d(start, State3.at_rest(wp.position), cfg.constraints)
    except InfeasibleError as exc:
        _tick(timer, "generation", t0)
        return CandidateResult(wp, None, None, f"infeasible: {exc}")
    _tick(timer, "generation", t0)
    report = check_trajectory(traj, cloud, cfg, "candidate", timer, crop)
    return CandidateResult(wp, traj, report, report.reason)


# ---------------------------------------------------------------- selection

def awp_cost(positions, commanded, previous, alpha: float) -> np.ndarray:
    """``alpha |AC| + (1 - alpha) |AB|``; just ``|AC|`` without a previous pick."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    ac = np.linalg.norm(pts - np.asarray(commanded, dtype=float), axis=1)
    if previous is None:
        return ac
    ab = np.linalg.norm(pts - np.asarray(previous, dtype=float), axis=1)
    return alpha * ac + (1.0 - alpha) * ab


class NoSafeCandidate(RuntimeError):
    pass


def select_best(safe: Sequence, commanded, sel: SelectionState):
    """Safe candidate with the lowest blended cost; first in order on ties."""
    if len(safe) == 0:
        raise NoSafeCandidate("no safe candidate")
    pos = [c.waypoint.position if isinstance(c, CandidateResult) else
           (c.position if isinstance(c, WaypointCandidate) else c) for c in safe]
    cost = awp_cost(pos, commanded, sel.previous, sel.alpha)
    return safe[int(np.argmin(cost))]


def _least_bad(results: list[CandidateResult]) -> CandidateResult | None:
    planned = [r for r in results if r.report is not None]
    if not planned:
        return None
    # fewest collisions, then the latest first collision
    return min(planned, key=lambda r: (r.report.n_collide, -r.report.first_collision, r.order))


# ---------------------------------------------------------------- replanning

@dataclass
class Decision:
    kind: str  # keep | switch | emergency
    trajectory: Trajectory | None
    waypoint: WaypointCandidate | None
    candidates: list = field(default_factory=list)
    reason: str = ""
    timings: dict = field(default_factory=dict)

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)

    @property
    def emergency(self) -> bool:
        return self.kind == "emergency"


def candidate_waypoints(state: State3, commanded, cfg: ReplanConfig
                        ) -> tuple[list[WaypointCandidate], Trajectory | None]:
    """Commanded waypoint, then tube, then spheroid waypoints."""
    cmd = WaypointCandidate(commanded, "commanded")
    out = [cmd]
    try:
        direct = plan_3d(state, State3.at_rest(cmd.position), cfg.constraints)
    except InfeasibleError:
        direct = None
    if direct is not None and direct.duration > 0.0:
        out += tube_waypoints(direct, cfg.tube)
    out += spheroid_waypoints(state, cfg.spheroid)
    return out, direct


def _validate_many(state, wps, cloud, cfg, timer, executor, deadline):
    results = []
    if executor is None or cfg.threads == 1:
        for i, wp in enumerate(wps):
            if deadline is not None and i > 0 and time.perf_counter() >= deadline:
                break
            r = validate_candidate(state, wp, cloud, cfg, timer)
            r.order = i
            results.append(r)
        return results
    batch = cfg.threads
    i = 0
    while i < len(wps):
        if deadline is not None and i > 0 and time.perf_counter() >= deadline:
            break
        chunk = wps[i:i + batch]
        timers = [dict() for _ in chunk]
        futs = [executor.submit(validate_candidate, state, wp, cloud, cfg, tm)
                for wp, tm in zip(chunk, timers)]
        for k, f in enumerate(futs):
            r = f.result()
            r.order = i + k
            results.append(r)
        if timer is not None:
            for tm in timers:
                for key, val in tm.items():
                    timer[key] = timer.get(key, 0.0) + val
        i += batch
    return results


def replan_step(cloud: PointCloud, state: State3, current: Trajectory | None, commanded,
                sel: SelectionState, cfg: ReplanConfig, executor=None) -> Decision:
    """One sense-decide cycle.

    The executing trajectory is checked first and kept when safe. An
    executing alternative is dropped in favour of the direct route to the
    commanded waypoint as soon as that route is safe again. Otherwise
    candidates are generated and validated until the count or the time
    budget is used up, and the cheapest safe one is chosen. With no safe
    candidate the least bad one is returned as an emergency decision.
    """
    t_start = time.perf_counter()
    timer: dict = {}
    commanded = np.asarray(commanded, dtype=float)
    if current is not None:
        report = check_trajectory(current, cloud, cfg, "executing", timer)
        if report.safe:
            at_goal = np.allclose(current.target.position, commanded, atol=1e-9)
            if at_goal:
                return Decision("keep", current, None, [], report.reason, timer)
            back = validate_candidate(state, WaypointCandidate(commanded), cloud, cfg, timer)
            if back.safe:
                sel.previous = None
                return Decision("switch", back.trajectory, back.waypoint, [back],
                                "commanded waypoint reachable again", timer)
            return Decision("keep", current, None, [back], report.reason, timer)
        why = report.reason
    else:
        why = "no active trajectory"
    t0 = time.perf_counter()
    wps, _ = candidate_waypoints(state, commanded, cfg)
    _tick(timer, "generation", t0)
    deadline = None
    if cfg.mode == "fixed":
        wps = wps[:cfg.n_candidates]
    else:
        deadline = t_start + cfg.budget
    results = _validate_many(state, wps, cloud, cfg, timer, executor, deadline)
    safe = [r for r in results if r.safe]
    if safe:
        best = select_best(safe, commanded, sel)
        sel.previous = None if best.waypoint.source == "commanded" else best.waypoint.position
        return Decision("switch", best.trajectory, best.waypoint, results,
                        f"{why}; selected {best.waypoint.label}", timer)
    worst = _least_bad(results)
    if worst is None:
        return Decision("emergency", current, None, results, f"{why}; no plannable candidate",
                        timer)
    return Decision("emergency", worst.trajectory, worst.waypoint, results,
                    f"{why}; no safe candidate, least bad {worst.waypoint.label}", timer)


def make_executor(cfg: ReplanConfig):
    return ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None


__all__ = [
    "WaypointCandidate", "SpheroidParams", "TubeParams", "SelectionState", "ReplanConfig",
    "CandidateResult", "Decision", "spheroid_waypoints", "tube_waypoints",
    "validate_candidate", "check_trajectory", "select_best", "awp_cost", "replan_step",
    "candidate_waypoints", "make_executor", "NoSafeCandidate",
]
