"""Closed-loop sense, replan and execute simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .avoidance import ReplanConfig, SelectionState, make_executor, replan_step
from .collision import PointCloud, SensorModel, coverage_many
from .trajectory import State3, Trajectory, evaluate, plan_3d

_SUBSTEPS = 10


@dataclass(frozen=True)
class BoxObstacle:
    """Axis-aligned box; moves rigidly with ``velocity`` once ``spawn`` has passed."""

    lo: np.ndarray
    hi: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    spawn: float = 0.0
    density: float = 25.0
    name: str = "box"

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        vel = np.asarray(self.velocity, dtype=float).reshape(3)
        if np.any(lo > hi):
            raise ValueError(f"obstacle {self.name}: min corner exceeds max corner")
        if not self.density > 0.0:
            raise ValueError(f"obstacle {self.name}: density must be positive")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "velocity", vel)

    @property
    def moving(self) -> bool:
        return bool(np.any(self.velocity != 0.0))

    def present(self, t: float) -> bool:
        return t >= self.spawn

    def offset(self, t: float) -> np.ndarray:
        return self.velocity * (t - self.spawn) if self.moving else np.zeros(3)

    def bounds(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        d = self.offset(t)
        return self.lo + d, self.hi + d

    @property
    def surface_area(self) -> float:
        s = self.hi - self.lo
        return 2.0 * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2])

    def surface_points(self, rng: np.random.Generator) -> np.ndarray:
        """Jittered grid on every face, about ``density`` points per square meter."""
        pitch = 1.0 / math.sqrt(self.density)
        out = []
        size = self.hi - self.lo
        for n in range(3):
            u, w = [k for k in range(3) if k != n]
            nu = max(1, int(round(size[u] / pitch)))
            nw = max(1, int(round(size[w] / pitch)))
            gu, gw = np.meshgrid(np.arange(nu), np.arange(nw), indexing="ij")
            for side in (self.lo[n], self.hi[n]):
                if size[n] == 0.0 and side == self.hi[n]:
                    continue
                pts = np.empty((nu * nw, 3))
                pts[:, n] = side
                pts[:, u] = self.lo[u] + (gu.ravel() + rng.random(nu * nw)) * size[u] / nu
                pts[:, w] = self.lo[w] + (gw.ravel() + rng.random(nu * nw)) * size[w] / nw
                out.append(pts)
        return np.concatenate(out)

    def clearance(self, p, l_coll, t: float = 0.0) -> tuple[float, float]:
        """``(ratio, distance)`` of the point ``p`` to this box at time ``t``.

        ``ratio`` is the largest per-axis gap divided by ``l_coll``: below 1
        the box of half-extent ``l_coll`` around ``p`` overlaps the obstacle.
        """
        lo, hi = self.bounds(t)
        gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
        return float(np.max(gap / l_coll)), float(np.linalg.norm(gap))


@dataclass(frozen=True)
class PointSetObstacle:
    points: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    spawn: float = 0.0
    name: str = "points"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"obstacle {self.name}: non-finite points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))

    @property
    def moving(self) -> bool:
        return bool(np.any(self.velocity != 0.0))

    def present(self, t: float) -> bool:
        return t >= self.spawn

    def offset(self, t: float) -> np.ndarray:
        return self.velocity * (t - self.spawn) if self.moving else np.zeros(3)

    def surface_points(self, rng: np.random.Generator) -> np.ndarray:
        return self.points.copy()

    def clearance(self, p, l_coll, t: float = 0.0) -> tuple[float, float]:
        if len(self.points) == 0:
            return math.inf, math.inf
        d = np.abs(self.points + self.offset(t) - p)
        return float(np.min(np.max(d / l_coll, axis=1))), float(np.min(np.linalg.norm(d, axis=1)))


@dataclass(frozen=True)
class Scenario:
    name: str
    start: State3
    waypoints: tuple
    obstacles: tuple = ()
    replan: ReplanConfig = field(default_factory=ReplanConfig)
    alpha: float = 0.5
    rate: float = 20.0
    max_time: float = 30.0
    seed: int = 0
    goal_tolerance: float = 0.1
    goal_speed: float = 0.05

    def __post_init__(self):
        wps = tuple(np.asarray(w, dtype=float).reshape(3) for w in self.waypoints)
        if not wps:
            raise ValueError("scenario needs at least one waypoint")
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not self.rate > 0.0:
            raise ValueError("loop rate must be positive")
        if not self.max_time > 0.0:
            raise ValueError("max time must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def constraints(self):
        return self.replan.constraints

    @property
    def sensor(self) -> SensorModel:
        return self.replan.sensor

    @property
    def clearance(self):
        return self.replan.clearance


class World:
    """Obstacles with their sampled surface points, fixed for one run."""

    def __init__(self, obstacles, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.obstacles = tuple(obstacles)
        self.points = [ob.surface_points(rng) for ob in self.obstacles]

    def true_clearance(self, p, t: float, l_coll) -> tuple[float, float]:
        ratio = distance = math.inf
        for ob in self.obstacles:
            if not ob.present(t):
                continue
            r, dist = ob.clearance(p, l_coll, t)
            ratio = min(ratio, r)
            distance = min(distance, dist)
        return ratio, distance


def synth_scan(world: World, state: State3, sensor: SensorModel, t: float = 0.0) -> PointCloud:
    """Surface points visible from ``state``: blind cones, range and the body removed."""
    pos, vel = [], []
    origin = state.position
    for ob, pts in zip(world.obstacles, world.points):
        if not ob.present(t) or len(pts) == 0:
            continue
        p = pts + ob.offset(t)
        cov = coverage_many(p - origin, sensor.normal, sensor.cone_ratio, sensor.max_range,
                            sensor.body_radius)
        p = p[(cov == 0) | (cov == 4)]
        pos.append(p)
        vel.append(np.broadcast_to(ob.velocity, p.shape))
    if not pos:
        return PointCloud(np.zeros((0, 3)), None, origin, t)
    return PointCloud(np.concatenate(pos), np.concatenate(vel), origin, t)


@dataclass
class StepRecord:
    t: float
    state: State3
    decision: str
    n_candidates: int
    waypoint: np.ndarray | None
    reason: str
    n_points: int
    clearance: float
    distance: float
    timings: dict


@dataclass
class SimLog:
    scenario: str
    steps: list
    goal_reached: bool = False
    collision: bool = False
    termination: str = "timeout"
    total_time: float = 0.0
    min_clearance: float = math.inf
    min_distance: float = math.inf
    path: np.ndarray | None = None
    trajectories: list = field(default_factory=list)

    @property
    def replans(self) -> int:
        return sum(1 for s in self.steps if s.decision != "keep")

    @property
    def emergencies(self) -> int:
        return sum(1 for s in self.steps if s.decision == "emergency")

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "goal_reached": self.goal_reached,
            "collision": self.collision,
            "termination": self.termination,
            "total_time": round(self.total_time, 6),
            "steps": len(self.steps),
            "replans": self.replans,
            "emergencies": self.emergencies,
            "max_candidates": max((s.n_candidates for s in self.steps), default=0),
            "min_clearance_ratio": round(self.min_clearance, 6),
            "min_distance": round(self.min_distance, 6),
        }


def run(scenario: Scenario) -> SimLog:
    """Simulate at ``scenario.rate`` until the goal, a collision or ``max_time``.

    Tracking is perfect: the vehicle state is always the active trajectory
    evaluated at the time elapsed since it was adopted.
    """
    cfg = scenario.replan
    l_coll = cfg.clearance.l_coll
    world = World(scenario.obstacles, scenario.seed)
    sel = SelectionState(alpha=scenario.alpha)
    dt = 1.0 / scenario.rate
    wp_i = 0
    commanded = scenario.waypoints[0]
    state = State3(*scenario.start.axes, 0.0)
    active: Trajectory = plan_3d(state, State3.at_rest(commanded), cfg.constraints)
    active_t0 = 0.0
    log = SimLog(scenario.name, [])
    log.trajectories.append((0.0, active))
    path = [state.position]
    executor = make_executor(cfg)
    n_steps = int(math.floor(scenario.max_time * scenario.rate + 1e-9))
    try:
        for k in range(n_steps + 1):
            t = k * dt
            state = _state_on(active, t - active_t0, t)
            if np.linalg.norm(state.position - commanded) <= scenario.goal_tolerance and \
                    np.linalg.norm(state.velocity) < scenario.goal_speed:
                if wp_i + 1 < len(scenario.waypoints):
                    wp_i += 1
                    commanded = scenario.waypoints[wp_i]
                    sel.previous = None
                    active = plan_3d(state, State3.at_rest(commanded), cfg.constraints)
                    active_t0 = t
                    log.trajectories.append((t, active))
                else:
                    log.goal_reached = True
                    log.termination = "goal"
                    log.total_time = t
                    break
            if k == n_steps:
                log.total_time = t
                break
            cloud = synth_scan(world, state, cfg.sensor, t)
            current = active.tail(t - active_t0)
            decision = replan_step(cloud, state, current, commanded, sel, cfg, executor)
            if decision.kind != "keep" and decision.trajectory is not None:
                active = decision.trajectory
                active_t0 = t
                log.trajectories.append((t, active))
            # execute one period, watching true clearance in between
            ratio = distance = math.inf
            for s in range(1, _SUBSTEPS + 1):
                ts = t + dt * s / _SUBSTEPS
                p = _state_on(active, ts - active_t0, ts).position
                r, d = world.true_clearance(p, ts, l_coll)
                ratio = min(ratio, r)
                distance = min(distance, d)
                path.append(p)
            r0, d0 = world.true_clearance(state.position, t, l_coll)
            ratio = min(ratio, r0)
            distance = min(distance, d0)
            log.min_clearance = min(log.min_clearance, ratio)
            log.min_distance = min(log.min_distance, distance)
            wp = decision.waypoint.position if decision.waypoint is not None else None
            log.steps.append(StepRecord(t, state, decision.kind, decision.n_candidates, wp,
                                        decision.reason, len(cloud), ratio, distance,
                                        dict(decision.timings)))
            if ratio < 1.0:
                log.collision = True
                log.termination = "collision"
                log.total_time = t + dt
                break
    finally:
        if executor is not None:
            executor.shutdown()
    log.path = np.array(path)
    return log


def _state_on(traj: Trajectory, elapsed: float, t: float) -> State3:
    s = evaluate(traj, min(max(elapsed, 0.0), traj.duration))
    return State3(s.x, s.y, s.z, t)
