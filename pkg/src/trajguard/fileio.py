"""Plain-text formats: point clouds, scenarios, sample tables and sim logs."""

from __future__ import annotations

import csv
import io
import math
import os
from pathlib import Path

import numpy as np

from .avoidance import ReplanConfig, SpheroidParams, TubeParams
from .collision import ClearanceSpec, PointCloud, SensorModel
from .sim import BoxObstacle, PointSetObstacle, Scenario, SimLog
from .trajectory import AxisConstraints, State3


class FormatError(ValueError):
    """Malformed input; ``lineno`` is 1-based when known."""

    def __init__(self, msg: str, lineno: int | None = None, source: str = ""):
        where = f"{source}:" if source else ""
        where += f"{lineno}: " if lineno is not None else (": " if source else "")
        super().__init__(where + msg)
        self.lineno = lineno


def _read_text(src) -> tuple[str, str]:
    if isinstance(src, os.PathLike):
        return Path(src).read_text(), str(src)
    if isinstance(src, str) and "\n" not in src and Path(src).is_file():
        return Path(src).read_text(), src
    if isinstance(src, io.TextIOBase):
        return src.read(), getattr(src, "name", "")
    return str(src), ""


def _floats(text: str, n: int | None, lineno: int, source: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split()]
    except ValueError:
        raise FormatError(f"expected numbers, got {text!r}", lineno, source) from None
    if n is not None and len(vals) != n:
        raise FormatError(f"expected {n} numbers, got {len(vals)}", lineno, source)
    if not all(math.isfinite(v) for v in vals):
        raise FormatError("non-finite value", lineno, source)
    return vals


def _fmt(x) -> str:
    if isinstance(x, (list, tuple, np.ndarray)):
        return " ".join(_fmt(v) for v in np.ravel(x))
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------- clouds

def read_cloud(src, origin=None, timestamp: float = 0.0) -> PointCloud:
    """Parse ``x y z [vx vy vz]`` lines.

    ``#`` starts a comment line. Optional header lines are ``count N``
    (checked against the number of points) and ``origin x y z``.
    """
    text, source = _read_text(src)
    pos, vel = [], []
    count = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head = line.split(None, 1)
        if head[0] == "count":
            if count is not None or pos:
                raise FormatError("count header must precede the points", lineno, source)
            try:
                count = int(head[1]) if len(head) > 1 else -1
            except ValueError:
                count = -1
            if count < 0:
                raise FormatError("count must be a non-negative integer", lineno, source)
            continue
        if head[0] == "origin":
            origin = _floats(head[1] if len(head) > 1 else "", 3, lineno, source)
            continue
        vals = _floats(line, None, lineno, source)
        if len(vals) not in (3, 6):
            raise FormatError(f"expected 3 or 6 numbers, got {len(vals)}", lineno, source)
        pos.append(vals[:3])
        vel.append(vals[3:] if len(vals) == 6 else [0.0, 0.0, 0.0])
    if count is not None and count != len(pos):
        raise FormatError(f"count header says {count} points, found {len(pos)}", None, source)
    return PointCloud(np.array(pos).reshape(-1, 3), np.array(vel).reshape(-1, 3),
                      origin if origin is not None else (0.0, 0.0, 0.0), timestamp)


def write_cloud(cloud: PointCloud, dst=None) -> str:
    lines = [f"count {len(cloud)}", f"origin {_fmt(cloud.origin)}"]
    moving = np.any(cloud.velocities != 0.0)
    for p, v in zip(cloud.positions, cloud.velocities):
        lines.append(_fmt(np.concatenate([p, v]) if moving else p))
    text = "\n".join(lines) + "\n"
    if dst is not None:
        Path(dst).write_text(text)
    return text


# ---------------------------------------------------------------- scenarios

_SCALAR = {
    "name": str,
    "sensor.opening_angle_deg": float, "sensor.range": float, "sensor.body_radius": float,
    "replan.mode": str, "replan.candidates": int, "replan.budget_ms": float,
    "replan.min_horizon": float, "replan.threads": int, "replan.alpha": float,
    "spheroid.flattening": float, "tube.rings": int, "tube.points": int,
    "sim.rate": float, "sim.max_time": float, "sim.seed": int,
    "sim.goal_tolerance": float, "sim.goal_speed": float,
}
_VECTOR = {
    "start.position": 3, "start.velocity": 3, "start.acceleration": 3,
    "constraints.x": 6, "constraints.y": 6, "constraints.z": 6,
    "clearance.l_coll": 3, "clearance.l_warn": 3, "sensor.normal": 3, "replan.dp": 3,
    "spheroid.radii": None, "spheroid.points": None, "tube.radii": None,
}
_LISTS = {"waypoints"}
_OBSTACLE_KEYS = {
    "box": {"min": 3, "max": 3, "velocity": 3, "spawn": 1, "density": 1},
    "points": {"xyz": None, "velocity": 3, "spawn": 1},
}


def _parse_point_list(text, lineno, source) -> list[list[float]]:
    out = [_floats(chunk, 3, lineno, source) for chunk in text.split(";") if chunk.strip()]
    if not out:
        raise FormatError("empty point list", lineno, source)
    return out


def parse_scenario(src) -> Scenario:
    """Read a scenario from dotted ``key = value`` lines.

    Unknown or repeated keys are errors. See README for every key and default.
    """
    text, source = _read_text(src)
    values: dict = {}
    obstacles: dict = {}
    lines_of: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, val = (s.strip() for s in line.split("=", 1))
        if key in lines_of:
            raise FormatError(f"duplicate key {key!r}", lineno, source)
        lines_of[key] = lineno
        parts = key.split(".")
        if parts[0] in _OBSTACLE_KEYS and len(parts) == 3:
            kind, name, field_ = parts
            spec = _OBSTACLE_KEYS[kind]
            if field_ not in spec:
                raise FormatError(f"unknown key {key!r}", lineno, source)
            ob = obstacles.setdefault(name, {"kind": kind, "line": lineno})
            if ob["kind"] != kind:
                raise FormatError(f"obstacle {name!r} declared as both {ob['kind']} and {kind}",
                                  lineno, source)
            if kind == "points" and field_ == "xyz":
                ob[field_] = _parse_point_list(val, lineno, source)
            else:
                n = spec[field_]
                v = _floats(val, n, lineno, source)
                ob[field_] = v[0] if n == 1 else v
        elif key in _SCALAR:
            try:
                values[key] = _SCALAR[key](val)
            except ValueError:
                raise FormatError(f"bad value for {key!r}: {val!r}", lineno, source) from None
        elif key in _VECTOR:
            values[key] = _floats(val, _VECTOR[key], lineno, source)
        elif key in _LISTS:
            values[key] = _parse_point_list(val, lineno, source)
        else:
            raise FormatError(f"unknown key {key!r}", lineno, source)

    def get(key, default):
        return values.get(key, default)

    try:
        if "waypoints" not in values:
            raise FormatError("missing required key 'waypoints'", None, source)
        start = State3.from_arrays(get("start.position", [0.0] * 3),
                                   get("start.velocity", [0.0] * 3),
                                   get("start.acceleration", [0.0] * 3))
        default_c = ReplanConfig().constraints
        cons = tuple(AxisConstraints(*get(f"constraints.{ax}", dc.as_array()))
                     for ax, dc in zip("xyz", default_c))
        dflt = ReplanConfig()
        clearance = ClearanceSpec(get("clearance.l_coll", dflt.clearance.l_coll),
                                  get("clearance.l_warn", dflt.clearance.l_warn))
        sensor = SensorModel(math.radians(get("sensor.opening_angle_deg", 33.2)),
                             get("sensor.range", 120.0),
                             np.array(get("sensor.normal", [0.0, 0.0, 1.0])),
                             get("sensor.body_radius", 0.5))
        sph = SpheroidParams(tuple(get("spheroid.radii", dflt.spheroid.radii)),
                             tuple(int(p) for p in get("spheroid.points", dflt.spheroid.points)),
                             get("spheroid.flattening", dflt.spheroid.flattening))
        tube = TubeParams(tuple(get("tube.radii", dflt.tube.radii)),
                          get("tube.rings", dflt.tube.rings), get("tube.points", dflt.tube.points))
        cfg = ReplanConfig(cons, clearance, sensor, np.array(get("replan.dp", dflt.dp)),
                           get("replan.budget_ms", dflt.budget * 1e3) / 1e3,
                           get("replan.mode", dflt.mode), get("replan.candidates",
                                                              dflt.n_candidates),
                           sph, tube, get("replan.min_horizon", dflt.min_horizon),
                           get("replan.threads", dflt.threads))
        obs = []
        for name, ob in obstacles.items():
            if ob["kind"] == "box":
                if "min" not in ob or "max" not in ob:
                    raise FormatError(f"box {name!r} needs min and max", ob["line"], source)
                obs.append(BoxObstacle(ob["min"], ob["max"], ob.get("velocity", [0.0] * 3),
                                       ob.get("spawn", 0.0), ob.get("density", 25.0), name))
            else:
                if "xyz" not in ob:
                    raise FormatError(f"point set {name!r} needs xyz", ob["line"], source)
                obs.append(PointSetObstacle(ob["xyz"], ob.get("velocity", [0.0] * 3),
                                            ob.get("spawn", 0.0), name))
        return Scenario(get("name", "scenario"), start, tuple(values["waypoints"]), tuple(obs),
                        cfg, get("replan.alpha", 0.5), get("sim.rate", 20.0),
                        get("sim.max_time", 30.0), get("sim.seed", 0),
                        get("sim.goal_tolerance", 0.1), get("sim.goal_speed", 0.05))
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(str(exc), None, source) from None


def format_scenario(sc: Scenario) -> str:
    """Inverse of ``parse_scenario``; every key is written explicitly."""
    cfg = sc.replan
    kv = [
        ("name", sc.name),
        ("start.position", sc.start.position),
        ("start.velocity", sc.start.velocity),
        ("start.acceleration", sc.start.acceleration),
        ("waypoints", " ; ".join(_fmt(w) for w in sc.waypoints)),
    ]
    for ax, c in zip("xyz", cfg.constraints):
        kv.append((f"constraints.{ax}", c.as_array()))
    kv += [
        ("clearance.l_coll", cfg.clearance.l_coll),
        ("clearance.l_warn", cfg.clearance.l_warn),
        ("sensor.opening_angle_deg", math.degrees(cfg.sensor.opening_angle)),
        ("sensor.range", cfg.sensor.max_range),
        ("sensor.normal", cfg.sensor.normal),
        ("sensor.body_radius", cfg.sensor.body_radius),
        ("replan.mode", cfg.mode),
        ("replan.candidates", cfg.n_candidates),
        ("replan.budget_ms", cfg.budget * 1e3),
        ("replan.dp", cfg.dp),
        ("replan.min_horizon", cfg.min_horizon),
        ("replan.threads", cfg.threads),
        ("replan.alpha", sc.alpha),
        ("spheroid.radii", list(cfg.spheroid.radii)),
        ("spheroid.points", list(cfg.spheroid.points)),
        ("spheroid.flattening", cfg.spheroid.flattening),
        ("tube.radii", list(cfg.tube.radii)),
        ("tube.rings", cfg.tube.rings),
        ("tube.points", cfg.tube.points),
        ("sim.rate", sc.rate),
        ("sim.max_time", sc.max_time),
        ("sim.seed", sc.seed),
        ("sim.goal_tolerance", sc.goal_tolerance),
        ("sim.goal_speed", sc.goal_speed),
    ]
    for ob in sc.obstacles:
        if isinstance(ob, BoxObstacle):
            pre = f"box.{ob.name}"
            kv += [(f"{pre}.min", ob.lo), (f"{pre}.max", ob.hi), (f"{pre}.velocity", ob.velocity),
                   (f"{pre}.spawn", ob.spawn), (f"{pre}.density", ob.density)]
        else:
            pre = f"points.{ob.name}"
            kv += [(f"{pre}.xyz", " ; ".join(_fmt(p) for p in ob.points)),
                   (f"{pre}.velocity", ob.velocity), (f"{pre}.spawn", ob.spawn)]
    return "".join(f"{k} = {v if isinstance(v, str) else _fmt(v)}\n" for k, v in kv)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path))


def shipped_scenario(name: str) -> Path:
    """Path of a scenario bundled with the package (``ball``, ``wall``, ``empty``)."""
    base = Path(__file__).with_name("scenarios")
    p = base / (name if name.endswith(".scn") else name + ".scn")
    if not p.exists():
        raise FileNotFoundError(f"no shipped scenario {name!r}")
    return p


# ---------------------------------------------------------------- key-value and tables

def format_kv(d: dict) -> str:
    return "".join(f"{k}={_fmt(v) if not isinstance(v, str) else v}\n" for k, v in d.items())


def parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"expected key=value, got {line!r}", lineno)
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


SAMPLE_COLUMNS = ("t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az")


def format_samples(times, states) -> str:
    """CSV of ``t`` and ``p, v, a`` per axis; ``states`` is ``(M, 3, 3)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_COLUMNS)
    for t, s in zip(times, states):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in np.ravel(s)])
    return buf.getvalue()


def parse_samples(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != SAMPLE_COLUMNS:
        raise FormatError("missing sample header", 1)
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, 10)
    return data[:, 0], data[:, 1:].reshape(-1, 3, 3)


STEP_COLUMNS = ("t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az", "decision",
                "candidates", "wp_x", "wp_y", "wp_z", "points", "clearance_ratio", "distance",
                "t_generation_us", "t_aabb_us", "t_crop_us", "t_rollout_us", "t_check_us")
TIMING_COLUMNS = STEP_COLUMNS[-5:]


def format_steps(log: SimLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STEP_COLUMNS)
    for s in log.steps:
        st = s.state
        wp = s.waypoint if s.waypoint is not None else (math.nan,) * 3
        row = [s.t, *st.position, *st.velocity, *st.acceleration]
        row = [repr(float(x)) for x in row] + [s.decision, str(s.n_candidates)]
        row += [repr(float(x)) for x in wp]
        row += [str(s.n_points), repr(float(s.clearance)), repr(float(s.distance))]
        row += [f"{s.timings.get(k, 0.0) * 1e6:.1f}"
                for k in ("generation", "aabb", "crop", "rollout", "check")]
        w.writerow(row)
    return buf.getvalue()


def write_sim_outputs(log: SimLog, outdir) -> dict:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    steps = out / "steps.csv"
    summary = out / "summary.txt"
    steps.write_text(format_steps(log))
    summary.write_text(format_kv(log.summary()))
    return {"steps": steps, "summary": summary}
