"""Point-cloud cropping, clearance checks and lidar coverage classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from numba import njit

from .trajectory import Aabb

SAFE, UNOBSERVED, WARN, COLLIDE = 0, 1, 2, 3
VERDICT_NAMES = ("safe", "unobserved", "warn", "collide")


class Coverage(IntEnum):
    OBSERVABLE = 0
    UPPER_CONE = 1
    LOWER_CONE = 2
    OUT_OF_RANGE = 3
    INSIDE_BODY = 4

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class CloudPoint:
    p: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3)
        v = np.asarray(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
            raise ValueError("cloud point must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)


class PointCloud:
    """Points with per-point constant velocity, stored as ``(N, 3)`` arrays."""

    __slots__ = ("positions", "velocities", "origin", "timestamp", "static_idx", "moving_idx",
                 "_static_cols", "_bins")

    def __init__(self, positions, velocities=None, origin=(0.0, 0.0, 0.0), timestamp=0.0):
        pos = np.ascontiguousarray(np.asarray(positions, dtype=float).reshape(-1, 3))
        if velocities is None:
            vel = np.zeros_like(pos)
        else:
            vel = np.ascontiguousarray(np.asarray(velocities, dtype=float).reshape(-1, 3))
        if vel.shape != pos.shape:
            raise ValueError("positions and velocities differ in shape")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("point cloud contains non-finite values")
        pos.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "origin", np.asarray(origin, dtype=float).reshape(3))
        object.__setattr__(self, "timestamp", float(timestamp))
        moving = np.any(vel != 0.0, axis=1)
        static_idx = np.flatnonzero(~moving)
        object.__setattr__(self, "static_idx", static_idx)
        object.__setattr__(self, "moving_idx", np.flatnonzero(moving))
        # static points bucketed along x, column layout, for the crop scan
        order, starts, x0, inv_w = bin_by_x(np.ascontiguousarray(pos[static_idx, 0]))
        static_idx = static_idx[order]
        cols = tuple(np.ascontiguousarray(pos[static_idx, n]) for n in range(3))
        object.__setattr__(self, "static_idx", static_idx)
        object.__setattr__(self, "_static_cols", cols)
        object.__setattr__(self, "_bins", (starts, x0, inv_w))

    def __setattr__(self, name, value):
        raise AttributeError("PointCloud is immutable")

    @classmethod
    def from_points(cls, points, origin=(0.0, 0.0, 0.0), timestamp=0.0) -> "PointCloud":
        points = list(points)
        if not points:
            return cls(np.zeros((0, 3)), None, origin, timestamp)
        return cls(np.array([q.p for q in points]), np.array([q.v for q in points]),
                   origin, timestamp)

    def __len__(self):
        return self.positions.shape[0]

    def __getitem__(self, i) -> CloudPoint:
        return CloudPoint(self.positions[i].copy(), self.velocities[i].copy())

    def subset(self, idx) -> "PointCloud":
        return PointCloud(self.positions[idx], self.velocities[idx], self.origin, self.timestamp)

    @property
    def moving(self) -> np.ndarray:
        out = np.zeros(len(self), dtype=bool)
        out[self.moving_idx] = True
        return out

    def crop_indices(self, lo, hi, horizon: float) -> np.ndarray:
        """Sorted indices of points inside the open box ``(lo, hi)`` at some
        time in ``[0, horizon]``."""
        sx, sy, sz = self._static_cols
        starts, x0, inv_w = self._bins
        return crop_kernel(sx, sy, sz, self.static_idx, starts, x0, inv_w, self.positions,
                           self.velocities, self.moving_idx, np.asarray(lo, dtype=float),
                           np.asarray(hi, dtype=float), float(horizon))


def _vec3(x, name) -> np.ndarray:
    v = np.broadcast_to(np.asarray(x, dtype=float), (3,)).copy()
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


@dataclass(frozen=True)
class ClearanceSpec:
    """Per-axis half-extents of the collision and warning boxes around a sample."""

    l_coll: np.ndarray
    l_warn: np.ndarray

    def __post_init__(self):
        lc = _vec3(self.l_coll, "l_coll")
        lw = _vec3(self.l_warn, "l_warn")
        if np.any(lc <= 0.0) or np.any(lw <= lc):
            raise ValueError(f"need 0 < l_coll < l_warn per axis, got {lc}, {lw}")
        object.__setattr__(self, "l_coll", lc)
        object.__setattr__(self, "l_warn", lw)

    @classmethod
    def for_vehicle(cls, half_extent, margin=0.3, warn_extra=0.5) -> "ClearanceSpec":
        """Default sizing: vehicle half-extent plus a margin, warning zone beyond that."""
        lc = _vec3(half_extent, "half_extent") + margin
        return cls(lc, lc + warn_extra)


@dataclass(frozen=True)
class SensorModel:
    """Spinning lidar with blind cones above and below it."""

    opening_angle: float = math.radians(33.2)
    max_range: float = 120.0
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    body_radius: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.opening_angle < math.pi:
            raise ValueError("opening angle must lie in (0, pi)")
        if not self.max_range > 0.0:
            raise ValueError("max range must be positive")
        if self.body_radius < 0.0:
            raise ValueError("body radius must be non-negative")
        n = _vec3(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("sensor normal must be a unit vector")
        object.__setattr__(self, "normal", n)

    @property
    def cone_ratio(self) -> float:
        """Cone radius per unit of axial distance, ``tan(pi/2 - opening/2)``."""
        return math.tan(0.5 * math.pi - 0.5 * self.opening_angle)


@dataclass(frozen=True)
class SampleVerdict:
    index: int
    verdict: str
    offenders: tuple[int, ...] = ()


# ---------------------------------------------------------------- kernels

@njit(cache=True, nogil=True)
def _inside_static(px, py, pz, cx, cy, cz, lx, ly, lz):
    return (cx - lx < px < cx + lx) and (cy - ly < py < cy + ly) and (cz - lz < pz < cz + lz)


@njit(cache=True, nogil=True)
def _slab_interval(p, v, lo, hi):
    """Open time interval during which ``p + v t`` is strictly inside ``(lo, hi)``.

    Returns ``(enter, exit)``; empty when ``enter >= exit``.
    """
    enter = -np.inf
    leave = np.inf
    for n in range(3):
        if v[n] == 0.0:
            if not (lo[n] < p[n] < hi[n]):
                return np.inf, -np.inf
            continue
        t1 = (lo[n] - p[n]) / v[n]
        t2 = (hi[n] - p[n]) / v[n]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > enter:
            enter = t1
        if t2 < leave:
            leave = t2
    return enter, leave


@njit(cache=True, nogil=True)
def _moving_hit(p, v, lo, hi, t_lo, t_hi):
    enter, leave = _slab_interval(p, v, lo, hi)
    if not enter < leave:
        return False
    # open crossing interval against the closed window
    return enter < t_hi and leave > t_lo


@njit(cache=True, nogil=True)
def bin_by_x(x):
    """Counting sort of ``x`` into equal-width bins.

    Returns the permutation, bin start offsets (``nbins + 1``), the left edge
    and the inverse bin width.
    """
    n = x.shape[0]
    nb = max(1, min(4096, n // 16))
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(2, np.int64), 0.0, 0.0
    x0 = x.min()
    span = x.max() - x0
    inv_w = nb / span if span > 0.0 else 0.0
    b = np.empty(n, np.int64)
    starts = np.zeros(nb + 1, np.int64)
    for i in range(n):
        k = min(int((x[i] - x0) * inv_w), nb - 1)
        b[i] = k
        starts[k + 1] += 1
    for k in range(nb):
        starts[k + 1] += starts[k]
    fill = starts[:-1].copy()
    order = np.empty(n, np.int64)
    for i in range(n):
        order[fill[b[i]]] = i
        fill[b[i]] += 1
    return order, starts, x0, inv_w


@njit(cache=True, nogil=True)
def crop_kernel(sx, sy, sz, static_idx, starts, x0, inv_w, pos, vel, moving_idx, lo, hi,
                horizon):
    """Static points by a branch-free box test over the x bins the box spans,
    moving points by slabs."""
    nb = starts.shape[0] - 1
    l0, l1, l2 = lo[0], lo[1], lo[2]
    h0, h1, h2 = hi[0], hi[1], hi[2]
    i0, i1 = 0, sx.shape[0]
    if inv_w > 0.0:
        # bin of a coordinate is floor((x - x0) * inv_w); one bin of slack each side
        b0 = (l0 - x0) * inv_w - 1.0
        b1 = (h0 - x0) * inv_w + 1.0
        if b1 < 0.0 or b0 > nb:
            i1 = 0
        else:
            # clamp as floats first so infinite bounds never reach int()
            i0 = starts[int(min(max(b0, 0.0), nb))]
            i1 = starts[int(min(max(b1 + 1.0, 0.0), nb))]
    n = max(i1 - i0, 0)
    mask = np.empty(n, np.uint8)
    cnt = 0
    for r in range(n):
        i = i0 + r
        b = ((sx[i] > l0) & (sx[i] < h0) & (sy[i] > l1) & (sy[i] < h1)
             & (sz[i] > l2) & (sz[i] < h2))
        mask[r] = b
        cnt += b
    keep = np.empty(cnt + moving_idx.shape[0], np.int64)
    m = 0
    if cnt:
        for r in range(n):
            if mask[r]:
                keep[m] = static_idx[i0 + r]
                m += 1
    for k in range(moving_idx.shape[0]):
        i = moving_idx[k]
        if _moving_hit(pos[i], vel[i], lo, hi, 0.0, horizon):
            keep[m] = i
            m += 1
    return np.sort(keep[:m])


@njit(cache=True, nogil=True)
def coverage_kernel(q, normal, cone_ratio, max_range, body_radius):
    dist = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2])
    if dist <= body_radius:
        return 4
    along = normal[0] * q[0] + normal[1] * q[1] + normal[2] * q[2]
    ax = along * normal[0]
    ay = along * normal[1]
    az = along * normal[2]
    axial = abs(along)
    l_cone = axial * cone_ratio
    rx = q[0] - ax
    ry = q[1] - ay
    rz = q[2] - az
    l_test = math.sqrt(rx * rx + ry * ry + rz * rz)
    if l_test < l_cone:
        if az > 0.0:
            return 1
        if az < 0.0:
            return 2
    if dist > max_range:
        return 3
    return 0


@njit(cache=True, nogil=True)
def coverage_many(qs, normal, cone_ratio, max_range, body_radius):
    out = np.empty(qs.shape[0], np.int8)
    for i in range(qs.shape[0]):
        out[i] = coverage_kernel(qs[i], normal, cone_ratio, max_range, body_radius)
    return out


@njit(cache=True, nogil=True)
def classify_kernel(samples, pos, vel, l_coll, l_warn, t_lo, t_hi, origin, normal,
                    cone_ratio, max_range, body_radius, collect):
    """Per-sample verdict codes plus, if ``collect``, the offending points.

    Offenders are returned in CSR form: ``offsets`` (M+1,) into ``idx``.
    """
    m = samples.shape[0]
    npts = pos.shape[0]
    codes = np.zeros(m, np.int8)
    counts = np.zeros(m, np.int64)
    lo_c = np.empty(3)
    hi_c = np.empty(3)
    lo_w = np.empty(3)
    hi_w = np.empty(3)
    q = np.empty(3)
    for s in range(m):
        for n in range(3):
            c = samples[s, n]
            lo_c[n] = c - l_coll[n]
            hi_c[n] = c + l_coll[n]
            lo_w[n] = c - l_warn[n]
            hi_w[n] = c + l_warn[n]
        code = 0
        nc = 0
        nw = 0
        for i in range(npts):
            static = vel[i, 0] == 0.0 and vel[i, 1] == 0.0 and vel[i, 2] == 0.0
            if static:
                if not (lo_w[0] < pos[i, 0] < hi_w[0] and lo_w[1] < pos[i, 1] < hi_w[1]
                        and lo_w[2] < pos[i, 2] < hi_w[2]):
                    continue
                if (lo_c[0] < pos[i, 0] < hi_c[0] and lo_c[1] < pos[i, 1] < hi_c[1]
                        and lo_c[2] < pos[i, 2] < hi_c[2]):
                    nc += 1
                else:
                    nw += 1
            else:
                if not _moving_hit(pos[i], vel[i], lo_w, hi_w, t_lo, t_hi):
                    continue
                if _moving_hit(pos[i], vel[i], lo_c, hi_c, t_lo, t_hi):
                    nc += 1
                else:
                    nw += 1
        if nc > 0:
            code = 3
            counts[s] = nc
        elif nw > 0:
            code = 2
            counts[s] = nw
        else:
            for n in range(3):
                q[n] = samples[s, n] - origin[n]
            cov = coverage_kernel(q, normal, cone_ratio, max_range, body_radius)
            if cov != 0 and cov != 4:
                code = 1
        codes[s] = code
    offsets = np.zeros(m + 1, np.int64)
    if not collect:
        return codes, offsets, np.zeros(0, np.int64)
    for s in range(m):
        offsets[s + 1] = offsets[s] + counts[s]
    idx = np.empty(offsets[m], np.int64)
    for s in range(m):
        if codes[s] < 2:
            continue
        for n in range(3):
            c = samples[s, n]
            lo_c[n] = c - l_coll[n]
            hi_c[n] = c + l_coll[n]
            lo_w[n] = c - l_warn[n]
            hi_w[n] = c + l_warn[n]
        k = offsets[s]
        for i in range(npts):
            static = vel[i, 0] == 0.0 and vel[i, 1] == 0.0 and vel[i, 2] == 0.0
            if static:
                in_c = (lo_c[0] < pos[i, 0] < hi_c[0] and lo_c[1] < pos[i, 1] < hi_c[1]
                        and lo_c[2] < pos[i, 2] < hi_c[2])
                in_w = (lo_w[0] < pos[i, 0] < hi_w[0] and lo_w[1] < pos[i, 1] < hi_w[1]
                        and lo_w[2] < pos[i, 2] < hi_w[2])
            else:
                in_c = _moving_hit(pos[i], vel[i], lo_c, hi_c, t_lo, t_hi)
                in_w = _moving_hit(pos[i], vel[i], lo_w, hi_w, t_lo, t_hi)
            if (codes[s] == 3 and in_c) or (codes[s] == 2 and in_w):
                idx[k] = i
                k += 1
    return codes, offsets, idx


# ---------------------------------------------------------------- public API

def check_static(p_test, point: CloudPoint, l) -> bool:
    """True iff ``point`` lies strictly inside the box of half-extent ``l`` at ``p_test``."""
    c = np.asarray(p_test, dtype=float)
    l = _vec3(l, "l")
    if np.any(l <= 0.0):
        raise ValueError("half-extent must be positive")
    return bool(_inside_static(point.p[0], point.p[1], point.p[2], c[0], c[1], c[2],
                               l[0], l[1], l[2]))


def check_moving(p_test, point: CloudPoint, l, t_window=(0.0, np.inf)) -> bool:
    """True iff the moving ``point`` is strictly inside the box at some time in ``t_window``."""
    t_lo, t_hi = (float(t) for t in t_window)
    if t_lo > t_hi:
        raise ValueError("window start after window end")
    c = np.asarray(p_test, dtype=float)
    l = _vec3(l, "l")
    return bool(_moving_hit(point.p, point.v, c - l, c + l, t_lo, t_hi))


def coverage_class(p_test, sensor: SensorModel, sensor_origin) -> Coverage:
    """Where ``p_test`` falls relative to the lidar's field of view."""
    q = np.asarray(p_test, dtype=float) - np.asarray(sensor_origin, dtype=float)
    return Coverage(coverage_kernel(q, sensor.normal, sensor.cone_ratio, sensor.max_range,
                                    sensor.body_radius))


def crop_indices(cloud: PointCloud, box: Aabb, horizon: float) -> np.ndarray:
    """Indices of points that are inside ``box`` now or enter it within ``horizon``."""
    return cloud.crop_indices(box.lo, box.hi, horizon)


def crop_cloud(cloud: PointCloud, box: Aabb, horizon: float) -> PointCloud:
    return cloud.subset(crop_indices(cloud, box, horizon))


@dataclass(frozen=True)
class SampleClasses:
    """Array form of per-sample verdicts (see ``classify_samples``)."""

    codes: np.ndarray
    offsets: np.ndarray
    offenders: np.ndarray

    def __len__(self):
        return len(self.codes)

    def verdicts(self) -> list[SampleVerdict]:
        out = []
        for i, c in enumerate(self.codes):
            off = tuple(int(k) for k in self.offenders[self.offsets[i]:self.offsets[i + 1]]) \
                if len(self.offenders) else ()
            out.append(SampleVerdict(i, VERDICT_NAMES[c], off))
        return out


def classify_positions(positions, cloud: PointCloud, spec: ClearanceSpec, sensor: SensorModel,
                       horizon: float, *, collect: bool = True,
                       point_index=None) -> SampleClasses:
    """Classify sample positions against a cloud.

    ``point_index`` maps cloud rows to the indices reported as offenders
    (e.g. original indices when ``cloud`` is a cropped subset).
    """
    codes, offsets, idx = classify_kernel(
        np.ascontiguousarray(positions, dtype=float), cloud.positions, cloud.velocities,
        spec.l_coll, spec.l_warn, 0.0, float(horizon), cloud.origin, sensor.normal,
        sensor.cone_ratio, sensor.max_range, sensor.body_radius, collect)
    if point_index is not None and len(idx):
        idx = np.asarray(point_index)[idx]
    return SampleClasses(codes, offsets, idx)


def classify_samples(samples, cloud: PointCloud, spec: ClearanceSpec, sensor: SensorModel,
                     horizon: float) -> list[SampleVerdict]:
    """Verdict for each ``(t, State3)`` sample: collide > warn > unobserved > safe."""
    pos = np.array([s.position for _, s in samples]).reshape(-1, 3)
    return classify_positions(pos, cloud, spec, sensor, horizon).verdicts()


@dataclass(frozen=True)
class SafetyReport:
    verdict: str
    reason: str
    codes: np.ndarray
    context: str = "candidate"
    sample_times: np.ndarray | None = None
    classes: SampleClasses | None = None

    @property
    def safe(self) -> bool:
        return self.verdict == "safe"

    @property
    def samples(self) -> list[SampleVerdict]:
        if self.classes is not None:
            return self.classes.verdicts()
        return [SampleVerdict(i, VERDICT_NAMES[c]) for i, c in enumerate(self.codes)]

    def counts(self) -> dict[str, int]:
        return {name: int(np.count_nonzero(self.codes == k))
                for k, name in enumerate(VERDICT_NAMES)}

    @property
    def n_collide(self) -> int:
        return int(np.count_nonzero(self.codes == COLLIDE))

    @property
    def first_collision(self) -> int:
        """Index of the first collide sample, or the sample count if none."""
        hit = np.flatnonzero(self.codes == COLLIDE)
        return int(hit[0]) if len(hit) else len(self.codes)


def _codes_of(verdicts) -> np.ndarray:
    if isinstance(verdicts, SampleClasses):
        return verdicts.codes
    if isinstance(verdicts, np.ndarray):
        return verdicts.astype(np.int8)
    out = []
    for v in verdicts:
        name = v.verdict if isinstance(v, SampleVerdict) else v
        out.append(VERDICT_NAMES.index(name))
    return np.array(out, dtype=np.int8)


def classify_trajectory(verdicts, context: str = "candidate", **extra) -> SafetyReport:
    """Trajectory-level verdict.

    Collide or unobserved samples always require a replan. Warn samples are
    accepted only as a run starting at sample 0 (the vehicle leaving a
    warning zone). On the executing trajectory that run must also end
    before the last sample, otherwise the warning never clears.
    """
    if context not in ("candidate", "executing"):
        raise ValueError(f"unknown context {context!r}")
    codes = _codes_of(verdicts)
    if len(codes) == 0:
        raise ValueError("empty verdict list")
    classes = verdicts if isinstance(verdicts, SampleClasses) else None

    def report(verdict, reason):
        return SafetyReport(verdict, reason, codes, context, classes=classes, **extra)

    hit = np.flatnonzero(codes == COLLIDE)
    if len(hit):
        return report("replan", f"collision at sample {hit[0]}")
    hidden = np.flatnonzero(codes == UNOBSERVED)
    if len(hidden):
        return report("replan", f"unobserved at sample {hidden[0]}")
    warn = np.flatnonzero(codes == WARN)
    if len(warn) == 0:
        return report("safe", "all samples clear")
    if warn[-1] != len(warn) - 1:
        cleared = int(np.flatnonzero(codes != WARN)[0])
        return report("replan", f"enters warning zone at sample {warn[warn > cleared][0]}")
    if context == "executing" and len(warn) == len(codes):
        return report("replan", "warning does not clear")
    return report("safe", f"leaves warning zone after sample {warn[-1]}")
