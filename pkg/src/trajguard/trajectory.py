"""3D jerk-limited trajectories: planning, evaluation, sampling, bounding boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from numba import njit

from . import profile

AXES = "xyz"


class InfeasibleError(ValueError):
    """Raised when a boundary state or a requested duration cannot be met."""


@dataclass(frozen=True)
class AxisState:
    p: float = 0.0
    v: float = 0.0
    a: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.v) and math.isfinite(self.a)):
            raise ValueError(f"non-finite axis state {self}")


@dataclass(frozen=True)
class State3:
    x: AxisState
    y: AxisState
    z: AxisState
    t: float = 0.0

    @classmethod
    def at_rest(cls, position, t: float = 0.0) -> "State3":
        px, py, pz = (float(c) for c in position)
        return cls(AxisState(px), AxisState(py), AxisState(pz), t)

    @classmethod
    def from_arrays(cls, p, v=(0.0, 0.0, 0.0), a=(0.0, 0.0, 0.0), t: float = 0.0) -> "State3":
        return cls(*(AxisState(float(p[i]), float(v[i]), float(a[i])) for i in range(3)), t)

    @property
    def axes(self) -> tuple[AxisState, AxisState, AxisState]:
        return (self.x, self.y, self.z)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x.p, self.y.p, self.z.p])

    @property
    def velocity(self) -> np.ndarray:
        return np.array([self.x.v, self.y.v, self.z.v])

    @property
    def acceleration(self) -> np.ndarray:
        return np.array([self.x.a, self.y.a, self.z.a])


@dataclass(frozen=True)
class AxisConstraints:
    """Asymmetric velocity, acceleration and jerk bounds of one axis."""

    v_min: float
    v_max: float
    a_min: float
    a_max: float
    j_min: float
    j_max: float

    def __post_init__(self):
        for lo, hi, name in ((self.v_min, self.v_max, "v"), (self.a_min, self.a_max, "a"),
                             (self.j_min, self.j_max, "j")):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"non-finite {name} bound")
            if not lo < 0.0 < hi:
                raise ValueError(f"{name} bounds must satisfy {name}_min < 0 < {name}_max, "
                                 f"got [{lo}, {hi}]")

    @classmethod
    def symmetric(cls, v: float, a: float, j: float) -> "AxisConstraints":
        return cls(-v, v, -a, a, -j, j)

    def as_array(self) -> np.ndarray:
        return np.array([self.v_min, self.v_max, self.a_min, self.a_max, self.j_min, self.j_max])


def _as_axis_constraints(c) -> tuple[AxisConstraints, AxisConstraints, AxisConstraints]:
    if isinstance(c, AxisConstraints):
        return (c, c, c)
    c = tuple(c)
    if len(c) != 3:
        raise ValueError("need one AxisConstraints or three (x, y, z)")
    return c


@dataclass(frozen=True)
class Segment:
    """Constant-jerk piece of one axis."""

    duration: float
    j: float
    start: AxisState

    def state_at(self, tau: float) -> AxisState:
        p, v, a = profile.integrate(self.start.p, self.start.v, self.start.a, self.j, tau)
        return AxisState(p, v, a)

    @property
    def end(self) -> AxisState:
        return self.state_at(self.duration)


def check_boundary_state(s: AxisState, c: AxisConstraints, *, arriving: bool = False) -> None:
    """Raise InfeasibleError if ``s`` is outside the bounds or cannot be braked in time.

    A start state with positive acceleration overshoots ``v_max`` by
    ``a^2 / (2 |j_min|)`` before the acceleration reaches zero; a target
    state is checked the same way backwards in time.
    """
    tol = 1e-9
    if not (c.v_min - tol <= s.v <= c.v_max + tol):
        raise InfeasibleError(f"velocity {s.v} outside [{c.v_min}, {c.v_max}]")
    if not (c.a_min - tol <= s.a <= c.a_max + tol):
        raise InfeasibleError(f"acceleration {s.a} outside [{c.a_min}, {c.a_max}]")
    up = s.a < 0.0 if arriving else s.a > 0.0
    if up and s.v + s.a * s.a / (2.0 * -c.j_min) > c.v_max + tol:
        raise InfeasibleError(
            f"state v={s.v}, a={s.a} must exceed v_max={c.v_max} with j_min={c.j_min}")
    down = s.a > 0.0 if arriving else s.a < 0.0
    if down and s.v - s.a * s.a / (2.0 * c.j_max) < c.v_min - tol:
        raise InfeasibleError(
            f"state v={s.v}, a={s.a} must exceed v_min={c.v_min} with j_max={c.j_max}")


_CAP = profile.MAX_PHASES + 1


def _segments_from(start: AxisState, jerks, durs, n) -> tuple[Segment, ...]:
    segs = []
    p, v, a = start.p, start.v, start.a
    for i in range(n):
        t = float(durs[i])
        if t <= 0.0:
            continue
        j = float(jerks[i])
        segs.append(Segment(t, j, AxisState(p, v, a)))
        p, v, a = profile.integrate(p, v, a, j, t)
    return tuple(segs)


def plan_axis(start: AxisState, target: AxisState, c: AxisConstraints
              ) -> tuple[tuple[Segment, ...], float]:
    """Time-optimal jerk-limited profile for one axis.

    Returns the segment list and its duration.
    """
    check_boundary_state(start, c)
    check_boundary_state(target, c, arriving=True)
    jerks = np.zeros(profile.MAX_PHASES)
    durs = np.zeros(profile.MAX_PHASES)
    n = profile.solve_time_optimal(start.p, start.v, start.a, target.p, target.v, target.a,
                                   c.as_array(), jerks, durs)
    if n < 0:
        raise InfeasibleError(f"no jerk-limited profile from {start} to {target}")
    segs = _segments_from(start, jerks, durs, n)
    return segs, float(sum(s.duration for s in segs))


def plan_axis_fixed_time(start: AxisState, target: AxisState, c: AxisConstraints,
                         duration: float) -> tuple[Segment, ...]:
    """Profile reaching ``target`` after exactly ``duration`` seconds.

    Raises InfeasibleError when ``duration`` is shorter than the optimum or
    falls in a duration range this axis cannot realize.
    """
    segs, t_opt = plan_axis(start, target, c)
    if duration < t_opt - 1e-9:
        raise InfeasibleError(f"duration {duration} below time-optimal {t_opt}")
    if duration <= t_opt + 1e-9:
        return segs
    jerks = np.zeros(profile.MAX_PHASES)
    durs = np.zeros(profile.MAX_PHASES)
    n = profile.solve_fixed_time(start.p, start.v, start.a, target.p, target.v, target.a,
                                 float(duration), c.as_array(), jerks, durs)
    if n < 0:
        raise InfeasibleError(f"no profile of duration {duration} from {start} to {target}")
    return _segments_from(start, jerks, durs, n)


@njit(cache=True, nogil=True)
def _plan3_kernel(p0, v0, a0, pf, vf, af, lims, jer, dur, cnt):
    """Synchronized profiles for three axes written into ``jer``/``dur``/``cnt``.

    Returns the shared duration, or ``-1 - axis`` if an axis has no profile,
    or ``-10`` if synchronization failed.
    """
    opt_j = np.zeros((3, profile.MAX_PHASES))
    opt_d = np.zeros((3, profile.MAX_PHASES))
    opt_n = np.zeros(3, np.int64)
    t_opt = np.zeros(3)
    for n in range(3):
        k = profile.solve_time_optimal(p0[n], v0[n], a0[n], pf[n], vf[n], af[n], lims[n],
                                       opt_j[n], opt_d[n])
        if k < 0:
            return -1.0 - n
        opt_n[n] = k
        t_opt[n] = profile._total(opt_d[n], k)
    duration = t_opt.max()
    tmp_j = np.zeros(profile.MAX_PHASES)
    tmp_d = np.zeros(profile.MAX_PHASES)
    for _ in range(50):
        bumped = duration
        done = True
        for n in range(3):
            jer[n, :] = 0.0
            dur[n, :] = 0.0
            if duration - t_opt[n] <= 1e-9:
                cnt[n] = opt_n[n]
                jer[n, :profile.MAX_PHASES] = opt_j[n]
                dur[n, :profile.MAX_PHASES] = opt_d[n]
                continue
            k = profile.solve_fixed_time(p0[n], v0[n], a0[n], pf[n], vf[n], af[n], duration,
                                         lims[n], tmp_j, tmp_d)
            if k < 0:
                done = False
                floor = profile.fixed_time_floor(p0[n], v0[n], a0[n], pf[n], vf[n], af[n],
                                                 duration, lims[n])
                if not np.isfinite(floor):
                    floor = duration * 1.01 + 1e-6
                bumped = max(bumped, floor * (1.0 + 1e-9) + 1e-12)
                continue
            cnt[n] = k
            jer[n, :profile.MAX_PHASES] = tmp_j
            dur[n, :profile.MAX_PHASES] = tmp_d
        if done:
            total = 0.0
            for n in range(3):
                total = max(total, profile._total(dur[n], cnt[n]))
            # pad sub-nanosecond residues with a jerk-free hold
            for n in range(3):
                gap = total - profile._total(dur[n], cnt[n])
                if gap > 0.0:
                    jer[n, cnt[n]] = 0.0
                    dur[n, cnt[n]] = gap
                    cnt[n] += 1
            return total
        duration = bumped
    return -10.0


@njit(cache=True, nogil=True)
def _build_pieces(p0, v0, a0, jer, dur, cnt, total):
    """Merge all axes' segment borders into one piecewise form.

    Returns ``knots`` (K+1,) and ``coef`` (K, 3, 4) holding ``p, v, a, j`` of
    each axis at the start of each piece.
    """
    nb = 2
    for n in range(3):
        nb += cnt[n]
    borders = np.empty(nb)
    borders[0] = 0.0
    borders[1] = total
    m = 2
    for n in range(3):
        t = 0.0
        for i in range(cnt[n]):
            t += dur[n, i]
            borders[m] = min(max(t, 0.0), total)
            m += 1
    borders.sort()
    knots = np.empty(nb)
    knots[0] = 0.0
    nk = 1
    for i in range(1, nb):
        if borders[i] - knots[nk - 1] > 1e-12:
            knots[nk] = borders[i]
            nk += 1
    if nk == 1:
        knots[1] = 0.0
        nk = 2
    knots[nk - 1] = total
    knots = knots[:nk].copy()
    npc = nk - 1
    coef = np.zeros((npc, 3, 4))
    for n in range(3):
        # segment start times and states
        seg_t = np.empty(cnt[n] + 1)
        seg_s = np.empty((cnt[n] + 1, 3))
        p, v, a = p0[n], v0[n], a0[n]
        t = 0.0
        for i in range(cnt[n]):
            seg_t[i] = t
            seg_s[i, 0] = p
            seg_s[i, 1] = v
            seg_s[i, 2] = a
            p, v, a = profile.integrate(p, v, a, jer[n, i], dur[n, i])
            t += dur[n, i]
        seg_t[cnt[n]] = t
        seg_s[cnt[n], 0] = p
        seg_s[cnt[n], 1] = v
        seg_s[cnt[n], 2] = a
        i = 0
        for k in range(npc):
            mid = 0.5 * (knots[k] + knots[k + 1])
            while i < cnt[n] - 1 and seg_t[i + 1] <= mid:
                i += 1
            if cnt[n] == 0:
                coef[k, n, 0] = p0[n]
                coef[k, n, 1] = v0[n]
                coef[k, n, 2] = a0[n]
                continue
            tau = knots[k] - seg_t[i]
            j = jer[n, i]
            pp, vv, aa = profile.integrate(seg_s[i, 0], seg_s[i, 1], seg_s[i, 2], j, tau)
            coef[k, n, 0] = pp
            coef[k, n, 1] = vv
            coef[k, n, 2] = aa
            coef[k, n, 3] = j
    return knots, coef


def plan_3d(start: State3, target: State3, constraints) -> "Trajectory":
    """Synchronized time-optimal trajectory.

    Every axis is planned time-optimally; the slowest sets the duration and
    the others are stretched to it. If an axis cannot realize that duration
    the shared duration is raised to the next one all axes can meet.
    """
    cons = _as_axis_constraints(constraints)
    for s, g, c in zip(start.axes, target.axes, cons):
        check_boundary_state(s, c)
        check_boundary_state(g, c, arriving=True)
    lims = np.array([c.as_array() for c in cons])
    jer = np.zeros((3, _CAP))
    dur = np.zeros((3, _CAP))
    cnt = np.zeros(3, np.int64)
    total = _plan3_kernel(start.position, start.velocity, start.acceleration,
                          target.position, target.velocity, target.acceleration,
                          lims, jer, dur, cnt)
    if total < 0.0:
        if total > -4.0:
            raise InfeasibleError(f"no jerk-limited profile on axis {AXES[int(-total) - 1]} "
                                  f"from {start} to {target}")
        raise InfeasibleError(f"axes could not be synchronized from {start} to {target}")
    return Trajectory._from_arrays(start, target, jer, dur, cnt, total)


@njit(cache=True, nogil=True)
def _eval_pieces(knots, coef, t, out):
    """Write p, v, a (rows) x axes (cols) at time ``t`` into ``out``."""
    k = np.searchsorted(knots, t, side="right") - 1
    if k < 0:
        k = 0
    if k > coef.shape[0] - 1:
        k = coef.shape[0] - 1
    tau = t - knots[k]
    for n in range(3):
        p, v, a = profile.integrate(coef[k, n, 0], coef[k, n, 1], coef[k, n, 2],
                                    coef[k, n, 3], tau)
        out[0, n] = p
        out[1, n] = v
        out[2, n] = a


@njit(cache=True, nogil=True)
def _states_kernel(knots, coef, times):
    out = np.empty((times.shape[0], 3, 3))
    for i in range(times.shape[0]):
        _eval_pieces(knots, coef, times[i], out[i])
    return out


@njit(cache=True, nogil=True)
def positions_at_times(knots, coef, times):
    out = np.empty((times.shape[0], 3))
    tmp = np.empty((3, 3))
    for i in range(times.shape[0]):
        _eval_pieces(knots, coef, times[i], tmp)
        out[i, 0] = tmp[0, 0]
        out[i, 1] = tmp[0, 1]
        out[i, 2] = tmp[0, 2]
    return out


class Trajectory:
    """Per-axis constant-jerk segments sharing one duration.

    Besides the per-axis phases, the trajectory keeps a merged piecewise
    form: ``knots`` holds every segment border of every axis and
    ``coef[k, n]`` is ``(p, v, a, j)`` of axis ``n`` at the start of piece
    ``k``. The numeric kernels work on that form. Instances are immutable.
    """

    __slots__ = ("duration", "start", "target", "knots", "coef", "_jer", "_dur", "_cnt",
                 "_segments")

    def __init__(self, segments, start: State3, target: State3):
        segments = tuple(tuple(s) for s in segments)
        if len(segments) != 3:
            raise ValueError("need segments for three axes")
        cap = max(1, max(len(a) for a in segments) + 1)
        jer = np.zeros((3, cap))
        dur = np.zeros((3, cap))
        cnt = np.zeros(3, np.int64)
        for n, axis in enumerate(segments):
            for i, seg in enumerate(axis):
                jer[n, i] = seg.j
                dur[n, i] = seg.duration
            cnt[n] = len(axis)
        totals = [float(dur[n, :cnt[n]].sum()) for n in range(3)]
        total = max(totals)
        for n in range(3):
            if total - totals[n] > 0.0:
                # sub-nanosecond synchronization residue: hold without jerk
                dur[n, cnt[n]] = total - totals[n]
                cnt[n] += 1
        self._init(start, target, jer, dur, cnt, total)

    @classmethod
    def _from_arrays(cls, start, target, jer, dur, cnt, total) -> "Trajectory":
        obj = cls.__new__(cls)
        obj._init(start, target, jer, dur, cnt, total)
        return obj

    def _init(self, start, target, jer, dur, cnt, total):
        knots, coef = _build_pieces(start.position, start.velocity, start.acceleration,
                                    jer, dur, cnt, float(total))
        for arr in (jer, dur, cnt, knots, coef):
            arr.setflags(write=False)
        for name, value in (("duration", float(total)), ("start", start), ("target", target),
                            ("knots", knots), ("coef", coef), ("_jer", jer), ("_dur", dur),
                            ("_cnt", cnt), ("_segments", None)):
            object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("Trajectory is immutable")

    @property
    def segments(self) -> tuple[tuple[Segment, ...], tuple[Segment, ...], tuple[Segment, ...]]:
        if self._segments is None:
            segs = tuple(_segments_from(st, self._jer[n], self._dur[n], int(self._cnt[n]))
                         for n, st in enumerate(self.start.axes))
            object.__setattr__(self, "_segments", segs)
        return self._segments

    @property
    def n_segments(self) -> tuple[int, int, int]:
        return tuple(len(a) for a in self.segments)

    def state_at(self, t: float) -> State3:
        return evaluate(self, t)

    def tail(self, t: float) -> "Trajectory":
        """The remainder of this trajectory from ``t`` on, re-timed to start at 0."""
        t = min(max(t, 0.0), self.duration)
        s = evaluate(self, t)
        start = State3(s.x, s.y, s.z, self.start.t + t)
        axes = []
        for axis in self.segments:
            t0 = 0.0
            rest = []
            for seg in axis:
                t1 = t0 + seg.duration
                if t1 > t + 1e-12:
                    rest.append(Segment(t1 - max(t, t0), seg.j, seg.state_at(max(t - t0, 0.0))))
                t0 = t1
            axes.append(tuple(rest))
        return Trajectory(axes, start, self.target)

    def __repr__(self):
        return (f"Trajectory(duration={self.duration:.6g}, segments={self.n_segments}, "
                f"target={tuple(float(c) for c in self.target.position)})")


def evaluate(traj: Trajectory, t: float) -> State3:
    """State at time ``t`` in ``[0, T]`` (closed-form within the containing piece)."""
    if not (-1e-12 <= t <= traj.duration + 1e-12):
        raise ValueError(f"t={t} outside [0, {traj.duration}]")
    t = min(max(t, 0.0), traj.duration)
    out = np.empty((3, 3))
    _eval_pieces(traj.knots, traj.coef, float(t), out)
    return State3.from_arrays(out[0], out[1], out[2], traj.start.t + t)


def states_at(traj: Trajectory, times) -> np.ndarray:
    """Array ``(len(times), 3, 3)``: per time, rows p, v, a and columns x, y, z."""
    times = np.clip(np.asarray(times, dtype=float), 0.0, traj.duration)
    return _states_kernel(traj.knots, traj.coef, times)


@dataclass(frozen=True)
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("Aabb corners must be 3-vectors")
        if np.any(lo > hi):
            raise ValueError(f"Aabb min {lo} exceeds max {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def inflated(self, half_extent) -> "Aabb":
        e = np.broadcast_to(np.asarray(half_extent, dtype=float), (3,))
        return Aabb(self.lo - e, self.hi + e)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def size(self) -> np.ndarray:
        return self.hi - self.lo


@njit(cache=True, nogil=True)
def _extremum_times(v, a, j, out):
    """Roots of ``v + a t + j t^2 / 2`` (where position is extremal)."""
    if j == 0.0:
        if a == 0.0:
            return 0
        out[0] = -v / a
        return 1
    disc = a * a - 2.0 * j * v
    if disc < 0.0:
        return 0
    sq = math.sqrt(disc)
    # same pair as (-a +- sq) / j, arranged to avoid cancellation
    q = -(a + sq) if a >= 0.0 else -(a - sq)
    if q == 0.0:
        out[0] = 0.0
        return 1
    out[0] = q / j
    out[1] = 2.0 * v / q
    return 2


@njit(cache=True, nogil=True)
def aabb_of_pieces(knots, coef):
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    roots = np.empty(2)
    for k in range(coef.shape[0]):
        length = knots[k + 1] - knots[k]
        for n in range(3):
            p = coef[k, n, 0]
            v = coef[k, n, 1]
            a = coef[k, n, 2]
            j = coef[k, n, 3]
            pe, _, _ = profile.integrate(p, v, a, j, length)
            lo[n] = min(lo[n], p, pe)
            hi[n] = max(hi[n], p, pe)
            m = _extremum_times(v, a, j, roots)
            for r in range(m):
                t = roots[r]
                if 0.0 < t < length:
                    px, _, _ = profile.integrate(p, v, a, j, t)
                    lo[n] = min(lo[n], px)
                    hi[n] = max(hi[n], px)
    return lo, hi


def compute_aabb(traj: Trajectory, mav_half_extent=0.0) -> Aabb:
    """Exact axis-aligned box of the trajectory, grown by ``mav_half_extent`` per axis."""
    lo, hi = aabb_of_pieces(traj.knots, traj.coef)
    return Aabb(lo, hi).inflated(mav_half_extent)


@njit(cache=True, nogil=True)
def _disp(v, a, j, t):
    return t * (v + t * (0.5 * a + t * j / 6.0))


@njit(cache=True, nogil=True)
def _cubic_real_roots(c3, c2, c1, c0, out):
    """Real roots of ``c3 t^3 + c2 t^2 + c1 t + c0`` (closed form)."""
    scale = max(abs(c3), abs(c2), abs(c1), abs(c0))
    if scale == 0.0:
        return 0
    if abs(c3) <= 1e-14 * scale:
        if abs(c2) <= 1e-14 * scale:
            if c1 == 0.0:
                return 0
            out[0] = -c0 / c1
            return 1
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            return 0
        sq = math.sqrt(disc)
        q = -0.5 * (c1 + sq) if c1 >= 0.0 else -0.5 * (c1 - sq)
        if q == 0.0:
            out[0] = 0.0
            return 1
        out[0] = q / c2
        out[1] = c0 / q
        return 2
    b = c2 / c3
    c = c1 / c3
    d = c0 / c3
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        sq = math.sqrt(disc)
        u = -q / 2.0 + sq
        w = -q / 2.0 - sq
        out[0] = math.copysign(abs(u) ** (1.0 / 3.0), u) + math.copysign(abs(w) ** (1.0 / 3.0), w) - shift
        return 1
    if p == 0.0:
        out[0] = -shift
        return 1
    r = 2.0 * math.sqrt(-p / 3.0)
    arg = 3.0 * q / (p * r)
    arg = min(1.0, max(-1.0, arg))
    phi = math.acos(arg) / 3.0
    for i in range(3):
        out[i] = r * math.cos(phi - 2.0 * math.pi * i / 3.0) - shift
    return 3


@njit(cache=True, nogil=True)
def _first_crossing(v, a, j, c, horizon, crit, ends, roots):
    """Smallest ``t`` in ``(0, horizon]`` with ``|v t + a t^2/2 + j t^3/6| = c``.

    Returns ``inf`` when the displacement stays below ``c``. The returned
    time never overshoots: ``|disp(t)| <= c`` up to rounding. ``crit``,
    ``ends`` and ``roots`` are scratch buffers of length 2, 3 and 3.
    """
    h = horizon
    # cheap bound: the displacement cannot reach c within the horizon
    if h * (abs(v) + h * (0.5 * abs(a) + h * abs(j) / 6.0)) < c * (1.0 - 1e-12):
        return np.inf
    m = _extremum_times(v, a, j, crit)
    if m == 2 and crit[1] < crit[0]:
        crit[0], crit[1] = crit[1], crit[0]
    ne = 0
    for i in range(m):
        if 0.0 < crit[i] < horizon:
            ends[ne] = crit[i]
            ne += 1
    ends[ne] = horizon
    ne += 1
    lo = 0.0
    for e in range(ne):
        hi = ends[e]
        dhi = _disp(v, a, j, hi)
        if abs(dhi) >= c:
            target = c if dhi > 0.0 else -c
            # disp is monotone on [lo, hi]; seed from the closed form, keep a bracket
            x = 0.5 * (lo + hi)
            nr = _cubic_real_roots(j / 6.0, 0.5 * a, v, -target, roots)
            for r in range(nr):
                if lo <= roots[r] <= hi:
                    x = roots[r]
                    break
            up = dhi > 0.0
            for _ in range(100):
                f = _disp(v, a, j, x) - target
                inside = (f < 0.0) if up else (f > 0.0)
                if inside:
                    lo = x
                else:
                    hi = x
                if hi - lo <= 4e-16 * max(hi, 1e-300):
                    break
                dv = v + x * (a + 0.5 * j * x)
                xn = x - f / dv if dv != 0.0 else 0.5 * (lo + hi)
                if abs(xn - x) <= 1e-15 * x:
                    # converged: step just below the crossing and stop if inside
                    y = max(lo, min(x, xn) * (1.0 - 4e-16))
                    fy = _disp(v, a, j, y) - target
                    if (fy < 0.0) if up else (fy > 0.0):
                        lo = y
                        break
                if not (lo < xn < hi):
                    xn = 0.5 * (lo + hi)
                if xn == x:
                    xn = 0.5 * (lo + hi)
                x = xn
            return lo if lo > 0.0 else hi
        lo = hi
    return np.inf


@njit(cache=True, nogil=True)
def sample_times_kernel(knots, coef, dp):
    cap = 64
    out = np.empty(cap)
    crit = np.empty(2)
    ends = np.empty(3)
    roots = np.empty(3)
    out[0] = knots[0]
    m = 1
    for k in range(coef.shape[0]):
        length = knots[k + 1] - knots[k]
        if length <= 0.0:
            continue
        cur = 0.0
        while True:
            step = np.inf
            for n in range(3):
                _, v, a = profile.integrate(coef[k, n, 0], coef[k, n, 1], coef[k, n, 2],
                                            coef[k, n, 3], cur)
                s = _first_crossing(v, a, coef[k, n, 3], dp[n], length - cur,
                                    crit, ends, roots)
                if s < step:
                    step = s
            # a crossing within 1e-12 s of the border is the border sample itself
            if not (step < length - cur - 1e-12) or step <= 0.0:
                break
            cur += step
            if knots[k] + cur >= knots[k + 1]:
                break
            if m == cap:
                grown = np.empty(cap * 2)
                grown[:m] = out[:m]
                out = grown
                cap *= 2
            out[m] = knots[k] + cur
            m += 1
        if m == cap:
            grown = np.empty(cap * 2)
            grown[:m] = out[:m]
            out = grown
            cap *= 2
        out[m] = knots[k + 1]
        m += 1
    return out[:m]


def sample_times(traj: Trajectory, dp) -> np.ndarray:
    """Sample times for constant-distance sampling (see ``sample_constant_distance``)."""
    dp = np.broadcast_to(np.asarray(dp, dtype=float), (3,)).copy()
    if np.any(dp <= 0.0) or not np.all(np.isfinite(dp)):
        raise ValueError(f"dp must be positive per axis, got {dp}")
    return sample_times_kernel(traj.knots, traj.coef, dp)


def sample_constant_distance(traj: Trajectory, dp) -> list[tuple[float, State3]]:
    """Samples whose per-axis position change never exceeds ``dp``.

    From each sample the next one is the earliest time at which some axis
    has moved by ``dp`` in either direction. Segment borders are always
    sampled and restart the search; the first sample is at 0 and the last
    at ``T``.
    """
    times = sample_times(traj, dp)
    st = states_at(traj, times)
    return [(float(t), State3.from_arrays(s[0], s[1], s[2], traj.start.t + float(t)))
            for t, s in zip(times, st)]
