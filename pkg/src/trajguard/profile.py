"""Single-axis jerk-limited profiles.

A profile is a short list of constant-jerk phases ``(jerk, duration)`` taking
an axis from ``(p0, v0, a0)`` to ``(pf, vf, af)`` while keeping velocity and
acceleration inside asymmetric bounds. The kernels here are compiled with
numba because the avoidance loop plans hundreds of profiles per cycle.

Two profile families are searched and the fastest valid profile wins:

* cruise family: a minimum-time velocity change to a peak velocity ``vp``
  (where acceleration is zero), an optional constant-velocity phase, and a
  minimum-time velocity change to the target. ``vp`` is either a velocity
  bound (with cruise) or a root of the distance equation (no cruise).
* three-bang family: jerk signs ``s, -s, s`` with optional acceleration
  plateaus after the first and second bang, solved on one free parameter.

Limits are passed as the flat tuple ``(vmin, vmax, amin, amax, jmin, jmax)``.
"""

import math

import numpy as np
from numba import njit

MAX_PHASES = 8

_TOL = 1e-10
_N_SCAN = 48
_N_SCAN_VEL = 64
_N_BISECT = 200


@njit(cache=True, nogil=True)
def integrate(p, v, a, j, t):
    """State after applying jerk ``j`` for ``t`` seconds."""
    return (p + t * (v + t * (0.5 * a + t * j / 6.0)),
            v + t * (a + 0.5 * j * t),
            a + j * t)


@njit(cache=True, nogil=True)
def rollout(p, v, a, jerks, durs, n):
    for i in range(n):
        p, v, a = integrate(p, v, a, jerks[i], durs[i])
    return p, v, a


@njit(cache=True, nogil=True)
def vel_block(va, aa, vb, ab, amin, amax, jmin, jmax, variant=-1):
    """Change from ``(va, aa)`` to ``(vb, ab)`` ignoring position.

    Jerk pattern is ``j1`` for ``t1``, zero for ``t2`` (only at an
    acceleration bound), ``j3`` for ``t3``. ``variant`` -1 picks the
    minimum-time solution; 0..3 selects one (jerk sign, peak root) branch.
    Returns ``(ok, j1, t1, t2, j3, t3)``.
    """
    dv = vb - va
    best = np.inf
    r_j1 = 0.0
    r_t1 = 0.0
    r_t2 = 0.0
    r_j3 = 0.0
    r_t3 = 0.0
    for si in range(2):
        if variant >= 0 and si != variant // 2:
            continue
        if si == 0:
            j1 = jmax
            j3 = jmin
            alim = amax
            s = 1.0
        else:
            j1 = jmin
            j3 = jmax
            alim = amin
            s = -1.0
        c = 0.5 / j1 - 0.5 / j3
        num = dv + 0.5 * aa * aa / j1 - 0.5 * ab * ab / j3
        sq = num / c
        if sq < 0.0:
            scale = abs(dv) + 0.5 * aa * aa / abs(j1) + 0.5 * ab * ab / abs(j3)
            if sq * abs(c) < -1e-13 * (1.0 + scale):
                continue
            sq = 0.0
        r = math.sqrt(sq)
        for k in range(2):
            if k == 1 and r == 0.0:
                break
            if variant >= 0 and k != variant % 2:
                continue
            ap = r if k == 0 else -r
            t2 = 0.0
            if s * ap > s * alim:
                ap = alim
                t2 = (dv - 0.5 * (ap * ap - aa * aa) / j1
                      - 0.5 * (ab * ab - ap * ap) / j3) / ap
            t1 = (ap - aa) / j1
            t3 = (ab - ap) / j3
            if t1 < -_TOL or t2 < -_TOL or t3 < -_TOL:
                continue
            t1 = max(t1, 0.0)
            t2 = max(t2, 0.0)
            t3 = max(t3, 0.0)
            tt = t1 + t2 + t3
            if tt < best:
                best = tt
                r_j1 = j1
                r_t1 = t1
                r_t2 = t2
                r_j3 = j3
                r_t3 = t3
    return best < np.inf, r_j1, r_t1, r_t2, r_j3, r_t3


@njit(cache=True, nogil=True)
def _cruise_fill(v0, a0, vf, af, vp, lim, jerks, durs, var1=-1, var2=-1):
    """Write the cruise-family phases (without the cruise) for peak ``vp``.

    The cruise slot (index 3) is left at zero duration. Returns
    ``(ok, distance_without_cruise, time_without_cruise)``.
    """
    ok1, j1, t1, t2, j3, t3 = vel_block(v0, a0, vp, 0.0, lim[2], lim[3], lim[4], lim[5], var1)
    if not ok1:
        return False, 0.0, 0.0
    ok2, k1, u1, u2, k3, u3 = vel_block(vp, 0.0, vf, af, lim[2], lim[3], lim[4], lim[5], var2)
    if not ok2:
        return False, 0.0, 0.0
    jerks[0] = j1
    durs[0] = t1
    jerks[1] = 0.0
    durs[1] = t2
    jerks[2] = j3
    durs[2] = t3
    jerks[3] = 0.0
    durs[3] = 0.0
    jerks[4] = k1
    durs[4] = u1
    jerks[5] = 0.0
    durs[5] = u2
    jerks[6] = k3
    durs[6] = u3
    p, v, a = rollout(0.0, v0, a0, jerks, durs, 3)
    # restart the second half from the exact peak state
    d2, _, _ = rollout(0.0, vp, 0.0, jerks[4:], durs[4:], 3)
    return True, p + d2, t1 + t2 + t3 + u1 + u2 + u3


@njit(cache=True, nogil=True)
def _three_bang_params(case, s, branch, x, v0, a0, vf, af, lim):
    """Resolve plateau/peak values of an ``s, -s, s`` profile.

    case 0: no plateaus, x is the first peak, branch picks the second peak root.
    case 1: plateau at the first peak (an acceleration bound), x is the second peak.
    case 2: plateau at the second peak (a bound), x is the first peak.
    case 3: both plateaus, x is the first plateau duration.
    Returns ``(ok, A1, P1, A2, P2)``.
    """
    if s > 0:
        ja = lim[5]
        jb = lim[4]
        alim_s = lim[3]
        alim_m = lim[2]
    else:
        ja = lim[4]
        jb = lim[5]
        alim_s = lim[2]
        alim_m = lim[3]
    dv = vf - v0
    A1 = 0.0
    A2 = 0.0
    P1 = 0.0
    P2 = 0.0
    if case == 0:
        A1 = x
        k = 0.5 / jb - 0.5 / ja
        rhs = dv - 0.5 * (A1 * A1 - a0 * a0) / ja + 0.5 * A1 * A1 / jb - 0.5 * af * af / ja
        sq = rhs / k
        if sq < 0.0:
            if sq > -1e-14 * (1.0 + A1 * A1 + af * af):
                sq = 0.0
            else:
                return False, A1, P1, A2, P2
        A2 = branch * math.sqrt(sq)
    else:
        if case == 1:
            A1 = alim_s
            A2 = x
        elif case == 2:
            A1 = x
            A2 = alim_m
        else:
            A1 = alim_s
            A2 = alim_m
            P1 = x
        base = (0.5 * (A1 * A1 - a0 * a0) / ja + 0.5 * (A2 * A2 - A1 * A1) / jb
                + 0.5 * (af * af - A2 * A2) / ja)
        if case == 1:
            P1 = (dv - base) / A1
        elif case == 2:
            P2 = (dv - base) / A2
        else:
            P2 = (dv - base - A1 * P1) / A2
    if P1 < -_TOL or P2 < -_TOL:
        return False, A1, P1, A2, P2
    if (A1 - a0) / ja < -_TOL or (A2 - A1) / jb < -_TOL or (af - A2) / ja < -_TOL:
        return False, A1, P1, A2, P2
    return True, A1, max(P1, 0.0), A2, max(P2, 0.0)


@njit(cache=True, nogil=True)
def _three_bang_fill(s, A1, P1, A2, P2, a0, af, lim, jerks, durs):
    if s > 0:
        ja = lim[5]
        jb = lim[4]
    else:
        ja = lim[4]
        jb = lim[5]
    jerks[0] = ja
    durs[0] = max((A1 - a0) / ja, 0.0)
    jerks[1] = 0.0
    durs[1] = P1
    jerks[2] = jb
    durs[2] = max((A2 - A1) / jb, 0.0)
    jerks[3] = 0.0
    durs[3] = P2
    jerks[4] = ja
    durs[4] = max((af - A2) / ja, 0.0)
    return 5


@njit(cache=True, nogil=True)
def _three_bang_resid(case, s, branch, x, p0, v0, a0, pf, vf, af, lim, jerks, durs):
    ok, A1, P1, A2, P2 = _three_bang_params(case, s, branch, x, v0, a0, vf, af, lim)
    if not ok:
        return False, 0.0
    n = _three_bang_fill(s, A1, P1, A2, P2, a0, af, lim, jerks, durs)
    p, _, _ = rollout(p0, v0, a0, jerks, durs, n)
    return True, p - pf


@njit(cache=True, nogil=True)
def check_profile(p0, v0, a0, pf, vf, af, lim, jerks, durs, n):
    """True if the phases reach the target and respect the bounds."""
    p = p0
    v = v0
    a = a0
    vtol = 1e-9
    for i in range(n):
        j = jerks[i]
        t = durs[i]
        if t < 0.0:
            return False
        if j != 0.0:
            tau = -a / j
            if 0.0 < tau < t:
                vext = v - 0.5 * a * a / j
                if vext > lim[1] + vtol or vext < lim[0] - vtol:
                    return False
        p, v, a = integrate(p, v, a, j, t)
        if v > lim[1] + vtol or v < lim[0] - vtol:
            return False
        if a > lim[3] + vtol or a < lim[2] - vtol:
            return False
    scale = 1.0 + abs(pf - p0)
    if abs(p - pf) > 1e-9 * scale or abs(v - vf) > 1e-9 or abs(a - af) > 1e-9:
        return False
    return True


@njit(cache=True, nogil=True)
def _total(durs, n):
    tt = 0.0
    for i in range(n):
        tt += durs[i]
    return tt


@njit(cache=True, nogil=True)
def _keep(p0, v0, a0, pf, vf, af, lim, jerks, durs, n, best_j, best_d, best, best_n):
    """Copy the candidate into ``best_*`` if valid and faster."""
    if not check_profile(p0, v0, a0, pf, vf, af, lim, jerks, durs, n):
        return best, best_n
    tt = _total(durs, n)
    if tt < best:
        for i in range(MAX_PHASES):
            best_j[i] = jerks[i] if i < n else 0.0
            best_d[i] = durs[i] if i < n else 0.0
        return tt, n
    return best, best_n


@njit(cache=True, nogil=True)
def _illinois_x(lo, hi, flo, fhi):
    """Regula falsi point of a sign-changing bracket, midpoint as fallback."""
    if flo != fhi:
        x = hi - fhi * (hi - lo) / (fhi - flo)
        if lo < x < hi:
            return x
    return 0.5 * (lo + hi)


@njit(cache=True, nogil=True)
def solve_time_optimal(p0, v0, a0, pf, vf, af, lim, out_j, out_d):
    """Fastest profile found over both families.

    Fills ``out_j``/``out_d`` (length ``MAX_PHASES``) and returns the phase
    count, or -1 when no valid profile exists.
    """
    if p0 == pf and v0 == vf and a0 == af:
        return 0
    vmin = lim[0]
    vmax = lim[1]
    jerks = np.zeros(MAX_PHASES)
    durs = np.zeros(MAX_PHASES)
    best_j = np.zeros(MAX_PHASES)
    best_d = np.zeros(MAX_PHASES)
    best = np.inf
    best_n = -1
    dp = pf - p0

    # cruise at a velocity bound
    for vl in (vmax, vmin):
        ok, d, _ = _cruise_fill(v0, a0, vf, af, vl, lim, jerks, durs)
        if ok:
            t4 = (dp - d) / vl
            if t4 >= -_TOL:
                durs[3] = max(t4, 0.0)
                best, best_n = _keep(p0, v0, a0, pf, vf, af, lim, jerks, durs, 7, best_j, best_d, best, best_n)

    # no cruise: roots of distance(vp) - dp
    xs = np.empty(_N_SCAN_VEL + 1)
    fs = np.empty(_N_SCAN_VEL + 1)
    oks = np.empty(_N_SCAN_VEL + 1, dtype=np.bool_)
    for k in range(_N_SCAN_VEL + 1):
        x = vmin + (vmax - vmin) * k / _N_SCAN_VEL
        ok, d, _ = _cruise_fill(v0, a0, vf, af, x, lim, jerks, durs)
        xs[k] = x
        fs[k] = d - dp
        oks[k] = ok
    for k in range(_N_SCAN_VEL):
        if not (oks[k] and oks[k + 1]):
            continue
        if fs[k] == 0.0:
            x = xs[k]
        elif fs[k] * fs[k + 1] > 0.0:
            continue
        else:
            lo = xs[k]
            hi = xs[k + 1]
            flo = fs[k]
            fhi = fs[k + 1]
            x = lo if abs(flo) <= abs(fhi) else hi
            fx = min(abs(flo), abs(fhi))
            side = 0
            good = True
            for _ in range(_N_BISECT):
                mid = _illinois_x(lo, hi, flo, fhi)
                if mid <= lo or mid >= hi:
                    break
                ok, d, _ = _cruise_fill(v0, a0, vf, af, mid, lim, jerks, durs)
                if not ok:
                    good = False
                    break
                fm = d - dp
                if abs(fm) <= fx:
                    x = mid
                    fx = abs(fm)
                if fm == 0.0:
                    break
                if (fm < 0.0) == (flo < 0.0):
                    lo = mid
                    flo = fm
                    if side < 0:
                        fhi *= 0.5
                    side = -1
                else:
                    hi = mid
                    fhi = fm
                    if side > 0:
                        flo *= 0.5
                    side = 1
            if not good:
                continue
        ok, d, _ = _cruise_fill(v0, a0, vf, af, x, lim, jerks, durs)
        if ok:
            best, best_n = _keep(p0, v0, a0, pf, vf, af, lim, jerks, durs, 7, best_j, best_d, best, best_n)

    # three-bang family
    for si in range(2):
        s = 1.0 if si == 0 else -1.0
        alim_s = lim[3] if s > 0 else lim[2]
        alim_m = lim[2] if s > 0 else lim[3]
        for case in range(4):
            if case == 0 or case == 2:
                lo0 = min(a0, alim_s)
                hi0 = max(a0, alim_s)
            elif case == 1:
                lo0 = min(alim_m, af)
                hi0 = max(alim_m, af)
            else:
                lo0 = 0.0
                hi0 = (vmax - vmin) / abs(alim_s)
            nbr = 2 if case == 0 else 1
            for bi in range(nbr):
                branch = 1.0 if bi == 0 else -1.0
                for k in range(_N_SCAN + 1):
                    x = lo0 + (hi0 - lo0) * k / _N_SCAN
                    ok, r = _three_bang_resid(case, s, branch, x, p0, v0, a0, pf, vf, af,
                                              lim, jerks, durs)
                    xs[k] = x
                    fs[k] = r
                    oks[k] = ok
                for k in range(_N_SCAN):
                    if not (oks[k] and oks[k + 1]):
                        continue
                    if fs[k] == 0.0:
                        x = xs[k]
                    elif fs[k] * fs[k + 1] > 0.0:
                        continue
                    else:
                        lo = xs[k]
                        hi = xs[k + 1]
                        flo = fs[k]
                        fhi = fs[k + 1]
                        x = lo if abs(flo) <= abs(fhi) else hi
                        fx = min(abs(flo), abs(fhi))
                        side = 0
                        good = True
                        for _ in range(_N_BISECT):
                            mid = _illinois_x(lo, hi, flo, fhi)
                            if mid <= lo or mid >= hi:
                                break
                            ok, fm = _three_bang_resid(case, s, branch, mid, p0, v0, a0, pf,
                                                       vf, af, lim, jerks, durs)
                            if not ok:
                                good = False
                                break
                            if abs(fm) <= fx:
                                x = mid
                                fx = abs(fm)
                            if fm == 0.0:
                                break
                            if (fm < 0.0) == (flo < 0.0):
                                lo = mid
                                flo = fm
                                if side < 0:
                                    fhi *= 0.5
                                side = -1
                            else:
                                hi = mid
                                fhi = fm
                                if side > 0:
                                    flo *= 0.5
                                side = 1
                        if not good:
                            continue
                    ok, A1, P1, A2, P2 = _three_bang_params(case, s, branch, x, v0, a0, vf, af, lim)
                    if ok:
                        n = _three_bang_fill(s, A1, P1, A2, P2, a0, af, lim, jerks, durs)
                        best, best_n = _keep(p0, v0, a0, pf, vf, af, lim, jerks, durs, n,
                                     best_j, best_d, best, best_n)
                # the last grid point is never a left endpoint above
                if oks[_N_SCAN] and fs[_N_SCAN] == 0.0:
                    ok, A1, P1, A2, P2 = _three_bang_params(case, s, branch, xs[_N_SCAN],
                                                            v0, a0, vf, af, lim)
                    if ok:
                        n = _three_bang_fill(s, A1, P1, A2, P2, a0, af, lim, jerks, durs)
                        best, best_n = _keep(p0, v0, a0, pf, vf, af, lim, jerks, durs, n,
                                     best_j, best_d, best, best_n)

    for i in range(MAX_PHASES):
        out_j[i] = best_j[i]
        out_d[i] = best_d[i]
    return best_n


@njit(cache=True, nogil=True)
def _cruise_time_resid(v0, a0, vf, af, vc, dp, tf, lim, jerks, durs, var1, var2):
    """Residual ``T(vc) - tf`` of the cruise family with cruise speed ``vc``."""
    ok, d, tb = _cruise_fill(v0, a0, vf, af, vc, lim, jerks, durs, var1, var2)
    if not ok:
        return False, 0.0
    t4 = (dp - d) / vc
    if t4 < -_TOL:
        return False, 0.0
    return True, tb + max(t4, 0.0) - tf


@njit(cache=True, nogil=True)
def _cruise_grid(k, side, lim):
    u = (k / _N_SCAN_VEL) ** 4
    return u * (lim[1] if side == 0 else lim[0])


@njit(cache=True, nogil=True)
def _variant_pair(i):
    # pair 0 is the minimum-time one, then every explicit branch combination
    if i == 0:
        return -1, -1
    return (i - 1) // 4, (i - 1) % 4


@njit(cache=True, nogil=True)
def _validity_edge(v0, a0, vf, af, x_ok, x_bad, dp, tf, lim, jerks, durs, var1, var2):
    """Bisect towards the last valid cruise speed between ``x_ok`` and ``x_bad``."""
    for _ in range(_N_BISECT):
        mid = 0.5 * (x_ok + x_bad)
        if mid == x_ok or mid == x_bad:
            break
        ok, _ = _cruise_time_resid(v0, a0, vf, af, mid, dp, tf, lim, jerks, durs, var1, var2)
        if ok:
            x_ok = mid
        else:
            x_bad = mid
    ok, f = _cruise_time_resid(v0, a0, vf, af, x_ok, dp, tf, lim, jerks, durs, var1, var2)
    return x_ok, f


@njit(cache=True, nogil=True)
def _fixed_time_pair(p0, v0, a0, pf, vf, af, tf, lim, var1, var2, jerks, durs):
    dp = pf - p0
    pts_x = np.empty(2 * _N_SCAN_VEL + 2)
    pts_f = np.empty(2 * _N_SCAN_VEL + 2)
    pts_run = np.empty(2 * _N_SCAN_VEL + 2, dtype=np.int64)
    for side in range(2):
        # valid samples, fast end first; validity edges are refined and kept
        m = 0
        run = 0
        prev_ok = False
        prev_x = 0.0
        for k in range(_N_SCAN_VEL, 0, -1):
            x = _cruise_grid(k, side, lim)
            ok, f = _cruise_time_resid(v0, a0, vf, af, x, dp, tf, lim, jerks, durs, var1, var2)
            if k < _N_SCAN_VEL and ok != prev_ok:
                if ok:
                    run += 1
                    xe, fe = _validity_edge(v0, a0, vf, af, x, prev_x, dp, tf, lim, jerks, durs,
                                            var1, var2)
                else:
                    xe, fe = _validity_edge(v0, a0, vf, af, prev_x, x, dp, tf, lim, jerks, durs,
                                            var1, var2)
                pts_x[m] = xe
                pts_f[m] = fe
                pts_run[m] = run
                m += 1
            if ok:
                pts_x[m] = x
                pts_f[m] = f
                pts_run[m] = run
                m += 1
            prev_ok = ok
            prev_x = x
        for q in range(m):
            hit = pts_f[q] == 0.0
            if not hit and (q + 1 >= m or pts_run[q + 1] != pts_run[q]
                            or pts_f[q] * pts_f[q + 1] > 0.0):
                continue
            root = pts_x[q]
            good = True
            if not hit:
                # points run from fast to slow, so the bracket may be reversed
                lo = min(pts_x[q], pts_x[q + 1])
                hi = max(pts_x[q], pts_x[q + 1])
                flo = pts_f[q] if pts_x[q] < pts_x[q + 1] else pts_f[q + 1]
                fhi = pts_f[q + 1] if pts_x[q] < pts_x[q + 1] else pts_f[q]
                root = lo if abs(flo) <= abs(fhi) else hi
                fx = min(abs(flo), abs(fhi))
                sd = 0
                for _ in range(_N_BISECT):
                    mid = _illinois_x(lo, hi, flo, fhi)
                    if mid <= lo or mid >= hi:
                        break
                    okm, fm = _cruise_time_resid(v0, a0, vf, af, mid, dp, tf, lim,
                                                 jerks, durs, var1, var2)
                    if not okm:
                        good = False
                        break
                    if abs(fm) <= fx:
                        root = mid
                        fx = abs(fm)
                    if fm == 0.0:
                        break
                    if (fm < 0.0) == (flo < 0.0):
                        lo = mid
                        flo = fm
                        if sd < 0:
                            fhi *= 0.5
                        sd = -1
                    else:
                        hi = mid
                        fhi = fm
                        if sd > 0:
                            flo *= 0.5
                        sd = 1
            if not good:
                continue
            okc, d, tb = _cruise_fill(v0, a0, vf, af, root, lim, jerks, durs, var1, var2)
            if okc:
                # cruise absorbs the root-search residual so duration is exact
                durs[3] = max(tf - tb, 0.0)
                if check_profile(p0, v0, a0, pf, vf, af, lim, jerks, durs, 7):
                    return True
    return False


@njit(cache=True, nogil=True)
def solve_fixed_time(p0, v0, a0, pf, vf, af, tf, lim, out_j, out_d):
    """Profile of duration exactly ``tf`` with a constant-velocity middle phase.

    The cruise velocity is found by a bracketed root search so the total duration matches
    ``tf``; the minimum-time velocity changes are tried first, then the other
    branches. Returns the phase count or -1 if no cruise speed fits.
    """
    jerks = np.zeros(MAX_PHASES)
    durs = np.zeros(MAX_PHASES)
    dp = pf - p0
    if tf <= 0.0:
        if p0 == pf and v0 == vf and a0 == af:
            return 0
        return -1

    found = False
    # hold at rest: only when both halves meet at v = 0 exactly
    ok, d, tb = _cruise_fill(v0, a0, vf, af, 0.0, lim, jerks, durs)
    if ok and abs(dp - d) <= 1e-12 * (1.0 + abs(dp)) and tb <= tf + _TOL:
        durs[3] = max(tf - tb, 0.0)
        found = check_profile(p0, v0, a0, pf, vf, af, lim, jerks, durs, 7)
    i = 0
    while not found and i < 17:
        var1, var2 = _variant_pair(i)
        found = _fixed_time_pair(p0, v0, a0, pf, vf, af, tf, lim, var1, var2, jerks, durs)
        i += 1
    if found:
        for i in range(MAX_PHASES):
            out_j[i] = jerks[i] if i < 7 else 0.0
            out_d[i] = durs[i] if i < 7 else 0.0
        return 7
    return _solve_softened_jerk(p0, v0, a0, pf, vf, af, tf, lim, out_j, out_d)


@njit(cache=True, nogil=True)
def _min_jerk_scale(v0, a0, vf, af, lim):
    """Smallest jerk-bound scale keeping both boundary states reachable."""
    lam = 1e-3
    if a0 > 0.0 and lim[1] > v0:
        lam = max(lam, a0 * a0 / (2.0 * -lim[4] * (lim[1] - v0)))
    if a0 < 0.0 and v0 > lim[0]:
        lam = max(lam, a0 * a0 / (2.0 * lim[5] * (v0 - lim[0])))
    if af < 0.0 and lim[1] > vf:
        lam = max(lam, af * af / (2.0 * -lim[4] * (lim[1] - vf)))
    if af > 0.0 and vf > lim[0]:
        lam = max(lam, af * af / (2.0 * lim[5] * (vf - lim[0])))
    return lam


@njit(cache=True, nogil=True)
def _softened_time(p0, v0, a0, pf, vf, af, lam, lim, scaled, jerks, durs):
    for i in range(6):
        scaled[i] = lim[i]
    scaled[4] = lim[4] * lam
    scaled[5] = lim[5] * lam
    n = solve_time_optimal(p0, v0, a0, pf, vf, af, scaled, jerks, durs)
    if n < 0:
        return n, np.inf
    return n, _total(durs, n)


@njit(cache=True, nogil=True)
def _solve_softened_jerk(p0, v0, a0, pf, vf, af, tf, lim, out_j, out_d):
    """Stretch by lowering both jerk bounds until the optimal duration is ``tf``."""
    jerks = np.zeros(MAX_PHASES)
    durs = np.zeros(MAX_PHASES)
    scaled = np.empty(6)
    lo = _min_jerk_scale(v0, a0, vf, af, lim) * (1.0 + 1e-9)
    if lo >= 1.0:
        return -1
    n, t_lo = _softened_time(p0, v0, a0, pf, vf, af, lo, lim, scaled, jerks, durs)
    if n < 0 or t_lo < tf:
        return -1
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        n, tm = _softened_time(p0, v0, a0, pf, vf, af, mid, lim, scaled, jerks, durs)
        if n < 0:
            return -1
        if tm >= tf:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    n, tm = _softened_time(p0, v0, a0, pf, vf, af, lo, lim, scaled, jerks, durs)
    if n < 0 or abs(tm - tf) > 1e-9 * (1.0 + tf):
        return -1
    for i in range(MAX_PHASES):
        out_j[i] = jerks[i]
        out_d[i] = durs[i]
    return n


@njit(cache=True, nogil=True)
def fixed_time_floor(p0, v0, a0, pf, vf, af, tf, lim):
    """Smallest duration >= ``tf`` the cruise family can likely realize.

    Uses the sampled duration curves; between two valid neighbouring samples
    every intermediate duration is attainable by continuity.
    Returns ``inf`` if none is found.
    """
    jerks = np.zeros(MAX_PHASES)
    durs = np.zeros(MAX_PHASES)
    dp = pf - p0
    best = np.inf
    for i in range(17):
        var1, var2 = _variant_pair(i)
        for side in range(2):
            prev_ok = False
            prev_t = 0.0
            for k in range(_N_SCAN_VEL, 0, -1):
                x = _cruise_grid(k, side, lim)
                ok, f = _cruise_time_resid(v0, a0, vf, af, x, dp, 0.0, lim, jerks, durs,
                                           var1, var2)
                if ok and prev_ok:
                    lo = min(f, prev_t)
                    hi = max(f, prev_t)
                    if lo <= tf <= hi:
                        return tf
                    if tf < lo < best:
                        best = lo
                prev_ok = ok
                prev_t = f
    return best
