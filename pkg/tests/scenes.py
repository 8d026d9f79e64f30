"""Random inputs shared by the tests."""

from __future__ import annotations

import numpy as np

from trajguard import AxisConstraints, InfeasibleError, State3, plan_3d
from trajguard.trajectory import check_boundary_state

DEFAULT = (AxisConstraints.symmetric(2.0, 2.0, 4.0),) * 3


def random_constraints(rng) -> AxisConstraints:
    return AxisConstraints(-rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0),
                           -rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0),
                           -rng.uniform(1.0, 8.0), rng.uniform(1.0, 8.0))


def random_state(rng, cons, spread=5.0, moving=True, arriving=False, z_scale=1.0) -> State3:
    """A state inside the bounds that can also be braked without violating them."""
    while True:
        p = rng.uniform(-spread, spread, 3) * np.array([1.0, 1.0, z_scale])
        if not moving:
            return State3.at_rest(p)
        v = np.array([rng.uniform(0.9 * c.v_min, 0.9 * c.v_max) for c in cons])
        a = np.array([rng.uniform(0.9 * c.a_min, 0.9 * c.a_max) for c in cons])
        s = State3.from_arrays(p, v, a)
        try:
            for ax, c in zip(s.axes, cons):
                check_boundary_state(ax, c, arriving=arriving)
        except InfeasibleError:
            continue
        return s


def random_trajectory(rng, cons=DEFAULT, rest_target=None, spread=5.0, z_scale=1.0):
    """Plan between random states; the target is at rest half of the time by default."""
    while True:
        start = random_state(rng, cons, spread, z_scale=z_scale)
        rest = rng.random() < 0.5 if rest_target is None else rest_target
        target = random_state(rng, cons, spread, moving=not rest, arriving=True,
                              z_scale=z_scale)
        try:
            return plan_3d(start, target, cons)
        except InfeasibleError:
            continue
