"""Jerk-limited trajectory planning with point-cloud collision checking and
sampling-based avoidance replanning for small aerial vehicles."""

from .avoidance import (CandidateResult, Decision, NoSafeCandidate, ReplanConfig,
                        SelectionState, SpheroidParams, TubeParams, WaypointCandidate,
                        awp_cost, candidate_waypoints, check_trajectory, replan_step,
                        select_best, spheroid_waypoints, tube_waypoints, validate_candidate)
from .collision import (ClearanceSpec, CloudPoint, Coverage, PointCloud, SafetyReport,
                        SampleVerdict, SensorModel, check_moving, check_static,
                        classify_positions, classify_samples, classify_trajectory,
                        coverage_class, crop_cloud, crop_indices)
from .trajectory import (Aabb, AxisConstraints, AxisState, InfeasibleError, Segment, State3,
                         Trajectory, compute_aabb, evaluate, plan_3d, plan_axis,
                         plan_axis_fixed_time, sample_constant_distance, sample_times,
                         states_at)

__version__ = "0.1.0"
