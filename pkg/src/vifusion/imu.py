"""IMU preintegration between consecutive camera frames.

Integrates bias-corrected gyro/accel streams with a midpoint rule on
SO(3), starting from a zero state per interval. The resulting rotation,
velocity, and position deltas are expressed in the body frame at the
interval start. Gravity is a known world-frame constant removed inside
the integral using the known world orientation at the interval start,
so the deltas that reach the graph are gravity-free.

Bias Jacobians are accumulated alongside the integration (first-order,
Forster-style recursions) so the preintegration is differentiable with
respect to the calibration biases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError
from .manifold import Pose, Rotation, skew, so3_exp, so3_right_jacobian

GRAVITY = np.array([0.0, 0.0, -9.81])

_TIME_SLACK = 1e-9


@dataclass(frozen=True)
class ImuSample:
    """One IMU reading: body-frame specific force (gravity included) and
    angular rate."""

    t: float
    accel: np.ndarray
    gyro: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float).reshape(3))
        object.__setattr__(self, "gyro", np.asarray(self.gyro, dtype=float).reshape(3))


def _check_spd(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float).reshape(3, 3)
    if not np.allclose(m, m.T, atol=1e-12):
        raise InvalidArgumentError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(m)) < -1e-12:
        raise InvalidArgumentError(f"{name} must be positive semidefinite")
    return m


@dataclass(frozen=True)
class ImuCalibration:
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    gyro_cov: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        object.__setattr__(self, "accel_bias", np.asarray(self.accel_bias, dtype=float).reshape(3))
        object.__setattr__(self, "gyro_bias", np.asarray(self.gyro_bias, dtype=float).reshape(3))
        object.__setattr__(self, "accel_cov", _check_spd(self.accel_cov, "accel_cov"))
        object.__setattr__(self, "gyro_cov", _check_spd(self.gyro_cov, "gyro_cov"))


@dataclass(frozen=True)
class ImuPreintegration:
    """Relative motion between two camera frames, start-of-interval frame.

    delta_velocity = integral of (R(t) a(t) - g) dt and delta_position its
    double integral, both with gravity removed; delta_rotation maps the
    end body frame into the start body frame.
    """

    delta_rotation: Rotation
    delta_velocity: np.ndarray
    delta_position: np.ndarray
    duration: float
    covariance: np.ndarray | None = None  # 9x9 over (theta, v, p); informational

    def __post_init__(self):
        object.__setattr__(self, "delta_velocity", np.asarray(self.delta_velocity, dtype=float).reshape(3))
        object.__setattr__(self, "delta_position", np.asarray(self.delta_position, dtype=float).reshape(3))
        if self.duration <= 0:
            raise InvalidArgumentError("preintegration duration must be positive")


@dataclass(frozen=True)
class BiasJacobians:
    """First-order sensitivities of the deltas to the calibration biases.

    The rotation block is in the right-tangent sense:
    Log(dR(b)^-1 dR(b + db)) ~ rotation_gyro @ db.
    """

    rotation_gyro: np.ndarray
    velocity_accel: np.ndarray
    velocity_gyro: np.ndarray
    position_accel: np.ndarray
    position_gyro: np.ndarray
    rotation_accel: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))


def correct_bias(samples: list[ImuSample], calib: ImuCalibration) -> list[ImuSample]:
    """Subtract calibration biases; timestamps unchanged."""
    return [ImuSample(s.t, s.accel - calib.accel_bias, s.gyro - calib.gyro_bias)
            for s in samples]


def _interpolate(s0: ImuSample, s1: ImuSample, t: float) -> ImuSample:
    a = (t - s0.t) / (s1.t - s0.t)
    return ImuSample(t, (1 - a) * s0.accel + a * s1.accel,
                     (1 - a) * s0.gyro + a * s1.gyro)


def _integration_grid(samples: list[ImuSample], t_start: float, t_end: float) -> list[ImuSample]:
    """Trim the stream to [t_start, t_end], interpolating the boundary
    samples when frame times fall between IMU timestamps."""
    if len(samples) < 2:
        raise InsufficientDataError("preintegration needs at least 2 samples")
    times = np.array([s.t for s in samples])
    if np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("IMU timestamps must be strictly increasing")
    if t_end <= t_start:
        raise InvalidArgumentError("t_end must exceed t_start")
    if times[0] > t_start + _TIME_SLACK or times[-1] < t_end - _TIME_SLACK:
        raise InsufficientDataError(
            f"IMU stream [{times[0]:.6f}, {times[-1]:.6f}] does not cover "
            f"[{t_start:.6f}, {t_end:.6f}]")
    i0 = int(np.searchsorted(times, t_start, side="right")) - 1
    i1 = int(np.searchsorted(times, t_end, side="left"))
    i0 = max(i0, 0)
    i1 = min(i1, len(samples) - 1)
    grid = []
    if abs(times[i0] - t_start) <= _TIME_SLACK:
        grid.append(ImuSample(t_start, samples[i0].accel, samples[i0].gyro))
    else:
        grid.append(_interpolate(samples[i0], samples[i0 + 1], t_start))
    for k in range(i0 + 1, i1):
        if samples[k].t > grid[-1].t + _TIME_SLACK:
            grid.append(samples[k])
    if abs(times[i1] - t_end) <= _TIME_SLACK:
        if samples[i1].t > grid[-1].t + _TIME_SLACK:
            grid.append(ImuSample(t_end, samples[i1].accel, samples[i1].gyro))
    else:
        grid.append(_interpolate(samples[i1 - 1], samples[i1], t_end))
    if len(grid) < 2:
        raise InsufficientDataError("interval contains fewer than 2 samples")
    return grid


def _integrate(grid, initial_rotation, gravity, gyro_cov=None, accel_cov=None,
               with_jacobians=False):
    g_start = initial_rotation.inverse().apply(np.asarray(gravity, dtype=float))
    r = Rotation.identity()
    v = np.zeros(3)
    p = np.zeros(3)
    jr = np.zeros((3, 3))
    jva = np.zeros((3, 3))
    jvg = np.zeros((3, 3))
    jpa = np.zeros((3, 3))
    jpg = np.zeros((3, 3))
    cov = np.zeros((9, 9)) if gyro_cov is not None else None
    for k in range(len(grid) - 1):
        s0, s1 = grid[k], grid[k + 1]
        dt = s1.t - s0.t
        w_mid = 0.5 * (s0.gyro + s1.gyro)
        step = so3_exp(w_mid * dt)
        r_next = r.compose(step)
        rm = r.matrix()
        rm_next = r_next.matrix()
        a_frame = 0.5 * (rm @ s0.accel + rm_next @ s1.accel) - g_start
        if with_jacobians:
            jr_next = step.matrix().T @ jr - so3_right_jacobian(w_mid * dt) * dt
            da_dbg = -0.5 * (rm @ skew(s0.accel) @ jr +
                             rm_next @ skew(s1.accel) @ jr_next)
            da_dba = -0.5 * (rm + rm_next)
            jpa = jpa + jva * dt + 0.5 * da_dba * dt * dt
            jpg = jpg + jvg * dt + 0.5 * da_dbg * dt * dt
            jva = jva + da_dba * dt
            jvg = jvg + da_dbg * dt
            jr = jr_next
        if cov is not None:
            a_mid = 0.5 * (s0.accel + s1.accel)
            A = np.eye(9)
            A[0:3, 0:3] = step.matrix().T
            A[3:6, 0:3] = -rm @ skew(a_mid) * dt
            A[6:9, 0:3] = -0.5 * rm @ skew(a_mid) * dt * dt
            A[6:9, 3:6] = np.eye(3) * dt
            bg = so3_right_jacobian(w_mid * dt) * dt
            ba_v = rm * dt
            ba_p = 0.5 * rm * dt * dt
            cov = A @ cov @ A.T
            cov[0:3, 0:3] += bg @ gyro_cov @ bg.T
            cov[3:6, 3:6] += ba_v @ accel_cov @ ba_v.T
            cov[6:9, 6:9] += ba_p @ accel_cov @ ba_p.T
        p = p + v * dt + 0.5 * a_frame * dt * dt
        v = v + a_frame * dt
        r = r_next
    duration = grid[-1].t - grid[0].t
    pre = ImuPreintegration(r, v, p, duration, covariance=cov)
    jac = BiasJacobians(jr, jva, jvg, jpa, jpg) if with_jacobians else None
    return pre, jac


def preintegrate(samples: list[ImuSample], initial_rotation: Rotation,
                 gravity: np.ndarray, t_start: float, t_end: float) -> ImuPreintegration:
    """Midpoint preintegration of [t_start, t_end] from a zero state."""
    grid = _integration_grid(samples, t_start, t_end)
    pre, _ = _integrate(grid, initial_rotation, gravity)
    return pre


def preintegrate_with_bias_jacobian(
        samples: list[ImuSample], initial_rotation: Rotation, gravity: np.ndarray,
        t_start: float, t_end: float, calib: ImuCalibration,
) -> tuple[ImuPreintegration, BiasJacobians]:
    """Bias-corrected preintegration plus analytic d{dR,dv,dp}/d{b_a,b_w}."""
    corrected = correct_bias(samples, calib)
    grid = _integration_grid(corrected, t_start, t_end)
    pre, jac = _integrate(grid, initial_rotation, gravity,
                          gyro_cov=calib.gyro_cov, accel_cov=calib.accel_cov,
                          with_jacobians=True)
    return pre, jac


def compose_preintegrations(first: ImuPreintegration,
                            second: ImuPreintegration) -> ImuPreintegration:
    """On-manifold concatenation of two adjacent intervals.

    Valid when `second` was integrated with the initial rotation of its own
    interval start (i.e. initial_rotation_first o delta_rotation_first).
    """
    r01 = first.delta_rotation
    dv = first.delta_velocity + r01.apply(second.delta_velocity)
    dp = (first.delta_position + first.delta_velocity * second.duration
          + r01.apply(second.delta_position))
    return ImuPreintegration(r01.compose(second.delta_rotation), dv, dp,
                             first.duration + second.duration)


def dead_reckon(preintegrations: list[ImuPreintegration], initial_pose: Pose,
                initial_velocity: np.ndarray) -> list[Pose]:
    """Chain preintegrated deltas into a trajectory (IMU-only baseline)."""
    poses = [initial_pose]
    v = np.asarray(initial_velocity, dtype=float).copy()
    for pre in preintegrations:
        prev = poses[-1]
        rm = prev.rotation
        t = prev.translation + v * pre.duration + rm.apply(pre.delta_position)
        v = v + rm.apply(pre.delta_velocity)
        poses.append(Pose(rm.compose(pre.delta_rotation), t))
    return poses
