"""Quaternion-backed SO(3)/SE(3) arithmetic.

Rotations are unit quaternions (w, x, y, z), renormalized on construction
and canonicalized to w >= 0 so the double cover never leaks out. Twists
stack the translation part first: xi = (rho, phi) with rho in meters and
phi in radians. Exp/Log use the full coupled formulas (V matrix) so that
solver updates are exact group retractions; all small-angle branches
switch below 1e-8 with two-term Taylor series to stay C1 at the identity.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

SMALL_ANGLE = 1e-8


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


class Rotation:
    """Unit quaternion in canonical (w >= 0) form. Immutable."""

    __slots__ = ("q",)

    def __init__(self, w: float, x: float, y: float, z: float):
        q = np.array([w, x, y, z], dtype=float)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n < 1e-300:
            raise InvalidArgumentError("quaternion must be finite and nonzero")
        q /= n
        if q[0] < 0.0:
            q = -q
        q.flags.writeable = False
        object.__setattr__(self, "q", q)

    def __setattr__(self, name, value):
        raise AttributeError("Rotation is immutable")

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_quat(q) -> "Rotation":
        w, x, y, z = np.asarray(q, dtype=float)
        return Rotation(w, x, y, z)

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Rotation":
        """Rotation matrix -> quaternion (Shepperd's branch selection)."""
        m = np.asarray(m, dtype=float)
        t = np.trace(m)
        if t > 0.0:
            r = np.sqrt(1.0 + t)
            s = 0.5 / r
            return Rotation(0.5 * r, (m[2, 1] - m[1, 2]) * s,
                            (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s)
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = np.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
        s = 0.5 / r
        xyz = np.empty(3)
        xyz[i] = 0.5 * r
        xyz[j] = (m[j, i] + m[i, j]) * s
        xyz[k] = (m[k, i] + m[i, k]) * s
        return Rotation(
            (m[k, j] - m[j, k]) * s, xyz[0], xyz[1], xyz[2])

    def matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def compose(self, other: "Rotation") -> "Rotation":
        w1, x1, y1, z1 = self.q
        w2, x2, y2, z2 = other.q
        return Rotation(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def inverse(self) -> "Rotation":
        w, x, y, z = self.q
        return Rotation(w, -x, -y, -z)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Rotate a 3-vector (or batch of row vectors)."""
        v = np.asarray(v, dtype=float)
        w = self.q[0]
        xyz = self.q[1:]
        t = 2.0 * np.cross(xyz, v)
        return v + w * t + np.cross(xyz, t)

    def allclose(self, other: "Rotation", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.q, other.q, atol=atol))

    def __repr__(self):
        return f"Rotation(w={self.q[0]:.9g}, x={self.q[1]:.9g}, y={self.q[2]:.9g}, z={self.q[3]:.9g})"


class Pose:
    """Rigid transform: rotation plus translation, camera-to-world sense.

    Acting on a point: world = R @ p + t. Immutable.
    """

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation: Rotation, translation):
        t = np.asarray(translation, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise InvalidArgumentError("translation must be finite")
        t.flags.writeable = False
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", t)

    def __setattr__(self, name, value):
        raise AttributeError("Pose is immutable")

    @staticmethod
    def identity() -> "Pose":
        return Pose(Rotation.identity(), np.zeros(3))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.matrix()
        m[:3, 3] = self.translation
        return m

    def apply(self, p: np.ndarray) -> np.ndarray:
        return self.rotation.apply(p) + self.translation

    def __repr__(self):
        t = self.translation
        return f"Pose({self.rotation!r}, t=[{t[0]:.9g}, {t[1]:.9g}, {t[2]:.9g}])"


def so3_exp(omega: np.ndarray) -> Rotation:
    """Exponential map so(3) -> SO(3)."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise InvalidArgumentError("so3_exp requires finite input")
    theta = np.linalg.norm(omega)
    if theta < SMALL_ANGLE:
        # cos(t/2) ~ 1 - t^2/8, sin(t/2)/t ~ 1/2 - t^2/48
        w = 1.0 - theta * theta / 8.0
        f = 0.5 - theta * theta / 48.0
    else:
        w = np.cos(0.5 * theta)
        f = np.sin(0.5 * theta) / theta
    return Rotation(w, *(f * omega))


def so3_log(r: Rotation) -> np.ndarray:
    """Logarithm map SO(3) -> so(3); result norm <= pi."""
    w = r.q[0]
    xyz = r.q[1:]
    n = np.linalg.norm(xyz)
    if n < SMALL_ANGLE:
        # 2*atan2(n, w)/n ~ (2/w)(1 - n^2/(3 w^2)) near the identity
        f = (2.0 / w) * (1.0 - n * n / (3.0 * w * w))
    else:
        f = 2.0 * np.arctan2(n, w) / n
    return f * xyz


def _ab_coefficients(theta: float) -> tuple[float, float]:
    """A = (1-cos t)/t^2 and B = (t - sin t)/t^3 with Taylor branches."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    t2 = theta * theta
    return (1.0 - np.cos(theta)) / t2, (theta - np.sin(theta)) / (t2 * theta)


def _c_coefficient(theta: float) -> float:
    """C(t) = 1/t^2 - (1+cos t)/(2 t sin t), the Omega^2 coefficient of
    the inverse right Jacobian; well defined on [0, 2pi)."""
    if theta < SMALL_ANGLE:
        return 1.0 / 12.0 + theta * theta / 720.0
    if theta < 2.6:
        return 1.0 / (theta * theta) - (1.0 + np.cos(theta)) / (
            2.0 * theta * np.sin(theta))
    # equivalent form, stable near pi
    return (1.0 - theta * np.sin(theta) / (2.0 * (1.0 - np.cos(theta)))) / (
        theta * theta)


def so3_left_jacobian(omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    a, b = _ab_coefficients(theta)
    om = skew(omega)
    return np.eye(3) + a * om + b * (om @ om)


def so3_right_jacobian(omega: np.ndarray) -> np.ndarray:
    """J_r(w) such that Log(Exp(w)^-1 Exp(w + d)) ~ J_r(w) d for small d."""
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise InvalidArgumentError("so3_right_jacobian requires finite input")
    theta = np.linalg.norm(omega)
    a, b = _ab_coefficients(theta)
    om = skew(omega)
    return np.eye(3) - a * om + b * (om @ om)


def so3_right_jacobian_inv(omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    om = skew(omega)
    return np.eye(3) + 0.5 * om + _c_coefficient(theta) * (om @ om)


def _so3_V(phi: np.ndarray) -> np.ndarray:
    """Translation coupling matrix of the SE(3) exponential."""
    return so3_left_jacobian(phi)


def se3_exp(xi: np.ndarray) -> Pose:
    """Exponential map se(3) -> SE(3); xi = (rho, phi)."""
    xi = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(xi)):
        raise InvalidArgumentError("se3_exp requires finite input")
    rho, phi = xi[:3], xi[3:]
    return Pose(so3_exp(phi), _so3_V(phi) @ rho)


def se3_log(p: Pose) -> np.ndarray:
    """Logarithm map SE(3) -> se(3); returns (rho, phi)."""
    phi = so3_log(p.rotation)
    rho = np.linalg.solve(_so3_V(phi), p.translation)
    return np.concatenate([rho, phi])


def se3_compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.rotation.compose(b.rotation),
                a.rotation.apply(b.translation) + a.translation)


def se3_inverse(a: Pose) -> Pose:
    rinv = a.rotation.inverse()
    return Pose(rinv, -rinv.apply(a.translation))


def se3_adjoint(p: Pose) -> np.ndarray:
    """6x6 adjoint: Exp(Ad_P xi) = P Exp(xi) P^-1, tangent order (rho, phi)."""
    r = p.rotation.matrix()
    ad = np.zeros((6, 6))
    ad[:3, :3] = r
    ad[:3, 3:] = skew(p.translation) @ r
    ad[3:, 3:] = r
    return ad


def _se3_Q(rho: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Coupling block of the SE(3) left Jacobian (Barfoot's Q matrix)."""
    theta = np.linalg.norm(phi)
    ph = skew(phi)
    rh = skew(rho)
    ph2 = ph @ ph
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        c1 = 1.0 / 6.0 - t2 / 120.0
        c2 = 1.0 / 24.0 - t2 / 720.0
        c3 = 1.0 / 120.0 - t2 / 2520.0
    else:
        t2 = theta * theta
        t4 = t2 * t2
        s, c = np.sin(theta), np.cos(theta)
        c1 = (theta - s) / (t2 * theta)
        c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t4)
        c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t4 * theta)
    return (0.5 * rh
            + c1 * (ph @ rh + rh @ ph + ph @ rh @ ph)
            + c2 * (ph2 @ rh + rh @ ph2 - 3.0 * ph @ rh @ ph)
            + c3 * (ph @ rh @ ph2 + ph2 @ rh @ ph))


def se3_left_jacobian(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    rho, phi = xi[:3], xi[3:]
    jl = so3_left_jacobian(phi)
    out = np.zeros((6, 6))
    out[:3, :3] = jl
    out[:3, 3:] = _se3_Q(rho, phi)
    out[3:, 3:] = jl
    return out


def se3_right_jacobian(xi: np.ndarray) -> np.ndarray:
    return se3_left_jacobian(-np.asarray(xi, dtype=float))


def se3_right_jacobian_inv(xi: np.ndarray) -> np.ndarray:
    return np.linalg.inv(se3_right_jacobian(xi))
