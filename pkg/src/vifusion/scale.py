"""Closed-form recovery of the metric translation length from flow/depth
observations under a known rotation and unit translation direction.

Geometry convention: ``rotation`` and ``unit_translation`` describe the
point map from the current camera frame into the next one,
X_next = R @ X_cur + s * tau, so that projecting the mapped point lands
on pixel + flow. Per pixel the reprojection error collapses (after
multiplying through by the reprojected depth) into two linear rows
G_row * s - eta_row, with

    alpha = K tau,          beta = d * K R K^-1 [u, v, 1]^T,
    G rows:   alpha3 (u + Fx) - alpha1,   alpha3 (v + Fy) - alpha2,
    eta rows: beta1 - beta3 (u + Fx),     beta2 - beta3 (v + Fy),

so the optimal scale is the scalar least-squares solution
s* = (G.G)^-1 (G.eta). The whole map is differentiable; analytic
gradients of s* with respect to rotation, direction, flows, and depths
are provided for back-propagation through the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (CheiralityError, DegenerateGeometryError,
                     InsufficientDataError, InvalidArgumentError)
from .manifold import Rotation

DEGENERACY_FACTOR = 1e-12
MIN_REPROJECTED_DEPTH = 1e-9
# cheirality-violating observations are dropped, not errored, while at
# least this many valid ones remain
MIN_VALID_FOR_DROP = 10


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidArgumentError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise InvalidArgumentError("principal point must lie inside the image")

    @property
    def k(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @property
    def k_inv(self) -> np.ndarray:
        return np.array([[1.0 / self.fx, 0.0, -self.cx / self.fx],
                         [0.0, 1.0 / self.fy, -self.cy / self.fy],
                         [0.0, 0.0, 1.0]])

    def project(self, points: np.ndarray) -> np.ndarray:
        """Pinhole projection of camera-frame points (..., 3) -> (..., 2)."""
        points = np.asarray(points, dtype=float)
        z = points[..., 2]
        return np.stack([self.fx * points[..., 0] / z + self.cx,
                         self.fy * points[..., 1] / z + self.cy], axis=-1)

    def backproject(self, pixels: np.ndarray, depths: np.ndarray) -> np.ndarray:
        """Pixels (..., 2) and depths (...) -> camera-frame points (..., 3)."""
        pixels = np.asarray(pixels, dtype=float)
        depths = np.asarray(depths, dtype=float)
        x = (pixels[..., 0] - self.cx) / self.fx
        y = (pixels[..., 1] - self.cy) / self.fy
        return np.stack([x, y, np.ones_like(x)], axis=-1) * depths[..., None]


@dataclass(frozen=True)
class ScaleObservation:
    """One pixel's (flow, depth) pair used by the scale solver."""

    pixel: np.ndarray   # (u, v)
    flow: np.ndarray    # (Fx, Fy)
    depth: float

    def __post_init__(self):
        object.__setattr__(self, "pixel", np.asarray(self.pixel, dtype=float).reshape(2))
        object.__setattr__(self, "flow", np.asarray(self.flow, dtype=float).reshape(2))
        if not np.isfinite(self.depth) or self.depth <= 0:
            raise InvalidArgumentError("observation depth must be positive and finite")


@dataclass(frozen=True)
class ScaleResult:
    """Solver output.

    residual_rms is the depth-weighted reprojection RMS at the optimum:
    the RMS of the linear-system rows (geometric pixel error times the
    reprojected depth) divided by the mean observation depth, which keeps
    it on a pixel scale while remaining exactly minimized at s*.
    """

    scale: float
    observation_count: int
    residual_rms: float


@dataclass(frozen=True)
class ScaleGradients:
    """d s* / d inputs, valid for the observations used in the solve.

    ``d_rotation`` is against a right perturbation R <- R Exp(eps).
    """

    d_rotation: np.ndarray      # (3,)
    d_translation: np.ndarray   # (3,)
    d_flow: np.ndarray          # (n, 2)
    d_depth: np.ndarray         # (n,)


def _check_unit(tau: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=float).reshape(3)
    if abs(np.linalg.norm(tau) - 1.0) > 1e-9:
        raise InvalidArgumentError("unit_translation must have norm 1")
    return tau


def reprojection_residual(obs: ScaleObservation, rotation: Rotation,
                          unit_translation: np.ndarray, scale: float,
                          intrinsics: CameraIntrinsics) -> np.ndarray:
    """pi_K(R pi_K^-1(p, d) + s tau) - (p + F), in pixels."""
    tau = _check_unit(unit_translation)
    point = intrinsics.backproject(obs.pixel, np.array(obs.depth))
    mapped = rotation.apply(point) + scale * tau
    if mapped[2] <= MIN_REPROJECTED_DEPTH:
        raise CheiralityError(
            f"reprojected depth {mapped[2]:.3e} at pixel {obs.pixel}")
    return intrinsics.project(mapped) - (obs.pixel + obs.flow)


def _stack_arrays(observations):
    pixels = np.array([o.pixel for o in observations])
    flows = np.array([o.flow for o in observations])
    depths = np.array([o.depth for o in observations])
    return pixels, flows, depths


def _linear_rows(pixels, flows, depths, rotation, tau, intrinsics):
    """Per-observation G/eta rows plus the beta vectors (n, 3)."""
    k = intrinsics.k
    alpha = k @ tau
    homog = np.concatenate([pixels, np.ones((len(pixels), 1))], axis=1)
    beta = depths[:, None] * (k @ rotation.matrix() @ intrinsics.k_inv @ homog.T).T
    target = pixels + flows  # (u + Fx, v + Fy)
    g = np.empty((len(pixels), 2))
    eta = np.empty((len(pixels), 2))
    g[:, 0] = alpha[2] * target[:, 0] - alpha[0]
    g[:, 1] = alpha[2] * target[:, 1] - alpha[1]
    eta[:, 0] = beta[:, 0] - beta[:, 2] * target[:, 0]
    eta[:, 1] = beta[:, 1] - beta[:, 2] * target[:, 1]
    return g, eta, beta, alpha


def build_linear_system(observations, rotation: Rotation, unit_translation,
                        intrinsics: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Stacked design vector G and target eta, two rows per observation."""
    if len(observations) == 0:
        raise InsufficientDataError("no observations")
    tau = _check_unit(unit_translation)
    pixels, flows, depths = _stack_arrays(observations)
    g, eta, _, _ = _linear_rows(pixels, flows, depths, rotation, tau, intrinsics)
    return g.reshape(-1), eta.reshape(-1)


def _solve_active(pixels, flows, depths, rotation, tau, intrinsics):
    """Scalar least squares with iterative cheirality dropping."""
    active = np.ones(len(pixels), dtype=bool)
    for _ in range(5):
        n = int(active.sum())
        if n == 0:
            raise InsufficientDataError("no observations survive cheirality")
        g, eta, beta, alpha = _linear_rows(pixels[active], flows[active],
                                           depths[active], rotation, tau, intrinsics)
        gtg = float(np.dot(g.reshape(-1), g.reshape(-1)))
        if gtg < DEGENERACY_FACTOR * n:
            raise DegenerateGeometryError(
                f"G^T G = {gtg:.3e} below threshold for {n} observations; "
                "scale unobservable (zero parallax)")
        s = float(np.dot(g.reshape(-1), eta.reshape(-1))) / gtg
        z = beta[:, 2] + s * alpha[2]
        bad = z <= MIN_REPROJECTED_DEPTH
        if not bad.any():
            return s, active, g, eta, beta, alpha
        if n - int(bad.sum()) < MIN_VALID_FOR_DROP:
            raise CheiralityError(
                f"{int(bad.sum())} of {n} observations reproject behind the camera")
        idx = np.flatnonzero(active)
        active[idx[bad]] = False
    raise CheiralityError("cheirality dropping did not stabilize")


def solve_scale(observations, rotation: Rotation, unit_translation,
                intrinsics: CameraIntrinsics) -> ScaleResult:
    """Closed-form optimal scale s* = (G.G)^-1 (G.eta)."""
    result, _ = solve_scale_with_gradient(observations, rotation,
                                          unit_translation, intrinsics,
                                          with_gradient=False)
    return result


def solve_scale_with_gradient(observations, rotation: Rotation, unit_translation,
                              intrinsics: CameraIntrinsics, with_gradient=True
                              ) -> tuple[ScaleResult, ScaleGradients | None]:
    if len(observations) == 0:
        raise InsufficientDataError("no observations")
    tau = _check_unit(unit_translation)
    pixels, flows, depths = _stack_arrays(observations)
    if (np.any(pixels[:, 0] < 0) or np.any(pixels[:, 0] > intrinsics.width) or
            np.any(pixels[:, 1] < 0) or np.any(pixels[:, 1] > intrinsics.height)):
        raise InvalidArgumentError("observation pixel outside image bounds")
    s, active, g, eta, beta, alpha = _solve_active(
        pixels, flows, depths, rotation, tau, intrinsics)

    rms = residual_rms_at(g, eta, float(np.mean(depths[active])), s)
    result = ScaleResult(s, int(active.sum()), rms)
    if not with_gradient:
        return result, None

    # With r = eta - s G, the derivative of s = (G.eta)/(G.G) reduces to
    #   ds = (dG.r - s (G.dG) + G.deta) / (G.G)
    gv = g.reshape(-1)
    rv = (eta - s * g).reshape(-1)
    gtg = float(gv @ gv)
    k = intrinsics.k
    target = pixels[active] + flows[active]
    n = len(target)

    # rotation (right tangent): dbeta_i = -d_i K R skew(x_i); dG = 0
    xs = (intrinsics.k_inv @ np.concatenate(
        [pixels[active], np.ones((n, 1))], axis=1).T).T  # (n, 3)
    sk = np.zeros((n, 3, 3))
    sk[:, 0, 1] = -xs[:, 2]
    sk[:, 0, 2] = xs[:, 1]
    sk[:, 1, 0] = xs[:, 2]
    sk[:, 1, 2] = -xs[:, 0]
    sk[:, 2, 0] = -xs[:, 1]
    sk[:, 2, 1] = xs[:, 0]
    dbeta = -depths[active][:, None, None] * np.einsum(
        "ab,nbc->nac", k @ rotation.matrix(), sk)
    deta_rot = np.empty((n, 2, 3))
    deta_rot[:, 0, :] = dbeta[:, 0, :] - target[:, 0:1] * dbeta[:, 2, :]
    deta_rot[:, 1, :] = dbeta[:, 1, :] - target[:, 1:2] * dbeta[:, 2, :]
    d_rot = (gv @ deta_rot.reshape(-1, 3)) / gtg

    # translation direction: dalpha = K; deta = 0
    dg_tau = np.empty((n, 2, 3))
    dg_tau[:, 0, :] = target[:, 0:1] * k[2] - k[0]
    dg_tau[:, 1, :] = target[:, 1:2] * k[2] - k[1]
    dgt = dg_tau.reshape(-1, 3)
    d_tau = (dgt.T @ rv - s * (dgt.T @ gv)) / gtg

    # flow component F affects only its own row: dG_row = alpha3,
    # deta_row = -beta3
    d_flow_active = (alpha[2] * (rv.reshape(-1, 2) - s * gv.reshape(-1, 2))
                     - beta[:, 2:3] * gv.reshape(-1, 2)) / gtg

    # depth: eta rows are linear in d_i; dG = 0
    deta_d = eta / depths[active][:, None]
    d_depth_active = np.sum(gv.reshape(-1, 2) * deta_d, axis=1) / gtg

    d_flow = np.zeros((len(pixels), 2))
    d_depth = np.zeros(len(pixels))
    d_flow[active] = d_flow_active
    d_depth[active] = d_depth_active
    return result, ScaleGradients(d_rot, d_tau, d_flow, d_depth)


def residual_rms_at(g: np.ndarray, eta: np.ndarray, mean_depth: float,
                    scale: float) -> float:
    """Depth-weighted reprojection RMS of the linear system at a scale."""
    rows = (g * scale - eta).reshape(-1)
    return float(np.sqrt(np.mean(rows ** 2)) / mean_depth)


def scale_objective(observations, rotation: Rotation, unit_translation,
                    intrinsics: CameraIntrinsics, scale: float) -> float:
    """|| G s - eta ||^2, the cost whose argmin the closed form returns."""
    g, eta = build_linear_system(observations, rotation, unit_translation,
                                 intrinsics)
    return float(np.sum((g * scale - eta) ** 2))


def select_pixels(gradient_magnitude: np.ndarray, disparity: np.ndarray,
                  grad_threshold: float, min_disparity: float,
                  max_count: int) -> np.ndarray:
    """Pixels passing both the texture and disparity gates.

    Returns an (k, 2) int array of (u, v), sorted by descending gradient
    with row-major tie-breaking, truncated to max_count.
    """
    gradient_magnitude = np.asarray(gradient_magnitude, dtype=float)
    disparity = np.asarray(disparity, dtype=float)
    if gradient_magnitude.shape != disparity.shape:
        raise InvalidArgumentError("gradient and disparity images must share dimensions")
    mask = (gradient_magnitude >= grad_threshold) & (disparity >= min_disparity)
    flat = np.flatnonzero(mask.reshape(-1))
    if flat.size == 0:
        return np.zeros((0, 2), dtype=int)
    grads = gradient_magnitude.reshape(-1)[flat]
    order = np.lexsort((flat, -grads))
    flat = flat[order][:max_count]
    v, u = np.unravel_index(flat, gradient_magnitude.shape)
    return np.stack([u, v], axis=1).astype(int)
