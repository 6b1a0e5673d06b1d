"""Pinhole camera math and 3D plane estimation.

World-frame conventions: cameras map world points to camera coordinates via
``x_cam = R @ x_world + t`` with z pointing into the scene.  Planes are kept
in Hesse-like canonical form ``n . x = offset`` with a unit normal whose z
component is non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ORTHO_TOL = 1e-9
_UNIT_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid geometric input (bad camera, degenerate points, ...)."""


class NotVisibleError(GeometryError):
    """Point lies behind the camera plane."""


class NoIntersectionError(GeometryError):
    """Pixel ray misses the plane (parallel or intersection behind camera)."""


class PlaneFitError(GeometryError):
    """Plane estimation failed (degenerate points or no RANSAC consensus)."""


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: intrinsics in pixels, world-to-camera pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError("focal lengths must be positive")
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ORTHO_TOL:
            raise GeometryError("rotation matrix is not orthonormal")
        rot.flags.writeable = False
        trans.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def axis(self) -> np.ndarray:
        """Viewing direction (camera +z) in world coordinates."""
        return self.rotation[2].copy()


@dataclass(frozen=True)
class Plane3D:
    """Plane ``normal . x = offset`` with unit normal and n_z >= 0."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > _UNIT_TOL:
            raise GeometryError("plane normal must be a unit vector")
        if n[2] < -_UNIT_TOL:
            raise GeometryError("plane normal must satisfy n_z >= 0")
        n.flags.writeable = False
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @staticmethod
    def from_normal_offset(normal, offset) -> "Plane3D":
        """Normalize and canonicalize an arbitrary (normal, offset) pair."""
        n = np.asarray(normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if norm == 0 or not np.isfinite(norm):
            raise GeometryError("zero or non-finite plane normal")
        n = n / norm
        off = float(offset) / norm
        # Canonical orientation: n_z > 0; ties at n_z == 0 resolved on (x, y)
        # so every plane has a unique representation.
        if n[2] < 0 or (n[2] == 0 and (n[0] < 0 or (n[0] == 0 and n[1] < 0))):
            n = -n
            off = -off
        return Plane3D(n, off)

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.normal - self.offset


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 500
    inlier_threshold: float = 0.01
    min_inlier_fraction: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise GeometryError("max_iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise GeometryError("inlier_threshold must be positive")


def default_ransac_config(min_z: float, max_z: float, rng_seed: int = 0) -> RansacConfig:
    """Conventional defaults with the inlier threshold tied to the depth range."""
    return RansacConfig(
        max_iterations=500,
        inlier_threshold=0.01 * (max_z - min_z),
        min_inlier_fraction=0.5,
        rng_seed=rng_seed,
    )


def unproject(pixel, depth: float, camera: Camera) -> np.ndarray:
    """Lift a pixel at a given camera-frame depth to a world point."""
    if not depth > 0:
        raise GeometryError("depth must be positive")
    u, v = float(pixel[0]), float(pixel[1])
    ray_cam = np.array(
        [(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0]
    )
    point_cam = ray_cam * float(depth)
    return camera.rotation.T @ (point_cam - camera.translation)


def project(point, camera: Camera):
    """Project a world point to (pixel, camera-frame depth).

    Raises NotVisibleError if the point is not in front of the camera.
    """
    p_cam = camera.rotation @ np.asarray(point, dtype=np.float64) + camera.translation
    z = p_cam[2]
    if not z > 0:
        raise NotVisibleError("point is behind the camera")
    u = camera.fx * p_cam[0] / z + camera.cx
    v = camera.fy * p_cam[1] / z + camera.cy
    return (u, v), float(z)


def project_points(points: np.ndarray, camera: Camera):
    """Vectorized projection: returns (uv (N,2), depth (N,), in_front mask)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    p_cam = pts @ camera.rotation.T + camera.translation
    z = p_cam[:, 2]
    in_front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * p_cam[:, 0] / z + camera.cx
        v = camera.fy * p_cam[:, 1] / z + camera.cy
    return np.stack([u, v], axis=1), z, in_front


def pixel_rays(camera: Camera, width: int, height: int) -> np.ndarray:
    """World-frame ray directions for every pixel, scaled so that the
    camera-frame depth of ``center + s * ray`` equals ``s``.

    Returns an (H*W, 3) array in raster order.
    """
    u = np.arange(width, dtype=np.float64)
    v = np.arange(height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack(
        [
            (uu - camera.cx) / camera.fx,
            (vv - camera.cy) / camera.fy,
            np.ones_like(uu),
        ],
        axis=-1,
    ).reshape(-1, 3)
    return dirs_cam @ camera.rotation


def unproject_pixels(flat_idx: np.ndarray, depths: np.ndarray, rays: np.ndarray,
                     center: np.ndarray) -> np.ndarray:
    """World points for raster-flattened pixel indices at measured depths."""
    d = np.asarray(depths, dtype=np.float64).reshape(-1, 1)
    return center + rays[flat_idx] * d


def fit_plane_lsq(points) -> Plane3D:
    """Total-least-squares plane through >= 3 non-collinear points.

    Minimizes the sum of squared orthogonal distances (smallest eigenvector
    of the centered scatter matrix).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] < 3:
        raise PlaneFitError("plane fit needs at least 3 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    scatter = centered.T @ centered
    return _plane_from_scatter(scatter, centroid, float(pts.shape[0]))


def fit_plane_from_moments(psum: np.ndarray, pouter: np.ndarray, count: float) -> Plane3D:
    """TLS plane from accumulated first/second moments of the point set."""
    if count < 3:
        raise PlaneFitError("plane fit needs at least 3 points")
    centroid = psum / count
    scatter = pouter - np.outer(psum, psum) / count
    return _plane_from_scatter(scatter, centroid, count)


def _plane_from_scatter(scatter: np.ndarray, centroid: np.ndarray, count: float) -> Plane3D:
    eigvals, eigvecs = np.linalg.eigh(scatter)
    # Degenerate when the points do not span a 2D subspace: the middle
    # eigenvalue collapses relative to the spread.
    scale = max(eigvals[2], 0.0)
    if eigvals[1] <= 1e-12 * scale + 1e-24:
        raise PlaneFitError("degenerate point set (collinear or coincident)")
    normal = eigvecs[:, 0]
    return Plane3D.from_normal_offset(normal, float(normal @ centroid))


def fit_plane_ransac(points, cfg: RansacConfig):
    """RANSAC plane fit: returns (plane, inlier_mask).

    Deterministic for a fixed ``cfg.rng_seed``.  The best-consensus candidate
    is refined with a least-squares fit over its inliers; the returned mask is
    evaluated against the refined plane.  Raises PlaneFitError when no
    candidate reaches ``min_inlier_fraction``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = pts.shape[0]
    if n < 3:
        raise PlaneFitError("plane fit needs at least 3 points")
    rng = np.random.default_rng(cfg.rng_seed)
    triples = rng.integers(0, n, size=(cfg.max_iterations, 3))
    distinct = (
        (triples[:, 0] != triples[:, 1])
        & (triples[:, 0] != triples[:, 2])
        & (triples[:, 1] != triples[:, 2])
    )
    p0 = pts[triples[:, 0]]
    normals = np.cross(pts[triples[:, 1]] - p0, pts[triples[:, 2]] - p0)
    norms = np.linalg.norm(normals, axis=1)
    valid = distinct & (norms > 1e-12)

    best_count = -1
    best_row = -1
    # Small chunks first so that clean (noise-free) regions exit after the
    # first full-consensus candidate instead of paying for a whole batch.
    start = 0
    chunk = 1
    while start < cfg.max_iterations:
        stop = min(start + chunk, cfg.max_iterations)
        rows = np.nonzero(valid[start:stop])[0] + start
        start = stop
        chunk = min(2 * chunk, 32)
        if rows.size == 0:
            continue
        nrm = normals[rows] / norms[rows, None]
        offs = np.einsum("ij,ij->i", nrm, p0[rows])
        dist = np.abs(pts @ nrm.T - offs)
        counts = (dist <= cfg.inlier_threshold).sum(axis=0)
        top = int(np.argmax(counts))
        if counts[top] > best_count:
            best_count = int(counts[top])
            best_row = int(rows[top])
        if best_count == n:
            break

    if best_row < 0 or best_count < cfg.min_inlier_fraction * n:
        raise PlaneFitError("no RANSAC consensus above min_inlier_fraction")

    cand = Plane3D.from_normal_offset(normals[best_row], normals[best_row] @ p0[best_row])
    mask = np.abs(cand.signed_distance(pts)) <= cfg.inlier_threshold
    try:
        refined = fit_plane_lsq(pts[mask])
    except PlaneFitError:
        refined = cand
    mask = np.abs(refined.signed_distance(pts)) <= cfg.inlier_threshold
    return refined, mask


def plane_depth_at(plane: Plane3D, pixel, camera: Camera) -> float:
    """Camera-frame depth of the ray/plane intersection at a pixel."""
    u, v = float(pixel[0]), float(pixel[1])
    ray_cam = np.array(
        [(u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0]
    )
    ray_w = camera.rotation.T @ ray_cam
    denom = plane.normal @ ray_w
    if abs(denom) < 1e-12:
        raise NoIntersectionError("ray is parallel to the plane")
    s = (plane.offset - plane.normal @ camera.center) / denom
    if not s > 0:
        raise NoIntersectionError("intersection behind the camera")
    return float(s)


def plane_depths(plane: Plane3D, rays: np.ndarray, center: np.ndarray,
                 missing: float) -> np.ndarray:
    """Vectorized ray/plane depths; misses (parallel/behind) become ``missing``."""
    denom = rays @ plane.normal
    num = plane.offset - plane.normal @ center
    with np.errstate(divide="ignore", invalid="ignore"):
        s = num / denom
    s = np.where((np.abs(denom) < 1e-12) | ~(s > 0), missing, s)
    return s


def plane_to_spherical(plane: Plane3D, camera: Camera | None = None):
    """Spherical form of a canonical plane: (theta, phi, dist).

    theta in [0, pi/2] is the polar angle of the normal, phi in [0, 2*pi) its
    full-quadrant azimuth (defined as 0 when theta == 0), and dist the signed
    distance from the camera center (world origin when no camera is given) to
    the plane along the normal.
    """
    n = plane.normal
    theta = float(np.arccos(np.clip(n[2], -1.0, 1.0)))
    if n[0] == 0.0 and n[1] == 0.0:
        phi = 0.0
    else:
        phi = float(np.arctan2(n[1], n[0])) % (2.0 * np.pi)
    center = np.zeros(3) if camera is None else camera.center
    dist = float(plane.offset - n @ center)
    return theta, phi, dist


def spherical_to_plane(theta: float, phi: float, dist: float,
                       camera: Camera | None = None) -> Plane3D:
    """Inverse of plane_to_spherical."""
    n = np.array(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
    )
    center = np.zeros(3) if camera is None else camera.center
    norm = np.linalg.norm(n)
    n = n / norm
    return Plane3D.from_normal_offset(n, float(n @ center) + float(dist))
