"""Monocular 3-D localization of detected light sources.

Three ways to pin a camera ray to the world:

* GP: intersect the ray with the flat ground plane z = 0.
* PSD-3D: pick the road polyline point closest to the ray in 3-D.
* PSD-2D: same, but measured in the ground projection (elevation ignored).

Per-box estimates come from back-projecting a subsampled pixel grid inside
the box and reducing with a heuristic (max, min, lowest pixel, mean,
median); short series of per-frame estimates can be smoothed further.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .boxes import BBox
from .errors import DataError, NoEstimateError, NoIntersectionError
from .geometry import CameraModel, Ray, RoadPath

METHODS = ("GP", "PSD-3D", "PSD-2D")
HEURISTICS = ("max", "min", "lowest", "mean", "median")
SMOOTH_MODES = ("mean", "median")
SERIES_MAX_LEN = 5


@dataclasses.dataclass(frozen=True)
class DistanceEstimate:
    """A 3-D position in the vehicle frame and its straight-line distance."""

    point: np.ndarray
    distance: float
    method: str

    def __post_init__(self) -> None:
        pt = np.asarray(self.point, dtype=np.float64).reshape(3).copy()
        pt.setflags(write=False)
        object.__setattr__(self, "point", pt)
        if self.distance < 0:
            raise DataError("distance must be non-negative")
        if self.method not in METHODS:
            raise DataError(f"method must be one of {METHODS}")


def gp_intersect(ray: Ray) -> DistanceEstimate:
    """Intersect a ray with the ground plane z = 0.

    Only downward rays that cross the plane in front of the origin count;
    anything else raises NoIntersectionError.
    """
    nz = float(ray.n[2])
    if nz >= 0.0:
        raise NoIntersectionError("ray does not point below the horizon")
    t = -float(ray.a[2]) / nz
    if t <= 0.0:
        raise NoIntersectionError("ground intersection lies behind the camera")
    point = ray.at(t)
    point[2] = 0.0
    return DistanceEstimate(point, float(np.linalg.norm(point)), "GP")


def ray_point_distance(ray: Ray, point) -> float:
    """Orthogonal distance from a point to the ray's carrier line."""
    p = np.asarray(point, dtype=np.float64).reshape(3)
    n = ray.n
    return float(np.linalg.norm(np.cross(p - ray.a, n)) / np.linalg.norm(n))


def psd3d_locate(ray: Ray, road: RoadPath) -> DistanceEstimate:
    """Road point nearest the ray in 3-D; ties go to the earlier (nearer) sample."""
    rel = road.points - ray.a
    dists = np.linalg.norm(np.cross(rel, ray.n), axis=1) / np.linalg.norm(ray.n)
    idx = int(np.argmin(dists))
    p = road.points[idx]
    return DistanceEstimate(p, float(np.linalg.norm(p)), "PSD-3D")


def psd2d_locate(ray: Ray, road: RoadPath) -> DistanceEstimate:
    """Road point nearest the ray after dropping elevation.

    The distance runs in the z = 0 projection but the winning road point is
    returned with its original 3-D coordinates.
    """
    n2 = ray.n.copy()
    n2[2] = 0.0
    norm2 = float(np.linalg.norm(n2))
    if norm2 == 0.0:
        raise DataError("ray is vertical; it has no ground-projection heading")
    rel = road.points - ray.a
    # In-plane cross product reduces to its z component.
    cross_z = rel[:, 0] * n2[1] - rel[:, 1] * n2[0]
    dists = np.abs(cross_z) / norm2
    idx = int(np.argmin(dists))
    p = road.points[idx]
    return DistanceEstimate(p, float(np.linalg.norm(p)), "PSD-2D")


def _grid_estimates(
    xs: np.ndarray, ys: np.ndarray, cam: CameraModel, method: str, road: RoadPath | None
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel estimates for flattened pixel coordinates.

    Returns (points (N, 3), distances (N,)); pixels whose ray yields no
    estimate are dropped.
    """
    origin, dirs = cam.pixel_rays(xs, ys)
    if method == "GP":
        nz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -float(origin[2]) / nz
        valid = (nz < 0.0) & (t > 0.0)
        pts = origin + t[valid, None] * dirs[valid]
        pts[:, 2] = 0.0
        return pts, np.linalg.norm(pts, axis=1)
    if road is None:
        raise DataError(f"method {method} needs a road path")
    rel = road.points - origin
    if method == "PSD-3D":
        picks = np.empty(dirs.shape[0], dtype=np.intp)
        for lo in range(0, dirs.shape[0], 256):
            chunk = dirs[lo : lo + 256]
            d = np.linalg.norm(np.cross(rel[None, :, :], chunk[:, None, :]), axis=2)
            picks[lo : lo + chunk.shape[0]] = d.argmin(axis=1)
        pts = road.points[picks]
        return pts, np.linalg.norm(pts, axis=1)
    if method == "PSD-2D":
        n2 = dirs.copy()
        n2[:, 2] = 0.0
        norms = np.linalg.norm(n2, axis=1)
        valid = norms > 0.0
        cross_z = rel[None, :, 0] * n2[valid, None, 1] - rel[None, :, 1] * n2[valid, None, 0]
        d = np.abs(cross_z) / norms[valid, None]
        pts = road.points[d.argmin(axis=1)]
        return pts, np.linalg.norm(pts, axis=1)
    raise DataError(f"method must be one of {METHODS}")


def aggregate_box(
    box: BBox,
    cam: CameraModel,
    method: str = "GP",
    heuristic: str = "max",
    road: RoadPath | None = None,
    subsample: int = 2,
) -> DistanceEstimate:
    """Reduce the box's per-pixel estimates to a single one.

    The grid takes every ``subsample``-th pixel per axis.  ``lowest`` uses
    the bottom-center pixel alone (the one nearest the ground).  ``mean``
    and ``median`` aggregate distances; the reported point is the sample
    nearest that distance, rescaled to it, so distance == |point| holds.
    """
    if heuristic not in HEURISTICS:
        raise DataError(f"heuristic must be one of {HEURISTICS}")
    if subsample < 1:
        raise DataError("subsample must be >= 1")
    x0, y0, x1, y1 = box.pixel_bounds(cam.width, cam.height)
    if heuristic == "lowest":
        cx = min(max(int(round((x0 + x1) / 2)), x0), x1)
        pts, dists = _grid_estimates(np.array([float(cx)]), np.array([float(y1)]), cam, method, road)
        if dists.size == 0:
            raise NoEstimateError("bottom-center pixel produced no estimate")
        return DistanceEstimate(pts[0], float(dists[0]), method)
    gx, gy = np.meshgrid(np.arange(x0, x1 + 1, subsample), np.arange(y0, y1 + 1, subsample))
    pts, dists = _grid_estimates(gx.ravel().astype(np.float64), gy.ravel().astype(np.float64), cam, method, road)
    if dists.size == 0:
        raise NoEstimateError("no pixel in the box produced an estimate")
    if heuristic == "max":
        i = int(np.argmax(dists))
        return DistanceEstimate(pts[i], float(dists[i]), method)
    if heuristic == "min":
        i = int(np.argmin(dists))
        return DistanceEstimate(pts[i], float(dists[i]), method)
    target = float(np.mean(dists)) if heuristic == "mean" else float(np.median(dists))
    i = int(np.argmin(np.abs(dists - target)))
    point = pts[i]
    if dists[i] > 0:
        point = point * (target / dists[i])
    return DistanceEstimate(point, float(np.linalg.norm(point)), method)


def smooth_series(estimates, mode: str = "mean") -> float:
    """Mean or median over up to five consecutive per-frame distances."""
    vals = [float(v) for v in estimates]
    if not vals:
        raise DataError("cannot smooth an empty series")
    if len(vals) > SERIES_MAX_LEN:
        raise DataError(f"series smoothing covers at most {SERIES_MAX_LEN} estimates")
    if mode == "mean":
        return float(np.mean(vals))
    if mode == "median":
        return float(np.median(vals))
    raise DataError(f"mode must be one of {SMOOTH_MODES}")
