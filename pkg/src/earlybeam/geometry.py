"""Vehicle-frame geometry: pinhole camera, rays, and the road polyline.

Vehicle frame convention (used by every 3-D quantity in this package):

    x forward, y left, z up; meters; the ground is the plane z = 0.

A camera with identity rotation and zero translation sits at the vehicle
origin looking straight down the +x axis.  The fixed axis permutation
between image coordinates (x right, y down, optical axis forward) and the
vehicle frame is part of the model, so extrinsic rotations stay small and
readable (a few degrees of mounting pitch/yaw, typically).
"""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np

from .errors import DataError

GROUND_PLANE_Z = 0.0

# Columns: camera x (image right), y (image down), z (optical axis) expressed
# in vehicle axes (forward, left, up).
_CAMERA_TO_VEHICLE = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)

_ROTATION_TOL = 1e-9


def _as_vector3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise DataError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True)
class Ray:
    """Parametric line a + t*n in the vehicle frame."""

    a: np.ndarray
    n: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _as_vector3(self.a, "ray origin"))
        n = _as_vector3(self.n, "ray direction")
        if float(np.linalg.norm(n)) == 0.0:
            raise DataError("ray direction must be nonzero")
        object.__setattr__(self, "n", n)

    def at(self, t: float) -> np.ndarray:
        return self.a + t * self.n


def rotation_from_euler(yaw_deg: float = 0.0, pitch_deg: float = 0.0, roll_deg: float = 0.0) -> np.ndarray:
    """Rotation matrix for yaw about +z, pitch about +y, roll about +x (applied in that order)."""
    cy, sy = math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))
    cp, sp = math.cos(math.radians(pitch_deg)), math.sin(math.radians(pitch_deg))
    cr, sr = math.cos(math.radians(roll_deg)), math.sin(math.radians(roll_deg))
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


@dataclasses.dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the camera pose in the vehicle frame.

    ``rotation`` turns the canonical forward-looking mount into the actual
    one; ``translation`` is the camera center in meters.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray = dataclasses.field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(3))
    width: int = 1280
    height: int = 960

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise DataError("focal lengths must be positive")
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise DataError(f"rotation must be 3x3, got {rot.shape}")
        if float(np.linalg.norm(rot.T @ rot - np.eye(3))) >= _ROTATION_TOL:
            raise DataError("rotation is not orthonormal")
        rot = rot.copy()
        rot.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", _as_vector3(self.translation, "translation"))

    def pixel_to_ray(self, x: float, y: float) -> Ray:
        """Back-project a pixel to a unit-direction ray in the vehicle frame."""
        d_cam = np.array([(x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0])
        d = self.rotation @ (_CAMERA_TO_VEHICLE @ d_cam)
        return Ray(self.translation, d / np.linalg.norm(d))

    def pixel_rays(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized back-projection: returns (origin, unit directions (N, 3))."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        d_cam = np.stack(
            [(xs - self.cx) / self.fx, (ys - self.cy) / self.fy, np.ones_like(xs)], axis=-1
        )
        d = d_cam @ (self.rotation @ _CAMERA_TO_VEHICLE).T
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        return self.translation, d

    def project(self, point) -> tuple[float, float]:
        """Project a vehicle-frame point to pixel coordinates.

        Raises DataError for points at or behind the camera plane.
        """
        p = np.asarray(point, dtype=np.float64).reshape(3)
        c = _CAMERA_TO_VEHICLE.T @ (self.rotation.T @ (p - self.translation))
        if c[2] <= 0.0:
            raise DataError("point is behind the camera")
        return float(self.fx * c[0] / c[2] + self.cx), float(self.fy * c[1] / c[2] + self.cy)


@dataclasses.dataclass(frozen=True)
class RoadPath:
    """Ordered 3-D polyline of the road ahead, sampled once per meter."""

    points: np.ndarray
    SPACING_M = 1.0
    SPACING_TOL_M = 0.01

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise DataError(f"road path must be a non-empty (N, 3) array, got {pts.shape}")
        if not np.isfinite(pts).all():
            raise DataError("road path contains non-finite points")
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if gaps.size and (np.abs(gaps - self.SPACING_M) > self.SPACING_TOL_M).any():
            raise DataError("road points must be spaced 1 m apart (±1 cm)")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def default_camera() -> CameraModel:
    """Forward-looking 1280x960 camera mounted 1.5 m above the road."""
    return CameraModel(fx=1000.0, fy=1000.0, cx=639.5, cy=479.5, translation=[0.0, 0.0, 1.5])


def scaled_camera(width: int, height: int) -> CameraModel:
    """The default camera resampled to another sensor resolution.

    Focal lengths scale with each axis so the field of view is unchanged.
    """
    if width < 1 or height < 1:
        raise DataError("image dimensions must be positive")
    return CameraModel(
        fx=1000.0 * width / 1280.0,
        fy=1000.0 * height / 960.0,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        translation=[0.0, 0.0, 1.5],
        width=width,
        height=height,
    )


def load_calibration(path: str | Path) -> CameraModel:
    """Read a plain-text ``key = value`` calibration file.

    Required keys: focal_x_px, focal_y_px, principal_x_px, principal_y_px.
    Optional: camera_x_m, camera_y_m, camera_z_m (default 0), yaw_deg,
    pitch_deg, roll_deg (default 0), image_width_px, image_height_px
    (default 1280x960).  ``#`` starts a comment.
    """
    values: dict[str, float] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        try:
            values[key.strip()] = float(raw)
        except ValueError:
            raise DataError(f"{path}:{lineno}: {raw.strip()!r} is not a number") from None
    missing = [k for k in ("focal_x_px", "focal_y_px", "principal_x_px", "principal_y_px") if k not in values]
    if missing:
        raise DataError(f"{path}: missing calibration keys: {', '.join(missing)}")
    return CameraModel(
        fx=values["focal_x_px"],
        fy=values["focal_y_px"],
        cx=values["principal_x_px"],
        cy=values["principal_y_px"],
        rotation=rotation_from_euler(
            values.get("yaw_deg", 0.0), values.get("pitch_deg", 0.0), values.get("roll_deg", 0.0)
        ),
        translation=[values.get("camera_x_m", 0.0), values.get("camera_y_m", 0.0), values.get("camera_z_m", 0.0)],
        width=int(values.get("image_width_px", 1280)),
        height=int(values.get("image_height_px", 960)),
    )


def euler_from_rotation(rot: np.ndarray) -> tuple[float, float, float]:
    """(yaw, pitch, roll) degrees recovering ``rotation_from_euler``'s input.

    Pitch is kept in (-90, 90); forward-looking mounts never reach the
    gimbal-lock poles.
    """
    pitch = math.atan2(-rot[2, 0], math.hypot(rot[2, 1], rot[2, 2]))
    yaw = math.atan2(rot[1, 0], rot[0, 0])
    roll = math.atan2(rot[2, 1], rot[2, 2])
    return math.degrees(yaw), math.degrees(pitch), math.degrees(roll)


def save_calibration(path: str | Path, cam: CameraModel) -> None:
    """Write a calibration file; the pose rotation is stored as euler angles."""
    yaw_deg, pitch_deg, roll_deg = euler_from_rotation(cam.rotation)
    tx, ty, tz = (float(v) for v in cam.translation)
    Path(path).write_text(
        "# pinhole calibration, vehicle frame (x forward, y left, z up)\n"
        f"focal_x_px = {float(cam.fx)!r}\nfocal_y_px = {float(cam.fy)!r}\n"
        f"principal_x_px = {float(cam.cx)!r}\nprincipal_y_px = {float(cam.cy)!r}\n"
        f"camera_x_m = {tx!r}\ncamera_y_m = {ty!r}\ncamera_z_m = {tz!r}\n"
        f"yaw_deg = {float(yaw_deg)!r}\npitch_deg = {float(pitch_deg)!r}\nroll_deg = {float(roll_deg)!r}\n"
        f"image_width_px = {cam.width}\nimage_height_px = {cam.height}\n"
    )


def load_road_path(path: str | Path) -> RoadPath:
    """Read a road polyline: one ``x y z`` triple (meters) per line."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected three numbers per line")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed coordinate") from None
    if not rows:
        raise DataError(f"{path}: empty road file")
    return RoadPath(np.array(rows))


def save_road_path(path: str | Path, road: RoadPath) -> None:
    Path(path).write_text(
        "".join(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n" for p in road.points)
    )
