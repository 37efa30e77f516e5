"""Minimum-distance level-set fields on a fixed Cartesian grid.

The field is unsigned: zero at every grid point on or inside the shape
boundary, and the minimum Euclidean distance to the discretized
boundary everywhere else.  Distances are measured to the surface point
cloud, so the error of the exterior values is bounded by the surface
sample spacing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError, DimensionError, ValidationError
from .geometry import WingSurface

MAGIC = b"LSF1"
HEADER_SIZE = 32

DEFAULT_DIMS = (48, 16, 32)
DEFAULT_BOUNDS = ((-1.0, 3.0), (0.0, 2.0), (-0.5, 0.5))


@dataclass(frozen=True)
class GridSpec:
    """Cartesian grid: dims (m, n, p) over closed axis-aligned bounds."""

    dims: tuple[int, int, int] = DEFAULT_DIMS
    bounds: tuple[tuple[float, float], ...] = DEFAULT_BOUNDS

    def __post_init__(self):
        if len(self.dims) != 3 or any(d < 2 for d in self.dims):
            raise ValidationError("grid dims must be three counts >= 2")
        if len(self.bounds) != 3 or any(lo >= hi for lo, hi in self.bounds):
            raise ValidationError("grid bounds must be ordered pairs")

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            np.linspace(lo, hi, d)
            for d, (lo, hi) in zip(self.dims, self.bounds)
        )

    def points(self) -> np.ndarray:
        """All grid points, shape (m*n*p, 3), in row-major cell order."""
        xs, ys, zs = self.axes()
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


@dataclass(frozen=True)
class LevelSetField:
    phi: np.ndarray
    spec: GridSpec

    def __post_init__(self):
        if self.phi.shape != tuple(self.spec.dims):
            raise DimensionError(
                f"field shape {self.phi.shape} does not match grid {self.spec.dims}"
            )


def surface_point_cloud(wing: WingSurface) -> np.ndarray:
    """Boundary samples from the lofted surface, shape (n_span *
    n_chord * 2, 3).  Independent of any grid resolution."""
    return wing.points.reshape(-1, 3)


def _polygon_mask(poly: np.ndarray, px: np.ndarray, pz: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon for a closed (x, z) contour."""
    inside = np.zeros(px.shape, dtype=bool)
    x0, z0 = poly[-1]
    for x1, z1 in poly:
        if z0 != z1:
            crosses = (z0 > pz) != (z1 > pz)
            x_at = x0 + (pz - z0) * (x1 - x0) / (z1 - z0)
            inside ^= crosses & (px < x_at)
        x0, z0 = x1, z1
    return inside


def inside_test(point, wing: WingSurface) -> bool:
    """True iff the point lies within the planform and between the
    lower and upper surface heights of its spanwise section."""
    x, y, z = (float(v) for v in np.asarray(point, dtype=float))
    y_lo = float(wing.station_y[0])
    y_hi = float(wing.station_y[-1])
    if y < y_lo or y > y_hi:
        return False
    poly = wing.section_polygon(y)
    return bool(
        _polygon_mask(poly, np.array([x]), np.array([z]))[0]
    )


def interior_mask(wing: WingSurface, spec: GridSpec) -> np.ndarray:
    """(m, n, p) boolean mask of grid points on or inside the wing,
    evaluated one spanwise grid plane at a time."""
    xs, ys, zs = spec.axes()
    m, n, p = spec.dims
    mask = np.zeros((m, n, p), dtype=bool)
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    y_lo = float(wing.station_y[0])
    y_hi = float(wing.station_y[-1])
    for j, y in enumerate(ys):
        if y < y_lo or y > y_hi:
            continue
        poly = wing.section_polygon(float(y))
        mask[:, j, :] = _polygon_mask(poly, gx, gz)
    return mask


def _min_distances(points: np.ndarray, cloud: np.ndarray, method: str) -> np.ndarray:
    if method == "kdtree":
        dists, _ = cKDTree(cloud).query(points, k=1)
        return np.asarray(dists, dtype=float)
    if method == "bruteforce":
        # chunked full scan; identical values, no spatial index
        out = np.empty(len(points))
        step = 4096
        for i in range(0, len(points), step):
            chunk = points[i: i + step]
            d2 = (
                (chunk[:, None, :] - cloud[None, :, :]) ** 2
            ).sum(axis=2)
            out[i: i + step] = np.sqrt(d2.min(axis=1))
        return out
    raise ValidationError(f"unknown distance method {method!r}")


def distance_field_from_cloud(
    cloud: np.ndarray,
    inside: np.ndarray,
    spec: GridSpec,
    method: str = "kdtree",
) -> LevelSetField:
    """Field from an explicit boundary cloud and an (m, n, p) interior
    mask.  Grid points flagged inside get exactly zero."""
    cloud = np.asarray(cloud, dtype=float)
    if cloud.ndim != 2 or cloud.shape[1] != 3:
        raise DimensionError("cloud must have shape (n_points, 3)")
    if len(cloud) == 0:
        raise ValidationError("surface point cloud is empty")
    phi = np.zeros(spec.dims, dtype=float)
    outside = ~inside
    pts = spec.points()[outside.ravel()]
    if len(pts):
        phi[outside] = _min_distances(pts, cloud, method)
    return LevelSetField(phi=phi, spec=spec)


def distance_field(
    wing: WingSurface, spec: GridSpec | None = None, method: str = "kdtree"
) -> LevelSetField:
    """Level-set tensor of a lofted wing on the given grid."""
    if spec is None:
        spec = GridSpec()
    cloud = surface_point_cloud(wing)
    return distance_field_from_cloud(cloud, interior_mask(wing, spec), spec, method)


# ---------------------------------------------------------------------------
# Binary tensor file: 32-byte header (magic, m, n, p as u64 LE) then
# m*n*p float64 LE in row-major order, index = ((ix*n) + iy)*p + iz.

def save_field(field: LevelSetField, path) -> None:
    m, n, p = field.spec.dims
    header = MAGIC + struct.pack("<QQQ", m, n, p)
    header += b"\x00" * (HEADER_SIZE - len(header))
    data = np.ascontiguousarray(field.phi, dtype="<f8")
    with open(path, "wb") as f:
        f.write(header)
        f.write(data.tobytes())


def load_field(path, spec: GridSpec | None = None) -> LevelSetField:
    """Read a tensor file; bounds come from ``spec`` (defaults used
    when omitted) since the file stores only dims."""
    with open(path, "rb") as f:
        header = f.read(HEADER_SIZE)
        if len(header) != HEADER_SIZE or header[:4] != MAGIC:
            raise DataError(f"{path}: not a level-set tensor file")
        m, n, p = struct.unpack("<QQQ", header[4:28])
        payload = f.read()
    expected = m * n * p * 8
    if len(payload) != expected:
        raise DataError(
            f"{path}: expected {expected} payload bytes, found {len(payload)}"
        )
    phi = np.frombuffer(payload, dtype="<f8").astype(float).reshape(m, n, p)
    if spec is None:
        spec = GridSpec(dims=(int(m), int(n), int(p)))
    elif tuple(spec.dims) != (m, n, p):
        raise DataError(f"{path}: dims {m, n, p} do not match spec {spec.dims}")
    return LevelSetField(phi=phi, spec=spec)


def load_field_raw(path) -> np.ndarray:
    """Just the tensor values, for training pipelines."""
    return load_field(path).phi
