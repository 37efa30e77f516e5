"""Parametric wing geometry.

A design is a 33-vector: four airfoil sections of eight variables each
(leading/trailing edge tangent magnitudes, trailing-edge surface angles,
twist, chord) plus the incidence angle of the whole wing.  Airfoil
surfaces are cubic Hermite (Ferguson) segments; the half-wing is lofted
by linear interpolation between the four defining sections.

Angles are radians everywhere in memory.  JSON serialization uses
degrees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

N_DESIGN_VARS = 33
N_SECTIONS = 4
SECTION_VARS = (
    "t_le_up",
    "t_le_lo",
    "t_te_up",
    "t_te_lo",
    "theta_te_up",
    "theta_te_lo",
    "twist",
    "chord",
)
# positions of angle-valued entries within the 33-vector (radians in memory)
ANGLE_INDICES = tuple(
    8 * s + j for s in range(N_SECTIONS) for j in (4, 5, 6)
) + (32,)

# chordwise station of the common quarter-chord line, in root-chord units
QUARTER_CHORD_X = 0.25


@dataclass(frozen=True)
class FergusonSection:
    """One airfoil section built from two Hermite spline surfaces."""

    t_le_up: float
    t_le_lo: float
    t_te_up: float
    t_te_lo: float
    theta_te_up: float
    theta_te_lo: float
    twist: float
    chord: float

    def __post_init__(self):
        vals = [getattr(self, name) for name in SECTION_VARS]
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError("section parameters must be finite")
        if min(self.t_le_up, self.t_le_lo, self.t_te_up, self.t_te_lo) <= 0.0:
            raise ValidationError("tangent magnitudes must be positive")
        if self.chord <= 0.0:
            raise ValidationError("chord must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in SECTION_VARS])


@dataclass(frozen=True)
class WingSurface:
    """Discretized half-wing.

    ``points`` has shape (n_span, n_chord, 2, 3); axis 2 is
    [upper, lower] and the last axis is (x, y, z).  Root is at y = 0,
    tip at y = half_span.  ``sections`` keeps the defining airfoils so
    exact intermediate sections can be reconstructed.
    """

    points: np.ndarray
    n_span: int
    n_chord: int
    incidence: float
    half_span: float
    sections: tuple[FergusonSection, ...]
    qc_x: float = QUARTER_CHORD_X

    @property
    def station_y(self) -> np.ndarray:
        return np.linspace(0.0, self.half_span, self.n_span)

    def section_polygon(self, y: float) -> np.ndarray:
        """Closed (x, z) section contour at span position y, exact
        linear interpolation between the defining stations."""
        curves = _defining_curves(
            self.sections, self.incidence, self.n_chord, self.qc_x
        )
        y_def = np.linspace(0.0, self.half_span, N_SECTIONS)
        k = min(np.searchsorted(y_def, y, side="right"), N_SECTIONS - 1)
        w = (y - y_def[k - 1]) / (y_def[k] - y_def[k - 1])
        sec = (1.0 - w) * curves[k - 1] + w * curves[k]  # (n_chord, 2, 2)
        upper, lower = sec[:, 0, :], sec[:, 1, :]
        return np.vstack([upper, lower[::-1]])

    def translated(self, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0):
        pts = self.points + np.array([dx, dy, dz])
        return _TranslatedWing(self, np.array([dx, dy, dz]), pts)


class _TranslatedWing(WingSurface):
    """Rigidly shifted wing, used for translation-equivariance checks."""

    def __init__(self, base: WingSurface, offset: np.ndarray, pts: np.ndarray):
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "n_span", base.n_span)
        object.__setattr__(self, "n_chord", base.n_chord)
        object.__setattr__(self, "incidence", base.incidence)
        object.__setattr__(self, "half_span", base.half_span)
        object.__setattr__(self, "sections", base.sections)
        object.__setattr__(self, "qc_x", base.qc_x)
        object.__setattr__(self, "_base", base)
        object.__setattr__(self, "_offset", offset)

    @property
    def station_y(self) -> np.ndarray:
        return self._base.station_y + self._offset[1]

    def section_polygon(self, y: float) -> np.ndarray:
        poly = self._base.section_polygon(y - self._offset[1])
        return poly + self._offset[[0, 2]]


def cosine_spacing(n: int) -> np.ndarray:
    """n parameters in [0, 1] clustered toward both ends."""
    return 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, n)))


def _hermite(t: np.ndarray, p0, t0, p1, t1) -> np.ndarray:
    """Cubic Hermite segment; p*, t* are 2-vectors, t in [0, 1]."""
    t = np.asarray(t)[:, None]
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    return (
        h00 * np.asarray(p0) + h10 * np.asarray(t0)
        + h01 * np.asarray(p1) + h11 * np.asarray(t1)
    )


def _rotate_about(points: np.ndarray, angle: float, pivot) -> np.ndarray:
    """Rotate (x, z) points nose-up by ``angle`` about ``pivot``.

    Positive angle pitches the leading edge up and the trailing edge
    down (clockwise in the x-z plane with z up).
    """
    c, s = math.cos(angle), math.sin(angle)
    rel = points - np.asarray(pivot)
    out = np.empty_like(rel)
    out[..., 0] = rel[..., 0] * c + rel[..., 1] * s
    out[..., 1] = -rel[..., 0] * s + rel[..., 1] * c
    return out + np.asarray(pivot)


def ferguson_airfoil(
    section: FergusonSection, n_points: int = 50, apply_twist: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Sample the upper and lower section curves.

    Both curves run from the leading edge (0, 0) to the trailing edge
    (chord, 0) before twist.  Leading-edge tangents are vertical;
    trailing-edge tangents make the surface angles with the chord
    line.  Twist rotates about the quarter-chord point.

    Returns (upper, lower) arrays of shape (n_points, 2) in (x, z).
    """
    if n_points < 10:
        raise ValidationError("n_points must be at least 10")
    c = section.chord
    t = cosine_spacing(n_points)
    upper = _hermite(
        t,
        (0.0, 0.0),
        (0.0, section.t_le_up * c),
        (c, 0.0),
        (
            section.t_te_up * c * math.cos(section.theta_te_up),
            -section.t_te_up * c * math.sin(section.theta_te_up),
        ),
    )
    lower = _hermite(
        t,
        (0.0, 0.0),
        (0.0, -section.t_le_lo * c),
        (c, 0.0),
        (
            section.t_te_lo * c * math.cos(section.theta_te_lo),
            section.t_te_lo * c * math.sin(section.theta_te_lo),
        ),
    )
    if apply_twist and section.twist != 0.0:
        pivot = (0.25 * c, 0.0)
        upper = _rotate_about(upper, section.twist, pivot)
        lower = _rotate_about(lower, section.twist, pivot)
    return upper, lower


def decode_design(u) -> tuple[tuple[FergusonSection, ...], float]:
    """Split a 33-vector into four sections (root to tip) and the
    incidence angle."""
    u = np.asarray(u, dtype=float)
    if u.shape != (N_DESIGN_VARS,):
        raise DimensionError(
            f"design vector must have {N_DESIGN_VARS} entries, got shape {u.shape}"
        )
    if not np.all(np.isfinite(u)):
        raise ValidationError("design vector contains non-finite entries")
    sections = tuple(
        FergusonSection(*u[8 * s: 8 * s + 8]) for s in range(N_SECTIONS)
    )
    return sections, float(u[32])


def encode_design(sections, incidence: float) -> np.ndarray:
    """Inverse of decode_design."""
    if len(sections) != N_SECTIONS:
        raise DimensionError(f"expected {N_SECTIONS} sections")
    u = np.empty(N_DESIGN_VARS)
    for s, sec in enumerate(sections):
        u[8 * s: 8 * s + 8] = sec.as_array()
    u[32] = incidence
    return u


def _defining_curves(sections, incidence, n_chord, qc_x) -> np.ndarray:
    """(4, n_chord, 2, 2) array of twisted, incidence-rotated section
    curves positioned on the common quarter-chord line."""
    curves = np.empty((N_SECTIONS, n_chord, 2, 2))
    for k, sec in enumerate(sections):
        up, lo = ferguson_airfoil(sec, n_chord)
        shift = qc_x - 0.25 * sec.chord
        up = up + np.array([shift, 0.0])
        lo = lo + np.array([shift, 0.0])
        curves[k, :, 0, :] = up
        curves[k, :, 1, :] = lo
    if incidence != 0.0:
        flat = curves.reshape(-1, 2)
        curves = _rotate_about(flat, incidence, (qc_x, 0.0)).reshape(curves.shape)
    return curves


def loft_wing(
    sections,
    incidence: float,
    half_span: float = 2.0,
    n_span: int = 50,
    n_chord: int = 50,
    qc_x: float = QUARTER_CHORD_X,
) -> WingSurface:
    """Loft four sections into a discretized half-wing.

    Defining stations sit at y = 0, s/3, 2s/3, s; intermediate stations
    are exact pointwise linear interpolations of the adjacent defining
    sections.  All sections are aligned on the quarter-chord line
    x = qc_x, and the incidence rotation shares that pivot.
    """
    if len(sections) != N_SECTIONS:
        raise DimensionError(f"expected {N_SECTIONS} sections")
    if n_span < 4 or n_chord < 4:
        raise ValidationError("n_span and n_chord must be at least 4")
    if half_span <= 0:
        raise ValidationError("half_span must be positive")
    curves = _defining_curves(sections, incidence, n_chord, qc_x)
    y_def = np.linspace(0.0, half_span, N_SECTIONS)
    ys = np.linspace(0.0, half_span, n_span)
    seg = np.clip(np.searchsorted(y_def, ys, side="right") - 1, 0, N_SECTIONS - 2)
    w = (ys - y_def[seg]) / (y_def[seg + 1] - y_def[seg])
    xz = (1.0 - w)[:, None, None, None] * curves[seg] + w[:, None, None, None] * curves[seg + 1]
    points = np.empty((n_span, n_chord, 2, 3))
    points[..., 0] = xz[..., 0]
    points[..., 1] = ys[:, None, None]
    points[..., 2] = xz[..., 1]
    return WingSurface(
        points=points,
        n_span=n_span,
        n_chord=n_chord,
        incidence=float(incidence),
        half_span=float(half_span),
        sections=tuple(sections),
        qc_x=qc_x,
    )


def thickness_ratio(section: FergusonSection, n_samples: int = 200) -> float:
    """Maximum (z_upper - z_lower) / chord over chordwise stations of
    the untwisted section."""
    up, lo = ferguson_airfoil(section, n_samples, apply_twist=False)
    c = section.chord
    xs = cosine_spacing(n_samples) * c
    zu = np.interp(xs, up[:, 0], up[:, 1])
    zl = np.interp(xs, lo[:, 0], lo[:, 1])
    return float(np.max(zu - zl) / c)


def thickness_ratios(sections) -> np.ndarray:
    """Per-section thickness-to-chord ratios, root to tip."""
    return np.array([thickness_ratio(sec) for sec in sections])


# ---------------------------------------------------------------------------
# Design-variable bounds

DEFAULT_BOUND_GROUPS = {
    "tangent": (0.05, 0.60),                       # chord fraction
    "theta_te_deg": (1.0, 30.0),                   # degrees in config
    "twist_deg": (-5.0, 5.0),
    "chord": (0.5, 1.0),
    "incidence_deg": (-3.0, 10.0),
}


def design_bounds(groups: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper 33-vectors (radians for angles).

    ``groups`` overrides entries of the default per-group table; keys
    ending in _deg are degrees.
    """
    table = dict(DEFAULT_BOUND_GROUPS)
    if groups:
        unknown = set(groups) - set(table)
        if unknown:
            raise ValidationError(f"unknown bound groups: {sorted(unknown)}")
        table.update({k: tuple(v) for k, v in groups.items()})
    for k, (lo, hi) in table.items():
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError(f"bound group {k!r} must satisfy lo < hi")
    b_l = np.empty(N_DESIGN_VARS)
    b_u = np.empty(N_DESIGN_VARS)
    for s in range(N_SECTIONS):
        b_l[8 * s: 8 * s + 4] = table["tangent"][0]
        b_u[8 * s: 8 * s + 4] = table["tangent"][1]
        b_l[8 * s + 4: 8 * s + 6] = math.radians(table["theta_te_deg"][0])
        b_u[8 * s + 4: 8 * s + 6] = math.radians(table["theta_te_deg"][1])
        b_l[8 * s + 6] = math.radians(table["twist_deg"][0])
        b_u[8 * s + 6] = math.radians(table["twist_deg"][1])
        b_l[8 * s + 7] = table["chord"][0]
        b_u[8 * s + 7] = table["chord"][1]
    b_l[32] = math.radians(table["incidence_deg"][0])
    b_u[32] = math.radians(table["incidence_deg"][1])
    return b_l, b_u


def load_bounds_config(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as f:
        groups = json.load(f)
    return design_bounds(groups)


# ---------------------------------------------------------------------------
# Design vector serialization (files carry degrees)

def design_to_json(u) -> list[float]:
    u = np.asarray(u, dtype=float).copy()
    for i in ANGLE_INDICES:
        u[i] = math.degrees(u[i])
    return [float(v) for v in u]


def design_from_json(values) -> np.ndarray:
    u = np.asarray(values, dtype=float)
    if u.shape != (N_DESIGN_VARS,):
        raise DimensionError(
            f"design vector must have {N_DESIGN_VARS} entries, got shape {u.shape}"
        )
    u = u.copy()
    for i in ANGLE_INDICES:
        u[i] = math.radians(u[i])
    return u


def save_design(u, path) -> None:
    with open(path, "w") as f:
        json.dump(design_to_json(u), f)


def load_design(path) -> np.ndarray:
    with open(path) as f:
        return design_from_json(json.load(f))
