"""Full-order aerodynamics.

Two stages: a 2D incompressible source-vortex panel method (constant
source strength per panel, one global vortex strength, Kutta condition
at the trailing edge) for sectional lift properties, and a Prandtl
lifting-line solver over odd sine harmonics for wing CL, induced drag
and the spanwise lift distribution.  Symmetric loading is assumed, so
only the half span is collocated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SolverError, ValidationError
from .geometry import N_SECTIONS, WingSurface, ferguson_airfoil

DEFAULT_PANELS = 200
DEFAULT_STATIONS = 20
# lift-slope probe angles for the linear fit
PROBE_ALPHA = math.radians(2.0)


@dataclass(frozen=True)
class SectionAero:
    """Linearized sectional properties: lift slope (per radian) and
    zero-lift angle (radians)."""

    a0: float
    alpha_zero_lift: float


@dataclass(frozen=True)
class PanelSolution:
    cl: float
    circulation: float
    kutta_residual: float
    tangential_velocity: np.ndarray


def airfoil_contour(upper: np.ndarray, lower: np.ndarray) -> np.ndarray:
    """Closed node loop: trailing edge along the lower surface to the
    leading edge, then back over the upper surface."""
    return np.vstack([lower[::-1], upper[1:]])


def _panel_influence(px, pz, nodes):
    """Velocity influence matrices of unit-strength source and vortex
    panels at the points (px, pz).

    Returns (us, ws, uv, wv), each (n_points, n_panels), in global
    coordinates.
    """
    x0, z0 = nodes[:-1, 0], nodes[:-1, 1]
    x1, z1 = nodes[1:, 0], nodes[1:, 1]
    ell = np.hypot(x1 - x0, z1 - z0)
    if np.any(ell <= 0):
        raise SolverError("degenerate contour: zero-length panel")
    ct = (x1 - x0) / ell
    st = (z1 - z0) / ell

    dx = px[:, None] - x0[None, :]
    dz = pz[:, None] - z0[None, :]
    xi = dx * ct + dz * st
    eta = -dx * st + dz * ct
    # collocation midpoints sit on their own panel up to roundoff; snap
    # to +0 so atan2 takes the outside limit (beta = +pi on the panel)
    eta = np.where(np.abs(eta) < 1e-12 * ell[None, :], 0.0, eta)

    r1sq = xi**2 + eta**2
    r2sq = (xi - ell) ** 2 + eta**2
    with np.errstate(divide="ignore", invalid="ignore"):
        lnr = 0.5 * np.log(r1sq / r2sq)
    lnr[~np.isfinite(lnr)] = 0.0
    beta = np.arctan2(eta, xi - ell) - np.arctan2(eta, xi)

    # local-frame velocities; the vortex field is the source field
    # rotated a quarter turn
    uxi_s = lnr / (2 * np.pi)
    ueta_s = beta / (2 * np.pi)
    uxi_v = ueta_s
    ueta_v = -uxi_s

    us = uxi_s * ct - ueta_s * st
    ws = uxi_s * st + ueta_s * ct
    uv = uxi_v * ct - ueta_v * st
    wv = uxi_v * st + ueta_v * ct
    return us, ws, uv, wv


def panel_details(
    upper: np.ndarray,
    lower: np.ndarray,
    alpha: float,
    label: str | None = None,
) -> PanelSolution:
    """Solve the panel system and return the full solution."""
    if not (np.all(np.isfinite(upper)) and np.all(np.isfinite(lower))):
        raise ValidationError("airfoil curves contain non-finite points")
    if abs(alpha) >= math.radians(25.0):
        raise ValidationError("angle of attack out of the attached-flow range")
    nodes = airfoil_contour(upper, lower)
    n = len(nodes) - 1
    xm = 0.5 * (nodes[:-1, 0] + nodes[1:, 0])
    zm = 0.5 * (nodes[:-1, 1] + nodes[1:, 1])
    ell = np.hypot(np.diff(nodes[:, 0]), np.diff(nodes[:, 1]))
    if np.any(ell <= 0):
        where = f" for section {label}" if label else ""
        raise SolverError(f"degenerate contour{where}: zero-length panel")
    ct = np.diff(nodes[:, 0]) / ell
    st = np.diff(nodes[:, 1]) / ell
    # outward normal for this traversal direction
    nx, nz = -st, ct

    us, ws, uv, wv = _panel_influence(xm, zm, nodes)

    a = np.empty((n + 1, n + 1))
    rhs = np.empty(n + 1)
    vinf = np.array([math.cos(alpha), math.sin(alpha)])

    # flow tangency at every midpoint
    a[:n, :n] = us * nx[:, None] + ws * nz[:, None]
    a[:n, n] = (uv * nx[:, None] + wv * nz[:, None]).sum(axis=1)
    rhs[:n] = -(vinf[0] * nx + vinf[1] * nz)

    # Kutta condition: tangential velocities on the two trailing-edge
    # panels cancel (their traversal directions oppose)
    ts = us * ct[:, None] + ws * st[:, None]
    tv = (uv * ct[:, None] + wv * st[:, None]).sum(axis=1)
    a[n, :n] = ts[0] + ts[-1]
    a[n, n] = tv[0] + tv[-1]
    rhs[n] = -(vinf[0] * (ct[0] + ct[-1]) + vinf[1] * (st[0] + st[-1]))

    try:
        sol = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        where = f" for section {label}" if label else ""
        raise SolverError(f"singular panel influence matrix{where}") from exc
    sigma, tau = sol[:n], sol[n]

    vt = (
        vinf[0] * ct + vinf[1] * st
        + ts @ sigma + tau * tv
    )
    kutta_residual = abs(vt[0] + vt[-1])
    circulation = tau * ell.sum()
    chord = nodes[:, 0].max() - nodes[:, 0].min()
    cl = 2.0 * circulation / chord
    return PanelSolution(
        cl=float(cl),
        circulation=float(circulation),
        kutta_residual=float(kutta_residual),
        tangential_velocity=vt,
    )


def panel_solve(
    upper: np.ndarray,
    lower: np.ndarray,
    alpha: float,
    label: str | None = None,
) -> float:
    """Sectional lift coefficient at angle of attack ``alpha``."""
    return panel_details(upper, lower, alpha, label=label).cl


def section_lift_properties(
    upper: np.ndarray, lower: np.ndarray, label: str | None = None
) -> SectionAero:
    """Lift slope and zero-lift angle from panel solves at +-2 deg."""
    cl_p = panel_solve(upper, lower, PROBE_ALPHA, label=label)
    cl_m = panel_solve(upper, lower, -PROBE_ALPHA, label=label)
    a0 = (cl_p - cl_m) / (2 * PROBE_ALPHA)
    if not np.isfinite(a0) or a0 <= 0:
        where = f" for section {label}" if label else ""
        raise SolverError(f"non-physical lift slope{where}: {a0}")
    alpha_zl = PROBE_ALPHA - cl_p / a0
    return SectionAero(a0=float(a0), alpha_zero_lift=float(alpha_zl))


def section_aero(section, n_panels: int = DEFAULT_PANELS, label=None) -> SectionAero:
    """Panel-method properties of one untwisted Ferguson section."""
    n_pts = n_panels // 2 + 1
    upper, lower = ferguson_airfoil(section, n_pts, apply_twist=False)
    return section_lift_properties(upper, lower, label=label)


# ---------------------------------------------------------------------------
# Lifting-line theory

@dataclass(frozen=True)
class SpanStations:
    """Collocation data over the half span.

    theta runs over (0, pi/2]; y = half_span * cos(theta) so theta ->
    0 is the tip and theta = pi/2 the root.  ``area`` is the full-wing
    planform area (both halves).
    """

    half_span: float
    theta: np.ndarray
    chord: np.ndarray
    alpha_geo: np.ndarray
    a0: np.ndarray
    alpha_zero_lift: np.ndarray
    area: float

    @property
    def y(self) -> np.ndarray:
        return self.half_span * np.cos(self.theta)

    @property
    def aspect_ratio(self) -> float:
        return (2.0 * self.half_span) ** 2 / self.area


@dataclass(frozen=True)
class LLTSolution:
    """Fourier-series solution of the monoplane equation."""

    coeffs: np.ndarray          # A_n for odd harmonics
    harmonics: np.ndarray       # 1, 3, 5, ...
    CL: float
    CDi: float
    stations: SpanStations

    @property
    def cl_dist(self) -> np.ndarray:
        span = 2.0 * self.stations.half_span
        s = np.sin(np.outer(self.stations.theta, self.harmonics))
        return 4.0 * span * (s @ self.coeffs) / self.stations.chord

    @property
    def span_efficiency(self) -> float:
        if self.coeffs[0] == 0.0:
            return math.nan
        ratios = self.coeffs[1:] / self.coeffs[0]
        delta = float(np.sum(self.harmonics[1:] * ratios**2))
        return 1.0 / (1.0 + delta)


def collocation_angles(n_stations: int) -> np.ndarray:
    k = np.arange(1, n_stations + 1)
    return k * np.pi / (2 * n_stations)


def wing_stations(
    wing: WingSurface,
    section_props: list[SectionAero] | tuple[SectionAero, ...],
    n_stations: int = DEFAULT_STATIONS,
) -> SpanStations:
    """Interpolate the four defining sections to collocation stations.

    Chord, twist and the panel-method properties vary linearly in y
    between defining stations, matching the linear loft.  The geometric
    angle at a station is wing incidence plus local twist.
    """
    if len(section_props) != N_SECTIONS:
        raise ValidationError(f"expected {N_SECTIONS} section property sets")
    s = wing.half_span
    theta = collocation_angles(n_stations)
    y = s * np.cos(theta)
    y_def = np.linspace(0.0, s, N_SECTIONS)
    chords = np.array([sec.chord for sec in wing.sections])
    twists = np.array([sec.twist for sec in wing.sections])
    a0s = np.array([p.a0 for p in section_props])
    azls = np.array([p.alpha_zero_lift for p in section_props])

    chord = np.interp(y, y_def, chords)
    twist = np.interp(y, y_def, twists)
    a0 = np.interp(y, y_def, a0s)
    azl = np.interp(y, y_def, azls)

    # exact trapezoid area of the piecewise-linear planform, both halves
    area = 2.0 * np.trapezoid(chords, y_def)
    return SpanStations(
        half_span=s,
        theta=theta,
        chord=chord,
        alpha_geo=wing.incidence + twist,
        a0=a0,
        alpha_zero_lift=azl,
        area=float(area),
    )


def llt_solve(stations: SpanStations, n_coeffs: int | None = None) -> LLTSolution:
    """Solve the Prandtl monoplane equation at the given stations.

    The collocation system is square: n_coeffs must equal the station
    count.  Harmonics are odd (symmetric loading).
    """
    theta = stations.theta
    n_stations = len(theta)
    if n_coeffs is None:
        n_coeffs = n_stations
    if n_coeffs != n_stations:
        raise ValidationError("collocation system must be square")
    harmonics = 2 * np.arange(n_coeffs) + 1
    span = 2.0 * stations.half_span
    mu = stations.a0 * stations.chord / (4.0 * span)

    sin_t = np.sin(theta)
    m = np.sin(np.outer(theta, harmonics)) * (
        1.0 + mu[:, None] * harmonics[None, :] / sin_t[:, None]
    )
    rhs = mu * (stations.alpha_geo - stations.alpha_zero_lift)
    try:
        coeffs = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular lifting-line collocation matrix") from exc

    ar = stations.aspect_ratio
    cl_wing = math.pi * ar * coeffs[0]
    cdi = math.pi * ar * float(np.sum(harmonics * coeffs**2))
    return LLTSolution(
        coeffs=coeffs,
        harmonics=harmonics,
        CL=float(cl_wing),
        CDi=float(cdi),
        stations=stations,
    )


def lift_distribution(sol: LLTSolution) -> tuple[np.ndarray, np.ndarray]:
    """(y, cl) from root to tip."""
    order = np.argsort(sol.stations.y)
    return sol.stations.y[order], sol.cl_dist[order]


def elliptic_reference(
    cl_total: float, stations: SpanStations
) -> tuple[np.ndarray, np.ndarray]:
    """Elliptic spanwise loading carrying ``cl_total`` on this planform,
    evaluated at the station y positions (root to tip)."""
    if not math.isfinite(cl_total):
        raise ValidationError("CL must be finite")
    s = stations.half_span
    k = 2.0 * stations.area * cl_total / (math.pi * s)
    order = np.argsort(stations.y)
    y = stations.y[order]
    chord = stations.chord[order]
    cl_ell = k * np.sqrt(np.clip(1.0 - (y / s) ** 2, 0.0, None)) / chord
    return y, cl_ell


def loading_l2_gap(sol: LLTSolution) -> tuple[float, float]:
    """RMS gap between the solved loading cl*c and the elliptic
    loading with the same total CL; second value is the elliptic
    loading peak (the normalization scale)."""
    y, cl = lift_distribution(sol)
    chord = sol.stations.chord[np.argsort(sol.stations.y)]
    _, cl_ell = elliptic_reference(sol.CL, sol.stations)
    gamma = cl * chord
    gamma_ell = cl_ell * chord
    gap = float(np.sqrt(np.mean((gamma - gamma_ell) ** 2)))
    peak = float(np.max(np.abs(gamma_ell))) if sol.CL != 0 else 0.0
    return gap, peak


def solve_wing(
    wing: WingSurface,
    n_panels: int = DEFAULT_PANELS,
    n_stations: int = DEFAULT_STATIONS,
    n_coeffs: int | None = None,
) -> LLTSolution:
    """Full-order solve of a lofted wing: panel method on the four
    defining sections, then lifting line at the collocation stations."""
    props = [
        section_aero(sec, n_panels, label=str(k))
        for k, sec in enumerate(wing.sections)
    ]
    stations = wing_stations(wing, props, n_stations)
    return llt_solve(stations, n_coeffs)
