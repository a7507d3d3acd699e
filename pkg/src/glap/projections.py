"""Sphere <-> plane mappings used for viewport rendering.

Angles are radians. ``phi`` is longitude (positive to the right), ``theta`` is
latitude (positive up). Plane coordinates are in length units with the origin
at the tangency point of the viewport plane and the unit sphere; ``y`` grows
upward.

All functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EPS_DOM = 1e-6


class ProjectionDomainError(ValueError):
    """A point lies outside the domain of a projection."""


@dataclass(frozen=True)
class SpherePoint:
    phi: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.theta)):
            raise ValueError("sphere coordinates must be finite")
        if abs(self.theta) > math.pi / 2:
            raise ValueError(f"latitude {self.theta} outside [-pi/2, pi/2]")

    @classmethod
    def normalized(cls, phi: float, theta: float) -> "SpherePoint":
        return cls(float(wrap_longitude(phi)), float(theta))


@dataclass(frozen=True)
class PlanePoint:
    x: float
    y: float


def wrap_longitude(phi):
    """Map longitude into (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    return out if np.ndim(out) else float(out)


def _check(ok, what: str):
    if not np.all(ok):
        n_bad = int(np.size(ok) - np.count_nonzero(ok))
        raise ProjectionDomainError(f"{what} ({n_bad} point(s) outside the domain)")


# --------------------------------------------------------------------------
# Pannini


@dataclass(frozen=True)
class PanniniParams:
    """Pannini projection parameters.

    ``d`` is the distance of the projection centre behind the cylinder axis
    (0 = rectilinear, 1 = quasi-stereographic) and ``vc`` the vertical
    compression strength.
    """

    d: float
    vc: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.d) and math.isfinite(self.vc)):
            raise ValueError("Pannini parameters must be finite")
        if self.d < 0:
            raise ValueError(f"d must be >= 0, got {self.d}")
        if not 0.0 <= self.vc <= 1.0:
            raise ValueError(f"vc must be in [0, 1], got {self.vc}")

    name = "pannini"

    def forward(self, phi, theta, check: bool = True):
        return pannini_forward(phi, theta, self, check=check)

    def backward(self, x, y, check: bool = True):
        return pannini_backward(x, y, self, check=check)

    def half_extent(self, f_h: float, ar: float):
        hw, hh, _ = viewport_plane_extent(self.d, f_h, ar)
        return hw, hh

    def label(self) -> str:
        return f"pannini(d={self.d:g}, vc={self.vc:g})"


def pannini_forward(phi, theta, params: PanniniParams, check: bool = True):
    """Pannini sphere -> plane.

    The compression term of ``y`` is ``vc * tan(theta) / cos(phi)`` without the
    ``S`` factor carried by the uncompressed term.

    With ``check=False`` out-of-domain points yield NaN instead of raising.
    """
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    d, vc = params.d, params.vc
    cphi = np.cos(phi)
    ok = (d + cphi > EPS_DOM) & (np.abs(theta) < np.pi / 2 - EPS_DOM)
    if vc > 0:
        ok &= cphi > EPS_DOM
    if check:
        _check(ok, "pannini_forward: d + cos(phi) <= eps or |theta| too close to pi/2")
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (d + 1.0) / (d + cphi)
        t = np.tan(theta)
        x = s * np.sin(phi)
        y = (1.0 - vc) * (s * t) + (vc * (t / cphi) if vc > 0 else 0.0)
    if not check:
        x = np.where(ok, x, np.nan)
        y = np.where(ok, y, np.nan)
    return _out(x), _out(y)


def pannini_backward(x, y, params: PanniniParams, check: bool = True):
    """Inverse of :func:`pannini_forward`.

    ``cos(phi)`` is the root of ``(k+1)c^2 + 2kdc + (kd^2 - 1) = 0`` with
    ``c > -d``, where ``k = x^2 / (d+1)^2``. It is evaluated in the
    cancellation-free form ``(1 - kd^2) / (sqrt(1 + k(1-d^2)) + kd)`` and
    ``phi`` is recovered with atan2 so small angles keep full precision.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d, vc = params.d, params.vc
    k = x * x / (d + 1.0) ** 2
    disc = 1.0 + k * (1.0 - d * d)
    ok = disc >= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        c = (1.0 - k * d * d) / (np.sqrt(np.where(ok, disc, 0.0)) + k * d)
        ok &= c + d > EPS_DOM
        if vc > 0:
            ok &= c > EPS_DOM
        sin_phi = x * (d + c) / (d + 1.0)
        phi = np.arctan2(sin_phi, c)
        s = (d + 1.0) / (d + c)
        denom = (1.0 - vc) * s + (vc / c if vc > 0 else 0.0)
        theta = np.arctan(y / denom)
    if check:
        _check(ok, "pannini_backward: no valid root with cos(phi) in (-d, 1]")
    else:
        phi = np.where(ok, phi, np.nan)
        theta = np.where(ok, theta, np.nan)
    return _out(phi), _out(theta)


# --------------------------------------------------------------------------
# Generalized perspective (rectilinear .. stereographic)


@dataclass(frozen=True)
class GeneralPerspective:
    """Perspective projection from a centre at distance ``d`` behind the
    sphere centre onto the tangent plane ``z = 1``."""

    d: float

    def __post_init__(self):
        if not math.isfinite(self.d) or self.d < 0:
            raise ValueError(f"d must be finite and >= 0, got {self.d}")

    @property
    def name(self) -> str:
        if self.d == 0:
            return "rectilinear"
        if self.d == 1:
            return "stereographic"
        return "gpp"

    def forward(self, phi, theta, check: bool = True):
        return gpp_forward(phi, theta, self.d, check=check)

    def backward(self, x, y, check: bool = True):
        return gpp_backward(x, y, self.d, check=check)

    def half_extent(self, f_h: float, ar: float):
        hw, hh, _ = viewport_plane_extent(self.d, f_h, ar)
        return hw, hh

    def label(self) -> str:
        return self.name if self.name != "gpp" else f"gpp(d={self.d:g})"


def sphere_to_xyz(phi, theta):
    """Unit vector (x right, y up, z forward)."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ct = np.cos(theta)
    return ct * np.sin(phi), np.sin(theta), ct * np.cos(phi)


def xyz_to_sphere(px, py, pz):
    norm = np.sqrt(px * px + py * py + pz * pz)
    phi = np.arctan2(px, pz)
    theta = np.arcsin(np.clip(py / norm, -1.0, 1.0))
    return phi, theta


def gpp_forward(phi, theta, d: float, check: bool = True):
    px, py, pz = sphere_to_xyz(phi, theta)
    den = pz + d
    ok = den > EPS_DOM
    if check:
        _check(ok, "gpp_forward: cos(theta)cos(phi) + d <= eps")
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (1.0 + d) * px / den
        y = (1.0 + d) * py / den
    if not check:
        x = np.where(ok, x, np.nan)
        y = np.where(ok, y, np.nan)
    return _out(x), _out(y)


def gpp_backward(x, y, d: float, check: bool = True):
    """Intersect the ray from (0, 0, -d) through (x, y, 1) with the sphere."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    uz = 1.0 + d
    uu = x * x + y * y + uz * uz
    # |C + t u|^2 = 1 with C = (0, 0, -d); far root is the visible point
    b = d * uz
    disc = b * b - uu * (d * d - 1.0)
    ok = disc >= 0
    t = (b + np.sqrt(np.where(ok, disc, 0.0))) / uu
    pz = -d + t * uz
    ok &= pz + d > EPS_DOM
    if check:
        _check(ok, "gpp_backward: ray misses the front hemisphere")
    phi, theta = xyz_to_sphere(t * x, t * y, pz)
    if not check:
        phi = np.where(ok, phi, np.nan)
        theta = np.where(ok, theta, np.nan)
    return _out(phi), _out(theta)


def rectilinear_forward(phi, theta, check: bool = True):
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    lim = np.pi / 2 - EPS_DOM
    ok = (np.abs(phi) < lim) & (np.abs(theta) < lim)
    if check:
        _check(ok, "rectilinear_forward: |phi| or |theta| at or beyond pi/2")
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.tan(phi)
        y = np.tan(theta) / np.cos(phi)
    if not check:
        x = np.where(ok, x, np.nan)
        y = np.where(ok, y, np.nan)
    return _out(x), _out(y)


def stereographic_forward(phi, theta, check: bool = True):
    return gpp_forward(phi, theta, 1.0, check=check)


RECTILINEAR = GeneralPerspective(0.0)
STEREOGRAPHIC = GeneralPerspective(1.0)


# --------------------------------------------------------------------------
# Viewing direction


def _rotation(vd_phi: float, vd_theta: float) -> np.ndarray:
    cp, sp = math.cos(vd_phi), math.sin(vd_phi)
    ct, st = math.cos(vd_theta), math.sin(vd_theta)
    pitch = np.array([[1.0, 0.0, 0.0], [0.0, ct, st], [0.0, -st, ct]])
    yaw = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    return yaw @ pitch


def rotate_to_vd(phi, theta, vd_phi: float, vd_theta: float):
    """Move viewport-local sphere coordinates to world coordinates.

    The viewport centre (0, 0) lands on (vd_phi, vd_theta). Roll is zero.
    """
    if vd_phi == 0 and vd_theta == 0:
        return _out(np.asarray(phi, dtype=float)), _out(np.asarray(theta, dtype=float))
    r = _rotation(vd_phi, vd_theta)
    p = np.stack(sphere_to_xyz(phi, theta))
    q = np.tensordot(r, p, axes=1)
    ph, th = xyz_to_sphere(q[0], q[1], q[2])
    return _out(ph), _out(th)


def unrotate_from_vd(phi, theta, vd_phi: float, vd_theta: float):
    """Inverse of :func:`rotate_to_vd`."""
    if vd_phi == 0 and vd_theta == 0:
        return _out(np.asarray(phi, dtype=float)), _out(np.asarray(theta, dtype=float))
    r = _rotation(vd_phi, vd_theta)
    p = np.stack(sphere_to_xyz(phi, theta))
    q = np.tensordot(r.T, p, axes=1)
    ph, th = xyz_to_sphere(q[0], q[1], q[2])
    return _out(ph), _out(th)


# --------------------------------------------------------------------------
# Viewport plane


def viewport_plane_extent(d: float, f_h: float, ar: float):
    """Half width, half height and vertical FoV of the viewport plane.

    The horizontal half extent is where the equator meets ``phi = f_h/2``;
    the vertical FoV follows from the aspect ratio.
    """
    if not 0 < f_h < 2 * math.pi:
        raise ValueError(f"f_h must be in (0, 2pi), got {f_h}")
    if not ar > 0:
        raise ValueError(f"aspect ratio must be > 0, got {ar}")
    den = d + math.cos(f_h / 2)
    if den <= EPS_DOM:
        raise ProjectionDomainError(
            f"d + cos(f_h/2) = {den:.3g} <= 0: FoV {math.degrees(f_h):.1f} deg "
            f"is outside the projection domain for d={d}"
        )
    half_width = (d + 1.0) * math.sin(f_h / 2) / den
    half_height = half_width / ar
    f_v = 2.0 * math.atan(half_height)
    return half_width, half_height, f_v


@dataclass(frozen=True)
class ViewportSpec:
    """Viewing direction, horizontal FoV (radians) and pixel size."""

    vd: SpherePoint
    f_h: float
    width_px: int
    height_px: int

    def __post_init__(self):
        if not 0 < self.f_h < 2 * math.pi:
            raise ValueError(f"f_h must be in (0, 2pi), got {self.f_h}")
        if self.width_px < 2 or self.height_px < 2:
            raise ValueError("viewport must be at least 2x2 pixels")

    @property
    def ar(self) -> float:
        return self.width_px / self.height_px

    def scaled(self, factor: float) -> "ViewportSpec":
        w = max(2, int(round(self.width_px * factor)))
        h = max(2, int(round(self.height_px * factor)))
        return ViewportSpec(self.vd, self.f_h, w, h)


def pixel_plane_coords(hw: float, hh: float, width: int, height: int):
    """Plane coordinates of pixel centres, shape (height, width) each."""
    xs = 2.0 * hw * ((np.arange(width) + 0.5) / width - 0.5)
    ys = 2.0 * hh * (0.5 - (np.arange(height) + 0.5) / height)
    return np.broadcast_to(xs, (height, width)), np.broadcast_to(ys[:, None], (height, width))


def _out(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a
