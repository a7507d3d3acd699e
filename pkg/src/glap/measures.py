"""Viewport stretching and bending scores for the global parameter search.

Both scores live in [0, 1]. Stretching is a Tissot-style area-scale
deviation over object pixels; bending is the worst chord deviation of a
fixed battery of scene-straight lines (great-circle arcs). Any callable with
the same signature can be passed to the optimizer in their place.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .imaging import Raster
from .projections import ViewportSpec, pixel_plane_coords, xyz_to_sphere

FD_STEP = 1e-5

StretchingMeasure = Callable[[Raster, ViewportSpec, object], float]
BendingMeasure = Callable[[ViewportSpec, object], float]


@dataclass(frozen=True)
class DistortionScore:
    stretching: float
    bending: float

    def __post_init__(self):
        for v in (self.stretching, self.bending):
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"distortion scores must lie in [0, 1], got {v}")


def squash(s: float) -> float:
    return s / (1.0 + s)


def area_scale(proj, phi, theta, h: float = FD_STEP):
    """Plane area per unit sphere area of ``proj.forward`` at (phi, theta)."""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    xp, yp = proj.forward(phi + h, theta, check=False)
    xm, ym = proj.forward(phi - h, theta, check=False)
    xt, yt = proj.forward(phi, theta + h, check=False)
    xb, yb = proj.forward(phi, theta - h, check=False)
    j11 = (xp - xm) / (2 * h)
    j21 = (yp - ym) / (2 * h)
    j12 = (xt - xb) / (2 * h)
    j22 = (yt - yb) / (2 * h)
    return np.abs(j11 * j22 - j12 * j21) / np.cos(theta)


def stretching_score(seg_vp: Raster, spec: ViewportSpec, proj) -> float:
    """Squashed mean |log area scale - log centre area scale| over object pixels."""
    labels = seg_vp.data
    if labels.shape != (spec.height_px, spec.width_px):
        raise ValueError(f"segmentation {labels.shape} does not match viewport {spec.height_px}x{spec.width_px}")
    mask = labels > 0
    if not mask.any():
        return 0.0
    hw, hh = proj.half_extent(spec.f_h, spec.ar)
    x, y = pixel_plane_coords(hw, hh, spec.width_px, spec.height_px)
    phi, theta = proj.backward(x[mask], y[mask], check=False)
    log_a = np.log(area_scale(proj, phi, theta))
    log_c = math.log(float(area_scale(proj, 0.0, 0.0)))
    # pixel-count-weighted mean of per-object means == mean over object pixels
    s = float(np.mean(np.abs(log_a - log_c)))
    return squash(s)


def mapped_area_deviation(phi: np.ndarray, theta: np.ndarray, mask: np.ndarray) -> float:
    """Mean |log a - log a_centre| for a per-pixel pixel->sphere map.

    ``phi``/``theta`` are viewport-local sphere coordinates of each output
    pixel; the area scale is pixel area per steradian, by finite differences
    along the pixel grid. Used to compare warped outputs with VP_b.
    """
    dphi_dr, dphi_dc = np.gradient(phi)
    dth_dr, dth_dc = np.gradient(theta)
    sphere_area = np.abs(dphi_dc * dth_dr - dphi_dr * dth_dc) * np.cos(theta)
    log_a = -np.log(sphere_area)
    h, w = phi.shape
    log_c = log_a[h // 2, w // 2]
    if not mask.any():
        return 0.0
    return float(np.mean(np.abs(log_a[mask] - log_c)))


def warped_sphere_coords(spec: ViewportSpec, proj, field: np.ndarray):
    """Viewport-local (phi, theta) seen by each pixel of a warped viewport.

    ``field`` is the (H, W, 2) source map into a viewport rendered with
    ``proj``; the identity field reproduces the plain projection.
    """
    hw, hh = proj.half_extent(spec.f_h, spec.ar)
    h, w = field.shape[:2]
    x = 2.0 * hw * ((field[..., 0] + 0.5) / w - 0.5)
    y = 2.0 * hh * (0.5 - (field[..., 1] + 0.5) / h)
    return proj.backward(x, y, check=False)


# --------------------------------------------------------------------------
# Bending

HORIZONTAL_ARC_LATS_DEG = (-45.0, -30.0, -15.0, 15.0, 30.0, 45.0)
OBLIQUE_ARC_TILTS_DEG = (-30.0, 30.0)
MIN_ARC_FRACTION = 0.10


def horizontal_arc(lat0: float):
    """Great circle through (0, lat0) that is level there: the image of a
    horizontal scene line parallel to the view plane."""
    s, c = math.sin(lat0), math.cos(lat0)

    def arc(t):
        return xyz_to_sphere(np.sin(t), np.cos(t) * s, np.cos(t) * c)

    return arc


def oblique_arc(tilt: float):
    """Great circle through the view centre, tilted from the horizon."""
    s, c = math.sin(tilt), math.cos(tilt)

    def arc(t):
        return xyz_to_sphere(np.sin(t) * c, np.sin(t) * s, np.cos(t))

    return arc


def arc_battery():
    arcs = [("horizontal", lat, horizontal_arc(math.radians(lat))) for lat in HORIZONTAL_ARC_LATS_DEG]
    arcs += [("oblique", tilt, oblique_arc(math.radians(tilt))) for tilt in OBLIQUE_ARC_TILTS_DEG]
    return arcs


def _inside(arc, proj, hw, hh, t):
    phi, theta = arc(np.asarray(t, dtype=float))
    x, y = proj.forward(phi, theta, check=False)
    ok = np.isfinite(x) & np.isfinite(y) & (np.abs(x) <= hw) & (np.abs(y) <= hh)
    return ok, x, y


def _refine(arc, proj, hw, hh, t_in, t_out, iters=60):
    for _ in range(iters):
        mid = 0.5 * (t_in + t_out)
        if _inside(arc, proj, hw, hh, mid)[0]:
            t_in = mid
        else:
            t_out = mid
    return t_in


def arc_bending(arc, proj, hw: float, hh: float, samples: int = 2001):
    """Max point-to-chord distance over chord length for the visible part of
    ``arc``; None when the visible part is too short to judge.

    An arc that leaves the frame and comes back is judged on its longest
    visible piece.
    """
    eps = 1e-6
    t = np.linspace(-math.pi / 2 + eps, math.pi / 2 - eps, 4 * samples + 1)
    ok = _inside(arc, proj, hw, hh, t)[0]
    if not ok.any():
        return None
    # longest run of consecutive visible samples
    edges = np.diff(np.concatenate([[0], ok.astype(np.int8), [0]]))
    starts, stops = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    k = int(np.argmax(stops - starts))
    i0, i1 = starts[k], stops[k] - 1
    t0 = t[i0] if i0 == 0 else _refine(arc, proj, hw, hh, t[i0], t[i0 - 1])
    t1 = t[i1] if i1 == t.size - 1 else _refine(arc, proj, hw, hh, t[i1], t[i1 + 1])
    ts = np.linspace(t0, t1, samples)
    _, x, y = _inside(arc, proj, hw, hh, ts)
    good = np.isfinite(x) & np.isfinite(y)
    x, y = x[good], y[good]
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    chord = math.hypot(dx, dy)
    if chord < MIN_ARC_FRACTION * 2 * hw:
        return None
    dist = np.abs(dx * (y - y[0]) - dy * (x - x[0])) / chord
    return float(dist.max() / chord)


def bending_score(spec: ViewportSpec, proj, samples: int = 2001) -> float:
    """Mean relative chord deviation over the arc battery, clamped to [0, 1].

    Depends only on the FoV, aspect ratio and projection, so results are memoised.
    """
    return _bending_cached(spec.f_h, spec.ar, proj, samples)


@lru_cache(maxsize=4096)
def _bending_cached(f_h: float, ar: float, proj, samples: int) -> float:
    hw, hh = proj.half_extent(f_h, ar)
    vals = [b for _, _, arc in arc_battery() if (b := arc_bending(arc, proj, hw, hh, samples)) is not None]
    if not vals:
        return 0.0
    return float(min(1.0, max(0.0, np.mean(vals))))
