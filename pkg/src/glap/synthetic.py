"""Procedural 360-degree test scenes with matching label maps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import Raster
from .projections import sphere_to_xyz


@dataclass(frozen=True)
class Blob:
    """A spherical cap object: centre (degrees), angular radius (degrees), class id."""

    phi_deg: float
    theta_deg: float
    radius_deg: float
    class_label: int = 15
    color: tuple[int, int, int] = (200, 60, 60)


def eri_grid(width: int, height: int):
    phi = (np.arange(width) + 0.5) / width * 2 * np.pi - np.pi
    theta = np.pi / 2 - (np.arange(height) + 0.5) / height * np.pi
    return np.meshgrid(phi, theta)


def cap_mask(phi, theta, blob: Blob) -> np.ndarray:
    px, py, pz = sphere_to_xyz(phi, theta)
    cx, cy, cz = sphere_to_xyz(math.radians(blob.phi_deg), math.radians(blob.theta_deg))
    return px * cx + py * cy + pz * cz >= math.cos(math.radians(blob.radius_deg))


def smooth_background(phi, theta) -> np.ndarray:
    r = 128 + 60 * np.cos(theta) * np.cos(phi)
    g = 128 + 60 * np.sin(theta)
    b = 128 + 60 * np.cos(theta) * np.sin(2 * phi)
    return np.stack([r, g, b], axis=-1)


def line_pattern(phi, theta, spacing_deg: float = 15.0, width_deg: float = 0.4) -> np.ndarray:
    """Scene-straight lines: meridians (vertical lines) and, on the z = 1
    plane in front and behind, horizontal lines at fixed heights (radial
    lines converging at the horizon)."""
    px, py, pz = sphere_to_xyz(phi, theta)
    on = np.zeros(phi.shape, dtype=bool)
    step = math.radians(spacing_deg)
    half = math.radians(width_deg) / 2
    lon = np.mod(phi + step / 2, step) - step / 2
    on |= np.abs(lon) * np.cos(theta) < half
    # horizontal scene lines: great circles through the x axis at several pitches
    for pitch_deg in (-40, -25, -10, 10, 25, 40):
        a = math.radians(pitch_deg)
        nrm = np.array([0.0, math.cos(a), -math.sin(a)])
        on |= np.abs(px * nrm[0] + py * nrm[1] + pz * nrm[2]) < math.sin(half)
    return on


def make_scene(width: int = 2048, height: int = 1024, blobs=(), lines: bool = True):
    """Colour ERI and class-label ERI for the given objects."""
    phi, theta = eri_grid(width, height)
    img = smooth_background(phi, theta)
    if lines:
        img[line_pattern(phi, theta)] = (20, 20, 20)
    labels = np.zeros((height, width), dtype=np.int64)
    for blob in blobs:
        mask = cap_mask(phi, theta, blob)
        check = ((np.floor(np.degrees(phi) / 3) + np.floor(np.degrees(theta) / 3)) % 2)[..., None]
        img[mask] = (np.array(blob.color) * (0.75 + 0.25 * check))[mask]
        labels[mask] = blob.class_label
    return Raster.color(np.clip(np.rint(img), 0, 255)), Raster.label(labels)


def corner_blob(fraction: float = 0.8, radius_deg: float = 8.0, f_h_deg: float = 150.0, ar: float = 16 / 9,
                params=None, **kw) -> Blob:
    """Blob centred ``fraction`` of the way from the view centre to the
    lower-left corner of a viewport (default projection Pannini(1, 1))."""
    from .projections import PanniniParams

    params = params or PanniniParams(1.0, 1.0)
    hw, hh = params.half_extent(math.radians(f_h_deg), ar)
    phi, theta = params.backward(-fraction * hw, -fraction * hh)
    return Blob(round(math.degrees(phi), 2), round(math.degrees(theta), 2), radius_deg, **kw)


CORNER_OBJECT = corner_blob()
