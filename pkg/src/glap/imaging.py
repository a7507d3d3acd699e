"""Rasters, equirectangular sampling, viewport rendering and cubemaps."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import _kernels
from .projections import ViewportSpec, pixel_plane_coords, rotate_to_vd, xyz_to_sphere

COLOR = "color"
LABEL = "label"


class RenderError(RuntimeError):
    """Rendering hit a pixel outside the projection domain."""

    def __init__(self, message: str, pixel: tuple[int, int] | None = None):
        super().__init__(message)
        self.pixel = pixel


@dataclass(frozen=True, eq=False)
class Raster:
    """An (H, W) label image or an (H, W, 3) uint8 colour image."""

    data: np.ndarray
    kind: str = COLOR

    def __post_init__(self):
        d = self.data
        if self.kind == COLOR:
            if d.ndim != 3 or d.shape[2] != 3:
                raise ValueError(f"colour raster must be (H, W, 3), got {d.shape}")
            if d.dtype != np.uint8:
                raise ValueError("colour raster must be uint8")
        elif self.kind == LABEL:
            if d.ndim != 2:
                raise ValueError(f"label raster must be (H, W), got {d.shape}")
            if not np.issubdtype(d.dtype, np.integer):
                raise ValueError("label raster must hold integers")
            if d.size and d.min() < 0:
                raise ValueError("label raster must be non-negative")
        else:
            raise ValueError(f"unknown raster kind {self.kind!r}")
        d.setflags(write=False)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3 if self.kind == COLOR else 1

    @classmethod
    def color(cls, data) -> "Raster":
        return cls(np.array(data, dtype=np.uint8), COLOR)

    @classmethod
    def label(cls, data) -> "Raster":
        return cls(np.array(data, dtype=np.int64), LABEL)


# --------------------------------------------------------------------------
# I/O


def read_raster(path, kind: str = COLOR) -> Raster:
    img = Image.open(path)
    if kind == COLOR:
        return Raster.color(np.asarray(img.convert("RGB")))
    arr = np.asarray(img)
    if arr.ndim == 3:
        # palette-free RGB label images: use the first channel
        arr = arr[..., 0]
    return Raster.label(arr.astype(np.int64))


def write_raster(raster: Raster, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if raster.kind == COLOR:
        Image.fromarray(np.ascontiguousarray(raster.data)).save(path)
        return path
    top = int(raster.data.max()) if raster.data.size else 0
    if top > 65535:
        raise ValueError("label ids above 65535 cannot be written to PNG/PGM")
    dtype = np.uint8 if top <= 255 else np.uint16
    Image.fromarray(np.ascontiguousarray(raster.data.astype(dtype))).save(path)
    return path


# --------------------------------------------------------------------------
# Equirectangular sampling


def eri_pixel_coords(eri_w: int, eri_h: int, phi, theta):
    u = (np.asarray(phi) / (2 * np.pi) + 0.5) * eri_w - 0.5
    v = (0.5 - np.asarray(theta) / np.pi) * eri_h - 0.5
    return u, v


def sample_eri(eri: Raster, phi, theta, interp: str | None = None) -> np.ndarray:
    """Look up ERI values at sphere coordinates.

    Longitude wraps, latitude clamps. ``interp`` defaults to bilinear for
    colour and nearest for labels; bilinear on labels is refused. Colour
    results are float64 (unrounded), label results keep the input dtype.
    """
    if interp is None:
        interp = "bilinear" if eri.kind == COLOR else "nearest"
    if interp == "bilinear" and eri.kind == LABEL:
        raise ValueError("bilinear interpolation would invent labels; use nearest")
    phi = np.asarray(phi, dtype=float)
    shape = phi.shape
    u, v = eri_pixel_coords(eri.width, eri.height, phi, theta)
    if interp == "nearest":
        out = _kernels.nearest_sample(eri.data, u, v, wrap=True)
    elif interp == "bilinear":
        img = eri.data if eri.data.ndim == 3 else eri.data[..., None]
        out = _kernels.bilinear_sample(img, u, v, wrap=True)
        if eri.data.ndim == 2:
            out = out[:, 0]
    else:
        raise ValueError(f"unknown interpolation {interp!r}")
    return out.reshape(shape + out.shape[1:])


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


# --------------------------------------------------------------------------
# Viewports


def viewport_sphere_coords(spec: ViewportSpec, proj):
    """World sphere coordinates of every viewport pixel centre.

    Returns ``(phi, theta)`` arrays of shape (H, W). Raises
    :class:`RenderError` naming the first pixel outside the domain.
    """
    hw, hh = proj.half_extent(spec.f_h, spec.ar)
    x, y = pixel_plane_coords(hw, hh, spec.width_px, spec.height_px)
    phi, theta = proj.backward(x, y, check=False)
    bad = ~(np.isfinite(phi) & np.isfinite(theta))
    if bad.any():
        n, m = (int(i) for i in np.argwhere(bad)[0])
        raise RenderError(
            f"pixel (row={n}, col={m}) is outside the domain of {proj.label()}", pixel=(n, m)
        )
    return rotate_to_vd(phi, theta, spec.vd.phi, spec.vd.theta)


def render_viewport(eri: Raster, spec: ViewportSpec, proj, interp: str | None = None) -> Raster:
    """Render a planar viewport of ``eri`` through projection ``proj``."""
    phi, theta = viewport_sphere_coords(spec, proj)
    vals = sample_eri(eri, phi, theta, interp)
    if eri.kind == COLOR:
        return Raster(to_uint8(vals), COLOR)
    return Raster(np.asarray(vals, dtype=np.int64), LABEL)


# --------------------------------------------------------------------------
# Cubemaps

FACES = ("front", "back", "left", "right", "top", "bottom")


def _face_dirs(face: str, a, b):
    one = np.ones_like(a)
    return {
        "front": (a, b, one),
        "right": (one, b, -a),
        "back": (-a, b, -one),
        "left": (-one, b, a),
        "top": (a, one, -b),
        "bottom": (a, -one, b),
    }[face]


@dataclass(frozen=True, eq=False)
class CubeFaces:
    front: Raster
    back: Raster
    left: Raster
    right: Raster
    top: Raster
    bottom: Raster

    def __post_init__(self):
        sizes = {(f.width, f.height) for f in self.faces().values()}
        if len(sizes) != 1:
            raise ValueError(f"cube faces differ in size: {sizes}")
        (w, h), = sizes
        if w != h:
            raise ValueError("cube faces must be square")
        if len({f.kind for f in self.faces().values()}) != 1:
            raise ValueError("cube faces mix colour and label rasters")

    def faces(self) -> dict[str, Raster]:
        return {name: getattr(self, name) for name in FACES}

    @property
    def size(self) -> int:
        return self.front.width

    @property
    def kind(self) -> str:
        return self.front.kind


def eri_to_cube(eri: Raster, face_px: int) -> CubeFaces:
    """Six 90x90 degree rectilinear faces along the +-x, +-y, +-z axes."""
    if face_px < 2:
        raise ValueError("face_px must be >= 2")
    t = 2.0 * (np.arange(face_px) + 0.5) / face_px - 1.0
    a = np.broadcast_to(t, (face_px, face_px))
    b = np.broadcast_to(-t[:, None], (face_px, face_px))
    out = {}
    for face in FACES:
        phi, theta = xyz_to_sphere(*_face_dirs(face, a, b))
        vals = sample_eri(eri, phi, theta)
        out[face] = Raster(to_uint8(vals), COLOR) if eri.kind == COLOR else Raster(vals.astype(np.int64), LABEL)
    return CubeFaces(**out)


def cube_to_eri(faces: CubeFaces, out_w: int, out_h: int) -> Raster:
    """Reassemble an equirectangular raster from cube faces.

    Each direction picks the face of its dominant axis; exact ties go to x,
    then y, then z.
    """
    n = faces.size
    phi = (np.arange(out_w) + 0.5) / out_w * 2 * np.pi - np.pi
    theta = np.pi / 2 - (np.arange(out_h) + 0.5) / out_h * np.pi
    phi, theta = np.meshgrid(phi, theta)
    ct = np.cos(theta)
    px, py, pz = ct * np.sin(phi), np.sin(theta), ct * np.cos(phi)
    comp = np.stack([px, py, pz])
    axis = np.argmax(np.abs(comp), axis=0)
    sign = np.take_along_axis(comp, axis[None], 0)[0] >= 0

    is_color = faces.kind == COLOR
    out = np.zeros((out_h, out_w, 3) if is_color else (out_h, out_w), dtype=np.float64 if is_color else np.int64)
    # (face, axis, sign, a-coordinate, b-coordinate) from the inverse of _face_dirs
    specs = (
        ("front", 2, True, px / pz, py / pz),
        ("back", 2, False, px / pz, -py / pz),
        ("right", 0, True, -pz / px, py / px),
        ("left", 0, False, -pz / px, -py / px),
        ("top", 1, True, px / py, -pz / py),
        ("bottom", 1, False, -px / py, -pz / py),
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        for face, ax, sgn, a, b in specs:
            sel = (axis == ax) & (sign == sgn)
            if not sel.any():
                continue
            u = (a[sel] + 1.0) / 2.0 * n - 0.5
            v = (1.0 - b[sel]) / 2.0 * n - 0.5
            data = getattr(faces, face).data
            if is_color:
                out[sel] = _kernels.bilinear_sample(data, u, v, wrap=False)
            else:
                out[sel] = _kernels.nearest_sample(data, u, v, wrap=False)
    if is_color:
        return Raster(to_uint8(out), COLOR)
    return Raster(out, LABEL)

