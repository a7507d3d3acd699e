"""Mesh-driven backward warping of the globally optimised viewport."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .imaging import COLOR, Raster, to_uint8
from .mesh import VertexMesh, lattice_upsample


def upsample_mesh(m: VertexMesh, out_w: int, out_h: int) -> np.ndarray:
    """Dense (out_h, out_w, 2) map of source pixel coordinates (col, row).

    Vertex displacements from the uniform grid are interpolated bilinearly
    and scaled from grid units to pixels, so the identity mesh gives the
    identity map exactly.
    """
    if out_w < m.w_m or out_h < m.h_m:
        raise ValueError("output must be at least as large as the mesh")
    disp = m.vertices - VertexMesh.uniform(m.w_m, m.h_m).vertices
    up = lattice_upsample(disp, out_w, out_h)
    cols, rows = np.meshgrid(np.arange(out_w, dtype=float), np.arange(out_h, dtype=float))
    return np.stack([cols + up[..., 0] * (out_w / m.w_m), rows + up[..., 1] * (out_h / m.h_m)], axis=-1)


def identity_field(out_w: int, out_h: int) -> np.ndarray:
    cols, rows = np.meshgrid(np.arange(out_w, dtype=float), np.arange(out_h, dtype=float))
    return np.stack([cols, rows], axis=-1)


def warp_image(vp_b: Raster, field: np.ndarray) -> Raster:
    """Each output pixel samples ``vp_b`` at ``field[row, col]``.

    Colour uses bilinear interpolation, labels nearest; lookups outside the
    image replicate the border.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim != 3 or field.shape[2] != 2:
        raise ValueError(f"field must be (H, W, 2), got {field.shape}")
    h, w = field.shape[:2]
    u, v = field[..., 0].ravel(), field[..., 1].ravel()
    if vp_b.kind == COLOR:
        vals = _kernels.bilinear_sample(vp_b.data, u, v, wrap=False)
        return Raster(to_uint8(vals).reshape(h, w, 3), COLOR)
    vals = _kernels.nearest_sample(vp_b.data, u, v, wrap=False)
    return Raster(vals.reshape(h, w).astype(np.int64), vp_b.kind)
