"""Object instances from a precomputed class-label ERI.

The semantic classes come from any offline segmenter; here they are split
into instances with 4-connected components, wrapping across the ERI seam.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .imaging import LABEL, Raster, render_viewport
from .projections import ViewportSpec

MIN_OBJECT_FRACTION = 0.0005


@dataclass(frozen=True)
class ObjectRegion:
    id: int
    class_label: int
    pixel_count: int
    # inclusive (col_min, row_min, col_max, row_max)
    bbox: tuple[int, int, int, int]


@dataclass(frozen=True, eq=False)
class SegmentationMap:
    labels: Raster  # instance ids, 0 = background
    objects: tuple[ObjectRegion, ...]

    @property
    def n_objects(self) -> int:
        return len(self.objects)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["id", "class", "pixel_count", "col_min", "row_min", "col_max", "row_max"])
            for o in self.objects:
                out.writerow([o.id, o.class_label, o.pixel_count, *o.bbox])
        return path


def connected_components(labels: Raster, wrap: bool = True) -> SegmentationMap:
    """Split equal-class regions into 4-connected object instances."""
    if labels.kind != LABEL:
        raise ValueError("connected_components needs a label raster")
    classes = labels.data
    inst = _kernels.connected_components(classes, wrap=wrap)
    n = int(inst.max()) if inst.size else 0
    objects = []
    if n:
        flat = inst.ravel()
        fg = flat > 0
        counts = np.bincount(flat, minlength=n + 1)
        rows, cols = np.divmod(np.flatnonzero(fg), inst.shape[1])
        ids = flat[fg]
        big = np.iinfo(np.int64).max
        rmin = np.full(n + 1, big)
        cmin = np.full(n + 1, big)
        rmax = np.full(n + 1, -1)
        cmax = np.full(n + 1, -1)
        np.minimum.at(rmin, ids, rows)
        np.minimum.at(cmin, ids, cols)
        np.maximum.at(rmax, ids, rows)
        np.maximum.at(cmax, ids, cols)
        cls = np.zeros(n + 1, dtype=np.int64)
        cls[ids] = classes.ravel()[fg]
        objects = [
            ObjectRegion(k, int(cls[k]), int(counts[k]), (int(cmin[k]), int(rmin[k]), int(cmax[k]), int(rmax[k])))
            for k in range(1, n + 1)
        ]
    return SegmentationMap(Raster(inst, LABEL), tuple(objects))


def render_seg_viewport(seg: SegmentationMap, spec: ViewportSpec, proj) -> Raster:
    """Nearest-neighbour rendering of the instance map into a viewport."""
    return render_viewport(seg.labels, spec, proj, interp="nearest")


def significant_objects(seg_vp: Raster, min_fraction: float = MIN_OBJECT_FRACTION) -> Raster:
    """Drop instances covering less than ``min_fraction`` of the viewport."""
    data = seg_vp.data
    counts = np.bincount(data.ravel())
    keep = counts >= min_fraction * data.size
    keep[0] = False
    return Raster(np.where(keep[data], data, 0), LABEL)
