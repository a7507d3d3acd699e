"""Grid search for the globally optimal Pannini parameters."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .measures import BendingMeasure, StretchingMeasure, bending_score, stretching_score
from .projections import PanniniParams, ViewportSpec
from .segmentation import SegmentationMap, render_seg_viewport

BETA = 0.17
D_GRID = tuple(round(0.1 * k, 10) for k in range(1, 11))
VC_GRID = tuple(round(0.1 * k, 10) for k in range(0, 11))
MEASURE_SCALE = 0.25


@dataclass(frozen=True)
class GridEntry:
    d: float
    vc: float
    stretching: float
    bending: float
    cost: float


@dataclass(frozen=True)
class GridSearchResult:
    best: PanniniParams
    cost_surface: tuple[GridEntry, ...]
    beta: float

    def entry(self, d: float, vc: float) -> GridEntry:
        for e in self.cost_surface:
            if e.d == d and e.vc == vc:
                return e
        raise KeyError((d, vc))

    def as_array(self) -> np.ndarray:
        """(len(D_GRID), len(VC_GRID)) cost table."""
        ds = sorted({e.d for e in self.cost_surface})
        vcs = sorted({e.vc for e in self.cost_surface})
        out = np.full((len(ds), len(vcs)), np.nan)
        for e in self.cost_surface:
            out[ds.index(e.d), vcs.index(e.vc)] = e.cost
        return out

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["d", "vc", "S", "B", "cost"])
            for e in self.cost_surface:
                out.writerow([f"{e.d:g}", f"{e.vc:g}", repr(e.stretching), repr(e.bending), repr(e.cost)])
        return path


def select_best(entries) -> GridEntry:
    """Lowest cost; ties go to smaller vc, then smaller d."""
    return min(entries, key=lambda e: (e.cost, e.vc, e.d))


def _minmax(vals: np.ndarray) -> np.ndarray:
    lo, hi = float(vals.min()), float(vals.max())
    return np.zeros_like(vals) if hi == lo else (vals - lo) / (hi - lo)


def optimize_global(
    seg: SegmentationMap | None,
    spec: ViewportSpec,
    beta: float = BETA,
    *,
    scale: float = MEASURE_SCALE,
    normalize: str = "absolute",
    stretching: StretchingMeasure = stretching_score,
    bending: BendingMeasure = bending_score,
    d_grid=D_GRID,
    vc_grid=VC_GRID,
) -> GridSearchResult:
    """Minimise ``beta * S(d, vc) + B(d, vc)`` over the parameter grid.

    ``S`` is measured on the instance map rendered with each candidate, at
    ``scale`` times the viewport resolution (1.0 for full resolution).
    ``normalize="minmax"`` rescales S and B over the grid before combining.
    ``seg=None`` means no objects (S = 0).
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if normalize not in ("absolute", "minmax"):
        raise ValueError(f"unknown normalisation {normalize!r}")
    small = spec.scaled(scale) if scale != 1.0 else spec
    params, s_vals, b_vals = [], [], []
    for d in d_grid:
        for vc in vc_grid:
            p = PanniniParams(d, vc)
            if seg is None or seg.n_objects == 0:
                s = 0.0
            else:
                s = stretching(render_seg_viewport(seg, small, p), small, p)
            params.append(p)
            s_vals.append(s)
            b_vals.append(bending(small, p))
    s_arr, b_arr = np.array(s_vals), np.array(b_vals)
    if normalize == "minmax":
        s_arr, b_arr = _minmax(s_arr), _minmax(b_arr)
    cost = beta * s_arr + b_arr
    entries = tuple(
        GridEntry(p.d, p.vc, float(s), float(b), float(c)) for p, s, b, c in zip(params, s_arr, b_arr, cost)
    )
    best = select_best(entries)
    return GridSearchResult(PanniniParams(best.d, best.vc), entries, beta)
