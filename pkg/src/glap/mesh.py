"""Background/foreground meshes and the content-aware mesh optimisation.

Meshes live in grid-index space: vertex (n, m) of the undeformed mesh sits at
(m + 0.5, n + 0.5) and the viewport spans [0, w_m] x [0, h_m], with y
pointing down. A mesh vertex o_i is a *source* position: the output pixel at
b_i samples VP_b at o_i.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .imaging import LABEL, Raster
from .projections import EPS_DOM, PanniniParams, ViewportSpec, viewport_plane_extent
from .segmentation import MIN_OBJECT_FRACTION, significant_objects

MESH_DIVISOR = 10
D_F_OFFSET = 0.2
VC_F = 0.0
ITERS = 100
LEARNING_RATE = 0.02
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
LR_UNITS = ("plane", "grid")
BOUNDARY_SIDES = {"source": -1, "printed": 1}
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_FLOOR = 1.0  # grid units squared
DIVERGENCE_PATIENCE = 5  # consecutive iterations above the limit
TERM_NAMES = ("E_c", "E_ld", "E_s", "E_a")


class MeshDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnergyWeights:
    lambda_c: float = 0.3
    lambda_b: float = 1.5
    lambda_s: float = 0.5
    lambda_a: float = 3.0

    def __post_init__(self):
        for name in ("lambda_c", "lambda_b", "lambda_s", "lambda_a"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {val}")

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda_c, self.lambda_b, self.lambda_s, self.lambda_a])


@dataclass(frozen=True, eq=False)
class VertexMesh:
    vertices: np.ndarray  # (h_m, w_m, 2) as (x, y)

    def __post_init__(self):
        v = self.vertices
        if v.ndim != 3 or v.shape[2] != 2:
            raise ValueError(f"vertices must be (h_m, w_m, 2), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("mesh vertices must be finite")

    @property
    def h_m(self) -> int:
        return self.vertices.shape[0]

    @property
    def w_m(self) -> int:
        return self.vertices.shape[1]

    @classmethod
    def uniform(cls, w_m: int, h_m: int) -> "VertexMesh":
        xs = np.arange(w_m) + 0.5
        ys = np.arange(h_m) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        return cls(np.stack([gx, gy], axis=-1))


@dataclass(frozen=True, eq=False)
class MeshPair:
    m_b: VertexMesh
    m_f: VertexMesh
    params_b: PanniniParams
    params_f: PanniniParams
    clamped: np.ndarray  # (h_m, w_m) bool, vertices pulled back into params_b's domain
    plane_scale: tuple[float, float] = (1.0, 1.0)  # grid units per plane unit along x, y


def mesh_size(width_px: int, height_px: int, divisor: int = MESH_DIVISOR) -> tuple[int, int]:
    return max(2, width_px // divisor), max(2, height_px // divisor)


def foreground_params(params_b: PanniniParams, offset: float = D_F_OFFSET, vc_f: float = VC_F) -> PanniniParams:
    return PanniniParams(round(params_b.d + offset, 10), vc_f)


def grid_to_plane(n, m, params: PanniniParams, f_h: float, w_m: int, h_m: int, ar: float):
    """Plane coordinates of mesh position (row n, column m); fractional ok."""
    hw, hh, _ = viewport_plane_extent(params.d, f_h, ar)
    x = 2.0 * hw * ((np.asarray(m, dtype=float) + 0.5) / w_m - 0.5)
    y = 2.0 * hh * (0.5 - (np.asarray(n, dtype=float) + 0.5) / h_m)
    return x, y


def plane_to_grid(x, y, params: PanniniParams, f_h: float, w_m: int, h_m: int, ar: float):
    """Inverse of the affine part of :func:`grid_to_plane`, as (u, v) = (m+0.5, n+0.5)."""
    hw, hh, _ = viewport_plane_extent(params.d, f_h, ar)
    u = (np.asarray(x) / (2.0 * hw) + 0.5) * w_m
    v = (0.5 - np.asarray(y) / (2.0 * hh)) * h_m
    return u, v


def _clamp_to_domain(phi, theta, params: PanniniParams):
    lo = 0.0 if params.vc > 0 else -params.d
    margin = 10 * EPS_DOM
    phi_max = math.acos(lo + margin) if lo + margin > -1 else math.pi
    theta_max = math.pi / 2 - margin
    return np.clip(phi, -phi_max, phi_max), np.clip(theta, -theta_max, theta_max)


def build_meshes(
    params_b: PanniniParams, params_f: PanniniParams, spec: ViewportSpec, w_m: int, h_m: int
) -> MeshPair:
    """M_b is the uniform grid. M_f holds, for each uniform position of a
    viewport rendered with ``params_f``, where that sphere point sits in VP_b."""
    hw, hh, _ = viewport_plane_extent(params_b.d, spec.f_h, spec.ar)
    scale = (w_m / (2.0 * hw), h_m / (2.0 * hh))
    m_b = VertexMesh.uniform(w_m, h_m)
    if params_f == params_b:
        # the composition is the identity; skip the round-off
        return MeshPair(m_b, VertexMesh(m_b.vertices.copy()), params_b, params_f, np.zeros((h_m, w_m), bool), scale)
    n, m = np.meshgrid(np.arange(h_m), np.arange(w_m), indexing="ij")
    x_f, y_f = grid_to_plane(n, m, params_f, spec.f_h, w_m, h_m, spec.ar)
    phi, theta = params_f.backward(x_f, y_f)
    x_b, y_b = params_b.forward(phi, theta, check=False)
    clamped = ~(np.isfinite(x_b) & np.isfinite(y_b))
    if clamped.any():
        cp, ct = _clamp_to_domain(phi[clamped], theta[clamped], params_b)
        x_b[clamped], y_b[clamped] = params_b.forward(cp, ct)
    u, v = plane_to_grid(x_b, y_b, params_b, spec.f_h, w_m, h_m, spec.ar)
    m_f = VertexMesh(np.stack([u, v], axis=-1))
    return MeshPair(m_b, m_f, params_b, params_f, clamped, scale)


# --------------------------------------------------------------------------
# Correction strength


def sigmoid_strength(r, r_max: float):
    """Sigmoid of radius with value 0.01 at r = 0 and 0.99 at r = r_max."""
    r1 = r_max / 2.0
    r2 = r_max / (2.0 * math.log(99.0))
    return 1.0 / (1.0 + np.exp(-(np.asarray(r, dtype=float) - r1) / r2))


def correction_strength(n, m, w_m: int, h_m: int):
    """Correction strength of vertex (n, m) from its distance to the mesh centre.

    ``r_max`` is the distance from the centre to a corner vertex.
    """
    cx, cy = w_m / 2.0, h_m / 2.0
    r = np.hypot(np.asarray(m) + 0.5 - cx, np.asarray(n) + 0.5 - cy)
    r_max = math.hypot(cx - 0.5, cy - 0.5)
    return sigmoid_strength(r, r_max)


def vertex_labels(mesh: VertexMesh, seg_vp: Raster) -> np.ndarray:
    """Label of the viewport pixel under each vertex of ``mesh``."""
    h, w = seg_vp.data.shape
    px = np.clip(np.floor(mesh.vertices[..., 0] * w / mesh.w_m), 0, w - 1).astype(np.intp)
    py = np.clip(np.floor(mesh.vertices[..., 1] * h / mesh.h_m), 0, h - 1).astype(np.intp)
    return seg_vp.data[py, px]


# --------------------------------------------------------------------------
# Energy


@dataclass(frozen=True, eq=False)
class MeshEnergy:
    """E_t for a fixed mesh pair and segmentation.

    ``smoothness="printed"`` penalises raw edge vectors |v_i - v_j|^2;
    ``"relative"`` penalises their change from M_b. ``boundary="vertex"``
    holds each border at its undeformed vertex line, ``"domain"`` at the
    viewport edge 0 / w_m / h_m. ``boundary_side="source"`` penalises border
    vertices that move outwards (their samples would fall off VP_b);
    ``"printed"`` penalises inward moves, the forward-mesh convention.
    """

    b: np.ndarray
    f: np.ndarray
    cw: np.ndarray
    weights: EnergyWeights = field(default_factory=EnergyWeights)
    smoothness: str = "relative"
    boundary: str = "vertex"
    boundary_side: str = "source"

    def __post_init__(self):
        if self.smoothness not in ("printed", "relative"):
            raise ValueError(f"unknown smoothness form {self.smoothness!r}")
        if self.boundary not in ("vertex", "domain"):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if self.boundary_side not in BOUNDARY_SIDES:
            raise ValueError(f"unknown boundary side {self.boundary_side!r}")

    @classmethod
    def from_pair(
        cls,
        pair: MeshPair,
        seg_vp: Raster | None,
        weights: EnergyWeights = EnergyWeights(),
        *,
        min_object_fraction: float = MIN_OBJECT_FRACTION,
        smoothness: str = "relative",
        boundary: str = "vertex",
        boundary_side: str = "source",
    ) -> "MeshEnergy":
        h_m, w_m = pair.m_b.h_m, pair.m_b.w_m
        if seg_vp is None:
            cw = np.zeros((h_m, w_m))
        else:
            if seg_vp.kind != LABEL:
                raise ValueError("segmentation must be a label raster")
            labels = vertex_labels(pair.m_b, significant_objects(seg_vp, min_object_fraction))
            n, m = np.meshgrid(np.arange(h_m), np.arange(w_m), indexing="ij")
            cw = np.where(labels > 0, correction_strength(n, m, w_m, h_m), 0.0)
        return cls(pair.m_b.vertices, pair.m_f.vertices, cw, weights, smoothness, boundary, boundary_side)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        h_m, w_m = self.b.shape[:2]
        if self.boundary == "domain":
            return 0.0, float(w_m), 0.0, float(h_m)
        return float(self.b[:, 0, 0].min()), float(self.b[:, -1, 0].max()), float(self.b[0, :, 1].min()), float(self.b[-1, :, 1].max())

    def terms(self, v: np.ndarray):
        """Unweighted (E_c, E_ld, E_s, E_a) and per-term gradients."""
        return _kernels.mesh_energy_terms(v, self.b, self.f, self.cw, self.bounds, self.smoothness == "relative", BOUNDARY_SIDES[self.boundary_side])

    def __call__(self, v: np.ndarray):
        """Weighted total energy and its gradient."""
        e, g = self.terms(v)
        lam = self.weights.as_array()
        return float(lam @ e), np.tensordot(lam, g, axes=1)


def energy_total(
    v: VertexMesh | np.ndarray,
    pair: MeshPair,
    seg_vp: Raster | None,
    w: EnergyWeights = EnergyWeights(),
    **options,
):
    """E_t and its gradient with respect to every vertex coordinate."""
    verts = v.vertices if isinstance(v, VertexMesh) else np.asarray(v, dtype=float)
    return MeshEnergy.from_pair(pair, seg_vp, w, **options)(verts)


# --------------------------------------------------------------------------
# Optimisation


@dataclass(frozen=True, eq=False)
class MeshResult:
    mesh: VertexMesh
    trace: list  # rows (iter, E_c, E_ld, E_s, E_a, E_t)
    best_iter: int

    @property
    def initial_energy(self) -> float:
        return self.trace[0][-1]

    @property
    def final_energy(self) -> float:
        return self.trace[self.best_iter][-1]

    def write_trace(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["iter", *TERM_NAMES, "E_t"])
            for row in self.trace:
                out.writerow([row[0], *(repr(x) for x in row[1:])])
        return path


def optimize_mesh(
    pair: MeshPair,
    seg_vp: Raster | None,
    w: EnergyWeights = EnergyWeights(),
    iters: int = ITERS,
    lr: float = LEARNING_RATE,
    *,
    energy: MeshEnergy | None = None,
    lr_units: str = "plane",
    **options,
) -> MeshResult:
    """Adam descent on E_t starting from M_b.

    With ``lr_units="plane"`` the step size is measured in viewport plane
    units and converted per axis to grid units, which makes the iteration
    identical (up to epsilon) to running Adam on plane coordinates. With
    ``"grid"`` the step is taken in grid units directly.

    Returns the lowest-energy iterate, so E_t never ends above its start.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not lr > 0:
        raise ValueError("lr must be > 0")
    if lr_units not in LR_UNITS:
        raise ValueError(f"lr_units must be one of {LR_UNITS}, got {lr_units!r}")
    step_lr = lr * np.asarray(pair.plane_scale if lr_units == "plane" else (1.0, 1.0), dtype=float)
    if energy is None:
        energy = MeshEnergy.from_pair(pair, seg_vp, w, **options)
    lam = energy.weights.as_array()
    beta1, beta2 = ADAM_BETAS

    v = pair.m_b.vertices.copy()
    mom = np.zeros_like(v)
    sq = np.zeros_like(v)

    def evaluate(verts):
        e, g = energy.terms(verts)
        return e, float(lam @ e), np.tensordot(lam, g, axes=1)

    e, e_t, grad = evaluate(v)
    e0 = e_t
    trace = [(0, *map(float, e), e_t)]
    best_e, best_v, best_iter = e_t, v.copy(), 0
    limit = DIVERGENCE_FACTOR * max(e0, DIVERGENCE_FLOOR)
    above = 0
    for t in range(1, iters + 1):
        mom = beta1 * mom + (1 - beta1) * grad
        sq = beta2 * sq + (1 - beta2) * grad * grad
        step = (mom / (1 - beta1**t)) / (np.sqrt(sq / (1 - beta2**t)) + ADAM_EPS)
        v = v - step_lr * step
        e, e_t, grad = evaluate(v)
        trace.append((t, *map(float, e), e_t))
        # Adam's early steps have size lr whatever the gradient scale, so a
        # start near zero overshoots; the floor and patience absorb that
        above = above + 1 if e_t > limit else 0
        if not math.isfinite(e_t) or above >= DIVERGENCE_PATIENCE:
            raise MeshDivergenceError(f"E_t rose to {e_t:.6g} at iteration {t} (initial {e0:.6g})")
        if e_t < best_e:
            best_e, best_v, best_iter = e_t, v.copy(), t
    return MeshResult(VertexMesh(best_v), trace, best_iter)


# --------------------------------------------------------------------------
# Upsampling helpers shared with the warp


def lattice_upsample(values: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinearly resample per-vertex values (h_m, w_m[, C]) to pixel centres.

    Pixel centre p maps to lattice index (p + 0.5) * w_m / out_w - 0.5;
    beyond the outer vertices values are held constant.
    """
    vals = np.asarray(values, dtype=float)
    squeeze = vals.ndim == 2
    if squeeze:
        vals = vals[..., None]
    h_m, w_m = vals.shape[:2]
    gx = (np.arange(out_w) + 0.5) * w_m / out_w - 0.5
    gy = (np.arange(out_h) + 0.5) * h_m / out_h - 0.5
    u, v = np.meshgrid(gx, gy)
    out = _kernels.bilinear_sample(vals, u, v, wrap=False).reshape(out_h, out_w, -1)
    return out[..., 0] if squeeze else out


def flow_mask(m_b: VertexMesh, m_o: VertexMesh, threshold: float, out_w: int, out_h: int) -> Raster:
    """Binary mask of viewport regions moved by more than ``threshold`` grid units."""
    if m_b.vertices.shape != m_o.vertices.shape:
        raise ValueError("meshes differ in size")
    mag = np.linalg.norm(m_o.vertices - m_b.vertices, axis=-1)
    up = lattice_upsample(mag, out_w, out_h)
    return Raster((up > threshold).astype(np.int64), LABEL)
