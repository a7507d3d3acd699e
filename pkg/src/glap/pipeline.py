"""The full rendering pipeline and its fixed-projection baselines."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .config import RenderConfig, config_dict
from .global_opt import GridSearchResult, optimize_global
from .imaging import COLOR, Raster, read_raster, render_viewport, write_raster
from .mesh import (
    EnergyWeights,
    MeshPair,
    MeshResult,
    build_meshes,
    flow_mask,
    foreground_params,
    mesh_size,
    optimize_mesh,
)
from .projections import GeneralPerspective, PanniniParams, SpherePoint, ViewportSpec
from .segmentation import SegmentationMap, connected_components, render_seg_viewport
from .warp import upsample_mesh, warp_image

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc

        return run

    return wrap


def viewport_spec(cfg: RenderConfig) -> ViewportSpec:
    return ViewportSpec(
        SpherePoint(math.radians(cfg.vd_phi_deg), math.radians(cfg.vd_theta_deg)),
        math.radians(cfg.fov_deg),
        cfg.width,
        cfg.height,
    )


def energy_weights(cfg: RenderConfig) -> EnergyWeights:
    return EnergyWeights(cfg.lambda_c, cfg.lambda_b, cfg.lambda_s, cfg.lambda_a)


def fixed_projection(cfg: RenderConfig, name: str | None = None):
    name = name or cfg.projection
    if name == "pannini":
        return PanniniParams(cfg.d, cfg.vc)
    if name == "gpp":
        return GeneralPerspective(cfg.d)
    if name == "rectilinear":
        return GeneralPerspective(0.0)
    if name == "stereographic":
        return GeneralPerspective(1.0)
    raise ValueError(f"{name!r} is not a fixed projection")


@dataclass(eq=False)
class RunResult:
    config: RenderConfig
    vp_out: Raster
    vp_b: Raster | None = None
    seg_vp: Raster | None = None
    segmentation: SegmentationMap | None = None
    search: GridSearchResult | None = None
    pair: MeshPair | None = None
    mesh: MeshResult | None = None
    warp_field: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    def manifest(self) -> dict:
        cfg = self.config
        results: dict = {"projection": cfg.projection, "degraded": bool(self.warnings)}
        if self.search is not None:
            b = self.search.best
            results.update(d_b=b.d, vc_b=b.vc)
        if self.pair is not None:
            results.update(
                d_f=self.pair.params_f.d,
                vc_f=self.pair.params_f.vc,
                mesh_w=self.pair.m_b.w_m,
                mesh_h=self.pair.m_b.h_m,
                clamped_vertices=int(self.pair.clamped.sum()),
            )
        if self.mesh is not None:
            results.update(
                energy_initial=self.mesh.initial_energy,
                energy_final=self.mesh.final_energy,
                best_iter=self.mesh.best_iter,
            )
        if self.segmentation is not None:
            results["objects"] = self.segmentation.n_objects
        return {
            "glap_version": __version__,
            "kernel_backend": _kernels.get_backend(),
            "config": config_dict(cfg),
            "results": results,
            "warnings": list(self.warnings),
        }

    def write(self, out_dir=None) -> dict[str, Path]:
        out = Path(out_dir or self.config.out)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"vp_out": write_raster(self.vp_out, out / "vp_out.png")}
        if self.vp_b is not None and self.vp_b is not self.vp_out:
            paths["vp_b"] = write_raster(self.vp_b, out / "vp_b.png")
        if self.seg_vp is not None:
            paths["vp_b_seg"] = write_raster(self.seg_vp, out / "vp_b_seg.png")
        if self.segmentation is not None:
            paths["objects"] = self.segmentation.write_csv(out / "objects.csv")
        if self.search is not None:
            paths["cost_surface"] = self.search.write_csv(out / "cost_surface.csv")
        if self.mesh is not None:
            paths["energy_trace"] = self.mesh.write_trace(out / "energy_trace.csv")
            if self.config.flow_mask:
                mask = flow_mask(self.pair.m_b, self.mesh.mesh, self.config.flow_threshold, self.vp_out.width, self.vp_out.height)
                paths["flow_mask"] = write_raster(Raster(mask.data * 255, mask.kind), out / "flow_mask.png")
                paths["flow_overlay"] = write_raster(flow_overlay(self.vp_b, mask), out / "flow_overlay.png")
        manifest = out / "manifest.json"
        manifest.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True))
        paths["manifest"] = manifest
        return paths


def flow_overlay(vp_b: Raster, mask: Raster, alpha: float = 0.5) -> Raster:
    img = vp_b.data.astype(float)
    green = np.array([0.0, 255.0, 0.0])
    sel = mask.data > 0
    img[sel] = (1 - alpha) * img[sel] + alpha * green
    return Raster(np.clip(np.rint(img), 0, 255).astype(np.uint8), COLOR)


@_stage("segmentation")
def _segment(labels: Raster | None):
    return None if labels is None else connected_components(labels, wrap=True)


@_stage("global optimisation")
def _global(seg, spec, cfg):
    return optimize_global(seg, spec, cfg.beta, scale=cfg.measure_scale, normalize=cfg.normalize)


@_stage("viewport rendering")
def _render(eri, seg, spec, params):
    vp_b = render_viewport(eri, spec, params)
    seg_vp = None if seg is None else render_seg_viewport(seg, spec, params)
    return vp_b, seg_vp


@_stage("mesh creation")
def _meshes(params_b, spec, cfg):
    w_m, h_m = mesh_size(spec.width_px, spec.height_px, cfg.mesh_divisor)
    params_f = foreground_params(params_b, cfg.d_f_offset, cfg.vc_f)
    return build_meshes(params_b, params_f, spec, w_m, h_m)


@_stage("mesh optimisation")
def _optimize(pair, seg_vp, cfg):
    return optimize_mesh(
        pair,
        seg_vp,
        energy_weights(cfg),
        cfg.iters,
        cfg.lr,
        lr_units=cfg.lr_units,
        smoothness=cfg.smoothness,
        boundary=cfg.boundary,
        boundary_side=cfg.boundary_side,
        min_object_fraction=cfg.min_object_fraction,
    )


@_stage("warping")
def _warp(vp_b, result, spec):
    fld = upsample_mesh(result.mesh, spec.width_px, spec.height_px)
    return fld, warp_image(vp_b, fld)


def run(cfg: RenderConfig, eri: Raster, labels: Raster | None = None) -> RunResult:
    """Render one viewport according to ``cfg``."""
    spec = viewport_spec(cfg)
    if cfg.projection not in ("glap", "gap"):
        proj = fixed_projection(cfg)
        vp = _stage("viewport rendering")(render_viewport)(eri, spec, proj)
        return RunResult(cfg, vp)

    warnings = []
    if labels is None and cfg.projection == "glap":
        msg = "no label map given: objects are unknown, output is the globally optimised viewport only"
        log.warning(msg)
        warnings.append(msg)
    seg = _segment(labels)
    search = _global(seg, spec, cfg)
    vp_b, seg_vp = _render(eri, seg, spec, search.best)
    res = RunResult(cfg, vp_b, vp_b=vp_b, seg_vp=seg_vp, segmentation=seg, search=search, warnings=warnings)
    if cfg.projection == "gap" or labels is None:
        return res
    pair = _meshes(search.best, spec, cfg)
    result = _optimize(pair, seg_vp, cfg)
    fld, vp_out = _warp(vp_b, result, spec)
    res.vp_out, res.pair, res.mesh, res.warp_field = vp_out, pair, result, fld
    return res


def run_files(cfg: RenderConfig) -> RunResult:
    eri = _stage("input")(read_raster)(cfg.eri, COLOR)
    labels = _stage("input")(read_raster)(cfg.labels, "label") if cfg.labels else None
    return run(cfg, eri, labels)
