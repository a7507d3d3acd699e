"""Command-line entry point: ``glap {render,compare,eval,cubemap,measures}``.

Exit codes: 0 success, 2 configuration or usage error, 3 projection-domain
error, 1 any other stage failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import __version__, pceval
from .config import ConfigError, build_config, load_config_file
from .imaging import COLOR, CubeFaces, FACES, Raster, RenderError, cube_to_eri, eri_to_cube, read_raster, write_raster
from .pipeline import StageError, run, run_files, viewport_spec
from .projections import ProjectionDomainError
from .segmentation import connected_components

log = logging.getLogger("glap")

EXIT_OK, EXIT_STAGE, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

# command-line flag -> config key
VIEW_FLAGS = {
    "eri": "eri",
    "labels": "labels",
    "out": "out",
    "projection": "projection",
    "fov": "fov_deg",
    "vd_phi": "vd_phi_deg",
    "vd_theta": "vd_theta_deg",
    "width": "width",
    "height": "height",
    "d": "d",
    "vc": "vc",
}


def _add_view_args(p: argparse.ArgumentParser, projection: bool = True):
    p.add_argument("--config", help="key=value file or JSON run manifest")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--eri", help="equirectangular colour image (PNG/PGM)")
    p.add_argument("--labels", help="equirectangular class-label image")
    p.add_argument("--out", help="output directory")
    if projection:
        p.add_argument("--projection", help="glap, gap, pannini, gpp, rectilinear or stereographic")
        p.add_argument("--d", type=float, help="fixed projection distance parameter")
        p.add_argument("--vc", type=float, help="fixed Pannini vertical compression")
    p.add_argument("--fov", type=float, help="horizontal FoV in degrees")
    p.add_argument("--vd-phi", type=float, help="viewing direction longitude in degrees")
    p.add_argument("--vd-theta", type=float, help="viewing direction latitude in degrees")
    p.add_argument("--width", type=int, help="viewport width in pixels")
    p.add_argument("--height", type=int, help="viewport height in pixels")


def config_from_args(args):
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for flag, key in VIEW_FLAGS.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    return build_config(file_values, overrides)


# --------------------------------------------------------------------------
# Subcommands


def cmd_render(args) -> int:
    cfg = config_from_args(args)
    if not cfg.eri:
        raise ConfigError("no ERI given (--eri or eri= in the config)")
    res = run_files(cfg)
    paths = res.write()
    m = res.manifest()["results"]
    if "d_b" in m:
        print(f"d_b={m['d_b']:g} vc_b={m['vc_b']:g}" + (f" d_f={m['d_f']:g} vc_f={m['vc_f']:g}" if "d_f" in m else ""))
    print(f"wrote {paths['vp_out']}")
    return EXIT_OK


def parse_projection(text: str) -> dict:
    """'glap', 'gap', 'rectilinear', 'stereographic', 'pannini:D,VC' or 'gpp:D'."""
    name, _, rest = text.strip().partition(":")
    name = name.lower()
    vals = [float(v) for v in rest.split(",") if v.strip()] if rest else []
    if name == "pannini":
        if len(vals) != 2:
            raise ConfigError(f"pannini needs d,vc: {text!r}")
        return {"projection": name, "d": vals[0], "vc": vals[1]}
    if name == "gpp":
        if len(vals) != 1:
            raise ConfigError(f"gpp needs d: {text!r}")
        return {"projection": name, "d": vals[0]}
    if vals:
        raise ConfigError(f"{name} takes no parameters: {text!r}")
    return {"projection": name}


def label_strip(img: np.ndarray, text: str, height: int = 22) -> np.ndarray:
    strip = Image.new("RGB", (img.shape[1], height), (255, 255, 255))
    ImageDraw.Draw(strip).text((6, 4), text, fill=(0, 0, 0))
    return np.concatenate([np.asarray(strip), img], axis=0)


def compose_sheet(tiles: list[np.ndarray], cols: int = 3, pad: int = 4) -> np.ndarray:
    cols = max(1, min(cols, len(tiles)))
    rows = -(-len(tiles) // cols)
    th, tw = tiles[0].shape[:2]
    sheet = np.full((rows * th + (rows + 1) * pad, cols * tw + (cols + 1) * pad, 3), 255, dtype=np.uint8)
    for k, t in enumerate(tiles):
        r, c = divmod(k, cols)
        y, x = pad + r * (th + pad), pad + c * (tw + pad)
        sheet[y : y + th, x : x + tw] = t
    return sheet


def cmd_compare(args) -> int:
    base = config_from_args(args)
    if not base.eri:
        raise ConfigError("no ERI given (--eri or eri= in the config)")
    specs = [parse_projection(p) for p in args.projections]
    eri = read_raster(base.eri, COLOR)
    labels = read_raster(base.labels, "label") if base.labels else None
    tiles = []
    for spec in specs:
        cfg = replace(base, **spec).validate()
        res = run(cfg, eri, labels)
        tag = cfg.projection
        if cfg.projection == "pannini":
            tag = f"pannini d={cfg.d:g} vc={cfg.vc:g}"
        elif cfg.projection == "gpp":
            tag = f"gpp d={cfg.d:g}"
        elif res.search is not None:
            tag = f"{cfg.projection} d_b={res.search.best.d:g} vc_b={res.search.best.vc:g}"
        tiles.append(label_strip(res.vp_out.data, tag))
    sheet = Raster.color(compose_sheet(tiles, args.cols))
    out = Path(base.out)
    out.mkdir(parents=True, exist_ok=True)
    path = write_raster(sheet, out / "compare.png")
    print(f"wrote {path} ({len(tiles)} panels)")
    return EXIT_OK


def cmd_eval(args) -> int:
    records = pceval.read_votes(args.votes)
    report = pceval.evaluate_votes(records, args.threshold)
    paths = report.write(args.out)
    if report.outliers:
        print(f"excluded {len(report.outliers)} observer(s): {', '.join(report.outliers)}")
    for image, bt in report.scores.items():
        ranked = sorted(zip(bt.stimuli, bt.log_scores), key=lambda t: -t[1])
        print(image + ": " + "  ".join(f"{s}={v:+.3f}" for s, v in ranked))
    print(f"wrote {paths['probabilities'].parent}")
    return EXIT_OK


def cmd_cubemap(args) -> int:
    out = Path(args.out)
    if args.direction == "to-cube":
        eri = read_raster(args.input, args.kind)
        cube = eri_to_cube(eri, args.face_px)
        out.mkdir(parents=True, exist_ok=True)
        for name, face in cube.faces().items():
            write_raster(face, out / f"{name}.png")
        print(f"wrote 6 faces of {args.face_px}px to {out}")
    else:
        src = Path(args.input)
        faces = {name: read_raster(src / f"{name}.png", args.kind) for name in FACES}
        if args.width is None:
            raise ConfigError("to-eri needs --width (and optionally --height)")
        eri = cube_to_eri(CubeFaces(**faces), args.width, args.height or args.width // 2)
        write_raster(eri, out)
        print(f"wrote {out}")
    return EXIT_OK


def cmd_measures(args) -> int:
    from .global_opt import optimize_global

    cfg = config_from_args(args)
    seg = connected_components(read_raster(cfg.labels, "label"), wrap=True) if cfg.labels else None
    search = optimize_global(seg, viewport_spec(cfg), cfg.beta, scale=cfg.measure_scale, normalize=cfg.normalize)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = search.write_csv(out / "cost_surface.csv")
    best = search.entry(search.best.d, search.best.vc)
    print(f"best d={best.d:g} vc={best.vc:g} cost={best.cost:.6g}; wrote {path}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="glap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"glap {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render one viewport")
    _add_view_args(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="side-by-side sheet of several projections")
    _add_view_args(p, projection=False)
    p.add_argument("projections", nargs="+", help="e.g. glap gap pannini:0.5,0 gpp:0.5 rectilinear")
    p.add_argument("--cols", type=int, default=3)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("eval", help="analyse pairwise-comparison votes")
    p.add_argument("votes", help="CSV with observer_id,image_id,stimulus_a,stimulus_b,outcome")
    p.add_argument("--out", default="pc_eval")
    p.add_argument("--threshold", type=float, default=pceval.OUTLIER_THRESHOLD)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cubemap", help="convert between equirectangular and cube faces")
    p.add_argument("direction", choices=("to-cube", "to-eri"))
    p.add_argument("input", help="ERI image (to-cube) or directory of face PNGs (to-eri)")
    p.add_argument("--out", required=True, help="face directory (to-cube) or ERI path (to-eri)")
    p.add_argument("--face-px", type=int, default=512)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--kind", choices=("color", "label"), default="color")
    p.set_defaults(func=cmd_cubemap)

    p = sub.add_parser("measures", help="dump the stretching/bending cost surface")
    _add_view_args(p, projection=False)
    p.set_defaults(func=cmd_measures)
    return ap


def _domain_cause(exc: BaseException) -> bool:
    while exc is not None:
        if isinstance(exc, (ProjectionDomainError, RenderError)):
            return True
        exc = exc.__cause__
    return False


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProjectionDomainError, RenderError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except StageError as exc:
        kind = "domain error" if _domain_cause(exc.cause) else "error"
        print(f"{kind} in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_DOMAIN if kind == "domain error" else EXIT_STAGE
    except (pceval.VoteFileError, pceval.DisconnectedComparisonError, pceval.IncompleteDesignError) as exc:
        print(f"eval error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
