"""Command-line front end: build textures, retexture scenes, render references,
run streaming simulations, and evaluate quality.

Every experiment is one declarative JSON config; flags override individual
fields so parameter sweeps stay one-liners.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import build, core, image, layout, metrics, render, stream
from .runtime import VtRuntime


class ConfigError(Exception):
    pass


def _ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _load_config(path) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _require(cfg: dict, key: str):
    if key not in cfg or cfg[key] is None:
        raise ConfigError(f"missing required config field: {key}")
    return cfg[key]


def _frame_name(i: int) -> str:
    return f"frame_{i:04d}.png"


def cmd_build(args) -> int:
    lay = build.load_layout(args.layout)
    root = os.path.dirname(os.path.abspath(args.layout))
    vtx = args.out
    vtn = os.path.splitext(vtx)[0] + ".vtn"
    meta = build.build_virtual_texture(lay, vtx, vtn, page_size=args.page_size,
                                       border=args.border, root=root)
    print(f"wrote {vtx} ({meta.total_pages} pages, {meta.mip_count} mips, "
          f"dim {meta.dim_max}) and {vtn}")
    return 0


def cmd_retexture(args) -> int:
    mesh = layout.load_scene(args.scene)
    root = os.path.dirname(os.path.abspath(args.scene))
    sources = {}
    for name, rel in mesh.textures.items():
        path = rel if os.path.isabs(rel) else os.path.join(root, rel)
        sources[name] = image.load_png(path)
    result = layout.retexture(mesh, sources, page_size=args.page_size)
    out = _ensure_dir(args.out)
    img_dir = _ensure_dir(os.path.join(out, "textures"))
    placements = []
    for i, p in enumerate(result.layout.placements):
        name = f"face{i:04d}.png"
        image.save_png(p.image, os.path.join(img_dir, name))
        placements.append(build.LayoutPlacement(os.path.join("textures", name), p.x, p.y))
    build.save_layout(build.LayoutFile(result.layout.target_dim, placements),
                      os.path.join(out, "layout.json"))
    layout.save_scene(result.mesh, os.path.join(out, "scene.json"))
    print(f"retextured {len(result.placements)} faces into a "
          f"{result.layout.target_dim}^2 layout under {out}")
    return 0


def _viewport(spec: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in spec.lower().split("x"))
    except Exception as exc:
        raise ConfigError(f"viewport must look like 640x480, got {spec!r}") from exc
    if w % 2 or h % 2:
        raise ConfigError("viewport dimensions must be even")
    return w, h


def cmd_reference(args) -> int:
    mesh = layout.load_scene(args.scene)
    cameras = stream.load_camera_path(args.path)
    meta, chain = build.read_mip_chain(args.vtx)
    viewport = _viewport(args.viewport)
    out = _ensure_dir(args.out)
    for i, cam in enumerate(cameras):
        fb = render.render_reference(mesh, cam, meta, chain, viewport, args.filter)
        image.save_png(fb.color, os.path.join(out, _frame_name(i)))
    print(f"rendered {len(cameras)} reference frames to {out}")
    return 0


def _sim_setup(cfg: dict):
    vtx = _require(cfg, "vtx")
    mesh = layout.load_scene(_require(cfg, "scene"))
    cameras = stream.load_camera_path(_require(cfg, "camera_path"))
    vt = core.VirtualTextureFile(vtx)

    noise = None
    heur = stream.HeuristicConfig(
        kind=cfg.get("heuristic", "pixel_sum"),
        seed=int(cfg.get("seed", 0)),
        noise_scaling=bool(cfg.get("noise_scaling", False)),
        lookahead=bool(cfg.get("lookahead", False)),
        lookahead_weight=float(cfg.get("lookahead_weight", 0.5)),
        lookahead_damping=bool(cfg.get("lookahead_damping", False)),
    )
    sim = stream.SimConfig(
        budget=int(cfg.get("budget", 5)),
        lock_mips=int(cfg.get("lock_mips", 0)),
        preload_visible=bool(cfg.get("preload_visible", True)),
        ancestor=cfg.get("ancestor", "none"),
        noise_skip=bool(cfg.get("noise_skip", False)),
        latency=int(cfg.get("latency", 0)),
    )
    if heur.noise_scaling or sim.noise_skip:
        vtn = cfg.get("vtn")
        if not vtn or not os.path.exists(vtn):
            raise ConfigError("noise_scaling/noise_skip requires an existing vtn file")
        noise = core.read_noise_table(vtn, vt.meta)

    frames_x = int(cfg.get("cache_frames_x", 16))
    frames_y = int(cfg.get("cache_frames_y", 16))
    rt = VtRuntime(vt, frames_x, frames_y, noise=noise)
    viewport = _viewport(cfg.get("viewport", "256x256"))
    mode = cfg.get("filter", "nearest")
    return mesh, cameras, rt, sim, heur, viewport, mode


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    for key in ("seed", "budget", "heuristic", "ancestor", "lock_mips", "out"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if args.noise:
        cfg["noise_scaling"] = True
    if args.lookahead:
        cfg["lookahead"] = True
    mesh, cameras, rt, sim, heur, viewport, mode = _sim_setup(cfg)
    out = _ensure_dir(_require(cfg, "out"))

    result = stream.simulate(mesh, cameras, rt, sim, heur, viewport, mode)
    for i, fb in enumerate(result.frames):
        image.save_png(fb.color, os.path.join(out, _frame_name(i)))
    stream.save_stream_log(result.log, os.path.join(out, "stream_log.csv"))
    rt.vt.close()
    print(f"simulated {len(result.frames)} frames, dispatched {len(result.log)} pages "
          f"({heur.kind}, budget {sim.budget}); wrote {out}")
    return 0


def cmd_evaluate(args) -> int:
    params = metrics.SsimParams(window=args.window, stride=args.stride)

    def load_frames(folder):
        names = sorted(n for n in os.listdir(folder) if n.endswith(".png"))
        return [image.load_png(os.path.join(folder, n)) for n in names]

    ref = load_frames(args.ref)
    test = load_frames(args.test)
    records = metrics.report(ref, test, params, csv_path=args.out)
    mean_ssim = sum(r.ssim for r in records) / len(records) if records else float("nan")
    print(f"evaluated {len(records)} frames, mean ssim {mean_ssim:.6f}; wrote {args.out}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vtlab",
                                     description="virtual texturing laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="compile a layout of images into a .vtx/.vtn pair")
    p.add_argument("--layout", required=True, help="layout JSON")
    p.add_argument("--page-size", type=int, default=128)
    p.add_argument("--border", type=int, default=4)
    p.add_argument("--out", required=True, help="output .vtx path")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("retexture", help="give every mesh face a unique texture region")
    p.add_argument("--scene", required=True, help="scene JSON")
    p.add_argument("--page-size", type=int, default=128)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_retexture)

    p = sub.add_parser("reference", help="render budget-free reference frames")
    p.add_argument("--scene", required=True)
    p.add_argument("--vtx", required=True)
    p.add_argument("--path", required=True, help="camera path file")
    p.add_argument("--viewport", default="256x256")
    p.add_argument("--filter", default="nearest",
                   choices=("nearest", "bilinear", "trilinear"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("simulate", help="run a budgeted streaming simulation")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--heuristic",
                   choices=stream.HeuristicConfig.KINDS)
    p.add_argument("--noise", action="store_true", help="enable noise scaling")
    p.add_argument("--lookahead", action="store_true", help="enable the prediction pass")
    p.add_argument("--ancestor", choices=("none", "intern", "extern"))
    p.add_argument("--lock-mips", dest="lock_mips", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="compare two frame directories")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.exit(2, f"error: {exc}\n")
    except Exception as exc:  # surface module errors as diagnostics, not tracebacks
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
