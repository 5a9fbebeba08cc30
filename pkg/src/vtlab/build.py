"""Texture-build pipeline.

Composes the highest-resolution mip from a layout of placed source images,
derives the full mip chain by box filtering, cuts bordered pages, estimates
a per-page noise value (how much detail a page adds over its upsampled
parent quarter), and writes the paired .vtx/.vtn files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import core, image
from .core import PageId, PagePayload, TextureMeta


class LayoutError(Exception):
    """A placement overlaps another or leaves the target area."""


@dataclass
class LayoutPlacement:
    image: Union[str, np.ndarray]  # PNG path or in-memory RGB8 array
    x: int
    y: int


@dataclass
class LayoutFile:
    """Positions of source images inside the highest-resolution mip."""

    target_dim: int
    placements: list[LayoutPlacement] = field(default_factory=list)


def save_layout(layout: LayoutFile, path: str) -> None:
    entries = []
    for p in layout.placements:
        if not isinstance(p.image, str):
            raise ValueError("only path-backed placements can be saved to JSON")
        entries.append({"image": p.image, "x": p.x, "y": p.y})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"target_dim": layout.target_dim, "placements": entries}, fh, indent=2)
        fh.write("\n")


def load_layout(path: str) -> LayoutFile:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    placements = [LayoutPlacement(e["image"], int(e["x"]), int(e["y"])) for e in data["placements"]]
    return LayoutFile(int(data["target_dim"]), placements)


def _resolve(placement: LayoutPlacement, root: Optional[str]) -> np.ndarray:
    if isinstance(placement.image, np.ndarray):
        return placement.image
    path = placement.image
    if root is not None and not os.path.isabs(path):
        path = os.path.join(root, path)
    return image.load_png(path)


def compose_top(layout: LayoutFile, root: Optional[str] = None) -> np.ndarray:
    """Paste every placement into a black target_dim^2 canvas.

    Unplaced texels stay opaque black. Overlapping or out-of-bounds
    placements are rejected.
    """
    dim = layout.target_dim
    canvas = np.zeros((dim, dim, 3), dtype=np.uint8)
    taken = np.zeros((dim, dim), dtype=bool)
    for p in layout.placements:
        img = _resolve(p, root)
        h, w = img.shape[:2]
        if p.x < 0 or p.y < 0 or p.x + w > dim or p.y + h > dim:
            raise LayoutError(f"placement at ({p.x},{p.y}) size {w}x{h} leaves the {dim}^2 target")
        region = taken[p.y:p.y + h, p.x:p.x + w]
        if region.any():
            raise LayoutError(f"placement at ({p.x},{p.y}) overlaps an earlier one")
        region[:] = True
        canvas[p.y:p.y + h, p.x:p.x + w] = img
    return canvas


def build_chain(top: np.ndarray, meta: TextureMeta) -> list[np.ndarray]:
    """Mip chain indexed by level: chain[m] has edge page_size * 2^m."""
    if top.shape[0] != top.shape[1] or top.shape[0] != meta.dim_max:
        raise ValueError(f"top image must be {meta.dim_max}^2, got {top.shape[1]}x{top.shape[0]}")
    chain = [np.ascontiguousarray(top, dtype=np.uint8)]
    while chain[-1].shape[0] > meta.page_size:
        chain.append(image.box_downsample(chain[-1]))
    chain.reverse()
    return chain


def cut_page(chain: list[np.ndarray], page: PageId, border: int) -> PagePayload:
    """Cut one bordered page out of its mip image, edge-clamping outside texels."""
    mip_img = chain[page.mip]
    dim = mip_img.shape[0]
    page_size = dim >> page.mip
    x0 = page.x * page_size - border
    y0 = page.y * page_size - border
    side = page_size + 2 * border
    xs = np.clip(np.arange(x0, x0 + side), 0, dim - 1)
    ys = np.clip(np.arange(y0, y0 + side), 0, dim - 1)
    return PagePayload(page, np.ascontiguousarray(mip_img[np.ix_(ys, xs)]))


def compute_noise(chain: list[np.ndarray], meta: TextureMeta) -> np.ndarray:
    """Per-page RMSE between a page and its bilinearly upsampled parent quarter.

    Both sides are compared in luminance over the page's interior (no
    border). The root page has no parent and gets 0.
    """
    ps = meta.page_size
    half = ps // 2
    values = np.zeros(meta.total_pages, dtype=np.float32)
    for m in range(1, meta.mip_count):
        child_img = chain[m]
        parent_img = chain[m - 1]
        side = 1 << m
        for rel in range(side * side):
            x, y = core.rel_xy(rel, m)
            child = child_img[y * ps:(y + 1) * ps, x * ps:(x + 1) * ps]
            quarter = parent_img[y * half:(y + 1) * half, x * half:(x + 1) * half]
            up = image.upsample_bilinear_2x(quarter.astype(np.float64))
            diff = image.luminance(child) - image.luminance(up)
            values[core.first_abs_index(m) + rel] = math.sqrt(float(np.mean(diff * diff)))
    return values


def iter_pages(chain: list[np.ndarray], meta: TextureMeta):
    """All pages of all mips in ascending absolute order."""
    for p_abs in range(meta.total_pages):
        yield cut_page(chain, core.from_abs(p_abs, meta.mip_count), meta.border)


def meta_for_layout(layout: LayoutFile, page_size: int = 128, border: int = 4) -> TextureMeta:
    dim = layout.target_dim
    if dim < page_size or dim % page_size or dim & (dim - 1):
        raise LayoutError(f"target_dim {dim} is not page_size * 2^k for page_size {page_size}")
    mip_count = int(math.log2(dim // page_size)) + 1
    return TextureMeta(page_size=page_size, border=border, mip_count=mip_count)


def build_virtual_texture(
    layout: LayoutFile,
    vtx_path: str,
    vtn_path: str,
    page_size: int = 128,
    border: int = 4,
    root: Optional[str] = None,
) -> TextureMeta:
    """Run the whole pipeline: compose, mip, cut, noise, write both files."""
    meta = meta_for_layout(layout, page_size, border)
    chain = build_chain(compose_top(layout, root), meta)
    core.write_virtual_texture(meta, iter_pages(chain, meta), vtx_path)
    core.write_noise_table(compute_noise(chain, meta), vtn_path)
    return meta


def stitch_mip(vt: core.VirtualTextureFile, mip: int) -> np.ndarray:
    """Rebuild one mip image from the stored pages' interiors."""
    meta = vt.meta
    ps, b = meta.page_size, meta.border
    dim = meta.mip_dim(mip)
    out = np.empty((dim, dim, 3), dtype=np.uint8)
    side = 1 << mip
    for rel in range(side * side):
        x, y = core.rel_xy(rel, mip)
        px = vt.read_page(core.first_abs_index(mip) + rel).pixels
        out[y * ps:(y + 1) * ps, x * ps:(x + 1) * ps] = px[b:b + ps, b:b + ps]
    return out


def read_mip_chain(path: str) -> tuple[TextureMeta, list[np.ndarray]]:
    """Load a .vtx file back into a full in-memory mip chain."""
    with core.VirtualTextureFile(path) as vt:
        chain = [stitch_mip(vt, m) for m in range(vt.meta.mip_count)]
        return vt.meta, chain
