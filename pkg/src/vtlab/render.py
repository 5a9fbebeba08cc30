"""Software rasterizer and the emulated virtual-texturing fragment shader.

The rasterizer is a deterministic CPU stand-in for a GPU pipeline:
perspective projection, near-plane clipping, top-left fill rule, depth test
keep-nearest, no face culling, and perspective-correct interpolation of the
virtual texture coordinates. Fragments are processed in 2x2 quads; texture
coordinate derivatives come from finite differences inside each quad, with
helper values extrapolated from the triangle plane so derivatives exist on
triangle edges (mirroring dFdx/dFdy semantics).

The shader part turns each fragment's derivatives into a mip level, the
level into a page, encodes the page into the need buffer, and samples the
page cache through the indirection table with nearest, bilinear, or
trilinear filtering. A reference path samples the mip chain directly and is
the budget-free oracle the cache path is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import TextureMeta, mip_offsets
from .layout import SceneMesh


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: position plus yaw/pitch Euler angles, vertical FOV."""

    position: tuple[float, float, float]
    yaw: float = 0.0
    pitch: float = 0.0
    fov_y: float = math.radians(60.0)
    near: float = 0.05
    far: float = 1000.0

    def __post_init__(self):
        if not 0.0 < self.near < self.far:
            raise ValueError("camera requires 0 < near < far")
        if not 0.0 < self.fov_y < math.pi:
            raise ValueError("fov must lie in (0, pi)")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Right/up/forward unit vectors. Yaw 0, pitch 0 looks along -z;
        positive yaw turns right (toward +x), positive pitch looks up."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        forward = np.array([sy * cp, sp, -cy * cp])
        right = np.array([cy, 0.0, sy])
        up = np.cross(right, forward)
        return right, up, forward


@dataclass
class FragmentBuffers:
    """Per-pixel rasterizer output for one frame."""

    s: np.ndarray       # (H, W) float64 virtual coordinate
    t: np.ndarray
    dsdx: np.ndarray    # quad finite differences
    dtdx: np.ndarray
    dsdy: np.ndarray
    dtdy: np.ndarray
    depth: np.ndarray   # view-space distance, camera.far where empty
    covered: np.ndarray  # (H, W) bool


@dataclass
class FrameBuffers:
    """Color, depth, and need-buffer outputs of one rendered frame."""

    color: np.ndarray     # (H, W, 3) uint8
    depth: np.ndarray     # (H, W) float64
    need_x: np.ndarray    # (H, W) int32, -1 where no fragment
    need_y: np.ndarray
    need_mip: np.ndarray


def scene_triangles(mesh: SceneMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten a mesh into (positions, uvs, triangle indices)."""
    tris = [f.triangles for f in mesh.faces if len(f.triangles)]
    idx = np.concatenate(tris) if tris else np.zeros((0, 3), dtype=np.int64)
    return mesh.vertices[:, :3], mesh.vertices[:, 3:5], idx


def _clip_near(poly: list[np.ndarray], near: float) -> list[np.ndarray]:
    # Sutherland-Hodgman against the z >= near half space in view coordinates.
    out: list[np.ndarray] = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        a_in, b_in = a[2] >= near, b[2] >= near
        if a_in:
            out.append(a)
        if a_in != b_in:
            f = (near - a[2]) / (b[2] - a[2])
            out.append(a + f * (b - a))
    return out


def _top_left(a: np.ndarray, b: np.ndarray) -> bool:
    # Edge a->b of a positively oriented triangle owns its boundary pixels
    # iff it is a top edge (horizontal, interior below) or a left edge.
    return (a[1] == b[1] and b[0] > a[0]) or b[1] < a[1]


def rasterize(
    positions: np.ndarray,
    uvs: np.ndarray,
    tris: np.ndarray,
    camera: Camera,
    viewport: tuple[int, int],
) -> FragmentBuffers:
    """Rasterize a triangle soup into per-pixel (s, t, derivatives, depth)."""
    width, height = viewport
    if width % 2 or height % 2:
        raise ValueError("viewport dimensions must be even")

    s_buf = np.zeros((height, width))
    t_buf = np.zeros((height, width))
    dsdx = np.zeros((height, width))
    dtdx = np.zeros((height, width))
    dsdy = np.zeros((height, width))
    dtdy = np.zeros((height, width))
    depth = np.full((height, width), camera.far, dtype=np.float64)
    covered = np.zeros((height, width), dtype=bool)

    right, up, forward = camera.basis()
    rel = np.asarray(positions, dtype=np.float64) - np.asarray(camera.position)
    view = np.stack([rel @ right, rel @ up, rel @ forward], axis=1)
    uvs = np.asarray(uvs, dtype=np.float64)

    tan_y = math.tan(camera.fov_y / 2.0)
    tan_x = tan_y * (width / height)

    for i0, i1, i2 in np.asarray(tris, dtype=np.int64):
        corners = [np.concatenate([view[i], uvs[i]]) for i in (i0, i1, i2)]
        poly = _clip_near(corners, camera.near)
        if len(poly) < 3:
            continue
        # project once; fan-triangulate the clipped polygon
        proj = []
        for v in poly:
            sx = (v[0] / (v[2] * tan_x) + 1.0) * (width / 2.0)
            sy = (1.0 - v[1] / (v[2] * tan_y)) * (height / 2.0)
            proj.append((sx, sy, v[2], v[3], v[4]))
        for k in range(1, len(poly) - 1):
            _raster_tri(
                (proj[0], proj[k], proj[k + 1]),
                width, height, camera.far,
                s_buf, t_buf, dsdx, dtdx, dsdy, dtdy, depth, covered,
            )

    return FragmentBuffers(s_buf, t_buf, dsdx, dtdx, dsdy, dtdy, depth, covered)


def _raster_tri(tri, width, height, far, s_buf, t_buf, dsdx, dtdx, dsdy, dtdy, depth, covered):
    a, b, c = (np.asarray(v, dtype=np.float64) for v in tri)
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if area2 == 0.0:
        return
    if area2 < 0.0:
        b, c = c, b
        area2 = -area2

    min_x, max_x = min(a[0], b[0], c[0]), max(a[0], b[0], c[0])
    min_y, max_y = min(a[1], b[1], c[1]), max(a[1], b[1], c[1])
    x_lo = max(0, math.ceil(min_x - 0.5))
    x_hi = min(width - 1, math.floor(max_x - 0.5))
    y_lo = max(0, math.ceil(min_y - 0.5))
    y_hi = min(height - 1, math.floor(max_y - 0.5))
    if x_lo > x_hi or y_lo > y_hi:
        return
    # align to 2x2 quads so helper pixels exist for every covered pixel
    x_lo &= ~1
    y_lo &= ~1
    x_hi |= 1
    y_hi |= 1

    px = np.arange(x_lo, x_hi + 1, dtype=np.float64) + 0.5
    py = (np.arange(y_lo, y_hi + 1, dtype=np.float64) + 0.5)[:, None]

    def edge(p, q):
        return (q[0] - p[0]) * (py - p[1]) - (q[1] - p[1]) * (px - p[0])

    e0, e1, e2 = edge(b, c), edge(c, a), edge(a, b)
    inside = (
        ((e0 > 0) | ((e0 == 0) & _top_left(b, c)))
        & ((e1 > 0) | ((e1 == 0) & _top_left(c, a)))
        & ((e2 > 0) | ((e2 == 0) & _top_left(a, b)))
    )

    l0, l1, l2 = e0 / area2, e1 / area2, e2 / area2
    w0, w1, w2 = 1.0 / a[2], 1.0 / b[2], 1.0 / c[2]
    inv_z = l0 * w0 + l1 * w1 + l2 * w2
    # helper pixels may extrapolate past the plane horizon; keep them finite
    inv_z = np.where(np.abs(inv_z) > 1e-300, inv_z, 1e-300)
    s_grid = (l0 * a[3] * w0 + l1 * b[3] * w1 + l2 * c[3] * w2) / inv_z
    t_grid = (l0 * a[4] * w0 + l1 * b[4] * w1 + l2 * c[4] * w2) / inv_z
    z_grid = 1.0 / inv_z

    win = inside & (z_grid < depth[y_lo:y_hi + 1, x_lo:x_hi + 1])
    if not win.any():
        return

    # fine derivatives: both pixels of a quad row/column share the difference
    ddx = np.repeat(s_grid[:, 1::2] - s_grid[:, 0::2], 2, axis=1)
    ddy = np.repeat(s_grid[1::2, :] - s_grid[0::2, :], 2, axis=0)
    tdx = np.repeat(t_grid[:, 1::2] - t_grid[:, 0::2], 2, axis=1)
    tdy = np.repeat(t_grid[1::2, :] - t_grid[0::2, :], 2, axis=0)

    sub = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
    for buf, grid in (
        (s_buf, s_grid), (t_buf, t_grid), (depth, z_grid),
        (dsdx, ddx), (dtdx, tdx), (dsdy, ddy), (dtdy, tdy),
    ):
        buf[sub][win] = grid[win]
    covered[sub][win] = True


def compute_mip(frag: FragmentBuffers, dim_max: int, max_mip: int) -> np.ndarray:
    """Continuous mip level per pixel from the quad derivatives.

    The derivative magnitudes measure how much texture is compressed into
    one pixel step; scaling by the top-mip dimension and taking log2 gives
    the pyramid distance d from the top, clamped to [0, max_mip]. The
    returned level counts from the lowest-resolution mip: max_mip - d.
    """
    e_x = np.hypot(frag.dsdx, frag.dtdx)
    e_y = np.hypot(frag.dsdy, frag.dtdy)
    e_max = np.maximum(e_x, e_y)
    with np.errstate(divide="ignore"):
        d = np.log2(e_max * dim_max)
    return max_mip - np.clip(d, 0.0, float(max_mip))


def identify_page(s, t, mip):
    """Page coordinates of (s, t) at one mip: floor(s * 2^mip), clamped at 1.0."""
    side = np.left_shift(1, np.asarray(mip, dtype=np.int64))
    x = np.minimum(np.floor(np.asarray(s, dtype=np.float64) * side), side - 1).astype(np.int64)
    y = np.minimum(np.floor(np.asarray(t, dtype=np.float64) * side), side - 1).astype(np.int64)
    x = np.maximum(x, 0)
    y = np.maximum(y, 0)
    return x, y


def page_coords(s, t, mip):
    """Page (x, y) plus the fractional position inside that page.

    The fraction reaches 1.0 only when the coordinate is clamped at the far
    texture edge.
    """
    side = np.left_shift(1, np.asarray(mip, dtype=np.int64))
    x, y = identify_page(s, t, mip)
    fs = np.asarray(s, dtype=np.float64) * side - x
    ft = np.asarray(t, dtype=np.float64) * side - y
    return x, y, fs, ft


def encode_need8(x, y, mip):
    """Pack page coordinates into four 8-bit channels; x, y must be < 4096."""
    x, y, mip = (np.asarray(v, dtype=np.int64) for v in (x, y, mip))
    if np.any(x >= 4096) or np.any(y >= 4096):
        raise ValueError("page coordinate >= 4096 overflows the 8-bit encoding")
    if np.any(mip >= 256):
        raise ValueError("mip >= 256 overflows the 8-bit encoding")
    return x % 256, y % 256, mip, x // 256 + (y // 256) * 16


def decode_need8(r, g, b, a):
    r, g, b, a = (np.asarray(v, dtype=np.int64) for v in (r, g, b, a))
    return r + (a % 16) * 256, g + (a // 16) * 256, b


def encode_need32(x, y, mip):
    """32-bit channels hold the raw values."""
    x, y, mip = (np.asarray(v, dtype=np.int64) for v in (x, y, mip))
    return x, y, mip


# ---------------------------------------------------------------------------
# Sampling


def _fetch_chain(chain: Sequence[np.ndarray], page_size: int, mips, px, py, _ctx, lx, ly):
    """Gather texels from mip images by global coordinate, edge-clamped."""
    dims = np.left_shift(page_size, mips)
    gx = np.clip(px * page_size + lx, 0, dims - 1)
    gy = np.clip(py * page_size + ly, 0, dims - 1)
    out = np.empty((len(gx), 3), dtype=np.float64)
    for m in np.unique(mips):
        sel = mips == m
        out[sel] = chain[m][gy[sel], gx[sel]]
    return out


def _make_cache_fetch(cache_texture: np.ndarray, page_size: int, border: int):
    stride = page_size + 2 * border

    def fetch(_mips, _px, _py, ctx, lx, ly):
        fx, fy = ctx
        return cache_texture[fy * stride + border + ly, fx * stride + border + lx].astype(np.float64)

    return fetch


def _resolve_indirection(meta: TextureMeta, ind_fx, ind_fy, ind_mip, s, t, needed_mip):
    """Needed page -> (source mip, cache frame) through the indirection table."""
    px, py = identify_page(s, t, needed_mip)
    offs = mip_offsets(meta.mip_count)
    p_abs = offs[needed_mip] + px + py * np.left_shift(1, needed_mip)
    src = ind_mip[p_abs]
    if src.size and src.min() < 0:
        raise RuntimeError("indirection table is uninitialized for a sampled page")
    return src.astype(np.int64), (ind_fx[p_abs].astype(np.int64), ind_fy[p_abs].astype(np.int64))


def _sample_level(meta: TextureMeta, fetch, src_mip, ctx, s, t, bilinear: bool):
    ps = meta.page_size
    px, py, fs, ft = page_coords(s, t, src_mip)
    if not bilinear:
        lx = np.minimum(np.floor(fs * ps), ps - 1).astype(np.int64)
        ly = np.minimum(np.floor(ft * ps), ps - 1).astype(np.int64)
        return fetch(src_mip, px, py, ctx, lx, ly)
    u = fs * ps - 0.5
    v = ft * ps - 0.5
    x0 = np.floor(u)
    y0 = np.floor(v)
    fa = (u - x0)[:, None]
    fb = (v - y0)[:, None]
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    c00 = fetch(src_mip, px, py, ctx, x0, y0)
    c10 = fetch(src_mip, px, py, ctx, x0 + 1, y0)
    c01 = fetch(src_mip, px, py, ctx, x0, y0 + 1)
    c11 = fetch(src_mip, px, py, ctx, x0 + 1, y0 + 1)
    top = c00 * (1.0 - fa) + c10 * fa
    bot = c01 * (1.0 - fa) + c11 * fa
    return top * (1.0 - fb) + bot * fb


def _shade(meta: TextureMeta, resolve, fetch, s, t, level, mode: str) -> np.ndarray:
    """Sample every fragment at its continuous level; returns float64 colors."""
    m = np.floor(level).astype(np.int64)
    src_mip, ctx = resolve(s, t, m)
    if mode == "nearest":
        return _sample_level(meta, fetch, src_mip, ctx, s, t, bilinear=False)
    if mode == "bilinear":
        return _sample_level(meta, fetch, src_mip, ctx, s, t, bilinear=True)
    if mode == "trilinear":
        c0 = _sample_level(meta, fetch, src_mip, ctx, s, t, bilinear=True)
        m1 = np.minimum(m + 1, meta.max_mip)
        src1, ctx1 = resolve(s, t, m1)
        c1 = _sample_level(meta, fetch, src1, ctx1, s, t, bilinear=True)
        frac = (level - m)[:, None]
        return c0 * (1.0 - frac) + c1 * frac
    raise ValueError(f"unknown filter mode {mode!r}")


def sample_physical(
    s: float,
    t: float,
    level: float,
    meta: TextureMeta,
    cache_texture: np.ndarray,
    ind_fx: np.ndarray,
    ind_fy: np.ndarray,
    ind_mip: np.ndarray,
    mode: str = "nearest",
) -> np.ndarray:
    """Sample one virtual coordinate through the cache; returns float64 RGB."""
    sv = np.asarray([s], dtype=np.float64)
    tv = np.asarray([t], dtype=np.float64)
    lv = np.asarray([level], dtype=np.float64)

    def resolve(ss, tt, mm):
        return _resolve_indirection(meta, ind_fx, ind_fy, ind_mip, ss, tt, mm)

    fetch = _make_cache_fetch(cache_texture, meta.page_size, meta.border)
    return _shade(meta, resolve, fetch, sv, tv, lv, mode)[0]


def _frame_from_fragments(meta, frag, resolve, fetch, mode, far):
    height, width = frag.covered.shape
    level = compute_mip(frag, meta.dim_max, meta.max_mip)
    mask = frag.covered
    color = np.zeros((height, width, 3), dtype=np.uint8)
    need_x = np.full((height, width), -1, dtype=np.int32)
    need_y = np.full((height, width), -1, dtype=np.int32)
    need_mip = np.full((height, width), -1, dtype=np.int32)
    if mask.any():
        s = np.clip(frag.s[mask], 0.0, 1.0)
        t = np.clip(frag.t[mask], 0.0, 1.0)
        lv = level[mask]
        m = np.floor(lv).astype(np.int64)
        nx, ny = identify_page(s, t, m)
        need_x[mask] = nx
        need_y[mask] = ny
        need_mip[mask] = m
        shaded = _shade(meta, resolve, fetch, s, t, lv, mode)
        color[mask] = np.clip(np.floor(shaded + 0.5), 0, 255).astype(np.uint8)
    return FrameBuffers(color, frag.depth.copy(), need_x, need_y, need_mip)


def render_frame(
    mesh: SceneMesh,
    camera: Camera,
    meta: TextureMeta,
    cache_texture: np.ndarray,
    ind_fx: np.ndarray,
    ind_fy: np.ndarray,
    ind_mip: np.ndarray,
    viewport: tuple[int, int],
    mode: str = "nearest",
) -> FrameBuffers:
    """Render through the page cache: color, depth, and need buffer."""
    pos, uv, tris = scene_triangles(mesh)
    frag = rasterize(pos, uv, tris, camera, viewport)

    def resolve(ss, tt, mm):
        return _resolve_indirection(meta, ind_fx, ind_fy, ind_mip, ss, tt, mm)

    fetch = _make_cache_fetch(cache_texture, meta.page_size, meta.border)
    return _frame_from_fragments(meta, frag, resolve, fetch, mode, camera.far)


def render_reference(
    mesh: SceneMesh,
    camera: Camera,
    meta: TextureMeta,
    chain: Sequence[np.ndarray],
    viewport: tuple[int, int],
    mode: str = "nearest",
) -> FrameBuffers:
    """Budget-free reference: sample the mip chain directly at the needed level."""
    pos, uv, tris = scene_triangles(mesh)
    frag = rasterize(pos, uv, tris, camera, viewport)

    def resolve(ss, tt, mm):
        px, py = identify_page(ss, tt, mm)
        return mm, (px, py)

    def fetch(mips, _px, _py, ctx, lx, ly):
        return _fetch_chain(chain, meta.page_size, mips, ctx[0], ctx[1], None, lx, ly)

    return _frame_from_fragments(meta, frag, resolve, fetch, mode, camera.far)
