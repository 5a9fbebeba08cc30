"""Need-buffer analysis, page priorities, prediction, and budgeted streaming.

The simulation collapses the renderer/streamer thread pair into one
deterministic per-frame step: render, analyze the need buffer, assign
priorities, optionally add ancestors, then dispatch at most `budget` page
loads. The priority queue is rebuilt from the current needs every frame so
stale requests from dead viewpoints never linger. An optional latency makes
dispatched pages arrive a fixed number of frames later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import core, render
from .core import TextureMeta
from .layout import SceneMesh
from .render import Camera, FrameBuffers, FragmentBuffers
from .runtime import VtRuntime

CENTER_WEIGHT_FLOOR = 0.05
# a 5 degree/frame rotation saturates the hotspot shift by default
DEFAULT_HOTSPOT_GAIN = 1.0 / math.radians(5.0)


@dataclass
class PageStats:
    """Per-page aggregates from one need buffer, aligned on `pages`."""

    pages: np.ndarray         # needed absolute indices, ascending
    pixel_count: np.ndarray
    weighted_sum: np.ndarray  # pixel weights w(r) accumulated per page
    distance_sum: np.ndarray  # depth accumulated per page
    min_mip: np.ndarray       # needed mip (one page maps to one mip)
    hits: int = 0
    misses: int = 0


@dataclass
class HeuristicConfig:
    """Which priority heuristic runs and how it is parameterized."""

    kind: str = "pixel_sum"  # random | pixel_sum | distance | weighted_pixel | hotspot
    seed: int = 0
    noise_scaling: bool = False
    lookahead: bool = False
    lookahead_weight: float = 0.5
    hotspot_gain: float = DEFAULT_HOTSPOT_GAIN
    lookahead_damping: bool = False
    damping_threshold: float = math.radians(10.0)

    KINDS = ("random", "pixel_sum", "distance", "weighted_pixel", "hotspot")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown heuristic {self.kind!r}, expected one of {self.KINDS}")
        if not 0.0 <= self.lookahead_weight <= 1.0:
            raise ValueError("lookahead merge weight must lie in [0, 1]")


@dataclass
class SimConfig:
    """Streaming budget and strategy switches for one simulation run."""

    budget: int = 5
    lock_mips: int = 0
    preload_visible: bool = True
    ancestor: str = "none"  # none | intern | extern
    noise_skip: bool = False
    latency: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least one page per frame")
        if self.ancestor not in ("none", "intern", "extern"):
            raise ValueError(f"unknown ancestor strategy {self.ancestor!r}")
        if self.latency < 0:
            raise ValueError("latency cannot be negative")


def center_weights(shape: tuple[int, int], center: tuple[float, float],
                   floor: float = CENTER_WEIGHT_FLOOR) -> np.ndarray:
    """Per-pixel weight falling off linearly with distance to `center`.

    The weight is 1 at the center and reaches the floor at half the screen
    diagonal, so every visible page stays schedulable.
    """
    height, width = shape
    cx, cy = center
    px = np.arange(width) + 0.5
    py = (np.arange(height) + 0.5)[:, None]
    r = np.hypot(px - cx, py - cy)
    r_max = math.hypot(width / 2.0, height / 2.0)
    return np.maximum(floor, 1.0 - r / r_max)


def hotspot_center(delta_yaw: float, delta_pitch: float, gain: float,
                   viewport: tuple[int, int]) -> tuple[float, float]:
    """Shift the weighting center toward the screen edge rotation exposes.

    Turning right (positive yaw delta) moves the center to the right edge,
    looking up moves it to the top; each axis saturates at the border once
    gain * |delta| reaches 1.
    """
    width, height = viewport
    cx = width / 2.0 + math.copysign(min(1.0, gain * abs(delta_yaw)), delta_yaw) * width / 2.0 \
        if delta_yaw else width / 2.0
    cy = height / 2.0 - math.copysign(min(1.0, gain * abs(delta_pitch)), delta_pitch) * height / 2.0 \
        if delta_pitch else height / 2.0
    return cx, cy


def analyze(
    frame: FrameBuffers,
    meta: TextureMeta,
    resident: np.ndarray,
    center: Optional[tuple[float, float]] = None,
    weight_floor: float = CENTER_WEIGHT_FLOOR,
    table=None,
) -> PageStats:
    """Aggregate the need buffer into per-page statistics plus hit/miss totals.

    A pixel is a hit iff the page it needs is resident at its own mip. When a
    page table is supplied its scratch fields are reset and filled.
    """
    height, width = frame.need_mip.shape
    mask = frame.need_mip >= 0
    m = frame.need_mip[mask].astype(np.int64)
    offs = core.mip_offsets(meta.mip_count)
    p_abs = offs[m] + frame.need_x[mask] + frame.need_y[mask] * np.left_shift(1, m)

    if center is None:
        center = (width / 2.0, height / 2.0)
    weights = center_weights((height, width), center, weight_floor)[mask]
    depth = frame.depth[mask]

    pages, inverse = np.unique(p_abs, return_inverse=True)
    stats = PageStats(
        pages=pages,
        pixel_count=np.bincount(inverse, minlength=len(pages)),
        weighted_sum=np.bincount(inverse, weights=weights, minlength=len(pages)),
        distance_sum=np.bincount(inverse, weights=depth, minlength=len(pages)),
        min_mip=core.mip_of_abs(meta.mip_count)[pages],
    )
    hit_mask = resident[p_abs]
    stats.hits = int(hit_mask.sum())
    stats.misses = int(len(p_abs) - stats.hits)
    if table is not None:
        table.reset_scratch()
        table.needed[pages] = True
        table.pixel_count[pages] = stats.pixel_count
        table.weighted_sum[pages] = stats.weighted_sum
        table.distance_sum[pages] = stats.distance_sum
    return stats


_M64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def random_priority(seed: int, frame: int, p_abs: int) -> float:
    """Uniform draw in [0, 1), reproducible per (seed, frame, page)."""
    h = _splitmix64(_splitmix64(_splitmix64(seed & _M64) ^ frame) ^ p_abs)
    return h / 2.0 ** 64


def compute_priorities(stats: PageStats, heuristic: HeuristicConfig, frame: int) -> dict[int, float]:
    """Base priority per needed page, before noise scaling or merging."""
    kind = heuristic.kind
    out: dict[int, float] = {}
    for i, p in enumerate(stats.pages):
        p = int(p)
        if kind == "random":
            out[p] = random_priority(heuristic.seed, frame, p)
        elif kind == "pixel_sum":
            out[p] = float(stats.pixel_count[i])
        elif kind == "distance":
            out[p] = 1.0 / (1.0 + float(stats.distance_sum[i]) / float(stats.pixel_count[i]))
        else:  # weighted_pixel and hotspot share the accumulated weights
            out[p] = float(stats.weighted_sum[i])
    return out


def noise_chain_sum(p_abs: int, noise: np.ndarray, source_mip: np.ndarray, mip_count: int) -> float:
    """Sum of noise values from a page down to (exclusive) its resident fallback."""
    parents = core.parent_of_abs(mip_count)
    own_mip = int(core.mip_of_abs(mip_count)[p_abs])
    steps = own_mip - int(source_mip[p_abs])
    total = 0.0
    p = p_abs
    for _ in range(steps):
        total += float(noise[p])
        p = int(parents[p])
    return total


def noise_scale(priorities: dict[int, float], noise: np.ndarray,
                source_mip: np.ndarray, mip_count: int) -> dict[int, float]:
    """Scale each priority by the noise accumulated along its fallback chain."""
    return {
        p: v * noise_chain_sum(p, noise, source_mip, mip_count)
        for p, v in priorities.items()
    }


def lookahead_camera(camera: Camera, previous: Camera) -> Camera:
    """Pose after applying the last frame's motion a second time."""
    pos = tuple(2 * c - p for c, p in zip(camera.position, previous.position))
    return Camera(
        position=pos,
        yaw=camera.yaw + (camera.yaw - previous.yaw),
        pitch=camera.pitch + (camera.pitch - previous.pitch),
        fov_y=camera.fov_y,
        near=camera.near,
        far=camera.far,
    )


def merge_need(primary: dict[int, float], lookahead: dict[int, float],
               weight: float) -> dict[int, float]:
    """Union of both passes; lookahead contributions enter scaled by `weight`."""
    if not 0.0 <= weight <= 1.0:
        raise ValueError("merge weight must lie in [0, 1]")
    merged = dict(primary)
    for p, v in lookahead.items():
        merged[p] = merged.get(p, 0.0) + weight * v
    return merged


def ancestor_closure(
    priorities: dict[int, float],
    resident: np.ndarray,
    mip_count: int,
    noise: Optional[np.ndarray] = None,
    skip_threshold: Optional[float] = None,
    exclude: frozenset[int] = frozenset(),
) -> dict[int, float]:
    """Add every non-resident ancestor of the needed pages.

    A passively added ancestor's priority is the sum of its needed children's
    priorities. With a skip threshold, an ancestor is not added on behalf of
    a child whose own noise value lies below the threshold (the child looks
    close enough to the ancestor's content to skip the intermediate load).
    """
    parents = core.parent_of_abs(mip_count)
    mips = core.mip_of_abs(mip_count)
    total = dict(priorities)
    buckets: dict[int, list[int]] = {}
    for p in total:
        buckets.setdefault(int(mips[p]), []).append(p)
    for m in range(max(buckets, default=0), 0, -1):
        for p in sorted(buckets.get(m, [])):
            par = int(parents[p])
            if resident[par] or par in exclude:
                continue
            if skip_threshold is not None and noise is not None and noise[p] < skip_threshold:
                continue
            if par in priorities:  # directly needed: keeps its heuristic priority
                continue
            if par not in total:
                total[par] = 0.0
                buckets.setdefault(m - 1, []).append(par)
            total[par] += total[p]
    return total


class StreamQueue:
    """Priority queue over needed pages with the paper's two orderings.

    Ties always break toward the lower absolute index. The intern constraint
    forces a page's queued ancestors (closest to the root first) out before
    the page itself.
    """

    def __init__(self, entries: dict[int, float], mip_count: int,
                 mode: str = "priority", intern: bool = False):
        if mode not in ("priority", "extern"):
            raise ValueError(f"unknown comparator mode {mode!r}")
        self.entries = dict(entries)
        self.mode = mode
        self.intern = intern
        self._mips = core.mip_of_abs(mip_count)
        self._parents = core.parent_of_abs(mip_count)

    def __len__(self) -> int:
        return len(self.entries)

    def pop(self) -> Optional[tuple[int, float]]:
        """Remove and return the next page to stream, or None when empty."""
        if not self.entries:
            return None
        if self.mode == "extern":
            chosen = min(self.entries, key=lambda p: (self._mips[p], -self.entries[p], p))
        else:
            chosen = min(self.entries, key=lambda p: (-self.entries[p], p))
            if self.intern:
                p = chosen
                while True:
                    p = int(self._parents[p])
                    if p < 0:
                        break
                    if p in self.entries:
                        chosen = p  # keep climbing: closest to root wins
        priority = self.entries.pop(chosen)
        return chosen, priority


@dataclass
class StreamEvent:
    frame: int
    p_abs: int
    mip: int
    priority: float
    heuristic: str


@dataclass
class SimResult:
    frames: list[FrameBuffers]
    log: list[StreamEvent]
    hits: list[int]
    misses: list[int]
    needed: list[np.ndarray]  # direct needed pages per frame


def _need_only_frame(mesh: SceneMesh, camera: Camera, meta: TextureMeta,
                     viewport: tuple[int, int]) -> FrameBuffers:
    """Need buffer and depth without shading (for prediction passes)."""
    pos, uv, tris = render.scene_triangles(mesh)
    frag = render.rasterize(pos, uv, tris, camera, viewport)
    level = render.compute_mip(frag, meta.dim_max, meta.max_mip)
    height, width = frag.covered.shape
    need_x = np.full((height, width), -1, dtype=np.int32)
    need_y = np.full((height, width), -1, dtype=np.int32)
    need_mip = np.full((height, width), -1, dtype=np.int32)
    mask = frag.covered
    if mask.any():
        s = np.clip(frag.s[mask], 0.0, 1.0)
        t = np.clip(frag.t[mask], 0.0, 1.0)
        m = np.floor(level[mask]).astype(np.int64)
        nx, ny = render.identify_page(s, t, m)
        need_x[mask] = nx
        need_y[mask] = ny
        need_mip[mask] = m
    color = np.zeros((height, width, 3), dtype=np.uint8)
    return FrameBuffers(color, frag.depth, need_x, need_y, need_mip)


def visible_pages(mesh: SceneMesh, camera: Camera, meta: TextureMeta,
                  viewport: tuple[int, int]) -> np.ndarray:
    """Absolute indices of all pages the view needs, independent of residency."""
    fb = _need_only_frame(mesh, camera, meta, viewport)
    mask = fb.need_mip >= 0
    m = fb.need_mip[mask].astype(np.int64)
    offs = core.mip_offsets(meta.mip_count)
    p_abs = offs[m] + fb.need_x[mask] + fb.need_y[mask] * np.left_shift(1, m)
    return np.unique(p_abs)


def simulate(
    mesh: SceneMesh,
    cameras: Sequence[Camera],
    rt: VtRuntime,
    sim: SimConfig,
    heuristic: HeuristicConfig,
    viewport: tuple[int, int],
    mode: str = "nearest",
) -> SimResult:
    """Run the budgeted streaming loop over a camera path.

    Per frame: render (plus a prediction render when enabled), analyze,
    prioritize, extend with ancestors, dispatch up to `budget` loads, insert
    arrivals, then refresh page table and indirection. Fully deterministic
    for a fixed configuration and seed.
    """
    meta = rt.meta
    if sim.lock_mips:
        rt.lock_mips(sim.lock_mips)
    if sim.preload_visible and len(cameras):
        for p_abs in visible_pages(mesh, cameras[0], meta, viewport):
            rt.insert(rt.load_page(int(p_abs)))
        rt.update()

    mips = core.mip_of_abs(meta.mip_count)
    noise_mean = float(np.mean(rt.noise)) if rt.noise is not None else None
    result = SimResult([], [], [], [], [])
    pending: list[tuple[int, int]] = []  # (arrival frame, p_abs)
    in_flight: set[int] = set()
    prev_cam: Optional[Camera] = None
    prev_delta = (0.0, 0.0)

    for fi, cam in enumerate(cameras):
        rt.frame = fi
        fb = render.render_frame(
            mesh, cam, meta, rt.cache.texture,
            rt.indirection.frame_x, rt.indirection.frame_y, rt.indirection.source_mip,
            viewport, mode,
        )

        delta = (cam.yaw - prev_cam.yaw, cam.pitch - prev_cam.pitch) if prev_cam else (0.0, 0.0)
        if heuristic.kind == "hotspot":
            center = hotspot_center(delta[0], delta[1], heuristic.hotspot_gain, viewport)
        else:
            center = None

        resident = rt.cache.frame_of_page >= 0
        stats = analyze(fb, meta, resident, center=center, table=rt.table)
        for p in stats.pages[resident[stats.pages]]:
            rt.touch(int(p))
        priorities = compute_priorities(stats, heuristic, fi)

        if heuristic.lookahead and prev_cam is not None:
            jerk = math.hypot(delta[0] - prev_delta[0], delta[1] - prev_delta[1])
            if heuristic.lookahead_damping and jerk > heuristic.damping_threshold:
                la_cam = cam  # collapse the prediction after an abrupt motion change
            else:
                la_cam = lookahead_camera(cam, prev_cam)
            la_fb = _need_only_frame(mesh, la_cam, meta, viewport)
            la_stats = analyze(la_fb, meta, resident, center=center)
            la_pri = compute_priorities(la_stats, heuristic, fi)
            priorities = merge_need(priorities, la_pri, heuristic.lookahead_weight)

        if heuristic.noise_scaling:
            if rt.noise is None:
                raise ValueError("noise scaling requested but runtime has no noise table")
            priorities = noise_scale(priorities, rt.noise, rt.table.source_mip, meta.mip_count)

        wanted = {
            p: v for p, v in priorities.items()
            if not resident[p] and p not in in_flight
        }
        if sim.ancestor != "none":
            threshold = noise_mean if sim.noise_skip else None
            if sim.noise_skip and rt.noise is None:
                raise ValueError("noise skipping requested but runtime has no noise table")
            wanted = ancestor_closure(
                wanted, resident, meta.mip_count,
                noise=rt.noise, skip_threshold=threshold,
                exclude=frozenset(in_flight),
            )
        queue = StreamQueue(
            wanted, meta.mip_count,
            mode="extern" if sim.ancestor == "extern" else "priority",
            intern=sim.ancestor == "intern",
        )
        for _ in range(sim.budget):
            nxt = queue.pop()
            if nxt is None:
                break
            p_abs, priority = nxt
            result.log.append(StreamEvent(fi, p_abs, int(mips[p_abs]), priority, heuristic.kind))
            pending.append((fi + sim.latency, p_abs))
            in_flight.add(p_abs)

        arrived = [p for af, p in pending if af <= fi]
        pending = [(af, p) for af, p in pending if af > fi]
        for p_abs in arrived:
            rt.insert(rt.load_page(p_abs))
            in_flight.discard(p_abs)
        rt.update()

        result.frames.append(fb)
        result.hits.append(stats.hits)
        result.misses.append(stats.misses)
        result.needed.append(stats.pages)
        prev_cam = cam
        prev_delta = delta

    return result


def save_stream_log(log: Sequence[StreamEvent], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("frame,p_abs,mip,priority,heuristic\n")
        for e in log:
            fh.write(f"{e.frame},{e.p_abs},{e.mip},{e.priority:.9g},{e.heuristic}\n")


def save_camera_path(cameras: Sequence[Camera], path: str) -> None:
    """One whitespace-separated record per frame: x y z yaw pitch."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in cameras:
            x, y, z = c.position
            fh.write(f"{x!r} {y!r} {z!r} {c.yaw!r} {c.pitch!r}\n")


def load_camera_path(path: str, fov_y: float = math.radians(60.0),
                     near: float = 0.05, far: float = 1000.0) -> list[Camera]:
    cameras = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            x, y, z, yaw, pitch = (float(v) for v in line.split())
            cameras.append(Camera((x, y, z), yaw, pitch, fov_y, near, far))
    return cameras
