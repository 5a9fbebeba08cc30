"""Runtime residency state.

The page cache is one large RGB8 texture split into equally sized frames,
each holding one bordered page. Eviction is least-recently-used with ties
broken by the lowest frame index; locked frames are never evicted. The page
table gives every page of the pyramid a fallback: its own frame when
resident, otherwise the frame of its nearest resident ancestor. The root
page is loaded at construction and implicitly locked so the fallback chain
always terminates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import core
from .core import PageId, PagePayload, TextureMeta, VirtualTextureFile


class CapacityError(Exception):
    """The cache has no evictable frame left for the requested operation."""


class PageCache:
    """Grid of frames backing the physical cache texture."""

    def __init__(self, meta: TextureMeta, frames_x: int, frames_y: int):
        if frames_x < 1 or frames_y < 1:
            raise ValueError("cache needs at least one frame")
        self.meta = meta
        self.frames_x = frames_x
        self.frames_y = frames_y
        stride = meta.stored_page_size
        self.texture = np.zeros((frames_y * stride, frames_x * stride, 3), dtype=np.uint8)
        n = frames_x * frames_y
        self.occupant = np.full(n, -1, dtype=np.int64)    # absolute page index per frame
        self.last_used = np.full(n, -1, dtype=np.int64)   # frame counter of last use
        self.locked = np.zeros(n, dtype=bool)
        self.frame_of_page = np.full(meta.total_pages, -1, dtype=np.int64)

    @property
    def frame_count(self) -> int:
        return self.frames_x * self.frames_y

    def frame_xy(self, index: int) -> tuple[int, int]:
        return index % self.frames_x, index // self.frames_x

    def resident(self, p_abs: int) -> bool:
        return self.frame_of_page[p_abs] >= 0

    def touch(self, p_abs: int, now: int) -> None:
        """Refresh recency; no-op for non-resident pages."""
        f = self.frame_of_page[p_abs]
        if f >= 0:
            self.last_used[f] = now

    def insert(self, payload: PagePayload, now: int, lock: bool = False) -> Optional[int]:
        """Place a page in the least recently used unlocked frame.

        Returns the absolute index of the evicted page, if any. Re-inserting
        a resident page only refreshes its recency (and lock flag).
        """
        p_abs = core.abs_index(payload.id)
        existing = self.frame_of_page[p_abs]
        if existing >= 0:
            self.last_used[existing] = now
            if lock:
                self.locked[existing] = True
            return None
        if self.locked.all():
            raise CapacityError("all cache frames are locked")
        order = np.where(self.locked, np.iinfo(np.int64).max, self.last_used)
        target = int(np.argmin(order))  # ties resolve to the lowest frame index
        evicted = int(self.occupant[target])
        if evicted >= 0:
            self.frame_of_page[evicted] = -1
        stride = self.meta.stored_page_size
        fx, fy = self.frame_xy(target)
        self.texture[fy * stride:(fy + 1) * stride, fx * stride:(fx + 1) * stride] = payload.pixels
        self.occupant[target] = p_abs
        self.frame_of_page[p_abs] = target
        self.last_used[target] = now
        self.locked[target] = lock
        return evicted if evicted >= 0 else None


class PageTable:
    """Per-page fallback state plus the per-frame analysis scratch fields."""

    def __init__(self, meta: TextureMeta):
        self.meta = meta
        n = meta.total_pages
        self.frame_x = np.full(n, -1, dtype=np.int32)
        self.frame_y = np.full(n, -1, dtype=np.int32)
        self.source_mip = np.full(n, -1, dtype=np.int32)
        # analysis scratch, reset every frame
        self.needed = np.zeros(n, dtype=bool)
        self.pixel_count = np.zeros(n, dtype=np.int64)
        self.weighted_sum = np.zeros(n, dtype=np.float64)
        self.distance_sum = np.zeros(n, dtype=np.float64)

    def reset_scratch(self) -> None:
        self.needed[:] = False
        self.pixel_count[:] = 0
        self.weighted_sum[:] = 0.0
        self.distance_sum[:] = 0.0

    def update(self, cache: PageCache) -> None:
        """Recompute every entry in one ascending pass.

        Parents precede children in absolute order, so a non-resident entry
        can copy the already-final fallback of its parent.
        """
        fop = cache.frame_of_page
        if fop[0] < 0:
            raise RuntimeError("root page must be resident before the page table can update")
        resident = fop >= 0
        own_fx = (fop % cache.frames_x).astype(np.int32)
        own_fy = (fop // cache.frames_x).astype(np.int32)
        offs = core.mip_offsets(self.meta.mip_count)
        parents = core.parent_of_abs(self.meta.mip_count)
        self.frame_x[0] = own_fx[0]
        self.frame_y[0] = own_fy[0]
        self.source_mip[0] = 0
        for m in range(1, self.meta.mip_count):
            sl = slice(int(offs[m]), int(offs[m + 1]))
            par = parents[sl]
            res = resident[sl]
            self.frame_x[sl] = np.where(res, own_fx[sl], self.frame_x[par])
            self.frame_y[sl] = np.where(res, own_fy[sl], self.frame_y[par])
            self.source_mip[sl] = np.where(res, m, self.source_mip[par])


@dataclass
class IndirectionTable:
    """Flat projection of the page table consumed by the sampler."""

    frame_x: np.ndarray
    frame_y: np.ndarray
    source_mip: np.ndarray


class VtRuntime:
    """Owns the cache, page table, indirection table, and the backing file."""

    def __init__(
        self,
        vt: VirtualTextureFile,
        frames_x: int,
        frames_y: int,
        noise: Optional[np.ndarray] = None,
    ):
        self.vt = vt
        self.meta = vt.meta
        self.cache = PageCache(self.meta, frames_x, frames_y)
        self.table = PageTable(self.meta)
        self.noise = noise
        self.frame = 0  # current frame counter, drives LRU recency
        # the root is the universal fallback; keep it pinned
        self.cache.insert(vt.read_page(0), self.frame, lock=True)
        self.update()

    def load_page(self, p_abs: int) -> PagePayload:
        return self.vt.read_page(p_abs)

    def insert(self, payload: PagePayload, lock: bool = False) -> Optional[PageId]:
        evicted = self.cache.insert(payload, self.frame, lock=lock)
        if evicted is None:
            return None
        return core.from_abs(evicted, self.meta.mip_count)

    def touch(self, p_abs: int) -> None:
        self.cache.touch(p_abs, self.frame)

    def lock_mips(self, depth: int) -> None:
        """Load and pin every page of the first `depth` mip levels."""
        if depth < 0 or depth > self.meta.mip_count:
            raise ValueError(f"lock depth {depth} outside pyramid of {self.meta.mip_count} levels")
        needed = core.first_abs_index(depth)
        if needed > self.cache.frame_count:
            raise CapacityError(
                f"locking {depth} mips needs {needed} frames, cache has {self.cache.frame_count}"
            )
        for p_abs in range(needed):
            self.cache.insert(self.vt.read_page(p_abs), self.frame, lock=True)
        self.update()

    def update(self) -> None:
        """Refresh the page table and regenerate the indirection table."""
        self.table.update(self.cache)
        self.indirection = IndirectionTable(
            self.table.frame_x.copy(),
            self.table.frame_y.copy(),
            self.table.source_mip.copy(),
        )

    def resident(self, p_abs: int) -> bool:
        return self.cache.resident(p_abs)
