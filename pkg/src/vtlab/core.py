"""Page addressing, pyramid hierarchy, and the tiled-texture file formats.

A virtual texture is a square mip pyramid cut into fixed-size square pages.
Mip level 0 holds exactly one page at the lowest resolution; every level up
quadruples the page count, so a pyramid of M levels has (4^M - 1) / 3 pages.
Pages are stored with a replicated texel border so the sampler can filter
bilinearly inside a single cache frame without seams.

On-disk layout (all integers little-endian):

  .vtx  64-byte header: magic "VTX1", version u32, page_size u32, border u32,
        mip_count u32, bytes_per_pixel u32, 40 reserved zero bytes.
        Followed by the bordered pages of all mips in ascending absolute
        index order, each (page_size + 2*border)^2 * bytes_per_pixel bytes.

  .vtn  16-byte header: magic "VTN1", version u32, count u32, 4 reserved
        zero bytes. Followed by count float32 noise values in absolute
        index order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import BinaryIO, Iterable, Optional

import numpy as np

VTX_MAGIC = b"VTX1"
VTN_MAGIC = b"VTN1"
VTX_HEADER_SIZE = 64
VTN_HEADER_SIZE = 16
FORMAT_VERSION = 1


class FormatError(Exception):
    """A .vtx or .vtn file violates the on-disk format."""


@dataclass(frozen=True)
class TextureMeta:
    """Static geometry of one virtual texture."""

    page_size: int = 128
    border: int = 4
    mip_count: int = 1
    bytes_per_pixel: int = 3

    def __post_init__(self):
        if self.page_size < 2 or self.page_size & (self.page_size - 1):
            raise ValueError(f"page_size must be a power of two, got {self.page_size}")
        if not 0 <= self.border < self.page_size // 2:
            raise ValueError(f"border must be in [0, page_size/2), got {self.border}")
        if self.mip_count < 1:
            raise ValueError(f"mip_count must be >= 1, got {self.mip_count}")
        if self.bytes_per_pixel != 3:
            raise ValueError("only RGB8 (3 bytes per pixel) is supported")

    @property
    def dim_max(self) -> int:
        """Edge length in texels of the highest-resolution mip."""
        return self.page_size << (self.mip_count - 1)

    @property
    def max_mip(self) -> int:
        return self.mip_count - 1

    @property
    def total_pages(self) -> int:
        return (4 ** self.mip_count - 1) // 3

    @property
    def stored_page_size(self) -> int:
        """Edge length of a stored page including its border."""
        return self.page_size + 2 * self.border

    @property
    def stored_page_bytes(self) -> int:
        return self.stored_page_size ** 2 * self.bytes_per_pixel

    def mip_dim(self, mip: int) -> int:
        """Edge length in texels of mip level `mip`."""
        if not 0 <= mip < self.mip_count:
            raise ValueError(f"mip {mip} out of range for {self.mip_count} levels")
        return self.page_size << mip


@dataclass(frozen=True, order=True)
class PageId:
    """Address of one page: mip level plus column/row within that level."""

    mip: int
    x: int
    y: int

    def __post_init__(self):
        if self.mip < 0:
            raise ValueError(f"mip must be >= 0, got {self.mip}")
        side = 1 << self.mip
        if not (0 <= self.x < side and 0 <= self.y < side):
            raise ValueError(f"page ({self.x},{self.y}) outside mip {self.mip} grid of {side}x{side}")


@dataclass
class PagePayload:
    """One bordered page as stored on disk: (page_size + 2*border)^2 RGB8 texels."""

    id: PageId
    pixels: np.ndarray  # (side, side, 3) uint8


def pages_in_mip(mip: int, mip_count: int) -> int:
    """Number of pages in one mip level: 4^mip."""
    if not 0 <= mip < mip_count:
        raise ValueError(f"mip {mip} out of range for {mip_count} levels")
    return 4 ** mip


def first_abs_index(mip: int) -> int:
    """Absolute index of the first page of a mip level: sum of 4^i for i < mip."""
    return (4 ** mip - 1) // 3


def rel_xy(rel: int, mip: int) -> tuple[int, int]:
    """Split a relative page index into (x, y) within its mip grid."""
    side = 1 << mip
    if not 0 <= rel < side * side:
        raise ValueError(f"relative index {rel} out of range for mip {mip}")
    return rel % side, rel // side


def rel_index(x: int, y: int, mip: int) -> int:
    """Inverse of rel_xy: x + y * 2^mip."""
    side = 1 << mip
    if not (0 <= x < side and 0 <= y < side):
        raise ValueError(f"({x},{y}) outside mip {mip} grid")
    return x + y * side


def abs_index(page: PageId) -> int:
    """Absolute index of a page: relative index plus the page count of all lower mips."""
    return first_abs_index(page.mip) + rel_index(page.x, page.y, page.mip)


def from_abs(p_abs: int, mip_count: int) -> PageId:
    """Invert abs_index. Raises for indices outside the pyramid."""
    if not 0 <= p_abs < (4 ** mip_count - 1) // 3:
        raise ValueError(f"absolute index {p_abs} out of range for {mip_count} levels")
    mip = 0
    while first_abs_index(mip + 1) <= p_abs:
        mip += 1
    x, y = rel_xy(p_abs - first_abs_index(mip), mip)
    return PageId(mip, x, y)


def parent(page: PageId) -> Optional[PageId]:
    """Parent page one mip below, or None for the root."""
    if page.mip == 0:
        return None
    return PageId(page.mip - 1, page.x // 2, page.y // 2)


def children(page: PageId, mip_count: int) -> list[PageId]:
    """The four child pages one mip above, or [] at the top level."""
    if page.mip + 1 >= mip_count:
        return []
    return [
        PageId(page.mip + 1, 2 * page.x + dx, 2 * page.y + dy)
        for dy in (0, 1)
        for dx in (0, 1)
    ]


def ancestors(page: PageId) -> list[PageId]:
    """All pages on the path from `page` (exclusive) to the root, child-to-root order."""
    out = []
    p = parent(page)
    while p is not None:
        out.append(p)
        p = parent(p)
    return out


# Index tables for vectorized callers. Cached per pyramid depth.

@lru_cache(maxsize=None)
def mip_offsets(mip_count: int) -> np.ndarray:
    """mip_offsets[m] = absolute index of the first page of mip m; last entry = total."""
    return np.array([first_abs_index(m) for m in range(mip_count + 1)], dtype=np.int64)


@lru_cache(maxsize=None)
def mip_of_abs(mip_count: int) -> np.ndarray:
    """Mip level of every absolute page index."""
    offs = mip_offsets(mip_count)
    out = np.empty(offs[-1], dtype=np.int32)
    for m in range(mip_count):
        out[offs[m]:offs[m + 1]] = m
    return out


@lru_cache(maxsize=None)
def parent_of_abs(mip_count: int) -> np.ndarray:
    """Absolute parent index of every page; -1 for the root."""
    offs = mip_offsets(mip_count)
    out = np.full(offs[-1], -1, dtype=np.int64)
    for m in range(1, mip_count):
        side = 1 << m
        rel = np.arange(side * side)
        x, y = rel % side, rel // side
        out[offs[m]:offs[m + 1]] = offs[m - 1] + (x // 2) + (y // 2) * (side // 2)
    return out


def page_file_offset(meta: TextureMeta, p_abs: int) -> int:
    """Byte offset of a stored page: header plus a constant stride per page.

    Pages are stored with their border, so the stride uses the bordered
    dimensions rather than the logical page size.
    """
    return VTX_HEADER_SIZE + meta.stored_page_bytes * p_abs


def _pack_vtx_header(meta: TextureMeta) -> bytes:
    head = VTX_MAGIC + struct.pack(
        "<5I", FORMAT_VERSION, meta.page_size, meta.border, meta.mip_count, meta.bytes_per_pixel
    )
    return head + b"\x00" * (VTX_HEADER_SIZE - len(head))


def _unpack_vtx_header(raw: bytes) -> TextureMeta:
    if len(raw) < VTX_HEADER_SIZE:
        raise EOFError("truncated file: header incomplete")
    if raw[:4] != VTX_MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {VTX_MAGIC!r}")
    version, page_size, border, mip_count, bpp = struct.unpack("<5I", raw[4:24])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    try:
        return TextureMeta(page_size, border, mip_count, bpp)
    except ValueError as exc:
        raise FormatError(f"invalid header fields: {exc}") from exc


def write_virtual_texture(meta: TextureMeta, pages: Iterable[PagePayload], path: str) -> None:
    """Write header plus all pages, which must arrive in ascending absolute order."""
    side = meta.stored_page_size
    with open(path, "wb") as fh:
        fh.write(_pack_vtx_header(meta))
        expect = 0
        for payload in pages:
            if abs_index(payload.id) != expect:
                raise ValueError(
                    f"page stream out of order: got {payload.id}, expected absolute index {expect}"
                )
            px = payload.pixels
            if px.shape != (side, side, 3) or px.dtype != np.uint8:
                raise ValueError(f"page {payload.id} has shape {px.shape}, expected ({side},{side},3) uint8")
            fh.write(px.tobytes())
            expect += 1
        if expect != meta.total_pages:
            raise ValueError(f"wrote {expect} pages, pyramid needs {meta.total_pages}")


class VirtualTextureFile:
    """Read-only handle on a .vtx file; pages are fetched by absolute index."""

    def __init__(self, path: str):
        self.path = path
        self._fh: BinaryIO = open(path, "rb")
        try:
            self.meta = _unpack_vtx_header(self._fh.read(VTX_HEADER_SIZE))
        except Exception:
            self._fh.close()
            raise

    def read_page(self, p_abs: int) -> PagePayload:
        if not 0 <= p_abs < self.meta.total_pages:
            raise IndexError(f"page index {p_abs} out of range (0..{self.meta.total_pages - 1})")
        self._fh.seek(page_file_offset(self.meta, p_abs))
        raw = self._fh.read(self.meta.stored_page_bytes)
        if len(raw) != self.meta.stored_page_bytes:
            raise EOFError(f"truncated file: page {p_abs} incomplete")
        side = self.meta.stored_page_size
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(side, side, 3)
        return PagePayload(from_abs(p_abs, self.meta.mip_count), pixels)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "VirtualTextureFile":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_noise_table(values: np.ndarray, path: str) -> None:
    """Write the per-page noise sidecar (float32, absolute index order)."""
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 1:
        raise ValueError("noise table must be one-dimensional")
    with open(path, "wb") as fh:
        head = VTN_MAGIC + struct.pack("<2I", FORMAT_VERSION, len(values))
        fh.write(head + b"\x00" * (VTN_HEADER_SIZE - len(head)))
        fh.write(values.astype("<f4").tobytes())


def read_noise_table(path: str, meta: Optional[TextureMeta] = None) -> np.ndarray:
    """Read a noise sidecar; if `meta` is given the entry count must match its pyramid."""
    with open(path, "rb") as fh:
        raw = fh.read(VTN_HEADER_SIZE)
        if len(raw) < VTN_HEADER_SIZE:
            raise EOFError("truncated file: header incomplete")
        if raw[:4] != VTN_MAGIC:
            raise FormatError(f"bad magic {raw[:4]!r}, expected {VTN_MAGIC!r}")
        version, count = struct.unpack("<2I", raw[4:12])
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported version {version}")
        if meta is not None and count != meta.total_pages:
            raise FormatError(
                f"noise table holds {count} entries, companion texture has {meta.total_pages} pages"
            )
        data = fh.read(4 * count)
        if len(data) != 4 * count:
            raise EOFError("truncated file: noise values incomplete")
        return np.frombuffer(data, dtype="<f4").astype(np.float32)
