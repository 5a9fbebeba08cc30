"""Page addressing and the tiled texture file format.

Walks the absolute/relative numbering of a small pyramid, shows the
parent/child structure, then writes a tiny virtual texture and pokes at the
raw bytes to show how pages are found by offset alone.
"""

import os
import tempfile

import numpy as np

from vtlab import core
from vtlab.core import PageId, TextureMeta, VirtualTextureFile

# A 3-level pyramid: 1 + 4 + 16 pages.
mip_count = 3
print("pages per mip:", [core.pages_in_mip(m, mip_count) for m in range(mip_count)])
print("total pages:  ", core.first_abs_index(mip_count))

# Page 6 in the absolute scheme is page 1 on mip 2.
page = core.from_abs(6, mip_count)
print("\nabsolute 6 ->", page)
print("its parent:   ", core.parent(page))
print("its children: ", core.children(page, mip_count) or "(none, top level)")
print("path to root: ", core.ancestors(page))

# Write a virtual texture with recognizable page contents.
meta = TextureMeta(page_size=16, border=2, mip_count=mip_count)
side = meta.stored_page_size


def payload(p_abs):
    # every page filled with its own index so reads are easy to verify
    return core.PagePayload(core.from_abs(p_abs, mip_count),
                            np.full((side, side, 3), p_abs * 3, np.uint8))


tmp = tempfile.mkdtemp()
path = os.path.join(tmp, "demo.vtx")
core.write_virtual_texture(meta, (payload(i) for i in range(meta.total_pages)), path)
print(f"\nwrote {path}: {os.path.getsize(path)} bytes "
      f"(64 header + {meta.total_pages} x {meta.stored_page_bytes})")

with VirtualTextureFile(path) as vt:
    for p_abs in (0, 6, 20):
        got = vt.read_page(p_abs)
        print(f"page {p_abs:2d} at byte {core.page_file_offset(meta, p_abs):6d}: "
              f"id {got.id}, fill value {got.pixels[0, 0, 0]}")

# The stride is constant, so any page is one seek away.
offsets = [core.page_file_offset(meta, i) for i in range(meta.total_pages)]
print("offset stride:", set(np.diff(offsets).tolist()), "bytes")
