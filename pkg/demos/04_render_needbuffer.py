"""Rendering through the page cache and reading the need buffer.

Builds a small corridor world, renders once with only the coarse mips
resident and once with everything resident, and dumps the frames plus a
false-color view of the per-pixel needed mip.
"""

import os
import tempfile

import numpy as np

from vtlab import build, core, image, layout, stream, synth
from vtlab.core import VirtualTextureFile
from vtlab.render import Camera, render_frame, render_reference
from vtlab.runtime import VtRuntime

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

mesh, sources = synth.corridor_scene(segments=8, panel=1.0, texture_size=256, seed=11)
result = layout.retexture(mesh, sources, page_size=64)
tmp = tempfile.mkdtemp()
vtx, vtn = os.path.join(tmp, "w.vtx"), os.path.join(tmp, "w.vtn")
meta = build.build_virtual_texture(result.layout, vtx, vtn, page_size=64, border=4)
_, chain = build.read_mip_chain(vtx)
print(f"world: {meta.dim_max}^2 texels, {meta.total_pages} pages, {meta.mip_count} mips")

cam = Camera((0.5, 0.5, -1.5), yaw=0.35, fov_y=np.radians(70), near=0.05, far=100.0)
viewport = (384, 288)

with VirtualTextureFile(vtx) as vt:
    rt = VtRuntime(vt, 37, 37)  # enough frames for every page of the pyramid
    rt.lock_mips(3)

    coarse = render_frame(result.mesh, cam, meta, rt.cache.texture,
                          rt.indirection.frame_x, rt.indirection.frame_y,
                          rt.indirection.source_mip, viewport, "bilinear")

    for p_abs in range(meta.total_pages):
        rt.insert(vt.read_page(p_abs))
    rt.update()
    full = render_frame(result.mesh, cam, meta, rt.cache.texture,
                        rt.indirection.frame_x, rt.indirection.frame_y,
                        rt.indirection.source_mip, viewport, "bilinear")

ref = render_reference(result.mesh, cam, meta, chain, viewport, "bilinear")
assert np.array_equal(full.color, ref.color)
print("full residency reproduces the direct mip-chain reference exactly")

# false-color the needed mip: dark = coarse, bright = fine
need = full.need_mip.astype(np.float64)
need[need < 0] = np.nan
lo, hi = np.nanmin(need), np.nanmax(need)
ramp = np.zeros(viewport[::-1] + (3,), np.uint8)
mask = full.need_mip >= 0
ramp[mask, 1] = (40 + 215 * (need[mask] - lo) / max(hi - lo, 1)).astype(np.uint8)

image.save_png(coarse.color, os.path.join(out_dir, "render_coarse.png"))
image.save_png(full.color, os.path.join(out_dir, "render_full.png"))
image.save_png(ramp, os.path.join(out_dir, "needed_mips.png"))
print(f"needed mips span {int(lo)}..{int(hi)}; wrote render_coarse.png, "
      f"render_full.png, needed_mips.png under {out_dir}")

# The same analysis the streamer runs: per-page pixel counts.
resident = rt.cache.frame_of_page >= 0
stats = stream.analyze(full, meta, resident)
order = np.argsort(stats.pixel_count)[::-1][:5]
print("\nbusiest pages on screen:")
for i in order:
    page = core.from_abs(int(stats.pages[i]), meta.mip_count)
    print(f"  {page}: {stats.pixel_count[i]} pixels")
