"""vtlab: a deterministic virtual-texturing laboratory.

Builds tiled mip pyramids, renders scenes through an emulated
virtual-texturing shader on the CPU, simulates page streaming under a fixed
per-frame budget, and compares page-priority heuristics with full-reference
image quality metrics.
"""

from .core import (
    FormatError,
    PageId,
    PagePayload,
    TextureMeta,
    VirtualTextureFile,
    abs_index,
    ancestors,
    children,
    from_abs,
    page_file_offset,
    pages_in_mip,
    parent,
    read_noise_table,
    rel_index,
    rel_xy,
    write_noise_table,
    write_virtual_texture,
)
from .build import (
    LayoutError,
    LayoutFile,
    LayoutPlacement,
    build_chain,
    build_virtual_texture,
    compose_top,
    compute_noise,
    cut_page,
    read_mip_chain,
)
from .image import box_downsample, load_png, luminance, save_png, upsample_bilinear_2x
from .layout import Face, LayoutGrid, Placement, SceneMesh, retexture, transform_uv, unroll_face
from .metrics import QualityRecord, SsimParams, mse, report, rmse, ssim, wssim
from .render import (
    Camera,
    FrameBuffers,
    compute_mip,
    decode_need8,
    encode_need32,
    encode_need8,
    identify_page,
    render_frame,
    render_reference,
    sample_physical,
)
from .runtime import CapacityError, IndirectionTable, PageCache, PageTable, VtRuntime
from .stream import (
    HeuristicConfig,
    PageStats,
    SimConfig,
    SimResult,
    StreamQueue,
    analyze,
    ancestor_closure,
    hotspot_center,
    lookahead_camera,
    merge_need,
    noise_scale,
    simulate,
)

__version__ = "0.1.0"
