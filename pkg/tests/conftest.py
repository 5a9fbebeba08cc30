"""Shared fixtures: a small retextured world with a built virtual texture."""

import math

import numpy as np
import pytest

from vtlab import build, core, layout, synth
from vtlab.core import VirtualTextureFile
from vtlab.render import Camera
from vtlab.runtime import VtRuntime


@pytest.fixture(scope="session")
def small_world(tmp_path_factory):
    """Five textured quads -> retexture -> 512^2 virtual texture (page 32)."""
    quads = [
        # back wall, floor, ceiling, two side walls of a 4x4x6 room
        (np.array([-2.0, -2.0, -6.0]), np.array([4.0, 0.0, 0.0]), np.array([0.0, 4.0, 0.0]), "a"),
        (np.array([-2.0, -2.0, 0.0]), np.array([4.0, 0.0, 0.0]), np.array([0.0, 0.0, -6.0]), "b"),
        (np.array([-2.0, 2.0, 0.0]), np.array([4.0, 0.0, 0.0]), np.array([0.0, 0.0, -6.0]), "c"),
        (np.array([-2.0, -2.0, 0.0]), np.array([0.0, 4.0, 0.0]), np.array([0.0, 0.0, -6.0]), "d"),
        (np.array([2.0, -2.0, 0.0]), np.array([0.0, 4.0, 0.0]), np.array([0.0, 0.0, -6.0]), "e"),
    ]
    mesh = synth.quad_mesh(quads)
    sources = {
        "a": synth.noise_texture(128, 1),
        "b": synth.noise_texture(128, 2),
        "c": synth.checker_texture(128, 8),
        "d": synth.noise_texture(128, 4),
        "e": synth.gradient_texture(128),
    }
    result = layout.retexture(mesh, sources, page_size=32)
    out = tmp_path_factory.mktemp("world")
    vtx = str(out / "world.vtx")
    vtn = str(out / "world.vtn")
    meta = build.build_virtual_texture(result.layout, vtx, vtn, page_size=32, border=4)
    chain = build.build_chain(build.compose_top(result.layout), meta)
    return {
        "mesh": result.mesh,
        "vtx": vtx,
        "vtn": vtn,
        "meta": meta,
        "chain": chain,
        "noise": core.read_noise_table(vtn, meta),
    }


@pytest.fixture()
def full_runtime(small_world):
    """Runtime with every page resident (full residency)."""
    vt = VirtualTextureFile(small_world["vtx"])
    meta = vt.meta
    side = math.ceil(math.sqrt(meta.total_pages))
    rt = VtRuntime(vt, side, side)
    for p_abs in range(meta.total_pages):
        rt.insert(vt.read_page(p_abs))
    rt.update()
    yield rt
    vt.close()


@pytest.fixture()
def root_runtime(small_world):
    """Runtime with only the root page resident."""
    vt = VirtualTextureFile(small_world["vtx"])
    rt = VtRuntime(vt, 8, 8)
    yield rt
    vt.close()


@pytest.fixture()
def room_camera():
    return Camera((0.0, 0.0, 0.0), yaw=0.0, pitch=0.0,
                  fov_y=math.radians(70.0), near=0.05, far=100.0)
