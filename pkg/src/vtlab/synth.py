"""Procedural textures, scenes, and camera paths for experiments and tests.

Nothing here is required to use the library on real data; it exists so the
demos and the test suite can construct deterministic desk-scale worlds.
"""

from __future__ import annotations

import math

import numpy as np

from .layout import Face, SceneMesh
from .render import Camera


def flat_texture(size: int, color: tuple[int, int, int]) -> np.ndarray:
    return np.full((size, size, 3), color, dtype=np.uint8)


def checker_texture(size: int, cells: int, c0=(40, 40, 40), c1=(220, 220, 220)) -> np.ndarray:
    idx = np.arange(size) * cells // size
    board = (idx[:, None] + idx) % 2
    out = np.where(board[..., None] == 0, np.array(c0, np.uint8), np.array(c1, np.uint8))
    return out.astype(np.uint8)

def noise_texture(size: int, seed: int, low: int = 0, high: int = 255) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(low, high + 1, size=(size, size, 3), dtype=np.int64).astype(np.uint8)


def gradient_texture(size: int, c0=(0, 0, 0), c1=(255, 255, 255)) -> np.ndarray:
    ramp = np.linspace(0.0, 1.0, size)[None, :, None]
    img = np.asarray(c0, np.float64) * (1 - ramp) + np.asarray(c1, np.float64) * ramp
    return np.floor(img + 0.5).astype(np.uint8) * np.ones((size, 1, 1), np.uint8)


def quad_mesh(quads: list[tuple[np.ndarray, np.ndarray, np.ndarray, str]]) -> SceneMesh:
    """Build a mesh from textured quads given as (origin, edge_u, edge_v, texture).

    Each quad becomes one face of two triangles with UVs spanning [0, 1]^2:
    u runs along edge_u, v along edge_v.
    """
    vertices = []
    faces = []
    for origin, eu, ev, tex in quads:
        origin = np.asarray(origin, dtype=np.float64)
        eu = np.asarray(eu, dtype=np.float64)
        ev = np.asarray(ev, dtype=np.float64)
        base = len(vertices)
        for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
            p = origin + du * eu + dv * ev
            vertices.append([p[0], p[1], p[2], float(du), float(dv)])
        tris = np.array([[base, base + 1, base + 2], [base, base + 2, base + 3]])
        faces.append(Face(tex, tris))
    return SceneMesh(np.asarray(vertices, dtype=np.float64), faces)


def corridor_scene(
    segments: int = 20,
    panel: float = 1.0,
    texture_size: int = 256,
    seed: int = 7,
    texture_pool: int = 6,
    flat_walls: bool = False,
) -> tuple[SceneMesh, dict[str, np.ndarray]]:
    """A straight corridor along -z: floor, ceiling, and both walls, panelized.

    Every panel is one face referencing a texture from a small procedural
    pool; with flat_walls the left wall and the ceiling use one uniform
    color so their pages carry no detail over their ancestors.
    """
    sources: dict[str, np.ndarray] = {}
    for i in range(texture_pool):
        sources[f"noise{i}"] = noise_texture(texture_size, seed + i)
    sources["checker"] = checker_texture(texture_size, 16)
    sources["plain"] = flat_texture(texture_size, (90, 110, 130))
    names = [f"noise{i}" for i in range(texture_pool)] + ["checker"]

    quads = []
    w = panel  # corridor is one panel wide and one panel tall
    for k in range(segments):
        z0 = -k * panel
        ez = np.array([0.0, 0.0, -panel])
        pick = names[k % len(names)]
        alt = names[(k * 3 + 1) % len(names)]
        # floor (y=0) and ceiling (y=w)
        quads.append((np.array([0.0, 0.0, z0]), np.array([w, 0.0, 0.0]), ez, pick))
        quads.append((np.array([0.0, w, z0]), np.array([w, 0.0, 0.0]), ez,
                      "plain" if flat_walls else alt))
        # left wall (x=0) and right wall (x=w)
        quads.append((np.array([0.0, 0.0, z0]), np.array([0.0, w, 0.0]), ez,
                      "plain" if flat_walls else names[(k * 5 + 2) % len(names)]))
        quads.append((np.array([w, 0.0, z0]), np.array([0.0, w, 0.0]), ez,
                      names[(k * 7 + 3) % len(names)]))
    # end cap
    z_end = -segments * panel
    quads.append((np.array([0.0, 0.0, z_end]), np.array([w, 0.0, 0.0]),
                  np.array([0.0, w, 0.0]), "checker"))
    return quad_mesh(quads), sources


def single_quad_scene(texture: str = "tex", size: float = 1.0,
                      distance: float = 1.0) -> SceneMesh:
    """One screen-facing quad centered on the -z axis at the given distance."""
    half = size / 2.0
    quads = [(
        np.array([-half, -half, -distance]),
        np.array([size, 0.0, 0.0]),
        np.array([0.0, size, 0.0]),
        texture,
    )]
    return quad_mesh(quads)


def _corridor_cam(x, y, z, yaw, fov_y):
    return Camera((x, y, z), yaw=yaw, fov_y=fov_y, near=0.05, far=200.0)


def flythrough_path(frames: int = 120, panel: float = 1.0,
                    fov_y: float = math.radians(70.0)) -> list[Camera]:
    """Indoor-style flythrough with heavy page churn.

    Walks deep into the corridor, snaps around with a fast 180 degree turn,
    walks back, sweeps the view slowly, and finally pushes toward a wall.
    """
    cams = []
    x = y = panel / 2.0
    z = -panel
    pos_z = z
    yaw = 0.0
    for i in range(frames):
        if i < 25:
            pos_z = z - i * 0.6 * panel
        elif i < 33:
            yaw += math.radians(22.5)
        elif i < 70:
            pos_z += 0.35 * panel
        elif i < 100:
            yaw -= math.radians(6.0)
        else:
            pos_z -= 0.3 * panel
        cams.append(_corridor_cam(x, y, pos_z, yaw, fov_y))
    return cams


def walkthrough_path(frames: int = 110, panel: float = 1.0, speed: float = 0.25,
                     fov_y: float = math.radians(70.0)) -> list[Camera]:
    """Steady walk down the corridor with a gentle sinusoidal gaze wander."""
    cams = []
    x = y = panel / 2.0
    pos_z = -panel
    for i in range(frames):
        pos_z -= speed * panel
        yaw = math.radians(8.0) * math.sin(i / 9.0)
        cams.append(_corridor_cam(x, y, pos_z, yaw, fov_y))
    return cams


def rotation_path(frames: int = 70, panel: float = 1.0,
                  step: float = math.radians(3.0),
                  fov_y: float = math.radians(70.0)) -> list[Camera]:
    """Short walk in, then a sustained per-frame rotation while drifting."""
    cams = []
    x = y = panel / 2.0
    pos_z = -panel
    yaw = 0.0
    for i in range(frames):
        if i < 15:
            pos_z -= 0.25 * panel
        else:
            yaw += step
            pos_z -= 0.18 * panel
        cams.append(_corridor_cam(x, y, pos_z, yaw, fov_y))
    return cams


def snap_path(frames: int = 40, snap_frame: int = 20,
              angle: float = math.radians(45.0), panel: float = 1.0,
              fov_y: float = math.radians(70.0)) -> list[Camera]:
    """Hold still, rotate the whole angle within one frame, hold again."""
    cams = []
    pos = (panel / 2.0, panel / 2.0, -3.0 * panel)
    for i in range(frames):
        yaw = angle if i >= snap_frame else 0.0
        cams.append(_corridor_cam(pos[0], pos[1], pos[2], yaw, fov_y))
    return cams
