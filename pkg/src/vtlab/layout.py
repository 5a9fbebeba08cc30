"""Mesh retexturing: give every face of a scene its own texture region.

Each "face" is a group of triangles sharing one source texture. The source
is duplicated per face, UV repetitions are unrolled by tiling the copy, the
copies are placed first-fit on a page-granular grid, and the vertex UVs are
rewritten to address the assembled virtual texture. The known inefficiencies
of this scheme (whole-texture duplication, page rounding waste) are kept as
is; packing quality is not the point here.

Scene JSON:

  {
    "textures": {"name": "relative/path.png", ...},   # optional
    "vertices": [[x, y, z, s, t], ...],
    "faces": [{"texture": "name", "triangles": [[i, j, k], ...]}, ...]
  }

After retexturing, faces carry texture = null and their vertices address
the virtual texture directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .build import LayoutFile, LayoutPlacement


@dataclass
class Face:
    texture: Optional[str]
    triangles: np.ndarray  # (k, 3) int vertex indices
    degenerate: bool = False


@dataclass
class SceneMesh:
    vertices: np.ndarray  # (n, 5) float64: x, y, z, s, t
    faces: list[Face]
    textures: dict[str, str] = field(default_factory=dict)  # name -> image path

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 5)
        n = len(self.vertices)
        for face in self.faces:
            face.triangles = np.asarray(face.triangles, dtype=np.int64).reshape(-1, 3)
            if face.triangles.size and (face.triangles.min() < 0 or face.triangles.max() >= n):
                raise ValueError("face references a vertex index out of range")


def save_scene(mesh: SceneMesh, path: str) -> None:
    data = {
        "textures": mesh.textures,
        "vertices": [[float(v) for v in row] for row in mesh.vertices],
        "faces": [
            {"texture": f.texture, "triangles": f.triangles.tolist()} for f in mesh.faces
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
        fh.write("\n")


def load_scene(path: str) -> SceneMesh:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    faces = [Face(f.get("texture"), np.asarray(f["triangles"])) for f in data["faces"]]
    return SceneMesh(np.asarray(data["vertices"]), faces, dict(data.get("textures", {})))


@dataclass
class Placement:
    """Region of one face's unique texture inside the top mip, in pixels."""

    face: int
    x: int
    y: int
    w: int
    h: int


class LayoutGrid:
    """Occupancy grid with page-sized cells; grows by doubling when full."""

    def __init__(self, side: int = 1):
        if side < 1 or side & (side - 1):
            raise ValueError("grid side must be a power of two")
        self.side = side
        self.occupancy = np.zeros((side, side), dtype=bool)

    def _grow(self) -> None:
        grown = np.zeros((self.side * 2, self.side * 2), dtype=bool)
        grown[: self.side, : self.side] = self.occupancy
        self.occupancy = grown
        self.side *= 2

    def first_fit(self, cols: int, rows: int) -> tuple[int, int]:
        """Claim the first free cols x rows block in row-major scan order.

        The grid doubles its side until the block fits, so this always
        succeeds.
        """
        if cols < 1 or rows < 1:
            raise ValueError("block must span at least one cell per axis")
        while True:
            if cols <= self.side and rows <= self.side:
                for y in range(self.side - rows + 1):
                    for x in range(self.side - cols + 1):
                        if not self.occupancy[y:y + rows, x:x + cols].any():
                            self.occupancy[y:y + rows, x:x + cols] = True
                            return x, y
            self._grow()


def estimate_entries(w: int, h: int, page_size: int) -> tuple[int, int]:
    """Grid cells a w x h texture fills: ceil per axis."""
    if w < 1 or h < 1:
        raise ValueError("texture must be at least 1x1")
    return -(-w // page_size), -(-h // page_size)


def unroll_face(uvs: np.ndarray, texture: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Tile the source so the face's UV range fits [0,1], normalizing the UVs.

    Repetition count per axis is ceil(max) - floor(min), at least 1. Returns
    (tiled image, remapped uvs, degenerate flag); a face with zero UV extent
    on either axis is flagged and given a single copy.
    """
    uvs = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
    if not np.isfinite(uvs).all():
        raise ValueError("face has non-finite texture coordinates")
    lo = np.floor(uvs.min(axis=0))
    hi = np.ceil(uvs.max(axis=0))
    reps = np.maximum((hi - lo).astype(np.int64), 1)
    degenerate = bool((uvs.max(axis=0) == uvs.min(axis=0)).any())
    if degenerate:
        reps = np.array([1, 1])
    tiled = np.tile(texture, (int(reps[1]), int(reps[0]), 1))
    remapped = (uvs - lo) / reps
    return tiled, remapped, degenerate


def transform_uv(uv: np.ndarray, placement: Placement, target_dim: int) -> np.ndarray:
    """Map face-local UVs in [0,1] into the assembled texture: (uv*size + origin) / dim."""
    uv = np.asarray(uv, dtype=np.float64)
    s = (uv[..., 0] * placement.w + placement.x) / target_dim
    t = (uv[..., 1] * placement.h + placement.y) / target_dim
    return np.stack([s, t], axis=-1)


@dataclass
class RetextureResult:
    layout: LayoutFile
    images: dict[str, np.ndarray]  # unique image name -> RGB8 array
    mesh: SceneMesh  # remapped copy, vertices split per face
    placements: list[Placement]


def retexture(mesh: SceneMesh, sources: dict[str, np.ndarray], page_size: int = 128) -> RetextureResult:
    """Duplicate, unroll, place, and remap every face of a scene.

    Shared vertices are split so each face owns its UVs. The returned layout
    feeds the texture-build pipeline unchanged.
    """
    grid = LayoutGrid()
    staged = []  # (face, unrolled image, remapped uvs, placement)
    for fi, face in enumerate(mesh.faces):
        if face.texture is None or face.texture not in sources:
            raise KeyError(f"face {fi} references unknown texture {face.texture!r}")
        idx = np.unique(face.triangles)
        tiled, remapped, degenerate = unroll_face(mesh.vertices[idx, 3:5], sources[face.texture])
        h, w = tiled.shape[:2]
        cols, rows = estimate_entries(w, h, page_size)
        cx, cy = grid.first_fit(cols, rows)
        placement = Placement(fi, cx * page_size, cy * page_size, w, h)
        staged.append((face, idx, tiled, remapped, placement, degenerate))

    target_dim = grid.side * page_size
    layout = LayoutFile(target_dim)
    images: dict[str, np.ndarray] = {}
    new_vertices = []
    new_faces = []
    placements = []
    for face, idx, tiled, remapped, placement, degenerate in staged:
        name = f"face{placement.face:04d}"
        images[name] = tiled
        layout.placements.append(LayoutPlacement(tiled, placement.x, placement.y))
        placements.append(placement)
        # split shared vertices: the face gets private copies with remapped uvs
        base = len(new_vertices)
        remap_index = {int(old): base + k for k, old in enumerate(idx)}
        uv2 = transform_uv(remapped, placement, target_dim)
        for k, old in enumerate(idx):
            x, y, z = mesh.vertices[old, :3]
            new_vertices.append([x, y, z, uv2[k, 0], uv2[k, 1]])
        tri = np.vectorize(remap_index.__getitem__)(face.triangles)
        new_faces.append(Face(None, tri, degenerate=degenerate))

    out_mesh = SceneMesh(np.asarray(new_vertices, dtype=np.float64), new_faces)
    return RetextureResult(layout, images, out_mesh, placements)
