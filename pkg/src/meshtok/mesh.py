"""Triangle-mesh types and the geometry operations upstream of the tokenizer:
normalization, grid quantization, right-angle rotation augmentation and
area-weighted surface sampling.

All operations are pure: they never mutate their inputs and take randomness
only from explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DomainError, StructureError

Axis = str  # "X" | "Y" | "Z"

_AXES = {"X": 0, "Y": 1, "Z": 2}


@dataclass(frozen=True)
class Mesh:
    """A triangle mesh with real-valued coordinates.

    vertices: (n, 3) float array, faces: (m, 3) int array of vertex indices.
    Counter-clockwise winding is preserved by every operation.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise StructureError(
                f"face references vertex index outside [0, {len(v)})"
            )

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)


@dataclass(frozen=True)
class QuantizedMesh:
    """A mesh on the integer grid [0, resolution-1]^3.

    Vertices are deduplicated (no two share a grid triple) and every face has
    three distinct vertex indices.
    """

    resolution: int
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.int64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.resolution < 2:
            raise DomainError(f"resolution must be >= 2, got {self.resolution}")
        if v.size and (v.min() < 0 or v.max() >= self.resolution):
            raise DomainError(
                f"vertex coordinate outside [0, {self.resolution - 1}]"
            )
        if len(v) != len({tuple(p) for p in v.tolist()}):
            raise StructureError("duplicate quantized vertices")
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise StructureError("face references missing vertex")
            bad = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if bad.any():
                raise StructureError("face with repeated vertex index")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)


@dataclass(frozen=True)
class NormalizationTransform:
    """Affine map applied by :func:`normalize`: ``c' = (c + translation) * scale``."""

    translation: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3)
        )
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    def apply(self, coords: np.ndarray) -> np.ndarray:
        return (np.asarray(coords, dtype=np.float64) + self.translation) * self.scale

    def invert(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(coords, dtype=np.float64) / self.scale - self.translation


@dataclass(frozen=True)
class PointSet:
    """Points sampled from a surface together with the seed that produced them."""

    points: np.ndarray
    seed: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(
            self, "points", np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        )

    def __len__(self) -> int:
        return len(self.points)


def normalize(mesh: Mesh) -> tuple[Mesh, NormalizationTransform]:
    """Fit the mesh into the unit cube.

    The longest bounding-box edge maps to exactly [0, 1]; the other axes keep
    their aspect ratio and are centered. Returns the normalized mesh and the
    transform that was applied (invertible up to floating rounding).
    """
    if mesh.vertex_count == 0:
        raise DegenerateInputError("mesh has no vertices")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    extent = hi - lo
    longest = float(extent.max())
    if longest <= 0.0:
        raise DegenerateInputError("mesh has zero extent (all vertices identical)")
    # Centering offset per axis; exactly 0 on the longest axis.
    offset = 0.5 * (1.0 - extent / longest)
    # Division (not multiplication by 1/longest) makes the longest-axis
    # endpoints land on 0.0 and 1.0 exactly.
    coords = (mesh.vertices - lo) / longest + offset
    scale = 1.0 / longest
    translation = offset * longest - lo
    return (
        Mesh(coords, mesh.faces.copy()),
        NormalizationTransform(translation, scale),
    )


def quantize(mesh: Mesh, resolution: int) -> QuantizedMesh:
    """Snap coordinates in [0, 1] onto the integer grid.

    Per component ``q = clamp(floor(c * r), 0, r - 1)``. Vertices that land on
    the same grid triple are merged; faces left with fewer than three distinct
    vertices are dropped. Face order is preserved otherwise.
    """
    if resolution < 2:
        raise DomainError(f"resolution must be >= 2, got {resolution}")
    if mesh.vertex_count:
        tol = 1e-9
        lo, hi = mesh.vertices.min(), mesh.vertices.max()
        if lo < -tol or hi > 1.0 + tol:
            raise DomainError(
                f"coordinates must lie in [0, 1], found range [{lo}, {hi}]"
            )
    grid = np.floor(mesh.vertices * resolution).astype(np.int64)
    np.clip(grid, 0, resolution - 1, out=grid)

    remap = np.empty(len(grid), dtype=np.int64)
    merged: dict[tuple[int, int, int], int] = {}
    rows = []
    for idx, triple in enumerate(map(tuple, grid.tolist())):
        pos = merged.get(triple)
        if pos is None:
            pos = len(rows)
            merged[triple] = pos
            rows.append(triple)
        remap[idx] = pos

    faces = remap[mesh.faces] if mesh.face_count else mesh.faces.copy()
    if len(faces):
        keep = (
            (faces[:, 0] != faces[:, 1])
            & (faces[:, 1] != faces[:, 2])
            & (faces[:, 0] != faces[:, 2])
        )
        faces = faces[keep]
    return QuantizedMesh(resolution, np.array(rows, dtype=np.int64).reshape(-1, 3), faces)


def dequantize(qmesh: QuantizedMesh) -> Mesh:
    """Map grid coordinates back to bin centers: ``c = (q + 0.5) / r``."""
    coords = (qmesh.vertices + 0.5) / qmesh.resolution
    return Mesh(coords, qmesh.faces.copy())


def rotate90(mesh: Mesh, axis: Axis = "Z", k: int = 0) -> Mesh:
    """Rotate by ``k * 90`` degrees about the given axis through the
    bounding-box center.

    The rotation itself is a coordinate swap/negation (no trigonometry), so
    repeated application cancels exactly whenever the centering arithmetic is
    exact.
    """
    if axis not in _AXES:
        raise DomainError(f"axis must be one of X, Y, Z, got {axis!r}")
    if k not in (0, 1, 2, 3):
        raise DomainError(f"k must be in {{0, 1, 2, 3}}, got {k}")
    if k == 0 or mesh.vertex_count == 0:
        return Mesh(mesh.vertices.copy(), mesh.faces.copy())

    center = 0.5 * (mesh.vertices.min(axis=0) + mesh.vertices.max(axis=0))
    rel = mesh.vertices - center
    ax = _AXES[axis]
    u, v = [i for i in range(3) if i != ax]  # plane of rotation, (u, v) ordered
    out = rel.copy()
    if k == 1:
        out[:, u] = -rel[:, v]
        out[:, v] = rel[:, u]
    elif k == 2:
        out[:, u] = -rel[:, u]
        out[:, v] = -rel[:, v]
    else:
        out[:, u] = rel[:, v]
        out[:, v] = -rel[:, u]
    return Mesh(out + center, mesh.faces.copy())


def face_areas(mesh: Mesh) -> np.ndarray:
    """Per-face triangle areas in the mesh's native units."""
    if mesh.face_count == 0:
        return np.zeros(0, dtype=np.float64)
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def mesh_area(mesh: Mesh) -> float:
    """Total surface area: sum of triangle areas."""
    return float(face_areas(mesh).sum())


def sample_surface(mesh: Mesh, n_dense: int, n_select: int, seed: int) -> PointSet:
    """Draw ``n_dense`` area-weighted uniform points from the surface, then
    keep ``n_select`` of them chosen uniformly without replacement.

    Faces are picked with probability proportional to area and points are
    barycentric-uniform within each face. Deterministic for a fixed seed.
    """
    if n_select > n_dense:
        raise DomainError(f"n_select ({n_select}) exceeds n_dense ({n_dense})")
    if n_dense <= 0:
        raise DomainError("n_dense must be positive")
    areas = face_areas(mesh)
    total = areas.sum()
    if mesh.face_count == 0 or total <= 0.0:
        raise DegenerateInputError("mesh has no face with positive area")

    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = rng.choice(mesh.face_count, size=n_dense, p=areas / total)
    tri = mesh.vertices[mesh.faces[chosen]]  # (n_dense, 3, 3)
    u = rng.random(n_dense)
    v = rng.random(n_dense)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    dense = (
        tri[:, 0]
        + u[:, None] * (tri[:, 1] - tri[:, 0])
        + v[:, None] * (tri[:, 2] - tri[:, 0])
    )
    picked = _partial_fisher_yates(rng, n_dense, n_select)
    return PointSet(dense[picked], seed)


def _partial_fisher_yates(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """First k entries of a seeded Fisher-Yates shuffle of range(n)."""
    idx = np.arange(n)
    for i in range(k):
        j = int(rng.integers(i, n))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k]
