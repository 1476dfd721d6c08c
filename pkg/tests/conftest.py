"""Shared fixtures: the mesh corpus and face-set comparison helpers."""

from __future__ import annotations

import functools

import numpy as np
import pytest

from meshtok import Mesh, QuantizedMesh, normalize, quantize, rotate90
from meshtok.synth import (
    hex_umbrella,
    icosphere,
    random_fan_complex,
    random_soup,
    torus,
    two_triangle_cases,
)


def canonical_faces(qmesh: QuantizedMesh) -> list:
    """Multiset of faces, each rotated so its smallest coordinate triple
    leads; equal iff the face sets match up to cyclic rotation per face."""
    verts = qmesh.vertices
    out = []
    for f in qmesh.faces.tolist():
        tri = [tuple(verts[i]) for i in f]
        s = min(range(3), key=lambda t: tri[t])
        out.append((tri[s], tri[(s + 1) % 3], tri[(s + 2) % 3]))
    return sorted(out)


def quantize_mesh(mesh: Mesh, resolution: int = 512) -> QuantizedMesh:
    normalized, _ = normalize(mesh)
    return quantize(normalized, resolution)


@functools.lru_cache(maxsize=1)
def _corpus() -> tuple:
    """Deterministic mesh corpus: smooth icospheres up to ~20k faces, tori,
    random fan complexes, random soups and two-triangle edge cases."""
    items: list[tuple[str, QuantizedMesh]] = []
    for sub in range(1, 6):
        items.append((f"icosphere{sub}", quantize_mesh(icosphere(sub))))
    base = icosphere(3)
    for axis in "XYZ":
        for k in (1, 2, 3):
            items.append(
                (f"icosphere3_rot{axis}{k}", quantize_mesh(rotate90(base, axis, k)))
            )
    for major in (6, 8, 12, 16, 20, 24, 32, 40):
        for minor in (4, 6, 8, 12, 16):
            items.append(
                (f"torus{major}x{minor}", quantize_mesh(torus(major, minor)))
            )
    for seed in range(100):
        items.append((f"fans{seed}", random_fan_complex(seed, n_fans=4 + seed % 9)))
    for seed in range(40):
        items.append((f"soup{seed}", random_soup(seed, n_faces=10 + 3 * seed)))
    for name, qm in two_triangle_cases().items():
        items.append((name, qm))
    items.append(("hex_umbrella", hex_umbrella()))
    return tuple(items)


@pytest.fixture(scope="session")
def corpus():
    return _corpus()


@pytest.fixture
def unit_cube() -> Mesh:
    verts = np.array(
        [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float
    )
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
            [0, 4, 5], [0, 5, 1], [2, 3, 7], [2, 7, 6],
            [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3],
        ]
    )
    return Mesh(verts, faces)
