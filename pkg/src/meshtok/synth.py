"""Synthetic test shapes: icospheres, tori, fan complexes and random
triangle soups. Used by the test corpus and handy for CLI experiments."""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, QuantizedMesh


def icosphere(subdivisions: int = 0, radius: float = 1.0) -> Mesh:
    """Unit icosahedron subdivided ``subdivisions`` times, vertices projected
    onto the sphere of the given radius. Face count is 20 * 4**subdivisions."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
            (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
            (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
        ],
        dtype=np.float64,
    )
    verts = [tuple(v / np.linalg.norm(v)) for v in raw]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]

    index: dict[tuple, int] = {v: n for n, v in enumerate(verts)}

    def midpoint(a: int, b: int) -> int:
        m = np.asarray(verts[a]) + np.asarray(verts[b])
        m = tuple(m / np.linalg.norm(m))
        if m not in index:
            index[m] = len(verts)
            verts.append(m)
        return index[m]

    for _ in range(subdivisions):
        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces

    return Mesh(np.asarray(verts) * radius, np.asarray(faces))


def torus(
    major_segments: int = 24,
    minor_segments: int = 12,
    major_radius: float = 1.0,
    minor_radius: float = 0.35,
) -> Mesh:
    """Standard parametric torus, two triangles per grid quad."""
    verts = []
    for s in range(major_segments):
        theta = 2.0 * np.pi * s / major_segments
        for t in range(minor_segments):
            phi = 2.0 * np.pi * t / minor_segments
            rim = major_radius + minor_radius * np.cos(phi)
            verts.append(
                (rim * np.cos(theta), rim * np.sin(theta), minor_radius * np.sin(phi))
            )
    faces = []
    for s in range(major_segments):
        for t in range(minor_segments):
            v00 = s * minor_segments + t
            v01 = s * minor_segments + (t + 1) % minor_segments
            v10 = ((s + 1) % major_segments) * minor_segments + t
            v11 = ((s + 1) % major_segments) * minor_segments + (t + 1) % minor_segments
            faces.append((v00, v10, v11))
            faces.append((v00, v11, v01))
    return Mesh(np.asarray(verts), np.asarray(faces))


def hex_umbrella(resolution: int = 512) -> QuantizedMesh:
    """Six triangles fanning all the way around a hub vertex."""
    center = (256, 256, 300)
    rim = []
    for t in range(6):
        ang = 2.0 * np.pi * t / 6
        rim.append((int(256 + 100 * np.cos(ang)), int(256 + 100 * np.sin(ang)), 256))
    verts = [center] + rim
    faces = [(0, 1 + t, 1 + (t + 1) % 6) for t in range(6)]
    return QuantizedMesh(resolution, np.asarray(verts), np.asarray(faces))


def random_fan_complex(
    seed: int, n_fans: int = 8, resolution: int = 512
) -> QuantizedMesh:
    """Random collection of partial umbrellas on the grid; fans may share
    vertices with each other, so edges can be non-manifold."""
    rng = np.random.Generator(np.random.PCG64(seed))
    vert_index: dict[tuple[int, int, int], int] = {}
    verts: list[tuple[int, int, int]] = []
    faces: list[tuple[int, int, int]] = []

    def intern(p) -> int:
        p = tuple(int(v) for v in p)
        if p not in vert_index:
            vert_index[p] = len(verts)
            verts.append(p)
        return vert_index[p]

    for _ in range(n_fans):
        hub = rng.integers(60, resolution - 60, size=3)
        n_spokes = int(rng.integers(3, 9))
        radius = float(rng.integers(8, 50))
        tilt = rng.random() * 2 * np.pi
        spokes = []
        for t in range(n_spokes):
            ang = tilt + 2.0 * np.pi * t / n_spokes
            p = hub + np.array(
                [radius * np.cos(ang), radius * np.sin(ang), rng.integers(-5, 6)]
            )
            spokes.append(np.clip(np.round(p), 0, resolution - 1))
        hub_id = intern(hub)
        for t in range(n_spokes - 1):
            a, b = intern(spokes[t]), intern(spokes[t + 1])
            if len({hub_id, a, b}) == 3:
                faces.append((hub_id, a, b))

    if not faces:  # all fans degenerated; fall back to one triangle
        faces = [(intern((0, 0, 0)), intern((10, 0, 0)), intern((0, 10, 0)))]
    return QuantizedMesh(resolution, np.asarray(verts), np.asarray(faces))


def random_soup(seed: int, n_faces: int = 40, resolution: int = 512) -> QuantizedMesh:
    """Unstructured triangles over a shared random vertex pool; heavy on
    non-manifold connectivity."""
    rng = np.random.Generator(np.random.PCG64(seed))
    n_verts = max(4, n_faces // 2)
    coords = {
        tuple(int(v) for v in rng.integers(0, resolution, size=3))
        for _ in range(n_verts)
    }
    verts = sorted(coords)
    faces = []
    while len(faces) < n_faces:
        tri = rng.choice(len(verts), size=3, replace=False)
        faces.append(tuple(int(v) for v in tri))
    return QuantizedMesh(resolution, np.asarray(verts), np.asarray(faces))


def two_triangle_cases(resolution: int = 512) -> dict[str, QuantizedMesh]:
    """Edge-case pairs of triangles: shared edge (both windings), shared
    vertex only, disconnected, and an exact duplicate face."""
    v = {
        "a": (10, 10, 10), "b": (40, 10, 10), "c": (25, 40, 10),
        "d": (25, -0 + 50, 40), "e": (200, 200, 200), "f": (230, 200, 200),
        "g": (215, 230, 200),
    }

    def qm(names, faces):
        order = {n: i for i, n in enumerate(names)}
        return QuantizedMesh(
            resolution,
            np.asarray([v[n] for n in names]),
            np.asarray([[order[x] for x in f] for f in faces]),
        )

    return {
        "shared_edge_consistent": qm(
            ["a", "b", "c", "d"], [("a", "b", "c"), ("b", "a", "d")]
        ),
        "shared_edge_inconsistent": qm(
            ["a", "b", "c", "d"], [("a", "b", "c"), ("a", "b", "d")]
        ),
        "shared_vertex": qm(
            ["a", "b", "c", "e", "f"], [("a", "b", "c"), ("c", "e", "f")]
        ),
        "disconnected": qm(
            ["a", "b", "c", "e", "f", "g"], [("a", "b", "c"), ("e", "f", "g")]
        ),
        "duplicate_face": qm(
            ["a", "b", "c"], [("a", "b", "c"), ("a", "b", "c")]
        ),
    }
