"""Wavefront OBJ and ASCII PLY readers plus the OBJ writer.

Only geometry is handled: ``v``/``f`` for OBJ, the vertex x/y/z properties and
face index lists for PLY. Everything else in the files is ignored. Polygons
with more than three vertices are fan-triangulated in file order.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import ParseError, StructureError
from .mesh import Mesh

FORMAT_OBJ = "OBJ"
FORMAT_PLY = "PLY"


def load_mesh(data: bytes, fmt: str) -> Mesh:
    """Parse raw file content in the given format ("OBJ" or "PLY-ascii")."""
    fmt = fmt.upper()
    if fmt in (FORMAT_OBJ, "OBJ"):
        return _parse_obj(data)
    if fmt in (FORMAT_PLY, "PLY", "PLY-ASCII"):
        return _parse_ply(data)
    raise ParseError(f"unsupported mesh format {fmt!r}")


def load_mesh_path(path: str | Path) -> Mesh:
    """Load a mesh file, picking the format from the extension."""
    path = Path(path)
    fmt = FORMAT_PLY if path.suffix.lower() == ".ply" else FORMAT_OBJ
    return load_mesh(path.read_bytes(), fmt)


def save_obj(mesh: Mesh, path: str | Path | None = None) -> str:
    """Serialize to the OBJ subset this package reads (v and f lines only)."""
    out = io.StringIO()
    for x, y, z in mesh.vertices.tolist():
        out.write(f"v {x!r} {y!r} {z!r}\n")
    for a, b, c in mesh.faces.tolist():
        out.write(f"f {a + 1} {b + 1} {c + 1}\n")
    text = out.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def _fan(poly: list[int]) -> list[tuple[int, int, int]]:
    return [(poly[0], poly[i - 1], poly[i]) for i in range(2, len(poly))]


def _parse_obj(data: bytes) -> Mesh:
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(data.decode("utf-8", errors="replace").splitlines(), 1):
        tokens = raw.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        kind = tokens[0]
        if kind == "v":
            if len(tokens) < 4:
                raise ParseError("vertex line needs 3 coordinates", lineno)
            try:
                vertices.append(tuple(float(t) for t in tokens[1:4]))
            except ValueError:
                raise ParseError(f"bad vertex coordinate in {raw!r}", lineno) from None
        elif kind == "f":
            if len(tokens) < 4:
                raise ParseError("face line needs at least 3 indices", lineno)
            poly = []
            for tok in tokens[1:]:
                head = tok.split("/")[0]
                try:
                    ref = int(head)
                except ValueError:
                    raise ParseError(f"bad face index {tok!r}", lineno) from None
                if ref == 0:
                    raise ParseError("face index 0 is not valid in OBJ", lineno)
                # Negative indices are relative to the vertices seen so far.
                idx = ref - 1 if ref > 0 else len(vertices) + ref
                if idx < 0 or idx >= len(vertices):
                    raise StructureError(
                        f"line {lineno}: face references vertex {ref}, "
                        f"only {len(vertices)} defined"
                    )
                poly.append(idx)
            faces.extend(_fan(poly))
        # all other directives ignored
    return Mesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def _parse_ply(data: bytes) -> Mesh:
    lines = data.decode("utf-8", errors="replace").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' magic line", 1)

    # Header: collect element sizes and the x/y/z property slots.
    n_vertices = n_faces = 0
    vertex_props: list[str] = []
    current: str | None = None
    body_start = None
    ascii_format = False
    for lineno, raw in enumerate(lines[1:], 2):
        tokens = raw.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                raise ParseError("only ascii PLY is supported", lineno)
            ascii_format = True
        elif tokens[0] == "element":
            if len(tokens) < 3:
                raise ParseError("malformed element line", lineno)
            current = tokens[1]
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError(f"bad element count {tokens[2]!r}", lineno) from None
            if current == "vertex":
                n_vertices = count
            elif current == "face":
                n_faces = count
        elif tokens[0] == "property":
            if current == "vertex" and tokens[1] != "list":
                vertex_props.append(tokens[-1])
        elif tokens[0] == "end_header":
            body_start = lineno
            break
    if body_start is None:
        raise ParseError("missing end_header", len(lines))
    if not ascii_format:
        raise ParseError("missing 'format ascii' line", 1)
    try:
        slots = [vertex_props.index(p) for p in ("x", "y", "z")]
    except ValueError:
        raise ParseError("vertex element lacks x/y/z properties", body_start) from None

    body = lines[body_start:]
    if len(body) < n_vertices + n_faces:
        raise ParseError(
            f"expected {n_vertices + n_faces} body lines, found {len(body)}",
            len(lines),
        )
    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for i in range(n_vertices):
        lineno = body_start + 1 + i
        tokens = body[i].split()
        if len(tokens) < len(vertex_props):
            raise ParseError("short vertex row", lineno)
        try:
            for axis, slot in enumerate(slots):
                vertices[i, axis] = float(tokens[slot])
        except ValueError:
            raise ParseError(f"bad vertex value in {body[i]!r}", lineno) from None

    faces: list[tuple[int, int, int]] = []
    for i in range(n_faces):
        lineno = body_start + 1 + n_vertices + i
        tokens = body[n_vertices + i].split()
        try:
            k = int(tokens[0])
            poly = [int(t) for t in tokens[1 : 1 + k]]
        except (ValueError, IndexError):
            raise ParseError(f"bad face row {body[n_vertices + i]!r}", lineno) from None
        if len(poly) != k or k < 3:
            raise ParseError(f"face row declares {k} indices", lineno)
        for idx in poly:
            if idx < 0 or idx >= n_vertices:
                raise StructureError(
                    f"line {lineno}: face references vertex {idx}, "
                    f"only {n_vertices} defined"
                )
        faces.extend(_fan(poly))
    return Mesh(vertices, np.array(faces, dtype=np.int64).reshape(-1, 3))
