"""The mesh codec: connectivity-driven fan traversal, hierarchical
block-offset coordinate coding, and the lossless encoder/decoder pair.

A mesh is emitted patch by patch. Each patch is a triangle fan: a center
vertex plus an ordered ring, where consecutive ring vertices close faces with
the center. Grid coordinates are re-expressed as offsets (i, j, k) inside
three nested block levels of side lengths A, B and C (A*B*C == resolution),
and offsets that repeat between consecutive vertices of a patch are omitted.
Center vertices use a dedicated i-class so patch boundaries need no separator
token.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import DomainError, StreamParseError, StreamTruncationError
from .mesh import QuantizedMesh

Triple = tuple[int, int, int]


class TokenClass(IntEnum):
    I = 0
    CENTER_I = 1
    J = 2
    K = 3


@dataclass(frozen=True)
class VocabSpec:
    """Block side lengths per hierarchy level and the derived id layout.

    The token id space is four disjoint ranges: ring-i ids first, then
    center-i, then j, then k. Total size is 2*A^3 + B^3 + C^3 (4736 for the
    default 4/8/16 layout at resolution 512).
    """

    a: int = 4
    b: int = 8
    c: int = 16

    def __post_init__(self):
        for name, value in (("a", self.a), ("b", self.b), ("c", self.c)):
            if value < 1:
                raise DomainError(f"block size {name} must be >= 1, got {value}")
        if self.resolution < 2:
            raise DomainError("resolution a*b*c must be >= 2")

    @property
    def resolution(self) -> int:
        return self.a * self.b * self.c

    @property
    def i_base(self) -> int:
        return 0

    @property
    def center_base(self) -> int:
        return self.a**3

    @property
    def j_base(self) -> int:
        return 2 * self.a**3

    @property
    def k_base(self) -> int:
        return 2 * self.a**3 + self.b**3

    @property
    def class_bases(self) -> dict[TokenClass, int]:
        return {
            TokenClass.I: self.i_base,
            TokenClass.CENTER_I: self.center_base,
            TokenClass.J: self.j_base,
            TokenClass.K: self.k_base,
        }

    def classify(self, token_id: int) -> tuple[TokenClass, int]:
        """Split a global id into (class, in-class value)."""
        if 0 <= token_id < self.center_base:
            return TokenClass.I, token_id
        if token_id < self.j_base:
            return TokenClass.CENTER_I, token_id - self.center_base
        if token_id < self.k_base:
            return TokenClass.J, token_id - self.j_base
        if token_id < vocab_size(self):
            return TokenClass.K, token_id - self.k_base
        raise DomainError(
            f"token id {token_id} outside vocabulary of size {vocab_size(self)}"
        )


DEFAULT_SPEC = VocabSpec()


def vocab_size(spec: VocabSpec = DEFAULT_SPEC) -> int:
    """Number of distinct token ids: 2*A^3 + B^3 + C^3."""
    return 2 * spec.a**3 + spec.b**3 + spec.c**3


@dataclass(frozen=True)
class Token:
    token_class: TokenClass
    value: int

    def global_id(self, spec: VocabSpec = DEFAULT_SPEC) -> int:
        return spec.class_bases[self.token_class] + self.value


@dataclass(frozen=True)
class TokenSequence:
    """An encoded mesh: the token list plus the face count it represents."""

    tokens: tuple[Token, ...]
    face_count: int

    def ids(self, spec: VocabSpec = DEFAULT_SPEC) -> np.ndarray:
        return np.array([t.global_id(spec) for t in self.tokens], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class BlockIndex:
    i: int
    j: int
    k: int


@dataclass(frozen=True)
class Patch:
    """A triangle fan: faces are (center, ring[t], ring[t+1]) for each t.

    The ring is an open walk around the center; for a fan that closes all the
    way around, the final ring entry repeats the first one.
    """

    center: Triple
    ring: tuple[Triple, ...]

    @property
    def face_count(self) -> int:
        return len(self.ring) - 1

    def fan_faces(self) -> list[tuple[Triple, Triple, Triple]]:
        return [
            (self.center, self.ring[t], self.ring[t + 1])
            for t in range(len(self.ring) - 1)
        ]


def block_index(q: Triple, spec: VocabSpec = DEFAULT_SPEC) -> BlockIndex:
    """Re-express a grid coordinate as nested block offsets (i, j, k).

    Per axis the coordinate splits into its A-level digit (divide by B*C),
    B-level digit (divide the remainder by C) and C-level digit (mod C); the
    three axis digits at each level combine in x, y, z order.
    """
    x, y, z = (int(v) for v in q)
    r = spec.resolution
    for v in (x, y, z):
        if v < 0 or v >= r:
            raise DomainError(f"coordinate component {v} outside [0, {r - 1}]")
    a, b, c = spec.a, spec.b, spec.c
    bc = b * c
    i = (x // bc) * a * a + (y // bc) * a + (z // bc)
    j = (x % bc // c) * b * b + (y % bc // c) * b + (z % bc // c)
    k = (x % c) * c * c + (y % c) * c + (z % c)
    return BlockIndex(i, j, k)


def block_inverse(idx: BlockIndex, spec: VocabSpec = DEFAULT_SPEC) -> Triple:
    """Invert :func:`block_index`: recover (x, y, z) from block offsets."""
    a, b, c = spec.a, spec.b, spec.c
    if not (0 <= idx.i < a**3 and 0 <= idx.j < b**3 and 0 <= idx.k < c**3):
        raise DomainError(f"block index out of range: {idx}")
    bc = b * c
    coords = []
    for axis in range(3):
        shift_a = a ** (2 - axis)
        shift_b = b ** (2 - axis)
        shift_c = c ** (2 - axis)
        da = idx.i // shift_a % a
        db = idx.j // shift_b % b
        dc = idx.k // shift_c % c
        coords.append(da * bc + db * c + dc)
    return tuple(coords)


def block_index_arrays(
    coords: np.ndarray, spec: VocabSpec = DEFAULT_SPEC
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`block_index` over an (n, 3) coordinate array."""
    coords = np.asarray(coords, dtype=np.int64)
    a, b, c = spec.a, spec.b, spec.c
    bc = b * c
    x, y, z = coords[:, 0], coords[:, 1], coords[:, 2]
    i = (x // bc) * a * a + (y // bc) * a + (z // bc)
    j = (x % bc // c) * b * b + (y % bc // c) * b + (z % bc // c)
    k = (x % c) * c * c + (y % c) * c + (z % c)
    return i, j, k


def block_inverse_arrays(
    i: np.ndarray, j: np.ndarray, k: np.ndarray, spec: VocabSpec = DEFAULT_SPEC
) -> np.ndarray:
    """Vectorized :func:`block_inverse`; returns an (n, 3) coordinate array."""
    a, b, c = spec.a, spec.b, spec.c
    bc = b * c
    out = np.empty((len(i), 3), dtype=np.int64)
    for axis in range(3):
        da = i // a ** (2 - axis) % a
        db = j // b ** (2 - axis) % b
        dc = k // c ** (2 - axis) % c
        out[:, axis] = da * bc + db * c + dc
    return out


# ---------------------------------------------------------------------------
# Patch traversal
# ---------------------------------------------------------------------------


def build_patches(qmesh: QuantizedMesh) -> list[Patch]:
    """Partition the face set into triangle fans.

    Faces are visited in a canonical sorted order (each face keyed by its
    vertex triple rotated so the smallest grid coordinate comes first). The
    first unvisited face seeds a patch; the seed vertex touching the most
    unvisited faces becomes the center (ties broken by lowest coordinate).
    The fan then grows along the seed face's winding, forward first and then
    backward, stopping at visited faces, boundaries and non-manifold edges.
    Every face ends up in exactly one patch.
    """
    verts = [tuple(v) for v in qmesh.vertices.tolist()]
    faces = [tuple(f) for f in qmesh.faces.tolist()]
    if not faces:
        return []

    # Canonical face order: rotate so the lexicographically-smallest vertex
    # coordinate leads, then sort by the rotated coordinate triples.
    def canonical(face):
        rots = [(face[s], face[(s + 1) % 3], face[(s + 2) % 3]) for s in range(3)]
        return min(rots, key=lambda r: (verts[r[0]], verts[r[1]], verts[r[2]]))

    canon = [canonical(f) for f in faces]
    order = sorted(
        range(len(faces)),
        key=lambda fi: (verts[canon[fi][0]], verts[canon[fi][1]], verts[canon[fi][2]]),
    )

    directed: dict[tuple[int, int], list[int]] = {}
    undirected: dict[tuple[int, int], int] = {}
    unvisited_at: list[int] = [0] * len(verts)
    for fi, (p, q, s) in enumerate(faces):
        for u, v in ((p, q), (q, s), (s, p)):
            directed.setdefault((u, v), []).append(fi)
            key = (u, v) if u < v else (v, u)
            undirected[key] = undirected.get(key, 0) + 1
        for v in (p, q, s):
            unvisited_at[v] += 1

    visited = [False] * len(faces)

    def consume(fi: int):
        visited[fi] = True
        for v in faces[fi]:
            unvisited_at[v] -= 1

    def next_fan_face(u: int, v: int) -> tuple[int, int] | None:
        """Unvisited face across directed edge (u, v), or None. Growth stops
        on non-manifold edges (more than two incident faces)."""
        key = (u, v) if u < v else (v, u)
        if undirected[key] > 2:
            return None
        for fi in directed.get((u, v), ()):
            if not visited[fi]:
                face = faces[fi]
                third = face[(face.index(u) + 2) % 3]
                return fi, third
        return None

    patches: list[Patch] = []
    for seed in order:
        if visited[seed]:
            continue
        face = faces[seed]
        center = max(face, key=lambda v: (unvisited_at[v], _neg_coord(verts[v])))
        rot = face.index(center)
        ring = [face[(rot + 1) % 3], face[(rot + 2) % 3]]
        consume(seed)
        in_ring = set(ring)
        closed = False

        # Forward: across the directed edge center->ring[-1].
        while True:
            hit = next_fan_face(center, ring[-1])
            if hit is None:
                break
            fi, third = hit
            if third == ring[0]:
                consume(fi)
                ring.append(third)
                closed = True
                break
            if third in in_ring:
                break
            consume(fi)
            ring.append(third)
            in_ring.add(third)

        # Backward: across the directed edge ring[0]->center.
        while not closed:
            hit = next_fan_face(ring[0], center)
            if hit is None:
                break
            fi, third = hit
            if third in in_ring:
                break
            consume(fi)
            ring.insert(0, third)
            in_ring.add(third)

        patches.append(Patch(verts[center], tuple(verts[v] for v in ring)))
    return patches


def _neg_coord(coord: Triple) -> Triple:
    # max() with this key prefers higher incidence, then *lower* coordinates.
    return (-coord[0], -coord[1], -coord[2])


# ---------------------------------------------------------------------------
# Encode / decode
# ---------------------------------------------------------------------------


def encode_patch(patch: Patch, spec: VocabSpec = DEFAULT_SPEC) -> list[Token]:
    """Tokens for one patch: a full center triple, then each ring vertex with
    block offsets equal to the previous vertex's omitted."""
    center = block_index(patch.center, spec)
    tokens = [
        Token(TokenClass.CENTER_I, center.i),
        Token(TokenClass.J, center.j),
        Token(TokenClass.K, center.k),
    ]
    prev_i, prev_j = center.i, center.j
    for vertex in patch.ring:
        b = block_index(vertex, spec)
        if b.i != prev_i:
            tokens.append(Token(TokenClass.I, b.i))
            tokens.append(Token(TokenClass.J, b.j))
        elif b.j != prev_j:
            tokens.append(Token(TokenClass.J, b.j))
        tokens.append(Token(TokenClass.K, b.k))
        prev_i, prev_j = b.i, b.j
    return tokens


def encode(qmesh: QuantizedMesh, spec: VocabSpec = DEFAULT_SPEC) -> TokenSequence:
    """Losslessly tokenize a quantized mesh. Inverse of :func:`decode`."""
    if qmesh.resolution != spec.resolution:
        raise DomainError(
            f"mesh resolution {qmesh.resolution} does not match "
            f"spec resolution {spec.resolution}"
        )
    tokens: list[Token] = []
    for patch in build_patches(qmesh):
        emitted = encode_patch(patch, spec)
        n = len(patch.ring)
        assert n + 3 <= len(emitted) <= 3 * (n + 1), "per-patch token bound violated"
        tokens.extend(emitted)
    return TokenSequence(tuple(tokens), qmesh.face_count)


def decode(
    seq: TokenSequence | np.ndarray | list[int], spec: VocabSpec = DEFAULT_SPEC
) -> QuantizedMesh:
    """Parse a token stream back into a quantized mesh.

    Grammar: ``stream := patch*; patch := CENTER_I J K vertex vertex+;
    vertex := (I J K) | (J K) | K``. Omitted offsets are inherited from the
    previous vertex of the same patch. Raises :class:`StreamParseError` (with
    the offending token position) on any violation.
    """
    ids = seq.ids(spec) if isinstance(seq, TokenSequence) else np.asarray(seq)
    classified: list[tuple[TokenClass, int]] = []
    for pos, token_id in enumerate(int(t) for t in ids):
        try:
            classified.append(spec.classify(token_id))
        except DomainError as exc:
            raise StreamParseError(str(exc), pos) from None

    vert_index: dict[Triple, int] = {}
    vertices: list[Triple] = []
    faces: list[tuple[int, int, int]] = []

    def intern(coord: Triple) -> int:
        found = vert_index.get(coord)
        if found is None:
            found = len(vertices)
            vert_index[coord] = found
            vertices.append(coord)
        return found

    pos = 0
    total = len(classified)

    def take(expected: TokenClass) -> int:
        nonlocal pos
        if pos >= total:
            raise StreamTruncationError(
                f"stream ended while expecting {expected.name}", total
            )
        cls, value = classified[pos]
        if cls is not expected:
            raise StreamParseError(f"expected {expected.name}, found {cls.name}", pos)
        pos += 1
        return value

    while pos < total:
        patch_start = pos
        if classified[pos][0] is not TokenClass.CENTER_I:
            raise StreamParseError(
                f"patch must start with CENTER_I, found {classified[pos][0].name}",
                pos,
            )
        i = classified[pos][1]
        pos += 1
        j = take(TokenClass.J)
        k = take(TokenClass.K)
        center = block_inverse(BlockIndex(i, j, k), spec)
        center_idx = intern(center)

        ring: list[int] = []
        prev = center
        while pos < total and classified[pos][0] is not TokenClass.CENTER_I:
            cls, value = classified[pos]
            if cls is TokenClass.I:
                pos += 1
                i = value
                j = take(TokenClass.J)
                k = take(TokenClass.K)
            elif cls is TokenClass.J:
                pos += 1
                j = value
                k = take(TokenClass.K)
            else:  # K
                pos += 1
                k = value
            vertex = block_inverse(BlockIndex(i, j, k), spec)
            if vertex == prev or vertex == center:
                raise StreamParseError(
                    "degenerate face: ring vertex repeats its neighbor", pos - 1
                )
            ring.append(intern(vertex))
            prev = vertex
        if len(ring) < 2:
            raise StreamTruncationError(
                f"patch starting at {patch_start} has {len(ring)} ring "
                "vertices, need at least 2",
                pos,
            )
        for t in range(len(ring) - 1):
            faces.append((center_idx, ring[t], ring[t + 1]))

    return QuantizedMesh(
        spec.resolution,
        np.array(vertices, dtype=np.int64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def compression_ratio(seq: TokenSequence) -> float:
    """Token count over the plain representation's length (nine per face)."""
    if seq.face_count <= 0:
        raise DomainError("compression ratio undefined for zero faces")
    return len(seq) / (9.0 * seq.face_count)
