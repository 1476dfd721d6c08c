"""Token stream file formats.

Binary container (little-endian): magic ``DMTK``, version byte 0x01, u16
resolution, u8 A, u8 B, u8 C, u32 face count, u32 token count, then one u16
per token id. The plain-text alternative is one decimal id per line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, StreamParseError
from .tokenizer import Token, TokenSequence, VocabSpec

MAGIC = b"DMTK"
VERSION = 1

_HEADER = struct.Struct("<4sBHBBBII")


@dataclass(frozen=True)
class StreamHeader:
    spec: VocabSpec
    face_count: int
    token_count: int


def write_dmtk(
    path: str | Path,
    seq: TokenSequence | np.ndarray | list[int],
    spec: VocabSpec,
    face_count: int | None = None,
) -> None:
    """Write a token stream (TokenSequence or raw ids) as a DMTK file."""
    if isinstance(seq, TokenSequence):
        ids = seq.ids(spec)
        if face_count is None:
            face_count = seq.face_count
    else:
        ids = np.asarray(seq, dtype=np.int64)
        if face_count is None:
            face_count = 0
    if ids.size and (ids.min() < 0 or ids.max() > 0xFFFF):
        raise DomainError("token id does not fit in u16")
    if spec.resolution > 0xFFFF or max(spec.a, spec.b, spec.c) > 0xFF:
        raise DomainError("vocabulary layout does not fit the container header")
    header = _HEADER.pack(
        MAGIC, VERSION, spec.resolution, spec.a, spec.b, spec.c,
        face_count, len(ids),
    )
    Path(path).write_bytes(header + ids.astype("<u2").tobytes())


def dmtk_bytes(seq: TokenSequence, spec: VocabSpec) -> bytes:
    """The exact bytes :func:`write_dmtk` would produce for a sequence."""
    ids = seq.ids(spec)
    header = _HEADER.pack(
        MAGIC, VERSION, spec.resolution, spec.a, spec.b, spec.c,
        seq.face_count, len(ids),
    )
    return header + ids.astype("<u2").tobytes()


def read_dmtk(path: str | Path) -> tuple[np.ndarray, StreamHeader]:
    """Read a DMTK file; returns (token ids, header). Corruption is reported
    with the byte offset where parsing failed."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise StreamParseError(
            f"file too short for header ({len(data)} bytes)", position=len(data)
        )
    magic, version, r, a, b, c, face_count, token_count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StreamParseError(f"bad magic {magic!r}", position=0)
    if version != VERSION:
        raise StreamParseError(f"unsupported version {version}", position=4)
    spec = VocabSpec(a, b, c)
    if spec.resolution != r:
        raise StreamParseError(
            f"header resolution {r} inconsistent with blocks {a}*{b}*{c}", position=5
        )
    expected = _HEADER.size + 2 * token_count
    if len(data) != expected:
        raise StreamParseError(
            f"expected {expected} bytes for {token_count} tokens, found {len(data)}",
            position=min(len(data), expected),
        )
    ids = np.frombuffer(data, dtype="<u2", offset=_HEADER.size).astype(np.int64)
    return ids, StreamHeader(spec, face_count, token_count)


def to_sequence(ids: np.ndarray, spec: VocabSpec, face_count: int) -> TokenSequence:
    """Wrap raw ids back into a TokenSequence (ids must be in-vocabulary)."""
    tokens = tuple(Token(*spec.classify(int(t))) for t in ids)
    return TokenSequence(tokens, face_count)


def write_ids_text(path: str | Path, ids: np.ndarray | list[int]) -> None:
    Path(path).write_text("".join(f"{int(t)}\n" for t in np.asarray(ids).ravel()))


def read_ids_text(path: str | Path) -> np.ndarray:
    ids = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            ids.append(int(line))
        except ValueError:
            raise StreamParseError(
                f"line {lineno}: {line!r} is not a decimal token id", position=lineno
            ) from None
    return np.asarray(ids, dtype=np.int64)
