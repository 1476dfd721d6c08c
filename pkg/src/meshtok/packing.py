"""Fixed-size context-window splitting and length-bucketed batch planning.

Long token sequences are cut into windows of W ids (stride s, padded at the
tail) so a trainer can run truncated updates; sequences of similar length are
grouped into the same batch to keep the padding waste low.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, StructureError
from .tokenizer import DEFAULT_SPEC, TokenSequence, vocab_size

DEFAULT_WINDOW = 9000
DEFAULT_PAD_ID = vocab_size(DEFAULT_SPEC)  # first id past the codec vocabulary


@dataclass(frozen=True)
class WindowSpec:
    window_length: int = DEFAULT_WINDOW
    stride: int | None = None  # None means stride == window_length
    pad_id: int = DEFAULT_PAD_ID

    def __post_init__(self):
        if self.window_length < 1:
            raise DomainError("window_length must be >= 1")
        if self.stride is None:
            object.__setattr__(self, "stride", self.window_length)
        if not 1 <= self.stride <= self.window_length:
            raise DomainError(
                f"stride must be in [1, window_length], got {self.stride}"
            )


@dataclass(frozen=True)
class Window:
    """One fixed-size slice of a source sequence; pad ids only as a suffix."""

    ids: np.ndarray
    valid_length: int
    source_id: str
    offset: int

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))


@dataclass(frozen=True)
class BatchPlan:
    """Batches of sequence ids; every id in exactly one batch, all batches
    full except possibly the final one."""

    batches: tuple[tuple[str, ...], ...]
    batch_size: int


def split_windows(
    seq: TokenSequence | np.ndarray | list[int],
    spec: WindowSpec,
    source_id: str = "",
) -> list[Window]:
    """Cut a sequence into windows starting at offsets 0, s, 2s, ... < length,
    each padded with ``pad_id`` up to the window length."""
    ids = seq.ids() if isinstance(seq, TokenSequence) else np.asarray(seq, dtype=np.int64)
    if ids.size == 0:
        raise DomainError("cannot window an empty sequence")
    w, s = spec.window_length, spec.stride
    windows = []
    for offset in range(0, len(ids), s):
        chunk = ids[offset : offset + w]
        padded = np.full(w, spec.pad_id, dtype=np.int64)
        padded[: len(chunk)] = chunk
        windows.append(Window(padded, len(chunk), source_id, offset))
    return windows


def bucket_sequences(
    lengths: list[tuple[str, int]], batch_size: int, seed: int
) -> BatchPlan:
    """Group sequences of similar token count into batches.

    Sequences are sorted by length descending (stable for ties) and grouped
    into consecutive runs of ``batch_size``. The order of the full batches is
    then shuffled by the seed; a final short batch, if any, stays last so the
    only non-full batch is the trailing one.
    """
    if batch_size < 1:
        raise DomainError("batch_size must be >= 1")
    ids = [sid for sid, _ in lengths]
    if len(set(ids)) != len(ids):
        raise StructureError("duplicate sequence id in lengths")
    ranked = sorted(lengths, key=lambda pair: -pair[1])
    batches = [
        tuple(sid for sid, _ in ranked[i : i + batch_size])
        for i in range(0, len(ranked), batch_size)
    ]
    tail = None
    if batches and len(batches[-1]) < batch_size:
        tail = batches.pop()
    random.Random(seed).shuffle(batches)
    if tail is not None:
        batches.append(tail)
    return BatchPlan(tuple(batches), batch_size)


def padding_fraction(
    plan: BatchPlan,
    lengths: dict[str, int] | list[tuple[str, int]],
    spec: WindowSpec,
) -> float:
    """Fraction of pad tokens when every batch member is windowed to the
    step count its longest batch-mate needs."""
    table = dict(lengths) if not isinstance(lengths, dict) else lengths
    plan_ids = [sid for batch in plan.batches for sid in batch]
    if len(plan_ids) != len(set(plan_ids)) or set(plan_ids) != set(table):
        raise StructureError("plan ids do not match the provided lengths")
    w, s = spec.window_length, spec.stride
    total = 0
    pad = 0
    for batch in plan.batches:
        steps = max(math.ceil(table[sid] / s) for sid in batch)
        for sid in batch:
            length = table[sid]
            valid = sum(min(w, max(0, length - t * s)) for t in range(steps))
            total += steps * w
            pad += steps * w - valid
    return pad / total if total else 0.0


def write_batch_manifest(plan: BatchPlan, path: str | Path) -> None:
    """Line-oriented manifest: ``batch <n>: <id> <id> ...``."""
    lines = [
        f"batch {n}: {' '.join(batch)}" for n, batch in enumerate(plan.batches)
    ]
    Path(path).write_text("\n".join(lines) + "\n" if lines else "")


def read_batch_manifest(path: str | Path, batch_size: int) -> BatchPlan:
    batches = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        head, _, rest = line.partition(":")
        if not head.startswith("batch") or not rest.strip():
            raise StructureError(f"line {lineno}: malformed manifest row {line!r}")
        batches.append(tuple(rest.split()))
    return BatchPlan(tuple(batches), batch_size)
