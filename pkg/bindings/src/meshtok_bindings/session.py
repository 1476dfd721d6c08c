"""Session object wrapping the codec for array-in/array-out use."""

from __future__ import annotations

import threading

import numpy as np

import meshtok
from meshtok import metrics as _metrics
from meshtok import packing as _packing
from meshtok.mesh import Mesh, dequantize, normalize, quantize


class SessionClosedError(RuntimeError):
    """Raised when an operation is invoked on a closed session."""


class BoundSession:
    """A vocabulary configuration plus a handle to the codec.

    The configuration is immutable after construction. Operations on a
    closed session raise :class:`SessionClosedError`. One session may be
    shared across threads; calls are serialized internally.
    """

    def __init__(self, a: int = 4, b: int = 8, c: int = 16):
        self._spec = meshtok.VocabSpec(a, b, c)
        self._codec = meshtok  # dropped on close()
        self._lock = threading.Lock()

    @property
    def spec(self) -> meshtok.VocabSpec:
        return self._spec

    @property
    def resolution(self) -> int:
        return self._spec.resolution

    def close(self) -> None:
        self._codec = None

    def __enter__(self) -> "BoundSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _handle(self):
        if self._codec is None:
            raise SessionClosedError("session has been closed")
        return self._codec

    def vocab_size(self) -> int:
        with self._lock:
            return self._handle().vocab_size(self._spec)

    def encode(self, vertices, faces) -> np.ndarray:
        """Tokenize a mesh given as (n, 3) real vertices and (m, 3) face
        indices; same pipeline as the CLI (normalize unless the coordinates
        already sit inside the unit cube, then quantize, then encode)."""
        with self._lock:
            codec = self._handle()
            verts = np.array(vertices, dtype=np.float64, copy=True).reshape(-1, 3)
            tris = np.array(faces, dtype=np.int64, copy=True).reshape(-1, 3)
            if tris.size == 0:
                return np.zeros(0, dtype=np.int64)
            mesh = Mesh(verts, tris)
            if verts.size and (verts.min() < 0.0 or verts.max() > 1.0):
                mesh, _ = normalize(mesh)
            qmesh = quantize(mesh, self._spec.resolution)
            return codec.encode(qmesh, self._spec).ids(self._spec)

    def decode(self, ids) -> tuple[np.ndarray, np.ndarray]:
        """Parse token ids back into (vertices, faces); vertices are the
        dequantized bin-center coordinates the CLI writes to OBJ."""
        with self._lock:
            codec = self._handle()
            ids = np.array(ids, dtype=np.int64, copy=True).ravel()
            qmesh = codec.decode(ids, self._spec)
            mesh = dequantize(qmesh)
            return mesh.vertices.copy(), mesh.faces.copy()

    def split_windows(self, ids, window_length: int, stride: int | None = None) -> np.ndarray:
        """Window a token sequence; returns an (n_windows, window_length)
        array padded with the id one past the vocabulary."""
        with self._lock:
            self._handle()
            spec = _packing.WindowSpec(
                window_length=window_length,
                stride=stride,
                pad_id=meshtok.vocab_size(self._spec),
            )
            ids = np.array(ids, dtype=np.int64, copy=True).ravel()
            windows = _packing.split_windows(ids, spec)
            return np.stack([w.ids for w in windows])

    def chamfer_hausdorff(self, a_points, b_points) -> tuple[float, float]:
        """Both point-set metrics; identical arithmetic to the CLI path."""
        with self._lock:
            self._handle()
            a = np.array(a_points, dtype=np.float64, copy=True).reshape(-1, 3)
            b = np.array(b_points, dtype=np.float64, copy=True).reshape(-1, 3)
            return _metrics.chamfer_hausdorff(a, b)


_DEFAULT = BoundSession()


def encode(vertices, faces) -> np.ndarray:
    return _DEFAULT.encode(vertices, faces)


def decode(ids) -> tuple[np.ndarray, np.ndarray]:
    return _DEFAULT.decode(ids)


def split_windows(ids, window_length: int, stride: int | None = None) -> np.ndarray:
    return _DEFAULT.split_windows(ids, window_length, stride)


def chamfer_hausdorff(a_points, b_points) -> tuple[float, float]:
    return _DEFAULT.chamfer_hausdorff(a_points, b_points)


def vocab_size() -> int:
    return _DEFAULT.vocab_size()
