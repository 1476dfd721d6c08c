"""In-process array bindings for the meshtok codec.

Training pipelines hand numpy arrays to a :class:`BoundSession` and get
numpy arrays back; results are identical to what the ``meshtok`` CLI
produces on the equivalent files. Arrays cross the boundary by copy. The
package version tracks the codec's stream format version (0.1.x <-> format
version 1).
"""

from .session import (
    BoundSession,
    SessionClosedError,
    chamfer_hausdorff,
    decode,
    encode,
    split_windows,
    vocab_size,
)

__version__ = "0.1.0"

__all__ = [
    "BoundSession",
    "SessionClosedError",
    "chamfer_hausdorff",
    "decode",
    "encode",
    "split_windows",
    "vocab_size",
    "__version__",
]
