"""meshtok: lossless triangle-mesh tokenization codec and training-data
pipeline utilities (window packing, curation filters, geometric metrics,
preference pairs, DPO loss math)."""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    MeshTokError,
    ParseError,
    StreamParseError,
    StreamTruncationError,
    StructureError,
)
from .mesh import (
    Mesh,
    NormalizationTransform,
    PointSet,
    QuantizedMesh,
    dequantize,
    mesh_area,
    normalize,
    quantize,
    rotate90,
    sample_surface,
)
from .meshio import load_mesh, load_mesh_path, save_obj
from .tokenizer import (
    BlockIndex,
    Patch,
    Token,
    TokenClass,
    TokenSequence,
    VocabSpec,
    block_index,
    block_inverse,
    build_patches,
    compression_ratio,
    decode,
    encode,
    vocab_size,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateInputError",
    "DomainError",
    "MeshTokError",
    "ParseError",
    "StreamParseError",
    "StreamTruncationError",
    "StructureError",
    "Mesh",
    "NormalizationTransform",
    "PointSet",
    "QuantizedMesh",
    "dequantize",
    "mesh_area",
    "normalize",
    "quantize",
    "rotate90",
    "sample_surface",
    "load_mesh",
    "load_mesh_path",
    "save_obj",
    "BlockIndex",
    "Patch",
    "Token",
    "TokenClass",
    "TokenSequence",
    "VocabSpec",
    "block_index",
    "block_inverse",
    "build_patches",
    "compression_ratio",
    "decode",
    "encode",
    "vocab_size",
    "__version__",
]
