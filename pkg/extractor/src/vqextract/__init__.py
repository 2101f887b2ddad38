"""Extract SPD1 frame datasets from wav2vec2-family checkpoints."""
from .extract import (ExtractionSummary, ManifestError, QuantizedExtractor,
                      UnsupportedModelError, extract, read_manifest)

__version__ = "0.1.0"

__all__ = [
    "ExtractionSummary",
    "ManifestError",
    "QuantizedExtractor",
    "UnsupportedModelError",
    "extract",
    "read_manifest",
]
