"""HTTP sidecar serving sentence embeddings for the querysmt cosine gate."""

from .app import MAX_BATCH, create_app
from .encoders import (
    DEFAULT_MODEL,
    Encoder,
    EncoderLoadError,
    HashEncoder,
    TransformerEncoder,
    load_encoder,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "Encoder",
    "EncoderLoadError",
    "HashEncoder",
    "MAX_BATCH",
    "TransformerEncoder",
    "__version__",
    "create_app",
    "load_encoder",
]
