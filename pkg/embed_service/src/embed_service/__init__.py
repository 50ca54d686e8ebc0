"""HTTP sidecar exposing a pretrained sentence embedder."""

from .app import ServiceConfig, create_app
from .encoder import DEFAULT_MODEL_ID, Encoder, load_sentence_transformer

__all__ = [
    "ServiceConfig",
    "create_app",
    "DEFAULT_MODEL_ID",
    "Encoder",
    "load_sentence_transformer",
]
