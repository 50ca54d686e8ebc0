"""Encoder abstraction: anything with ``encode(texts) -> ndarray``, a
``dim``, and a ``model_id``. The default loader wraps a pretrained
SentenceTransformers model; tests inject lightweight stubs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

DEFAULT_MODEL_ID = "sentence-transformers/all-mpnet-base-v2"


class Encoder(Protocol):
    model_id: str
    dim: int

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


@dataclass
class SentenceTransformerEncoder:
    model_id: str
    dim: int
    _model: object

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray(
            self._model.encode(
                list(texts), convert_to_numpy=True, show_progress_bar=False
            ),
            dtype=np.float64,
        )


def load_sentence_transformer(model_id: str = DEFAULT_MODEL_ID) -> Encoder:
    """Load the real model. Imported lazily so stub-backed deployments and
    tests never touch the model runtime."""
    from sentence_transformers import SentenceTransformer

    model = SentenceTransformer(model_id)
    return SentenceTransformerEncoder(
        model_id=model_id,
        dim=int(model.get_sentence_embedding_dimension()),
        _model=model,
    )


LoaderFn = Callable[[str], Encoder]
