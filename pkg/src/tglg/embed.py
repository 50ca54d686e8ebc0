"""Embedding providers: deterministic mock, remote HTTP client, LRU cache.

A provider is any object with ``embed(texts) -> ndarray`` returning one
unit-norm row per input text, order preserved. The mock keeps the whole
toolkit hermetic; the remote client talks to an embedding sidecar over
a small JSON protocol (POST ``/embed`` with ``{"texts": [...]}``,
response ``{"model": str, "dim": int, "vectors": [[float, ...], ...]}``).
"""

from __future__ import annotations

import threading
import time
import zlib
from collections import OrderedDict
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import EmbeddingProtocolError, EmbeddingTransportError, ParameterError

ENDPOINT_ENV_VAR = "TGLG_EMBED_ENDPOINT"


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class MockEmbedder:
    """Hash character n-grams into ``dim`` buckets, then L2-normalize.

    Pure function of each text: byte-equal inputs give bit-equal vectors
    across runs and platforms (the bucket hash is CRC32, never Python's
    salted ``hash``). The empty string maps to a fixed reserved unit
    vector. Collisions between distinct short texts are rare at dim=64
    and harmless: tests pin similarities through an oracle, not through
    absolute values.
    """

    model_id = "mock-ngram-64"

    def __init__(self, dim: int = 64, ngram: int = 3) -> None:
        if dim < 1 or ngram < 1:
            raise ParameterError("dim and ngram must be positive")
        self.dim = dim
        self.ngram = ngram

    def _vector(self, text: str) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.float64)
        if not text:
            v[0] = 1.0
            return v
        grams = (
            [text[i : i + self.ngram] for i in range(len(text) - self.ngram + 1)]
            if len(text) >= self.ngram
            else [text]
        )
        for gram in grams:
            v[zlib.crc32(gram.encode("utf-8")) % self.dim] += 1.0
        return v / np.linalg.norm(v)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._vector(t) for t in texts]) if texts else np.zeros((0, self.dim))


class RemoteEmbedder:
    """Client for the embedding sidecar.

    Batches all texts into one POST, validates the length/dimension/norm
    contract, and retries transient failures (connection errors, 5xx)
    with bounded exponential backoff. Client errors (4xx) and contract
    violations are not retried.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 30.0,
        attempts: int = 3,
        backoff_s: float = 0.25,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.model_id: str | None = None
        self._session = requests.Session()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        payload = {"texts": texts}
        last_error: Exception | None = None
        for attempt in range(self.attempts):
            try:
                response = self._session.post(
                    f"{self.endpoint}/embed", json=payload, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = exc
                time.sleep(self.backoff_s * (2**attempt))
                continue
            if response.status_code >= 500:
                last_error = EmbeddingTransportError(
                    f"server error {response.status_code} for batch of {len(texts)} texts"
                )
                time.sleep(self.backoff_s * (2**attempt))
                continue
            if response.status_code != 200:
                detail = _error_detail(response)
                raise EmbeddingProtocolError(
                    f"endpoint rejected batch of {len(texts)} texts "
                    f"(HTTP {response.status_code}): {detail}"
                )
            return self._parse(response, len(texts))
        raise EmbeddingTransportError(
            f"embedding endpoint unreachable after {self.attempts} attempts "
            f"for batch of {len(texts)} texts: {last_error}"
        )

    def _parse(self, response: requests.Response, n_texts: int) -> np.ndarray:
        try:
            body = response.json()
        except ValueError as exc:
            raise EmbeddingProtocolError(f"response body is not JSON: {exc}") from exc
        for key in ("model", "dim", "vectors"):
            if key not in body:
                raise EmbeddingProtocolError(f"response missing field '{key}'")
        vectors = body["vectors"]
        if len(vectors) != n_texts:
            raise EmbeddingProtocolError(
                f"field 'vectors' has {len(vectors)} rows for {n_texts} texts"
            )
        dim = int(body["dim"])
        if n_texts == 0:
            self.model_id = str(body["model"])
            return np.zeros((0, dim))
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != dim:
            raise EmbeddingProtocolError(
                f"field 'dim' is {dim} but vectors have shape {matrix.shape}"
            )
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            raise EmbeddingProtocolError("field 'vectors' contains a zero vector")
        drift = np.abs(norms - 1.0)
        if np.any(drift > 1e-6):
            matrix = matrix / norms[:, None]
        self.model_id = str(body["model"])
        return matrix


class CachedEmbedder:
    """Exact-string-keyed LRU cache around any provider.

    A batch is served from the cache where possible; the unique misses
    go to the inner provider in one order-preserving call. Hits return
    the stored vector bit-identically. Provider errors propagate and are
    never cached. Reads and writes are serialized by one lock, so the
    wrapper is safe for concurrent callers.
    """

    def __init__(self, inner: Embedder, capacity: int = 4096) -> None:
        if capacity < 1:
            raise ParameterError("cache capacity must be positive")
        self.inner = inner
        self.capacity = capacity
        self._entries: OrderedDict[str, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return self.inner.embed([])
        with self._lock:
            found: dict[str, np.ndarray] = {}
            misses: list[str] = []
            for t in texts:
                if t in self._entries:
                    self._entries.move_to_end(t)
                    found[t] = self._entries[t]
                elif t not in found and t not in misses:
                    misses.append(t)
            self.hits += len(texts) - len(misses)
            self.misses += len(misses)
        if misses:
            fresh = self.inner.embed(misses)
            with self._lock:
                for t, row in zip(misses, fresh):
                    row = np.array(row, copy=True)
                    row.setflags(write=False)
                    self._entries[t] = row
                    self._entries.move_to_end(t)
                    while len(self._entries) > self.capacity:
                        self._entries.popitem(last=False)
                found.update(zip(misses, fresh))
        return np.stack([found[t] for t in texts])


def select_embedder(endpoint: str | None = None, env: dict[str, str] | None = None) -> Embedder:
    """Pick the provider: explicit endpoint, else env var, else the mock."""
    import os

    env = env if env is not None else dict(os.environ)
    resolved = endpoint or env.get(ENDPOINT_ENV_VAR)
    if resolved:
        return CachedEmbedder(RemoteEmbedder(resolved))
    return CachedEmbedder(MockEmbedder())


def _error_detail(response: requests.Response) -> str:
    try:
        body = response.json()
        return str(body.get("error", body))
    except ValueError:
        return response.text[:200]
