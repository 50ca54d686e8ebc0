from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tglg.embed import CachedEmbedder, MockEmbedder, RemoteEmbedder, select_embedder
from tglg.errors import EmbeddingProtocolError, EmbeddingTransportError


class CountingEmbedder:
    def __init__(self):
        self.inner = MockEmbedder()
        self.calls = 0
        self.texts_seen = []

    def embed(self, texts):
        self.calls += 1
        self.texts_seen.append(list(texts))
        return self.inner.embed(texts)


# --- mock provider ---


def test_mock_equal_strings_bit_equal(mock_embedder):
    a = mock_embedder.embed(["abc", "abc"])
    assert a[0].tobytes() == a[1].tobytes()
    again = mock_embedder.embed(["abc"])
    assert again[0].tobytes() == a[0].tobytes()


def test_mock_empty_string_reserved_vector(mock_embedder):
    v = mock_embedder.embed([""])[0]
    expected = np.zeros(64)
    expected[0] = 1.0
    assert np.array_equal(v, expected)


def test_mock_shared_ngrams_dominate(mock_embedder):
    v = mock_embedder.embed(["offside", "offside again", "substitution"])
    close = float(v[0] @ v[1])
    far = float(v[0] @ v[2])
    assert close > far


def test_mock_unit_norm(mock_embedder):
    v = mock_embedder.embed(["a", "ab", "abc", "hello world", ""])
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-9)


@given(st.text(max_size=30), st.text(max_size=30))
def test_mock_cosine_bounded(t1, t2):
    m = MockEmbedder()
    v = m.embed([t1, t2])
    cos = float(v[0] @ v[1])
    assert -1.0 - 1e-9 <= cos <= 1.0 + 1e-9


# --- cache ---


def test_cache_hit_avoids_inner_call():
    counter = CountingEmbedder()
    cached = CachedEmbedder(counter, capacity=16)
    first = cached.embed(["x"])
    second = cached.embed(["x"])
    assert counter.calls == 1
    assert first[0].tobytes() == second[0].tobytes()


def test_cache_capacity_one_pessimal_order():
    counter = CountingEmbedder()
    cached = CachedEmbedder(counter, capacity=1)
    for text in ["a", "b", "a"]:
        cached.embed([text])
    assert counter.calls == 3

    counter2 = CountingEmbedder()
    cached2 = CachedEmbedder(counter2, capacity=1)
    for text in ["a", "a", "b"]:
        cached2.embed([text])
    assert counter2.calls == 2


def test_cache_batch_coalesces_unique_misses():
    counter = CountingEmbedder()
    cached = CachedEmbedder(counter, capacity=16)
    cached.embed(["a", "b", "a", "c"])
    assert counter.calls == 1
    assert counter.texts_seen[0] == ["a", "b", "c"]


def test_cache_transparency_differential():
    rng = np.random.default_rng(7)
    vocabulary = [f"text number {i}" for i in range(50)]
    texts = [vocabulary[rng.integers(0, 50)] for _ in range(1000)]
    raw = MockEmbedder()
    cached = CachedEmbedder(MockEmbedder(), capacity=8)
    direct = raw.embed(texts)
    through = cached.embed(texts)
    assert direct.tobytes() == through.tobytes()


def test_cache_does_not_cache_errors():
    class Flaky:
        def __init__(self):
            self.calls = 0

        def embed(self, texts):
            self.calls += 1
            if self.calls == 1:
                raise RuntimeError("boom")
            return MockEmbedder().embed(texts)

    flaky = Flaky()
    cached = CachedEmbedder(flaky, capacity=4)
    with pytest.raises(RuntimeError):
        cached.embed(["x"])
    cached.embed(["x"])
    assert flaky.calls == 2


# --- remote client against a local canned server ---


class _Handler(BaseHTTPRequestHandler):
    script = []  # list of (status, body_dict_or_callable)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        request = json.loads(self.rfile.read(length)) if length else {}
        status, body = self.script.pop(0)
        if callable(body):
            body = body(request)
        payload = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def canned_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


def _ok_body(request):
    n = len(request["texts"])
    return {"model": "stub", "dim": 4, "vectors": [[1.0, 0.0, 0.0, 0.0]] * n}


def test_remote_batch_contract(canned_server):
    server, url = canned_server
    _Handler.script = [(200, _ok_body)]
    vectors = RemoteEmbedder(url, backoff_s=0.01).embed(["a", "b"])
    assert vectors.shape == (2, 4)
    assert np.allclose(np.linalg.norm(vectors, axis=1), 1.0)


def test_remote_length_mismatch_is_protocol_error(canned_server):
    server, url = canned_server
    _Handler.script = [(200, {"model": "stub", "dim": 4, "vectors": [[1.0, 0.0, 0.0, 0.0]]})]
    with pytest.raises(EmbeddingProtocolError, match="vectors"):
        RemoteEmbedder(url, backoff_s=0.01).embed(["a", "b"])


def test_remote_missing_field_named(canned_server):
    server, url = canned_server
    _Handler.script = [(200, {"model": "stub", "vectors": []})]
    with pytest.raises(EmbeddingProtocolError, match="dim"):
        RemoteEmbedder(url, backoff_s=0.01).embed([])


def test_remote_retries_transient_then_succeeds(canned_server):
    server, url = canned_server
    _Handler.script = [(500, {"error": "busy"}), (200, _ok_body)]
    vectors = RemoteEmbedder(url, backoff_s=0.01).embed(["a"])
    assert vectors.shape == (1, 4)


def test_remote_gives_up_after_attempts(canned_server):
    server, url = canned_server
    _Handler.script = [(500, {"error": "busy"})] * 3
    with pytest.raises(EmbeddingTransportError, match="3 attempts"):
        RemoteEmbedder(url, attempts=3, backoff_s=0.01).embed(["a"])


def test_remote_400_is_protocol_error_not_retried(canned_server):
    server, url = canned_server
    _Handler.script = [(400, {"error": "texts must be a list"})]
    with pytest.raises(EmbeddingProtocolError, match="texts must be a list"):
        RemoteEmbedder(url, backoff_s=0.01).embed(["a"])


def test_remote_connection_failure_is_transport_error():
    client = RemoteEmbedder("http://127.0.0.1:1", attempts=2, backoff_s=0.01)
    with pytest.raises(EmbeddingTransportError):
        client.embed(["a"])


def test_remote_renormalizes_drifted_vectors(canned_server):
    server, url = canned_server
    _Handler.script = [(200, {"model": "stub", "dim": 2, "vectors": [[3.0, 4.0]]})]
    vectors = RemoteEmbedder(url, backoff_s=0.01).embed(["a"])
    assert np.allclose(vectors[0], [0.6, 0.8])


# --- provider selection ---


def test_select_embedder_prefers_flag_then_env():
    provider = select_embedder(endpoint=None, env={})
    assert isinstance(provider.inner, MockEmbedder)
    provider = select_embedder(endpoint=None, env={"TGLG_EMBED_ENDPOINT": "http://x:1"})
    assert isinstance(provider.inner, RemoteEmbedder)
    provider = select_embedder(endpoint="http://flag:1", env={"TGLG_EMBED_ENDPOINT": "http://x:1"})
    assert provider.inner.endpoint == "http://flag:1"
