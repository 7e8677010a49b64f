from __future__ import annotations

import http.server
import json
import random
import threading

import numpy as np
import pytest

from entobase.backends import (
    FileModelBackend,
    RemoteBackend,
    StubBackend,
    backend_from_config,
    pixel_digest,
    species_order,
    uniform_vector,
)
from entobase.classifier import validate_probability_vector
from entobase.errors import BackendUnavailable
from entobase.images import preprocess

from .conftest import noise_image

torch = pytest.importorskip("torch")


class TestStub:
    def test_vector_length_validated(self, tiny_taxonomy):
        with pytest.raises(ValueError):
            StubBackend({"default": [0.5, 0.5]}, tiny_taxonomy)

    def test_uniform_default_config(self, tiny_taxonomy):
        backend = backend_from_config({"kind": "stub"}, tiny_taxonomy)
        probs = backend.predict(preprocess(noise_image(random.Random(1))))
        validate_probability_vector(probs, tiny_taxonomy)
        assert probs["s1"] == pytest.approx(1 / 3)

    def test_unknown_kind_rejected(self, tiny_taxonomy):
        with pytest.raises(ValueError):
            backend_from_config({"kind": "martian"}, tiny_taxonomy)


class TestFileModel:
    def make_model(self, tmp_path, n_out, bias):
        class Head(torch.nn.Module):
            def __init__(self):
                super().__init__()
                self.bias = torch.nn.Parameter(torch.tensor(bias, dtype=torch.float32))

            def forward(self, x):
                # mean-pool the image into one scalar, emit shifted logits
                pooled = x.mean() * 0.0
                return self.bias + pooled

        path = tmp_path / "model.pt"
        torch.jit.script(Head()).save(str(path))
        return path

    def test_torchscript_model_runs(self, tmp_path, tiny_taxonomy):
        # logits favoring the second species in sorted order
        path = self.make_model(tmp_path, 3, [0.0, 3.0, 0.0])
        backend = FileModelBackend(path, tiny_taxonomy)
        probs = backend.predict(preprocess(noise_image(random.Random(2))))
        validate_probability_vector(probs, tiny_taxonomy)
        order = species_order(tiny_taxonomy)
        assert max(probs, key=probs.get) == order[1]

    def test_output_size_mismatch(self, tmp_path, tiny_taxonomy):
        path = self.make_model(tmp_path, 5, [0.0] * 5)
        backend = FileModelBackend(path, tiny_taxonomy)
        with pytest.raises(BackendUnavailable):
            backend.predict(preprocess(noise_image(random.Random(3))))

    def test_missing_file(self, tmp_path, tiny_taxonomy):
        with pytest.raises(BackendUnavailable):
            FileModelBackend(tmp_path / "missing.pt", tiny_taxonomy)

    def test_deterministic(self, tmp_path, tiny_taxonomy):
        path = self.make_model(tmp_path, 3, [0.5, 1.0, -0.5])
        backend = FileModelBackend(path, tiny_taxonomy)
        pixels = preprocess(noise_image(random.Random(4)))
        assert backend.predict(pixels) == backend.predict(pixels)


class ScorerHandler(http.server.BaseHTTPRequestHandler):
    vector: dict = {}
    fail_next = False

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        if ScorerHandler.fail_next:
            self.send_response(500)
            self.end_headers()
            return
        body = json.dumps(ScorerHandler.vector).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def scorer_url(tiny_taxonomy):
    ScorerHandler.vector = {s: p for s, p in zip(species_order(tiny_taxonomy), (0.2, 0.5, 0.3))}
    ScorerHandler.fail_next = False
    server = http.server.HTTPServer(("127.0.0.1", 0), ScorerHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/score"
    server.shutdown()


class TestRemote:
    def test_scores_round_trip(self, scorer_url, tiny_taxonomy):
        backend = RemoteBackend(scorer_url)
        probs = backend.predict(preprocess(noise_image(random.Random(5))))
        validate_probability_vector(probs, tiny_taxonomy)
        assert probs["s2"] == 0.5

    def test_http_error_is_backend_unavailable(self, scorer_url):
        ScorerHandler.fail_next = True
        backend = RemoteBackend(scorer_url)
        with pytest.raises(BackendUnavailable):
            backend.predict(preprocess(noise_image(random.Random(6))))

    def test_unreachable_host(self):
        backend = RemoteBackend("http://127.0.0.1:9/score", timeout=0.2)
        with pytest.raises(BackendUnavailable):
            backend.predict(preprocess(noise_image(random.Random(7))))


def test_uniform_vector_helper(tiny_taxonomy):
    assert sum(uniform_vector(tiny_taxonomy)) == pytest.approx(1.0)


def test_pixel_digest_is_stable(tiny_taxonomy):
    pixels = preprocess(noise_image(random.Random(8)))
    assert pixel_digest(pixels) == pixel_digest(np.array(pixels))
