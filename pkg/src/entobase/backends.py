"""Model backends: deterministic stub, TorchScript file model, remote scorer.

Every backend maps a preprocessed 224x224x3 uint8 image to a species
probability vector keyed by taxon_id. The trained network itself is out of
scope here; these are the seams it plugs into.
"""

from __future__ import annotations

import hashlib
import json
import threading
from pathlib import Path

import numpy as np

from .classifier import ModelBackend, ProbabilityVector
from .errors import BackendUnavailable
from .taxonomy import Taxonomy

STUB_DEFAULT_KEY = "default"


def pixel_digest(pixels: np.ndarray) -> str:
    """SHA-256 over the raw C-order bytes of a preprocessed uint8 image."""
    return hashlib.sha256(np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()).hexdigest()


def species_order(taxonomy: Taxonomy) -> list[str]:
    """Canonical output-layer order: species taxon_ids sorted lexicographically."""
    return sorted(taxonomy.species_ids)


class StubBackend:
    """Fixture-driven backend: image digest -> fixed vector.

    The fixture maps hex SHA-256 digests of the preprocessed pixel buffer to
    probability arrays in species_order(). An optional "default" entry serves
    any unknown digest.
    """

    deterministic = True

    def __init__(self, table: dict[str, list[float]], taxonomy: Taxonomy):
        self._order = species_order(taxonomy)
        for digest, vec in table.items():
            if len(vec) != len(self._order):
                raise ValueError(
                    f"stub vector for {digest[:12]} has {len(vec)} entries, "
                    f"expected {len(self._order)}"
                )
        self._table = {k: [float(v) for v in vec] for k, vec in table.items()}

    @classmethod
    def from_file(cls, path: str | Path, taxonomy: Taxonomy) -> "StubBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh), taxonomy)

    def predict(self, pixels: np.ndarray) -> ProbabilityVector:
        digest = pixel_digest(pixels)
        vec = self._table.get(digest) or self._table.get(STUB_DEFAULT_KEY)
        if vec is None:
            raise BackendUnavailable(f"stub fixture has no vector for digest {digest[:12]}...")
        return dict(zip(self._order, vec))


def uniform_vector(taxonomy: Taxonomy) -> list[float]:
    n = len(taxonomy.species_ids)
    return [1.0 / n] * n


class FileModelBackend:
    """Runs a TorchScript network whose output layer follows species_order().

    Input: float32 1x3x224x224, channels-first, unscaled 0..255 (the artifact
    owns normalization). Output: logits or probabilities; softmax is applied
    when the outputs do not already sum to ~1.
    """

    deterministic = True

    def __init__(self, model_path: str | Path, taxonomy: Taxonomy):
        try:
            import torch
        except ImportError as exc:
            raise BackendUnavailable("file-model backend requires torch") from exc
        self._torch = torch
        self._order = species_order(taxonomy)
        try:
            self._model = torch.jit.load(str(model_path), map_location="cpu")
        except (RuntimeError, OSError, ValueError) as exc:
            raise BackendUnavailable(f"cannot load model {model_path}: {exc}") from exc
        self._model.eval()

    def predict(self, pixels: np.ndarray) -> ProbabilityVector:
        torch = self._torch
        chw = np.ascontiguousarray(pixels.transpose(2, 0, 1), dtype=np.float32)
        with torch.no_grad():
            out = self._model(torch.from_numpy(chw).unsqueeze(0))
        vec = out.detach().squeeze(0).to(torch.float64)
        if vec.numel() != len(self._order):
            raise BackendUnavailable(
                f"model emits {vec.numel()} outputs, taxonomy has {len(self._order)} species"
            )
        total = float(vec.sum())
        if abs(total - 1.0) > 1e-3 or float(vec.min()) < 0.0:
            vec = torch.softmax(vec, dim=0)
        values = vec.tolist()
        norm = sum(values)
        return {taxon_id: v / norm for taxon_id, v in zip(self._order, values)}


class RemoteBackend:
    """POSTs the preprocessed image as PNG to a scorer URL.

    The scorer replies with JSON mapping taxon_id -> probability. Network and
    protocol failures surface as BackendUnavailable.
    """

    deterministic = True

    def __init__(self, url: str, timeout: float = 30.0):
        self._url = url
        self._timeout = timeout

    def predict(self, pixels: np.ndarray) -> ProbabilityVector:
        import httpx

        from .images import encode_png

        try:
            resp = httpx.post(
                self._url,
                content=encode_png(pixels),
                headers={"Content-Type": "image/png"},
                timeout=self._timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise BackendUnavailable(f"remote scorer failed: {exc}") from exc
        if not isinstance(payload, dict):
            raise BackendUnavailable("remote scorer returned a non-object payload")
        return {str(k): float(v) for k, v in payload.items()}


class GatedBackend:
    """Serializes backend invocations through a bounded gate.

    Concurrent classify calls never interleave inside one backend invocation;
    parallelism > 1 admits that many invocations at once for backends that
    can take it.
    """

    def __init__(self, backend: ModelBackend, parallelism: int = 1):
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        self._backend = backend
        self._gate = threading.BoundedSemaphore(parallelism)

    @property
    def deterministic(self) -> bool:
        return self._backend.deterministic

    def predict(self, pixels: np.ndarray) -> ProbabilityVector:
        with self._gate:
            return self._backend.predict(pixels)


def backend_from_config(config: dict, taxonomy: Taxonomy) -> ModelBackend:
    """Build a backend from its config mapping (kind: stub | file-model | remote)."""
    kind = config.get("kind", "stub")
    if kind == "stub":
        fixture = config.get("fixture")
        if fixture:
            backend = StubBackend.from_file(fixture, taxonomy)
        else:
            backend = StubBackend({STUB_DEFAULT_KEY: uniform_vector(taxonomy)}, taxonomy)
    elif kind == "file-model":
        backend = FileModelBackend(config["model_path"], taxonomy)
    elif kind == "remote":
        backend = RemoteBackend(config["url"], timeout=float(config.get("timeout", 30.0)))
    else:
        raise ValueError(f"unknown backend kind {kind!r}")
    return GatedBackend(backend, parallelism=int(config.get("parallelism", 1)))
