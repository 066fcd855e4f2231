import itertools
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from feds.store import write_store


def make_synthetic_samples(sigma=0.05, seed=42, classes=5, per_class=40, dim=64):
    """Gaussian clusters around unit-norm class centers.

    Centers are random unit vectors; documents are center + sigma * noise.
    The noise draws do not depend on sigma, so runs at different sigma use
    common random numbers. Returns (samples, max_pairwise_cos) where
    samples are (id, label, vector) triples.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(classes, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    max_cos = max(
        abs(float(centers[i] @ centers[j]))
        for i, j in itertools.combinations(range(classes), 2)
    )
    noise = rng.normal(size=(classes * per_class, dim))
    samples = []
    sid = 0
    for k in range(classes):
        for _ in range(per_class):
            vec = (centers[k] + sigma * noise[sid]).astype(np.float32)
            samples.append((sid, f"class-{k}", vec))
            sid += 1
    return samples, max_cos


@pytest.fixture
def synthetic_store(tmp_path):
    """Path to a written 5-class synthetic store (sigma=0.05, seed=42)."""
    samples, _ = make_synthetic_samples()
    path = tmp_path / "synthetic.feds"
    write_store(samples, [], path, dim=64)
    return path


@pytest.fixture
def stub_server():
    """Configurable HTTP stub implementing the embed-provider protocol."""
    state = {"handler": None, "requests": []}

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            body = json.loads(self.rfile.read(length)) if length else {}
            state["requests"].append((self.path, body))
            status, payload = state["handler"](self.path, body)
            raw = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_port}"

    def configure(handler):
        state["handler"] = handler
        return url

    yield configure, state
    server.shutdown()
    thread.join(timeout=5)
