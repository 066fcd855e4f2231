import base64
import io
import json
import os

import pytest
from fastapi.testclient import TestClient
from PIL import Image

from embed_sidecar.app import create_app
from embed_sidecar.encoders import HashEncoder

FIXTURES = os.path.join(os.path.dirname(__file__), os.pardir, "fixtures")


def make_png(pixels=None, size=(4, 4)) -> bytes:
    img = Image.new("RGB", size)
    if pixels is None:
        pixels = [(16 * i % 256, 255 - 16 * i % 256, (7 * i) % 256) for i in range(size[0] * size[1])]
    img.putdata(pixels)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def load_fixture(name: str):
    with open(os.path.join(FIXTURES, name)) as f:
        return json.load(f)


@pytest.fixture
def client():
    app = create_app(lambda: HashEncoder(8))
    with TestClient(app) as c:
        yield c
