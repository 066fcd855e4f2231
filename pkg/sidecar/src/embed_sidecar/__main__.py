"""Launcher: python -m embed_sidecar [--port N] [--model NAME] [--dim N].

Flags override the EMBED_MODEL / EMBED_DIM / EMBED_DEVICE / EMBED_PORT
environment variables. ``--model hash`` runs the offline deterministic
backend; any other value is loaded as a CLIP-class checkpoint.
"""

import argparse
import os

import uvicorn

from .app import create_app
from .encoders import make_encoder


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embed-sidecar")
    parser.add_argument("--model", default=os.environ.get("EMBED_MODEL", "clip-ViT-B-32"))
    parser.add_argument("--dim", type=int, default=int(os.environ.get("EMBED_DIM", "64")),
                        help="output dim of the hash backend (real models fix their own)")
    parser.add_argument("--device", default=os.environ.get("EMBED_DEVICE", "cpu"))
    parser.add_argument("--host", default=os.environ.get("EMBED_HOST", "127.0.0.1"))
    parser.add_argument("--port", type=int, default=int(os.environ.get("EMBED_PORT", "8099")))
    args = parser.parse_args(argv)

    app = create_app(lambda: make_encoder(args.model, args.dim, device=args.device))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
