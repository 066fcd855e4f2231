"""HTTP sidecar serving multi-modal image-text embeddings."""

__version__ = "0.1.0"

from .app import create_app
from .encoders import ClipEncoder, HashEncoder, fuse_unit_mean, make_encoder

__all__ = ["ClipEncoder", "HashEncoder", "create_app", "fuse_unit_mean", "make_encoder"]
