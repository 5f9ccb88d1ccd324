"""Embedding sidecar: serves the /embed wire protocol and records archives."""

from eln_embed_sidecar.archive import read_archive, write_archive
from eln_embed_sidecar.model import HashModel, ModelLoadError, SidecarConfig, load_model
from eln_embed_sidecar.recorder import record_fixtures

__all__ = [
    "HashModel",
    "ModelLoadError",
    "SidecarConfig",
    "load_model",
    "read_archive",
    "write_archive",
    "record_fixtures",
]
