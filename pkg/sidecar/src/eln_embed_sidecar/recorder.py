"""Fixture recording: embed a text list offline and emit an ELNA archive.

The recorded file is bit-for-bit what the running service would answer for
the same texts, so core-side file providers can stand in for the service in
tests without the two drifting apart.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from eln_embed_sidecar.archive import write_archive
from eln_embed_sidecar.model import HashModel


def read_text_list(path: Path) -> list[str]:
    """Read one text per line, dropping blank lines."""
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    return [line for line in lines if line.strip()]


def record_fixtures(
    model: HashModel, texts: list[str], out_path: Path, level: str = "sentence"
) -> int:
    """Embed texts at the given level and write them to an archive.

    Sentence level stores one entry per unique text.  Token level stores one
    entry per unique whitespace token across all texts, which is what a
    token-archive file provider looks up.  Returns the entry count.
    """
    entries: dict[str, np.ndarray] = {}
    if level == "sentence":
        for text in texts:
            if text not in entries:
                entries[text] = model.embed_sentences([text])[0]
    elif level == "token":
        for text in texts:
            tokens, block = model.embed_tokens(text)
            for token, vector in zip(tokens, block):
                if token not in entries:
                    entries[token] = vector
    else:
        raise ValueError(f"level must be sentence or token, got {level!r}")
    write_archive(out_path, model.dim, entries)
    return len(entries)
