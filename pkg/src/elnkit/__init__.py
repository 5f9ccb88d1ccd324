"""Noise-robust ASR error correction toolkit.

Core pieces: Persian text normalization, alignment-based WER, SNR-controlled
noise mixing, Error Level Noise (ELN) vectors over N-best hypotheses, an
MLP projector to LLM prefix embeddings, a correction-LLM client with
deterministic mocks, and reporting. See the module docstrings for contracts.
"""

from __future__ import annotations

__version__ = "0.1.0"
