"""Small MLP projecting ELN vectors into LLM prefix embeddings.

Weights are loaded artifacts (training happens elsewhere); the forward pass
runs in float64 and must be exact and portable. The on-disk format is a
versioned little-endian binary: magic "ELNP", header with prefix length,
LLM dimension and layer shapes, then per-layer f32 weight and bias payload.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import seeded_rng
from .eln import ELNVector
from .errors import DataError, DimensionError, FormatError

WEIGHTS_MAGIC = b"ELNP"
WEIGHTS_VERSION = 1


class Activation(str, Enum):
    IDENTITY = "identity"
    RELU = "relu"
    TANH = "tanh"


_ACT_IDS = {Activation.IDENTITY: 0, Activation.RELU: 1, Activation.TANH: 2}
_IDS_ACT = {v: k for k, v in _ACT_IDS.items()}


def _apply(act: Activation, x: np.ndarray) -> np.ndarray:
    if act is Activation.RELU:
        return np.maximum(x, 0.0)
    if act is Activation.TANH:
        return np.tanh(x)
    return x


@dataclass(frozen=True)
class Layer:
    """One affine-then-activation stage: activation(W @ x + bias)."""

    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation

    def __post_init__(self) -> None:
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation(self.activation))
        if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
            raise DataError(f"layer shapes {w.shape} / {b.shape} do not form W@x + b")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise DataError("layer weights must be finite")


@dataclass(frozen=True)
class ProjectorWeights:
    """A validated stack of layers ending in prefix_len x llm_dim outputs."""

    layers: tuple[Layer, ...]
    prefix_len: int
    llm_dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise DataError("projector needs at least one layer")
        if self.prefix_len < 1 or self.llm_dim < 1:
            raise DataError("prefix_len and llm_dim must be >= 1")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise DimensionError(
                    f"layer chain broken: {prev.weight.shape[0]} -> {nxt.weight.shape[1]}"
                )
        final = self.layers[-1].weight.shape[0]
        if final != self.prefix_len * self.llm_dim:
            raise DimensionError(
                f"final layer emits {final} values, expected "
                f"prefix_len*llm_dim = {self.prefix_len * self.llm_dim}"
            )

    @property
    def input_dim(self) -> int:
        return int(self.layers[0].weight.shape[1])

    @property
    def output_dim(self) -> int:
        return self.llm_dim


def project(eln: ELNVector | np.ndarray, weights: ProjectorWeights) -> np.ndarray:
    """Run the MLP on the flattened ELN vector; returns (prefix_len, llm_dim)."""
    if isinstance(eln, ELNVector):
        x = np.concatenate([eln.sentence_part, eln.token_part])
    else:
        x = np.asarray(eln, dtype=np.float64)
    if x.shape != (weights.input_dim,):
        raise DimensionError(
            f"input has {x.shape[0] if x.ndim == 1 else x.shape} entries, "
            f"projector expects {weights.input_dim}"
        )
    for idx, layer in enumerate(weights.layers):
        x = _apply(layer.activation, layer.weight @ x + layer.bias)
        if not np.all(np.isfinite(x)):
            raise DataError(f"layer {idx} produced non-finite values")
    return x.reshape(weights.prefix_len, weights.llm_dim)


def init_weights(
    dims: Sequence[int],
    seed: int,
    prefix_len: int = 1,
    hidden_activation: Activation = Activation.TANH,
) -> ProjectorWeights:
    """Seeded init: W ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), zero bias.

    ``dims`` lists layer widths input-first; the last width must be
    prefix_len * llm_dim. Hidden layers use ``hidden_activation``, the final
    layer is linear.
    """
    if len(dims) < 2:
        raise DataError("need at least input and output widths")
    if any(d < 1 for d in dims):
        raise DataError("layer widths must be >= 1")
    if dims[-1] % prefix_len:
        raise DataError(f"output width {dims[-1]} not divisible by prefix_len {prefix_len}")
    rng = seeded_rng(seed)
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        act = Activation.IDENTITY if k == len(dims) - 2 else hidden_activation
        layers.append(Layer(weight, np.zeros(fan_out), act))
    return ProjectorWeights(tuple(layers), prefix_len, dims[-1] // prefix_len)


def save_weights(weights: ProjectorWeights, path: str | Path) -> None:
    """Serialize to the ELNP binary format (f32 payload, f64 in memory)."""
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(
            struct.pack(
                "<IIII", WEIGHTS_VERSION, weights.prefix_len, weights.llm_dim, len(weights.layers)
            )
        )
        for layer in weights.layers:
            out_dim, in_dim = layer.weight.shape
            fh.write(struct.pack("<IIB", in_dim, out_dim, _ACT_IDS[layer.activation]))
        for layer in weights.layers:
            fh.write(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())


def load_weights(path: str | Path) -> ProjectorWeights:
    """Read an ELNP file, rejecting truncation and header/payload mismatches."""
    blob = Path(path).read_bytes()
    if len(blob) < 20 or blob[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: not an ELNP weights file")
    version, prefix_len, llm_dim, n_layers = struct.unpack_from("<IIII", blob, 4)
    if version != WEIGHTS_VERSION:
        raise FormatError(f"{path}: unsupported weights version {version}")
    offset = 20
    shapes: list[tuple[int, int, int]] = []
    for _ in range(n_layers):
        if offset + 9 > len(blob):
            raise FormatError(f"{path}: truncated layer table")
        in_dim, out_dim, act_id = struct.unpack_from("<IIB", blob, offset)
        if act_id not in _IDS_ACT:
            raise FormatError(f"{path}: unknown activation id {act_id}")
        shapes.append((in_dim, out_dim, act_id))
        offset += 9
    payload = sum(4 * (i * o + o) for i, o, _ in shapes)
    if len(blob) - offset != payload:
        raise FormatError(
            f"{path}: payload is {len(blob) - offset} bytes, header implies {payload}"
        )
    layers = []
    for in_dim, out_dim, act_id in shapes:
        w_bytes = 4 * in_dim * out_dim
        weight = np.frombuffer(blob, dtype="<f4", count=in_dim * out_dim, offset=offset)
        offset += w_bytes
        bias = np.frombuffer(blob, dtype="<f4", count=out_dim, offset=offset)
        offset += 4 * out_dim
        try:
            layers.append(
                Layer(weight.reshape(out_dim, in_dim).astype(np.float64), bias.astype(np.float64), _IDS_ACT[act_id])
            )
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
    try:
        return ProjectorWeights(tuple(layers), prefix_len, llm_dim)
    except (DataError, DimensionError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
