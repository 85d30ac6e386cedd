"""Seeded toy transformer decoder used as a stand-in for the vision-language model.

Everything here runs in float64 by default. The forward pass attends over an
arbitrary :class:`CacheView` (anything exposing per-layer key/value blocks), so
the same code path serves the monolithic cache and the merged dual-cache view.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from tays.positional import PositionAssignment, RotationSpec, rotate

EOT_ID = 0
SKIP_ID = 1
BOS_ID = 2
N_RESERVED = 3

PAYLOAD_DIM = 16


class DegenerateMaskError(ValueError):
    """Raised when a query row is not allowed to see any key."""


class NonFiniteOutputError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ToyModelConfig:
    d_model: int = 32
    n_heads: int = 4
    n_layers: int = 2
    vocab_size: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ("d_model", "n_heads", "n_layers", "vocab_size"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value <= 0:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.d_model % self.n_heads:
            raise ValueError(
                f"heads must divide d_model (d_model={self.d_model}, n_heads={self.n_heads})"
            )
        if (self.d_model // self.n_heads) % 2:
            raise ValueError("head dimension d_model/n_heads must be even for rotary encoding")
        if self.vocab_size < 4:
            raise ValueError(f"vocab_size must be >= 4, got {self.vocab_size}")
        if not -(2**63) <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @classmethod
    def from_dict(cls, data: dict) -> "ToyModelConfig":
        names = {f.name for f in fields(cls)}
        if set(data) != names:
            raise ValueError(
                f"model config must have exactly the fields {sorted(names)}, got {sorted(data)}"
            )
        return cls(**data)

    @classmethod
    def from_json(cls, path_or_text: str | Path) -> "ToyModelConfig":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LayerParameters:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    w_up: np.ndarray
    w_down: np.ndarray


@dataclass(frozen=True)
class ModelParameters:
    config: ToyModelConfig
    token_embedding: np.ndarray
    frame_projection: np.ndarray
    layers: tuple[LayerParameters, ...]
    w_out: np.ndarray
    rotation: RotationSpec

    @property
    def dtype(self):
        return self.token_embedding.dtype

    def arrays(self):
        yield self.token_embedding
        yield self.frame_projection
        for layer in self.layers:
            yield from (layer.wq, layer.wk, layer.wv, layer.wo, layer.w_up, layer.w_down)
        yield self.w_out

    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in self.arrays():
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    def embed_tokens(self, token_ids: Sequence[int]) -> np.ndarray:
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 1:
            raise ValueError("token ids must be one-dimensional")
        if ids.size and (ids.min() < 0 or ids.max() >= self.config.vocab_size):
            raise ValueError("token id out of vocabulary range")
        return self.token_embedding[ids]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def init_model(config: ToyModelConfig, dtype=np.float64, rope_base: float = 10000.0) -> ModelParameters:
    """Draw deterministic parameters for ``config``.

    Projections use N(0, 1/fan_in) and every sub-layer is pre-normalised, which
    keeps activations bounded for long sequences.
    """
    if not isinstance(config, ToyModelConfig):
        raise TypeError("config must be a ToyModelConfig")
    dtype = np.dtype(dtype)
    if dtype not in (np.float64, np.float32):
        raise ValueError("only float64 and float32 are supported")
    rng = np.random.default_rng(int(config.seed) % 2**64)
    d, v = config.d_model, config.vocab_size

    def draw(shape, fan_in):
        return _frozen((rng.standard_normal(shape) / np.sqrt(fan_in)).astype(dtype))

    token_embedding = draw((v, d), 1.0)
    frame_projection = draw((PAYLOAD_DIM, d), PAYLOAD_DIM)
    layers = []
    for _ in range(config.n_layers):
        layers.append(
            LayerParameters(
                wq=draw((d, d), d),
                wk=draw((d, d), d),
                wv=draw((d, d), d),
                wo=draw((d, d), d),
                w_up=draw((d, 4 * d), d),
                w_down=draw((4 * d, d), 4 * d),
            )
        )
    w_out = draw((d, v), d)
    return ModelParameters(
        config=config,
        token_embedding=token_embedding,
        frame_projection=frame_projection,
        layers=tuple(layers),
        w_out=w_out,
        rotation=RotationSpec(config.head_dim, rope_base),
    )


class CacheView(Protocol):
    """Read access to cached keys/values, one list of blocks per layer.

    Keys are stored already rotated, shaped ``(n_heads, n, head_dim)``.
    """

    def __len__(self) -> int: ...

    def layer_blocks(self, layer: int) -> Sequence[tuple[np.ndarray, np.ndarray]]: ...


@dataclass(frozen=True)
class KVEntries:
    """Keys and values produced by one forward call, one array pair per layer."""

    keys: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]

    def __len__(self):
        return self.keys[0].shape[1] if self.keys else 0

    @property
    def n_layers(self):
        return len(self.keys)


def softmax_row(scores, mask_row) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    mask_row = np.asarray(mask_row, dtype=bool)
    if scores.shape != mask_row.shape or scores.ndim != 1:
        raise ValueError("scores and mask_row must be 1-D and the same length")
    if not mask_row.any():
        raise DegenerateMaskError("every key is masked for this row")
    out = np.zeros_like(scores)
    visible = scores[mask_row]
    e = np.exp(visible - visible.max())
    out[mask_row] = e / e.sum()
    return out


def _rms_norm(x, eps=1e-6):
    return x / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + eps)


def _gelu(x):
    return 0.5 * x * (1.0 + np.tanh(0.7978845608028654 * (x + 0.044715 * x**3)))


def _split_heads(x, n_heads):
    n, d = x.shape
    return x.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)


def forward(
    params: ModelParameters,
    embeddings: np.ndarray,
    positions: PositionAssignment,
    mask,
    cache: CacheView | None = None,
) -> tuple[np.ndarray, KVEntries]:
    """Run the decoder over new rows attending to ``cache`` plus themselves.

    ``mask`` is ``(n_new, len(cache) + n_new)``; its columns follow the cache's
    block order, then the new rows. Returns logits and the new key/value
    entries; appending them to a cache is the caller's business.
    """
    cfg = params.config
    x = np.asarray(embeddings, dtype=params.dtype)
    if x.ndim != 2 or x.shape[1] != cfg.d_model:
        raise ValueError(f"embeddings must be (n, {cfg.d_model}), got {x.shape}")
    n = x.shape[0]
    if n == 0:
        raise ValueError("forward needs at least one new row")
    n_cached = len(cache) if cache is not None else 0
    visibility = np.asarray(getattr(mask, "visibility", mask), dtype=bool)
    if visibility.shape != (n, n_cached + n):
        raise ValueError(
            f"mask shape {visibility.shape} does not cover cache length {n_cached} + {n} new rows"
        )
    pos = np.asarray(getattr(positions, "positions", positions), dtype=np.int64)
    if pos.shape != (n,):
        raise ValueError(f"expected {n} positions, got {pos.shape}")
    empty_rows = ~visibility.any(axis=1)
    if empty_rows.any():
        raise DegenerateMaskError(f"rows {np.flatnonzero(empty_rows).tolist()} see no keys")

    H, hd = cfg.n_heads, cfg.head_dim
    scale = float(1.0 / np.sqrt(hd))
    new_keys, new_values = [], []
    for li, layer in enumerate(params.layers):
        h = _rms_norm(x)
        q = rotate(_split_heads(h @ layer.wq, H), pos[None, :], params.rotation)
        k = rotate(_split_heads(h @ layer.wk, H), pos[None, :], params.rotation)
        v = _split_heads(h @ layer.wv, H)
        k.setflags(write=False)
        v.setflags(write=False)
        # cached blocks are gathered into scratch buffers for the matmuls;
        # cache storage itself is never written
        blocks = list(cache.layer_blocks(li)) if cache is not None and n_cached else []
        if len(blocks) > 1:
            blocks = [(np.concatenate([kb for kb, _ in blocks], axis=1),
                       np.concatenate([vb for _, vb in blocks], axis=1))]
        blocks.append((k, v))
        scores = np.concatenate([q @ kb.transpose(0, 2, 1) for kb, _ in blocks], axis=-1) * scale
        scores = np.where(visibility[None], scores, -np.inf)
        scores -= scores.max(axis=-1, keepdims=True)
        weights = np.exp(scores)
        weights /= weights.sum(axis=-1, keepdims=True)
        attn = weights[:, :, n_cached:] @ v
        if n_cached:
            attn += weights[:, :, :n_cached] @ blocks[0][1]
        x = x + attn.transpose(1, 0, 2).reshape(n, cfg.d_model) @ layer.wo
        x = x + _gelu(_rms_norm(x) @ layer.w_up) @ layer.w_down
        new_keys.append(k)
        new_values.append(v)
    logits = _rms_norm(x) @ params.w_out
    if not np.all(np.isfinite(logits)):
        raise NonFiniteOutputError("forward produced non-finite logits")
    return logits, KVEntries(tuple(new_keys), tuple(new_values))
