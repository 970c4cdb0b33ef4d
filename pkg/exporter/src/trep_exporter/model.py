"""Frozen encoders that turn a batch of windows into per-patch hidden states.

Two kinds are addressable by id:

* ``stub:<depth>x<d_model>x<heads>``: a small randomly initialized but
  fully deterministic transformer, for development and tests. Weights are
  derived from the id alone, so two processes building the same id agree
  bit-for-bit.
* anything else is treated as a pretrained checkpoint name and resolved
  through the optional ``momentfm`` dependency (the default id below is a
  24-block, d_model=1024 encoder). Loading fails with an install hint when
  that package is absent; nothing in this module requires it.

Hidden states are captured *after* each transformer block, and layers are
numbered from 1 (block 1's output is layer 1); the embedding projection is
not addressable. Both choices are recorded in the sidecar of every file
the exporter writes.
"""

from __future__ import annotations

import re
import zlib

import torch
from torch import nn

from .errors import ModelLoadError, ShapeMismatchError

DEFAULT_MODEL_ID = "AutonLab/MOMENT-1-large"
CAPTURE_POINT = "post-block"
LAYER_INDEXING = "1-based"

_STUB = re.compile(r"^stub:(?P<depth>\d+)x(?P<d_model>\d+)x(?P<heads>\d+)$")


class StubEncoder(nn.Module):
    """Deterministic stand-in encoder with the real model's shape contract.

    Per window: instance-normalize, cut into patches of 8, project each
    patch to d_model, add a learned positional embedding, then run the
    transformer blocks. ``encode_layers`` returns the post-block hidden
    states for the requested 1-based layer indices.
    """

    patch_length = 8
    expected_length = None  # any multiple of the patch length
    _MAX_PATCHES = 256

    def __init__(self, model_id: str, depth: int, d_model: int, heads: int):
        super().__init__()
        self.model_id = model_id
        self.depth = depth
        self.d_model = d_model
        with torch.random.fork_rng():
            torch.manual_seed(zlib.crc32(model_id.encode()))
            self.proj = nn.Linear(self.patch_length, d_model)
            self.pos = nn.Parameter(torch.randn(self._MAX_PATCHES, d_model) * 0.02)
            self.blocks = nn.ModuleList(
                nn.TransformerEncoderLayer(
                    d_model=d_model,
                    nhead=heads,
                    dim_feedforward=4 * d_model,
                    dropout=0.0,
                    batch_first=True,
                    norm_first=True,
                )
                for _ in range(depth)
            )
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)

    @torch.no_grad()
    def encode_layers(
        self, windows: torch.Tensor, layers: tuple[int, ...]
    ) -> dict[int, torch.Tensor]:
        if windows.ndim != 2:
            raise ShapeMismatchError(f"expected (batch, length), got {tuple(windows.shape)}")
        batch, length = windows.shape
        if length % self.patch_length:
            raise ShapeMismatchError(
                f"window length {length} is not a multiple of patch length "
                f"{self.patch_length}"
            )
        n_patches = length // self.patch_length
        if n_patches > self._MAX_PATCHES:
            raise ShapeMismatchError(f"{n_patches} patches exceed the stub's table")
        mean = windows.mean(dim=1, keepdim=True)
        std = windows.std(dim=1, keepdim=True, unbiased=False)
        normed = (windows - mean) / (std + 1e-5)
        hidden = self.proj(normed.reshape(batch, n_patches, self.patch_length))
        hidden = hidden + self.pos[:n_patches]
        wanted = set(layers)
        captured: dict[int, torch.Tensor] = {}
        for index, block in enumerate(self.blocks, start=1):
            hidden = block(hidden)
            if index in wanted:
                captured[index] = hidden
        return captured


def _load_pretrained(model_id: str):
    try:
        import momentfm  # noqa: F401
    except ImportError:
        raise ModelLoadError(
            f"loading {model_id!r} needs the optional momentfm package "
            "(pip install momentfm); for development use a deterministic "
            "stub id such as 'stub:4x32x4'"
        ) from None
    # Reached only with momentfm installed: wrap its pipeline so hidden
    # states come out as (batch, patches, d_model) per 1-based block index.
    raise ModelLoadError(
        f"pretrained adapter for {model_id!r} is not wired up in this build"
    )


def load_model(model_id: str = DEFAULT_MODEL_ID):
    match = _STUB.match(model_id)
    if match:
        depth = int(match["depth"])
        d_model = int(match["d_model"])
        heads = int(match["heads"])
        if depth < 1 or d_model < 1 or heads < 1:
            raise ModelLoadError(f"{model_id!r}: all stub dimensions must be >= 1")
        if d_model % heads:
            raise ModelLoadError(
                f"{model_id!r}: d_model {d_model} not divisible by {heads} heads"
            )
        return StubEncoder(model_id, depth, d_model, heads)
    return _load_pretrained(model_id)
