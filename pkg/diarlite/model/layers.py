"""Encoder and decoder stacks of the SA-ASR model.

All blocks are pre-layer-normalized: each sublayer reads ``LN(x)`` and adds
its output to the residual stream.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from diarlite.errors import NumericError
from diarlite.numeric import ops
from diarlite.numeric.nn import (
    Embedding,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    add_positional_encoding,
)
from diarlite.numeric.tensor import Tensor

SUBSAMPLE_FACTOR = 4


class Subsampling(Module):
    """Two stride-2 frame-stacking layers: ``l`` frames become ``ceil(l / 4)``."""

    def __init__(
        self, in_dim: int, hidden: int, rng: np.random.Generator, dtype: np.dtype
    ) -> None:
        self.first = Linear(2 * in_dim, hidden, rng, dtype)
        self.second = Linear(2 * hidden, hidden, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        x = ops.relu(self.first(ops.stack_frames(x, 2)))
        return ops.relu(self.second(ops.stack_frames(x, 2)))


class EncoderLayer(Module):
    def __init__(
        self,
        dim: int,
        heads: int,
        ff_dim: int,
        rng: np.random.Generator,
        dtype: np.dtype,
    ) -> None:
        self.attn_norm = LayerNorm(dim, dtype)
        self.self_attn = MultiHeadAttention(dim, heads, rng, dtype)
        self.ff_norm = LayerNorm(dim, dtype)
        self.ff = FeedForward(dim, ff_dim, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.attn_norm(x)
        x = ops.add(x, self.self_attn(h, h, h))
        return ops.add(x, self.ff(self.ff_norm(x)))


class TransformerEncoder(Module):
    """Positional encoding, encoder layers and a final layer norm."""

    def __init__(
        self,
        dim: int,
        heads: int,
        ff_dim: int,
        num_layers: int,
        rng: np.random.Generator,
        dtype: np.dtype,
    ) -> None:
        self.layers = [
            EncoderLayer(dim, heads, ff_dim, rng, dtype) for _ in range(num_layers)
        ]
        self.norm = LayerNorm(dim, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        x = add_positional_encoding(x)
        for layer in self.layers:
            x = layer(x)
        return self.norm(x)


@dataclass
class DecoderOutput:
    """Decoder result for every prefix position.

    ``taps[l]`` is the residual state of layer ``l`` after self-attention and
    before source attention; the time heads read their queries there.
    """

    output: Tensor
    taps: List[Tensor]


class AsrDecoderLayer(Module):
    """Self-attention, source attention over H^asr, then feed-forward.

    ``speaker_input`` (``W^spk`` times the weighted profile) is added to the
    feed-forward input; the decoder passes it to the first layer only.
    """

    def __init__(
        self,
        dim: int,
        heads: int,
        ff_dim: int,
        rng: np.random.Generator,
        dtype: np.dtype,
    ) -> None:
        self.self_norm = LayerNorm(dim, dtype)
        self.self_attn = MultiHeadAttention(dim, heads, rng, dtype)
        self.src_norm = LayerNorm(dim, dtype)
        self.src_attn = MultiHeadAttention(dim, heads, rng, dtype)
        self.ff_norm = LayerNorm(dim, dtype)
        self.ff = FeedForward(dim, ff_dim, rng, dtype)

    def __call__(
        self, z: Tensor, h_asr: Tensor, speaker_input: Optional[Tensor] = None
    ) -> Tuple[Tensor, Tensor]:
        h = self.self_norm(z)
        z_bar = ops.add(z, self.self_attn(h, h, h, causal=True))
        h = self.src_norm(z_bar)
        z_src = ops.add(z_bar, self.src_attn(h, h_asr, h_asr))
        ff_in = self.ff_norm(z_src)
        if speaker_input is not None:
            ff_in = ops.add(ff_in, speaker_input)
        return ops.add(z_src, self.ff(ff_in)), z_bar


class AsrDecoder(Module):
    """Token decoder conditioned on the weighted speaker profile."""

    def __init__(
        self,
        vocab_size: int,
        dim: int,
        profile_dim: int,
        heads: int,
        ff_dim: int,
        num_layers: int,
        rng: np.random.Generator,
        dtype: np.dtype,
    ) -> None:
        self.embed = Embedding(vocab_size, dim, rng, dtype)
        self.layers = [
            AsrDecoderLayer(dim, heads, ff_dim, rng, dtype) for _ in range(num_layers)
        ]
        self.speaker_proj = Linear(profile_dim, dim, rng, dtype, bias=False)
        self.norm = LayerNorm(dim, dtype)
        self.out = Linear(dim, vocab_size, rng, dtype)

    def __call__(
        self, prefix: Sequence[int], h_asr: Tensor, dbar: Tensor
    ) -> DecoderOutput:
        """Compute logits for every prefix position.

        Args:
            prefix: Input token ids (start symbol first).
            h_asr: Encoder output ``(l^h, f^h)``.
            dbar: Weighted profiles ``(len(prefix), f^d)``, row i used at position i.

        Returns:
            Logits ``(len(prefix), |V|)`` and per-layer query taps.

        Raises:
            NumericError: If ``dbar`` does not match the prefix or profile dim.
        """
        if dbar.shape != (len(prefix), self.speaker_proj.weight.shape[1]):
            raise NumericError(
                f"weighted profile shape {dbar.shape} does not match prefix length "
                f"{len(prefix)} and profile dim {self.speaker_proj.weight.shape[1]}"
            )
        z = add_positional_encoding(self.embed(np.asarray(prefix)))
        speaker_input = self.speaker_proj(dbar)
        taps: List[Tensor] = []
        for i, layer in enumerate(self.layers):
            z, z_bar = layer(z, h_asr, speaker_input if i == 0 else None)
            taps.append(z_bar)
        return DecoderOutput(self.out(self.norm(z)), taps)


class SpeakerDecoderLayer(Module):
    """Self-attention, attention over H^spk and then H^asr, then feed-forward."""

    def __init__(
        self,
        dim: int,
        heads: int,
        ff_dim: int,
        rng: np.random.Generator,
        dtype: np.dtype,
    ) -> None:
        self.self_norm = LayerNorm(dim, dtype)
        self.self_attn = MultiHeadAttention(dim, heads, rng, dtype)
        self.spk_norm = LayerNorm(dim, dtype)
        self.spk_attn = MultiHeadAttention(dim, heads, rng, dtype)
        self.asr_norm = LayerNorm(dim, dtype)
        self.asr_attn = MultiHeadAttention(dim, heads, rng, dtype)
        self.ff_norm = LayerNorm(dim, dtype)
        self.ff = FeedForward(dim, ff_dim, rng, dtype)

    def __call__(self, z: Tensor, h_spk: Tensor, h_asr: Tensor) -> Tensor:
        h = self.self_norm(z)
        z = ops.add(z, self.self_attn(h, h, h, causal=True))
        h = self.spk_norm(z)
        z = ops.add(z, self.spk_attn(h, h_spk, h_spk))
        h = self.asr_norm(z)
        z = ops.add(z, self.asr_attn(h, h_asr, h_asr))
        return ops.add(z, self.ff(self.ff_norm(z)))


class SpeakerDecoder(Module):
    """Estimates the speaker query ``q_n`` for every prefix position."""

    def __init__(
        self,
        vocab_size: int,
        dim: int,
        profile_dim: int,
        heads: int,
        ff_dim: int,
        num_layers: int,
        rng: np.random.Generator,
        dtype: np.dtype,
    ) -> None:
        self.embed = Embedding(vocab_size, dim, rng, dtype)
        self.layers = [
            SpeakerDecoderLayer(dim, heads, ff_dim, rng, dtype)
            for _ in range(num_layers)
        ]
        self.norm = LayerNorm(dim, dtype)
        self.proj = Linear(dim, profile_dim, rng, dtype)

    def __call__(self, prefix: Sequence[int], h_spk: Tensor, h_asr: Tensor) -> Tensor:
        if h_spk.shape[0] != h_asr.shape[0]:
            raise NumericError(
                "speaker and ASR encodings differ in length: "
                f"{h_spk.shape[0]} vs {h_asr.shape[0]}"
            )
        z = add_positional_encoding(self.embed(np.asarray(prefix)))
        for layer in self.layers:
            z = layer(z, h_spk, h_asr)
        return self.proj(self.norm(z))
