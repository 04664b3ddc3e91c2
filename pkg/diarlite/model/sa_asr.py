"""End-to-end speaker-attributed ASR model with token time heads."""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from diarlite.alignment.time_heads import (
    TimeHeads,
    TimeLogits,
    TimePosterior,
    time_attention,
    time_logits,
)
from diarlite.alignment.timing import infer_token_times
from diarlite.errors import DataError, NumericError
from diarlite.model.layers import (
    SUBSAMPLE_FACTOR,
    AsrDecoder,
    SpeakerDecoder,
    Subsampling,
    TransformerEncoder,
)
from diarlite.model.types import (
    AcousticFeatures,
    ProfileSet,
    SerializedHypothesis,
    SerializedReference,
)
from diarlite.model.vocab import Vocabulary
from diarlite.numeric import ops
from diarlite.numeric.nn import Module
from diarlite.numeric.tensor import Tensor, no_grad
from diarlite.utils.config import ModelConfig

logger = logging.getLogger(__name__)


@dataclass
class ProfileAttention:
    """Cosine scores ``(n, K)``, softmax ``beta`` and weighted profiles ``dbar``."""

    scores: Tensor
    beta: Tensor
    dbar: Tensor


def profile_attention(queries: Tensor, profiles: ProfileSet) -> ProfileAttention:
    """Cosine-similarity attention of speaker queries over the profiles.

    ``beta[n, k]`` is the softmax over k of ``cos(q_n, d_k)`` and
    ``dbar[n] = sum_k beta[n, k] d_k``. A zero query scores 0 against every
    profile, so its ``beta`` is uniform.
    """
    matrix = profiles.matrix.astype(queries.dtype)
    unit_profiles = matrix / np.linalg.norm(matrix, axis=1, keepdims=True)
    scores = ops.matmul(ops.l2_normalize(queries), Tensor(unit_profiles.T))
    beta = ops.softmax(scores)
    dbar = ops.matmul(beta, Tensor(matrix))
    return ProfileAttention(scores=scores, beta=beta, dbar=dbar)


@dataclass
class TeacherForcedOutput:
    """Every teacher-forced quantity the losses need."""

    token_logits: Tensor
    speaker_scores: Tensor
    time: TimeLogits
    encoder_length: int


def joint_nll_from_logits(
    token_logits: Tensor,
    speaker_scores: Tensor,
    tokens: Sequence[int],
    speakers: Sequence[int],
) -> Tensor:
    """Token CE plus speaker CE summed over all positions.

    Raises:
        DataError: If a token or speaker index is out of range.
    """
    num_speakers = speaker_scores.shape[1]
    bad = [s for s in speakers if not 0 <= s < num_speakers]
    if bad:
        raise DataError(
            f"Reference speaker index {bad[0]} outside profile set "
            f"of size {num_speakers}"
        )
    return ops.add(
        ops.softmax_cross_entropy(token_logits, list(tokens)),
        ops.softmax_cross_entropy(speaker_scores, list(speakers)),
    )


class SAASRModel(Module):
    """ASR and speaker encoders/decoders joined by profile attention.

    The decoder start symbol is ``<eos>``. Tensors are ``(time, features)``.
    """

    def __init__(self, config: ModelConfig, vocab: Optional[Vocabulary] = None) -> None:
        """Build a freshly initialized model.

        Args:
            config: Hyperparameters; ``config.seed`` fixes the init.
            vocab: Token inventory; the toy default when omitted.
        """
        self.config = config
        self.vocab = vocab or Vocabulary.default()
        dtype = np.dtype(config.dtype)
        self.dtype = dtype
        rng = np.random.default_rng(config.seed)
        size = len(self.vocab)
        dim = config.hidden_dim

        self.frontend = Subsampling(config.feat_dim, dim, rng, dtype)
        self.asr_encoder = TransformerEncoder(
            dim, config.heads, config.ff_dim, config.encoder_layers, rng, dtype
        )
        self.speaker_encoder = TransformerEncoder(
            dim, config.heads, config.ff_dim, config.speaker_encoder_layers, rng, dtype
        )
        self.asr_decoder = AsrDecoder(
            size, dim, config.profile_dim, config.heads, config.ff_dim,
            config.asr_decoder_layers, rng, dtype,
        )
        self.speaker_decoder = SpeakerDecoder(
            size, dim, config.profile_dim, config.heads, config.ff_dim,
            config.speaker_decoder_layers, rng, dtype,
        )
        self.time_heads = TimeHeads(
            config.asr_decoder_layers, dim, config.subspace_dim, rng, dtype
        )
        self.assign_names()

    @property
    def subsample_factor(self) -> int:
        return SUBSAMPLE_FACTOR

    def time_head_names(self) -> List[str]:
        """Names of the four time-head weight families in every layer."""
        return [
            name
            for name, _ in self.named_parameters()
            if name.startswith("time_heads.")
        ]

    def _input(self, features: AcousticFeatures) -> Tensor:
        if features.dim != self.config.feat_dim:
            raise NumericError(
                f"feature dim {features.dim} does not match "
                f"model feat_dim {self.config.feat_dim}"
            )
        return Tensor(features.frames.astype(self.dtype))

    def asr_encode(self, features: AcousticFeatures) -> Tensor:
        """H^asr, ``(ceil(l^a / 4), f^h)``."""
        return self.asr_encoder(self.frontend(self._input(features)))

    def speaker_encode(self, features: AcousticFeatures) -> Tensor:
        """H^spk, same length as H^asr."""
        return self.speaker_encoder(self.frontend(self._input(features)))

    def encode(self, features: AcousticFeatures) -> Tuple[Tensor, Tensor]:
        """Both encodings, sharing one front-end pass."""
        front = self.frontend(self._input(features))
        return self.asr_encoder(front), self.speaker_encoder(front)

    def speaker_queries(
        self, prefix: Sequence[int], h_spk: Tensor, h_asr: Tensor
    ) -> Tensor:
        """Speaker query ``q`` for every prefix position, ``(n, f^d)``."""
        return self.speaker_decoder(prefix, h_spk, h_asr)

    def speaker_decode_step(
        self, prefix: Sequence[int], h_spk: Tensor, h_asr: Tensor
    ) -> np.ndarray:
        """Speaker query for the next token given ``prefix``."""
        with no_grad():
            return self.speaker_queries(prefix, h_spk, h_asr).data[-1].copy()

    def asr_decode_step(
        self, prefix: Sequence[int], h_asr: Tensor, dbar: np.ndarray
    ) -> np.ndarray:
        """Next-token distribution ``o_n``.

        Args:
            prefix: Tokens so far, start symbol first.
            h_asr: Encoder output.
            dbar: Weighted profile per prefix position ``(n, f^d)``, or just the
                current one ``(f^d,)`` which is then used at every position.

        Raises:
            NumericError: If the profile dimension is wrong.
        """
        dbar = np.asarray(dbar, dtype=self.dtype)
        if dbar.ndim == 1:
            dbar = np.tile(dbar, (len(prefix), 1))
        with no_grad():
            logits = self.asr_decoder(prefix, h_asr, Tensor(dbar)).output
        return ops.softmax_array(logits.data[-1])

    def teacher_forced(
        self,
        features: AcousticFeatures,
        profiles: ProfileSet,
        reference: SerializedReference,
    ) -> TeacherForcedOutput:
        """Run all heads on the reference prefix ``[<eos>] + tokens[:-1]``."""
        reference.validate(
            self.vocab.eos_id,
            self.vocab.sc_id,
            num_speakers=len(profiles),
            vocab_size=len(self.vocab),
        )
        h_asr, h_spk = self.encode(features)
        prefix = [self.vocab.eos_id] + list(reference.tokens[:-1])
        queries = self.speaker_queries(prefix, h_spk, h_asr)
        attention = profile_attention(queries, profiles)
        decoded = self.asr_decoder(prefix, h_asr, attention.dbar)
        return TeacherForcedOutput(
            token_logits=decoded.output,
            speaker_scores=attention.scores,
            time=time_logits(decoded.taps, h_asr, self.time_heads),
            encoder_length=h_asr.shape[0],
        )

    def joint_nll_loss(
        self,
        features: AcousticFeatures,
        profiles: ProfileSet,
        reference: SerializedReference,
    ) -> Tensor:
        """Negative log of Pr(Y, S | X, D) under teacher forcing."""
        out = self.teacher_forced(features, profiles, reference)
        return joint_nll_from_logits(
            out.token_logits, out.speaker_scores, reference.tokens, reference.speakers
        )

    def greedy_decode(
        self,
        features: AcousticFeatures,
        profiles: ProfileSet,
        max_len: Optional[int] = None,
    ) -> SerializedHypothesis:
        """Jointly decode tokens, speakers and token times.

        Each step computes the speaker query, its profile attention ``beta``,
        the speaker ``argmax beta``, the weighted profile, the token
        distribution and its argmax; ties go to the lowest index. Decoding
        stops after ``<eos>`` or ``max_len`` tokens.

        Raises:
            DataError: If ``max_len`` is below 1.
        """
        max_len = self.config.max_decode_len if max_len is None else max_len
        if max_len < 1:
            raise DataError(f"max_len must be at least 1, got {max_len}")
        hyp = SerializedHypothesis()
        with no_grad():
            h_asr, h_spk = self.encode(features)
            prefix = [self.vocab.eos_id]
            dbars: List[np.ndarray] = []
            for _ in range(max_len):
                queries = self.speaker_queries(prefix, h_spk, h_asr)
                last_query = ops.rows(queries, [len(prefix) - 1])
                attention = profile_attention(last_query, profiles)
                speaker = int(np.argmax(attention.beta.data[0]))
                dbars.append(attention.dbar.data[0])
                decoded = self.asr_decoder(prefix, h_asr, Tensor(np.stack(dbars)))
                probs = ops.softmax_array(decoded.output.data[-1])
                token = int(np.argmax(probs))

                hyp.tokens.append(token)
                hyp.speakers.append(speaker)
                if self.vocab.is_special(token):
                    for times in (
                        hyp.start_frames,
                        hyp.end_frames,
                        hyp.start_times,
                        hyp.end_times,
                    ):
                        times.append(None)
                else:
                    last = [ops.rows(tap, [len(prefix) - 1]) for tap in decoded.taps]
                    posterior = time_attention(last, h_asr, self.time_heads)
                    (start_f, end_f), = posterior.argmax_frames()
                    (start_s, end_s), = infer_token_times(
                        posterior, self.config.frame_period, self.subsample_factor
                    )
                    hyp.start_frames.append(start_f)
                    hyp.end_frames.append(end_f)
                    hyp.start_times.append(start_s)
                    hyp.end_times.append(end_s)
                if token == self.vocab.eos_id:
                    break
                prefix.append(token)
        logger.debug("Decoded %d tokens from %d frames", len(hyp), features.num_frames)
        return hyp

    def token_posteriors(
        self,
        features: AcousticFeatures,
        profiles: ProfileSet,
        reference: SerializedReference,
    ) -> Dict[str, np.ndarray]:
        """Teacher-forced probabilities, for measurement rather than training.

        Returns:
            ``tokens`` ``(n, |V|)``, ``speakers`` ``(n, K)``, ``start`` and
            ``end`` ``(n, l^h)``.
        """
        with no_grad():
            out = self.teacher_forced(features, profiles, reference)
        posterior = TimePosterior(
            start=ops.softmax_array(out.time.start.data),
            end=ops.softmax_array(out.time.end.data),
        )
        return {
            "tokens": ops.softmax_array(out.token_logits.data),
            "speakers": ops.softmax_array(out.speaker_scores.data),
            "start": posterior.start,
            "end": posterior.end,
        }


def save_model(model: SAASRModel, path, extra: Optional[Dict[str, object]] = None):
    """Write parameters plus the config and vocabulary needed to rebuild the model."""
    from diarlite.numeric.checkpoint import save_checkpoint

    metadata = {"model": model.config.model_dump(), "vocab": list(model.vocab.tokens)}
    metadata.update(extra or {})
    return save_checkpoint(path, model.state_dict(), metadata)


def load_model(path, config: Optional[ModelConfig] = None) -> SAASRModel:
    """Rebuild a model from a checkpoint.

    Args:
        path: Checkpoint file.
        config: Architecture to load into; defaults to the one stored in the
            checkpoint.

    Raises:
        CheckpointError: If the file is unreadable or its tensors do not fit
            the architecture (the error lists the shape differences).
    """
    from diarlite.errors import CheckpointError
    from diarlite.numeric.checkpoint import load_checkpoint, load_into

    params, metadata = load_checkpoint(path)
    if config is None:
        try:
            config = ModelConfig.model_validate(metadata.get("model", {}))
        except ValueError as e:
            raise CheckpointError(f"{path} carries an invalid model config: {e}") from e
    tokens = metadata.get("vocab")
    vocab = Vocabulary(tokens) if tokens else Vocabulary.default()
    model = SAASRModel(config, vocab)
    load_into(model, params)
    logger.info("Loaded model from %s", path)
    return model
