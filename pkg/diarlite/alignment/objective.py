"""Multi-task objective: joint NLL plus token time cross entropy."""

from dataclasses import dataclass

from diarlite.alignment.time_heads import time_ce_loss
from diarlite.model.sa_asr import SAASRModel, joint_nll_from_logits
from diarlite.model.types import AcousticFeatures, ProfileSet, SerializedReference
from diarlite.numeric import ops
from diarlite.numeric.tensor import Tensor


@dataclass
class LossBreakdown:
    """The recorded total and its two parts."""

    total: Tensor
    nll: Tensor
    time_ce: Tensor


def combined_loss(
    model: SAASRModel,
    features: AcousticFeatures,
    profiles: ProfileSet,
    reference: SerializedReference,
    time_weight: float = 1.0,
) -> LossBreakdown:
    """Joint NLL plus time CE, each with weight 1.0 by default.

    Raises:
        DataError: If the reference is invalid for the profiles or the
            encoder length.
    """
    out = model.teacher_forced(features, profiles, reference)
    reference.validate(
        model.vocab.eos_id,
        model.vocab.sc_id,
        num_speakers=len(profiles),
        encoder_length=out.encoder_length,
    )
    nll = joint_nll_from_logits(
        out.token_logits, out.speaker_scores, reference.tokens, reference.speakers
    )
    time_ce = time_ce_loss(out.time, reference.timings)
    total = ops.add(nll, ops.scale(time_ce, time_weight))
    return LossBreakdown(total=total, nll=nll, time_ce=time_ce)
