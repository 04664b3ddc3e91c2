"""Shared fixtures: a tiny 64-bit model, a small inventory and mixtures."""

import numpy as np
import pytest

from diarlite.model.sa_asr import SAASRModel
from diarlite.model.vocab import Vocabulary
from diarlite.synth.dataset import DatasetBuilder
from diarlite.synth.inventory import SpeakerInventory
from diarlite.synth.render import render_utterance
from diarlite.utils.config import ModelConfig, PipelineConfig, SynthConfig, TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def vocab():
    return Vocabulary.default()


@pytest.fixture
def tiny_model_config():
    return ModelConfig(
        feat_dim=8,
        hidden_dim=16,
        profile_dim=8,
        subspace_dim=8,
        encoder_layers=1,
        speaker_encoder_layers=1,
        asr_decoder_layers=2,
        speaker_decoder_layers=1,
        heads=2,
        ff_dim=32,
        max_decode_len=12,
        dtype="float64",
        seed=3,
    )


@pytest.fixture
def tiny_model(tiny_model_config, vocab):
    return SAASRModel(tiny_model_config, vocab)


@pytest.fixture
def tiny_synth_config():
    return SynthConfig(
        num_samples=4,
        num_eval_samples=2,
        inventory_size=6,
        min_speakers=1,
        max_speakers=2,
        max_utterances=3,
        min_words=1,
        max_words=2,
        eval_utterances=3,
        eval_min_speakers=2,
        eval_max_speakers=2,
        max_distractors=1,
        max_signature_cosine=0.6,
        seed=11,
    )


@pytest.fixture
def inventory(tiny_model_config, vocab):
    return SpeakerInventory.generate(
        num_speakers=6,
        feat_dim=tiny_model_config.feat_dim,
        profile_dim=tiny_model_config.profile_dim,
        vocab_size=len(vocab),
        seed=5,
        max_cosine=0.6,
    )


@pytest.fixture
def builder(tiny_synth_config, tiny_model_config, vocab):
    return DatasetBuilder(tiny_synth_config, tiny_model_config, vocab)


@pytest.fixture
def sample(builder):
    """One training mixture from the tiny builder."""
    return builder.training_sample(0)


@pytest.fixture
def make_utterance(inventory, vocab, rng):
    """Render words for an inventory speaker with a fixed subword duration."""

    def _make(speaker, words=("▁cat", "s"), frames_per_token=5, noise_std=0.0):
        return render_utterance(
            inventory,
            speaker,
            vocab.encode(words),
            vocab,
            rng,
            noise_std=noise_std,
            frames_per_token=frames_per_token,
        )

    return _make


@pytest.fixture
def toy_pipeline_config():
    """Windows short enough for second-long synthetic mixtures."""
    return PipelineConfig(window_sec=0.3, hop_sec=0.15, kmeans_restarts=2)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(
        stage1_steps=2,
        stage2_steps=2,
        lr=1e-3,
        stage2_lr=1e-3,
        warmup_steps=0,
        batch_frames=1,
        log_every=1,
        seed=0,
    )
