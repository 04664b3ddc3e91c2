"""Configuration management for diarlite.

Run settings are pydantic models; :class:`ConfigStore` keeps the raw JSON
document, applies dotted overrides and validates it into a
:class:`RunConfig`.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from diarlite.errors import ConfigError
from diarlite.utils.validators import validate_override, validate_speaker_count_range

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "DIARLITE_CONFIG"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ModelConfig(_Section):
    """Toy SA-ASR model hyperparameters."""

    feat_dim: int = Field(16, ge=1)
    hidden_dim: int = Field(64, ge=1)
    profile_dim: int = Field(16, ge=1)
    subspace_dim: int = Field(16, ge=1)
    encoder_layers: int = Field(2, ge=1)
    speaker_encoder_layers: int = Field(2, ge=1)
    asr_decoder_layers: int = Field(2, ge=1)
    speaker_decoder_layers: int = Field(2, ge=1)
    heads: int = Field(4, ge=1)
    ff_dim: int = Field(256, ge=1)
    frame_period: float = Field(0.01, gt=0)
    max_decode_len: int = Field(300, ge=1)
    dtype: Literal["float32", "float64"] = "float32"
    seed: int = 0

    @model_validator(mode="after")
    def _heads_divide_hidden(self) -> "ModelConfig":
        if self.hidden_dim % self.heads:
            raise ValueError(
                f"hidden_dim {self.hidden_dim} is not divisible by heads {self.heads}"
            )
        return self


class SynthConfig(_Section):
    """Synthetic corpus generation settings."""

    num_samples: int = Field(2000, ge=1)
    num_eval_samples: int = Field(200, ge=1)
    inventory_size: int = Field(16, ge=1)
    min_speakers: int = Field(1, ge=1)
    max_speakers: int = Field(3, ge=1)
    max_utterances: int = Field(5, ge=1)
    min_words: int = Field(2, ge=1)
    max_words: int = Field(5, ge=1)
    min_token_frames: int = Field(3, ge=1)
    max_token_frames: int = Field(10, ge=1)
    signature_scale: float = Field(2.0, gt=0)
    pattern_scale: float = Field(1.0, gt=0)
    noise_std: float = Field(0.1, ge=0)
    background_noise_std: float = Field(0.05, ge=0)
    overlap_prob: float = Field(0.9, ge=0, le=1)
    max_gap_sec: float = Field(1.0, ge=0)
    max_distractors: int = Field(2, ge=0)
    max_signature_cosine: float = Field(0.3, gt=-1, le=1)
    eval_utterances: int = Field(6, ge=1)
    eval_min_speakers: int = Field(2, ge=1)
    eval_max_speakers: int = Field(3, ge=1)
    overlap_condition: Optional[Literal["0S", "0L", "10", "20", "30", "40"]] = None
    seed: int = 0

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthConfig":
        ok, error = validate_speaker_count_range(self.min_speakers, self.max_speakers)
        if not ok:
            raise ValueError(error)
        if self.max_utterances > 5:
            raise ValueError(f"max_utterances {self.max_utterances} exceeds 5")
        if self.max_utterances < self.max_speakers:
            raise ValueError("max_utterances must be at least max_speakers")
        if self.min_words > self.max_words:
            raise ValueError("min_words must not exceed max_words")
        if self.min_token_frames > self.max_token_frames:
            raise ValueError("min_token_frames must not exceed max_token_frames")
        if self.eval_min_speakers > self.eval_max_speakers:
            raise ValueError("eval_min_speakers must not exceed eval_max_speakers")
        if self.max_speakers + self.max_distractors > self.inventory_size:
            raise ValueError(
                "inventory_size is too small for speakers plus distractors"
            )
        return self


class PipelineConfig(_Section):
    """Diarization pipeline settings."""

    window_sec: float = Field(1.5, gt=0)
    hop_sec: float = Field(0.75, gt=0)
    max_chunk_sec: float = Field(20.0, gt=0)
    merge_gap_sec: float = Field(2.0, gt=0)
    max_token_dur_sec: float = Field(2.0, gt=0)
    speaker_count: Union[Literal["estimate"], int] = "estimate"
    energy_threshold: float = Field(0.6, gt=0)
    min_silence_sec: float = Field(0.3, ge=0)
    max_speakers: int = Field(8, ge=1)
    max_p_ratio: float = Field(0.25, gt=0, le=1)
    single_speaker_cosine: float = Field(0.9, gt=-1, le=1)
    kmeans_restarts: int = Field(10, ge=1)
    seed: int = 0
    jobs: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_window(self) -> "PipelineConfig":
        if self.hop_sec > self.window_sec:
            raise ValueError(
                f"hop_sec {self.hop_sec} must not exceed window_sec {self.window_sec}"
            )
        if isinstance(self.speaker_count, int) and self.speaker_count < 1:
            raise ValueError("speaker_count must be 'estimate' or a positive integer")
        return self

    @property
    def oracle_speakers(self) -> Optional[int]:
        """Oracle speaker count, or None when the count is estimated."""
        return None if self.speaker_count == "estimate" else int(self.speaker_count)


class TrainConfig(_Section):
    """Two-stage training schedule."""

    stage1_steps: int = Field(3000, ge=0)
    stage2_steps: int = Field(1000, ge=0)
    lr: float = Field(1e-3, gt=0)
    stage2_lr: float = Field(1e-3, gt=0)
    warmup_steps: int = Field(500, ge=0)
    batch_frames: int = Field(2000, ge=1)
    freeze_non_time_heads: bool = False
    log_every: int = Field(50, ge=1)
    seed: int = 0


class ScoringConfig(_Section):
    """Scoring settings."""

    collar_sec: float = Field(0.0, ge=0)
    grid_sec: float = Field(0.01, gt=0)
    brute_force_max_speakers: int = Field(8, ge=1)


class PathsConfig(_Section):
    """Filesystem locations."""

    work_dir: Path = Path("work")
    data_dir: Optional[Path] = None
    checkpoint: Optional[Path] = None
    output_dir: Optional[Path] = None
    ledger_url: Optional[str] = None

    def resolved_data_dir(self) -> Path:
        return self.data_dir or self.work_dir / "data"

    def resolved_checkpoint(self) -> Path:
        return self.checkpoint or self.work_dir / "model.npz"

    def resolved_output_dir(self) -> Path:
        return self.output_dir or self.work_dir / "out"

    def resolved_ledger_url(self) -> str:
        return self.ledger_url or f"sqlite:///{self.work_dir / 'ledger.db'}"


class RunConfig(_Section):
    """Every setting a command needs."""

    model: ModelConfig = Field(default_factory=ModelConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    scoring: ScoringConfig = Field(default_factory=ScoringConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)


class ConfigStore:
    """JSON configuration document with dotted-key access."""

    def __init__(self, config_path: Optional[Union[str, Path]] = None) -> None:
        """Initialize the store.

        Args:
            config_path: JSON file to load. Defaults to ``$DIARLITE_CONFIG``;
                with neither, the store starts from defaults.
        """
        if config_path is None:
            config_path = os.environ.get(CONFIG_ENV_VAR) or None
        self.config_path: Optional[Path] = Path(config_path) if config_path else None
        self._config: Dict[str, Any] = {}
        self.load()

    def load(self) -> None:
        """Load the configuration file, if one is set.

        Raises:
            ConfigError: If the file is missing or not a JSON object.
        """
        if self.config_path is None:
            self._config = {}
            return
        try:
            with open(self.config_path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {self.config_path}") from e
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Unable to read config {self.config_path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config {self.config_path} must hold a JSON object")
        self._config = data
        logger.debug("Loaded config from %s", self.config_path)

    def save(self, path: Optional[Union[str, Path]] = None) -> Path:
        """Write the document atomically.

        Args:
            path: Destination; defaults to the loaded file.

        Returns:
            The written path.
        """
        from diarlite.utils.fileio import atomic_write_text

        target = Path(path) if path is not None else self.config_path
        if target is None:
            raise ConfigError("No config path to save to")
        text = json.dumps(self._config, indent=2, sort_keys=True) + "\n"
        return atomic_write_text(target, text)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a value by dotted key, e.g. ``pipeline.window_sec``."""
        node: Any = self._config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any) -> None:
        """Set a value by dotted key, creating intermediate sections."""
        parts = key.split(".")
        node = self._config
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Cannot set '{key}': '{part}' is not a section")
            node = child
        node[parts[-1]] = value

    def apply_overrides(self, overrides: Iterable[str]) -> None:
        """Apply ``key=value`` overrides; values are parsed as JSON when possible.

        Raises:
            ConfigError: If an override is malformed.
        """
        for override in overrides:
            is_valid, error = validate_override(override)
            if not is_valid:
                raise ConfigError(f"Invalid override '{override}': {error}")
            key, raw = override.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            self.set(key.strip(), value)

    def as_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(self._config))

    def to_run_config(self) -> RunConfig:
        """Validate the document.

        Raises:
            ConfigError: If a key is unknown or a value is invalid.
        """
        try:
            return RunConfig.model_validate(self._config)
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration:\n{e}") from e


def load_run_config(
    config_path: Optional[Union[str, Path]] = None,
    overrides: Iterable[str] = (),
) -> RunConfig:
    """Load, override and validate a run configuration in one call."""
    store = ConfigStore(config_path)
    store.apply_overrides(overrides)
    return store.to_run_config()
