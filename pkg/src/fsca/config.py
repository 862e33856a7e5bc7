"""Model, training, and mixing configuration with a strict JSON surface.

One JSON document configures everything. Keys map one-to-one onto the
dataclass fields below; unknown keys are rejected at every nesting level so
misspelled hyperparameters fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .stft import StftConfig

FUSION_MODES = ("attention", "concat", "attention_concat")
ATTENTION_MASKS = ("full", "causal")


@dataclass(frozen=True)
class TcnConfig:
    groups: int = 2
    blocks_per_group: int = 4
    kernel: int = 3
    dilations: tuple = (1, 2, 5, 9)
    hidden: int = 512


@dataclass(frozen=True)
class AttentionConfig:
    heads: int = 8
    d_model: int = 256
    mask: str = "full"
    ffn_ratio: int = 4


@dataclass(frozen=True)
class LstmConfig:
    hidden: int = 384
    layers: int = 2


@dataclass(frozen=True)
class CirmConfig:
    k: float = 10.0
    c: float = 0.1


@dataclass(frozen=True)
class ModelConfig:
    sample_rate: int = 16000
    n_fft: int = 512
    hop: int = 256
    n: int = 15
    tcn: TcnConfig = field(default_factory=TcnConfig)
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    lstm: LstmConfig = field(default_factory=LstmConfig)
    cirm: CirmConfig = field(default_factory=CirmConfig)
    fusion_mode: str = "attention"

    @property
    def n_freq(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def unit_width(self) -> int:
        return 2 * self.n + 1

    @property
    def lstm_input_width(self) -> int:
        # Concatenating the fullband row adds one channel in the concat modes.
        if self.fusion_mode == "attention":
            return self.unit_width
        return self.unit_width + 1

    def stft(self) -> StftConfig:
        return StftConfig(n_fft=self.n_fft, hop=self.hop)

    def validate(self) -> "ModelConfig":
        try:
            self.stft()
        except Exception as exc:
            raise ConfigError(str(exc)) from None
        if self.sample_rate < 1:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.n < 0 or self.unit_width > self.n_freq:
            raise ConfigError(
                f"neighbor half-width n={self.n} needs 2n+1 <= {self.n_freq} bins")
        t = self.tcn
        if min(t.groups, t.blocks_per_group, t.kernel, t.hidden) < 1:
            raise ConfigError(f"tcn sizes must be positive, got {t}")
        if len(t.dilations) != t.blocks_per_group:
            raise ConfigError(
                f"tcn needs {t.blocks_per_group} dilations, got {list(t.dilations)}")
        if any(d < 1 for d in t.dilations):
            raise ConfigError(f"tcn dilations must be >= 1, got {list(t.dilations)}")
        a = self.attention
        if min(a.heads, a.d_model, a.ffn_ratio) < 1:
            raise ConfigError(f"attention sizes must be positive, got {a}")
        if a.d_model % a.heads:
            raise ConfigError(
                f"attention d_model {a.d_model} not divisible by {a.heads} heads")
        if a.mask not in ATTENTION_MASKS:
            raise ConfigError(f"attention mask must be one of {ATTENTION_MASKS}, got {a.mask!r}")
        if min(self.lstm.hidden, self.lstm.layers) < 1:
            raise ConfigError(f"lstm sizes must be positive, got {self.lstm}")
        if self.cirm.k <= 0 or self.cirm.c <= 0:
            raise ConfigError(f"cirm K and C must be positive, got {self.cirm}")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(
                f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        return self


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 500
    chunk_frames: int = 192
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.eps <= 0:
            raise ConfigError(f"adam eps must be > 0, got {self.eps}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.chunk_frames < 1:
            raise ConfigError(f"chunk_frames must be >= 1, got {self.chunk_frames}")
        return self


@dataclass(frozen=True)
class MixSpec:
    snr_db: tuple = (-5.0, 20.0)
    rir_probability: float = 0.75
    seed: int = 0

    def validate(self) -> "MixSpec":
        if len(self.snr_db) != 2 or self.snr_db[0] > self.snr_db[1]:
            raise ConfigError(f"snr_db must be [lo, hi] with lo <= hi, got {self.snr_db}")
        if not 0.0 <= self.rir_probability <= 1.0:
            raise ConfigError(
                f"rir_probability must lie in [0, 1], got {self.rir_probability}")
        return self


@dataclass(frozen=True)
class FullConfig:
    model: ModelConfig
    training: TrainConfig
    mix: MixSpec


def _expect(mapping, context: str, known):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{context} must be a JSON object, got {type(mapping).__name__}")
    unknown = set(mapping) - set(known)
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")


def _as_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def _as_num(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def model_config_from_dict(doc: dict) -> ModelConfig:
    """Build and validate a ModelConfig from parsed JSON (strict keys)."""
    _expect(doc, "model config",
            ("sample_rate", "n_fft", "hop", "n", "F", "tcn", "attention",
             "lstm", "cirm", "fusion_mode"))
    base = ModelConfig()
    tcn = doc.get("tcn", {})
    _expect(tcn, "tcn", ("groups", "blocks_per_group", "kernel", "dilations", "hidden"))
    att = doc.get("attention", {})
    _expect(att, "attention", ("heads", "d_model", "mask", "ffn_ratio"))
    lstm = doc.get("lstm", {})
    _expect(lstm, "lstm", ("hidden", "layers"))
    cirm = doc.get("cirm", {})
    _expect(cirm, "cirm", ("K", "C"))
    dilations = tcn.get("dilations", list(base.tcn.dilations))
    if not isinstance(dilations, list):
        raise ConfigError(f"tcn.dilations must be a list, got {dilations!r}")
    mask = att.get("mask", base.attention.mask)
    fusion = doc.get("fusion_mode", base.fusion_mode)
    if not isinstance(mask, str):
        raise ConfigError(f"attention.mask must be a string, got {mask!r}")
    if not isinstance(fusion, str):
        raise ConfigError(f"fusion_mode must be a string, got {fusion!r}")
    cfg = ModelConfig(
        sample_rate=_as_int(doc.get("sample_rate", base.sample_rate), "sample_rate"),
        n_fft=_as_int(doc.get("n_fft", base.n_fft), "n_fft"),
        hop=_as_int(doc.get("hop", base.hop), "hop"),
        n=_as_int(doc.get("n", base.n), "n"),
        tcn=TcnConfig(
            groups=_as_int(tcn.get("groups", base.tcn.groups), "tcn.groups"),
            blocks_per_group=_as_int(
                tcn.get("blocks_per_group", base.tcn.blocks_per_group),
                "tcn.blocks_per_group"),
            kernel=_as_int(tcn.get("kernel", base.tcn.kernel), "tcn.kernel"),
            dilations=tuple(_as_int(d, "tcn.dilations entry") for d in dilations),
            hidden=_as_int(tcn.get("hidden", base.tcn.hidden), "tcn.hidden"),
        ),
        attention=AttentionConfig(
            heads=_as_int(att.get("heads", base.attention.heads), "attention.heads"),
            d_model=_as_int(att.get("d_model", base.attention.d_model), "attention.d_model"),
            mask=mask,
            ffn_ratio=_as_int(att.get("ffn_ratio", base.attention.ffn_ratio),
                              "attention.ffn_ratio"),
        ),
        lstm=LstmConfig(
            hidden=_as_int(lstm.get("hidden", base.lstm.hidden), "lstm.hidden"),
            layers=_as_int(lstm.get("layers", base.lstm.layers), "lstm.layers"),
        ),
        cirm=CirmConfig(
            k=_as_num(cirm.get("K", base.cirm.k), "cirm.K"),
            c=_as_num(cirm.get("C", base.cirm.c), "cirm.C"),
        ),
        fusion_mode=fusion,
    ).validate()
    if "F" in doc:
        declared = _as_int(doc["F"], "F")
        if declared != cfg.n_freq:
            raise ConfigError(
                f"F={declared} inconsistent with n_fft={cfg.n_fft} (expected {cfg.n_freq})")
    return cfg


def model_config_to_dict(cfg: ModelConfig) -> dict:
    return {
        "sample_rate": cfg.sample_rate,
        "n_fft": cfg.n_fft,
        "hop": cfg.hop,
        "n": cfg.n,
        "F": cfg.n_freq,
        "tcn": {
            "groups": cfg.tcn.groups,
            "blocks_per_group": cfg.tcn.blocks_per_group,
            "kernel": cfg.tcn.kernel,
            "dilations": list(cfg.tcn.dilations),
            "hidden": cfg.tcn.hidden,
        },
        "attention": {
            "heads": cfg.attention.heads,
            "d_model": cfg.attention.d_model,
            "mask": cfg.attention.mask,
            "ffn_ratio": cfg.attention.ffn_ratio,
        },
        "lstm": {"hidden": cfg.lstm.hidden, "layers": cfg.lstm.layers},
        "cirm": {"K": cfg.cirm.k, "C": cfg.cirm.c},
        "fusion_mode": cfg.fusion_mode,
    }


def train_config_from_dict(doc: dict) -> TrainConfig:
    _expect(doc, "training",
            ("learning_rate", "beta1", "beta2", "eps", "steps", "chunk_frames", "seed"))
    base = TrainConfig()
    return TrainConfig(
        learning_rate=_as_num(doc.get("learning_rate", base.learning_rate),
                              "training.learning_rate"),
        beta1=_as_num(doc.get("beta1", base.beta1), "training.beta1"),
        beta2=_as_num(doc.get("beta2", base.beta2), "training.beta2"),
        eps=_as_num(doc.get("eps", base.eps), "training.eps"),
        steps=_as_int(doc.get("steps", base.steps), "training.steps"),
        chunk_frames=_as_int(doc.get("chunk_frames", base.chunk_frames),
                             "training.chunk_frames"),
        seed=_as_int(doc.get("seed", base.seed), "training.seed"),
    ).validate()


def mix_spec_from_dict(doc: dict) -> MixSpec:
    _expect(doc, "mix", ("snr_db", "rir_probability", "seed"))
    base = MixSpec()
    snr = doc.get("snr_db", list(base.snr_db))
    if not isinstance(snr, list) or len(snr) != 2:
        raise ConfigError(f"mix.snr_db must be a [lo, hi] pair, got {snr!r}")
    return MixSpec(
        snr_db=tuple(_as_num(s, "mix.snr_db entry") for s in snr),
        rir_probability=_as_num(doc.get("rir_probability", base.rir_probability),
                                "mix.rir_probability"),
        seed=_as_int(doc.get("seed", base.seed), "mix.seed"),
    ).validate()


def full_config_from_dict(doc: dict) -> FullConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"config must be a JSON object, got {type(doc).__name__}")
    model_doc = {k: v for k, v in doc.items() if k not in ("training", "mix")}
    return FullConfig(
        model=model_config_from_dict(model_doc),
        training=train_config_from_dict(doc.get("training", {})),
        mix=mix_spec_from_dict(doc.get("mix", {})),
    )


def load_config(path) -> FullConfig:
    """Parse and validate a JSON config file (I/O errors propagate as OSError)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return full_config_from_dict(doc)
