"""Speech enhancement with fullband-subband cross-attention.

A self-contained numpy engine: STFT frontend, complex-ratio-mask targets,
a dilated-TCN fullband extractor, per-bin cross-attention fusion, a
shared-parameter subband LSTM, and hand-written gradients verified against
finite differences.
"""

from .audio import Waveform, read_wav, write_wav
from .config import (
    AttentionConfig,
    CirmConfig,
    FullConfig,
    LstmConfig,
    MixSpec,
    ModelConfig,
    TcnConfig,
    TrainConfig,
    load_config,
)
from .errors import ConfigError, FormatError, FscaError, ShapeError
from .mask import Cirm, apply_mask, compress, compute_cirm, decompress
from .metrics import EvalReport, evaluate, param_count, si_sdr
from .model import (
    ModelParams,
    enhance,
    init_params,
    load_checkpoint,
    predict_mask,
    save_checkpoint,
)
from .stft import StftConfig, istft, magnitude, stft
from .subband import broadcast_fullband, concat_fullband, unfold
from .train import AdamState, adam_step, cirm_mse_loss, mix, train_loop

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AttentionConfig",
    "Cirm",
    "CirmConfig",
    "ConfigError",
    "EvalReport",
    "FormatError",
    "FscaError",
    "FullConfig",
    "LstmConfig",
    "MixSpec",
    "ModelConfig",
    "ModelParams",
    "ShapeError",
    "StftConfig",
    "TcnConfig",
    "TrainConfig",
    "Waveform",
    "adam_step",
    "apply_mask",
    "broadcast_fullband",
    "cirm_mse_loss",
    "compress",
    "compute_cirm",
    "concat_fullband",
    "decompress",
    "enhance",
    "evaluate",
    "init_params",
    "istft",
    "load_checkpoint",
    "load_config",
    "magnitude",
    "mix",
    "param_count",
    "predict_mask",
    "read_wav",
    "save_checkpoint",
    "si_sdr",
    "stft",
    "train_loop",
    "unfold",
    "write_wav",
]
