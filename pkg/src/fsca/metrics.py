"""Evaluation metrics and parameter accounting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .errors import FormatError, ShapeError

# Reports stay finite: identical signals hit the cap instead of +inf.
SI_SDR_CAP = 100.0


@dataclass
class EvalReport:
    si_sdr_db: float
    length_samples: int


def _samples(x) -> np.ndarray:
    if isinstance(x, Waveform):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def si_sdr(reference, estimate) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +-100.

    The estimate is compared against its own projection onto the reference:
    alpha = <est, ref> / <ref, ref>, value = 10 log10(|alpha ref|^2 /
    |alpha ref - est|^2). Any rescaling of the estimate cancels out.
    """
    s = _samples(reference)
    e = _samples(estimate)
    if s.shape != e.shape:
        raise ShapeError(f"signal lengths differ: {s.shape} vs {e.shape}")
    ref_power = float(np.dot(s, s))
    if ref_power == 0.0:
        raise FormatError("reference signal has zero power")
    alpha = float(np.dot(e, s)) / ref_power
    proj = alpha * s
    err = proj - e
    err_power = float(np.dot(err, err))
    proj_power = float(np.dot(proj, proj))
    if err_power == 0.0:
        return SI_SDR_CAP
    if proj_power == 0.0:
        return -SI_SDR_CAP
    value = 10.0 * np.log10(proj_power / err_power)
    return float(np.clip(value, -SI_SDR_CAP, SI_SDR_CAP))


def evaluate(reference, estimate) -> EvalReport:
    if (isinstance(reference, Waveform) and isinstance(estimate, Waveform)
            and reference.sample_rate != estimate.sample_rate):
        raise FormatError(
            f"sample rates differ: reference {reference.sample_rate}, "
            f"estimate {estimate.sample_rate}")
    s = _samples(reference)
    return EvalReport(si_sdr_db=si_sdr(reference, estimate), length_samples=s.shape[0])


def param_count(p) -> tuple:
    """(total, per-module breakdown) of trainable parameter elements."""
    breakdown = {
        "extractor": sum(q.size for q in p.extractor.parameters()),
        "fsca": 0 if p.fsca is None else sum(q.size for q in p.fsca.parameters()),
        "subband": sum(q.size for q in p.subband.parameters()),
    }
    return sum(breakdown.values()), breakdown
