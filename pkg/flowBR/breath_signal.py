import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import signal

from flowBR.exceptions import (
    EmptySignal,
    FilterDesignError,
    InvalidInput,
    SignalTooShort,
)
from flowBR.exception_messages import exception_messages

logger = logging.getLogger(__name__)

PROMINENCE_FACTOR = 0.3
MIN_PEAK_SEPARATION_S = 2.0

NO_BREATHING = "no_breathing_detected"
ALL_ZERO = "all_zero_signal"
POINTS_LOST = "points_lost"
PYRAMID_REDUCED = "pyramid_reduced"


class SignalKind(str, Enum):
    raw = "raw"
    filtered = "filtered"


@dataclass(frozen=True, eq=False)
class BreathSignal:
    samples: np.ndarray
    fs: float
    kind: SignalKind = SignalKind.raw

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        valid = (
            samples.ndim == 1
            and samples.size >= 2
            and np.all(np.isfinite(samples))
            and math.isfinite(self.fs)
            and self.fs > 0
        )
        if not valid:
            raise InvalidInput(exception_messages["InvalidSignal"])
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "kind", SignalKind(self.kind))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.fs

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.fs


@dataclass(frozen=True)
class FilterSpec:
    """
    Butterworth band-pass applied forward and backward.

    Parameters:
    :param low_cut: lower band edge in Hz
    :type low_cut: float
    :param high_cut: upper band edge in Hz, below the Nyquist frequency of the signal
    :type high_cut: float
    :param order: prototype order of each pass
    :type order: int
    """

    low_cut: float = 0.1
    high_cut: float = 0.5
    order: int = 2

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or self.order < 1:
            raise FilterDesignError(exception_messages["InvalidOrder"](self.order))
        if not (0 < self.low_cut < self.high_cut):
            raise FilterDesignError(exception_messages["InvalidBand"](self.low_cut, self.high_cut, "any"))

    @property
    def state_length(self) -> int:
        return 2 * self.order

    @property
    def pad_length(self) -> int:
        return 3 * (self.state_length + 1)

    @property
    def min_length(self) -> int:
        return 6 * self.state_length + 1

    def check_rate(self, fs: float):
        if not (0 < self.low_cut < self.high_cut < fs / 2.0):
            raise FilterDesignError(exception_messages["InvalidBand"](self.low_cut, self.high_cut, fs))

    def to_dict(self):
        return {"low_cut": float(self.low_cut), "high_cut": float(self.high_cut), "order": int(self.order)}


def extract_raw(tracks) -> BreathSignal:
    """
    Mean frame-to-frame y displacement over the points tracked at both t-1 and t.
    Sample 0 is 0 so the signal has one sample per frame; frames with no
    contributing point are 0 as well.
    """
    if tracks.n_frames < 2:
        raise InvalidInput(exception_messages["NoFramesToTrack"])
    if not tracks.status[:, 1].any():
        raise EmptySignal(exception_messages["EmptySignal"])
    y = tracks.positions[:, :, 1]
    both = tracks.status[:, 1:] & tracks.status[:, :-1]
    counts = both.sum(axis=0)
    sums = np.where(both, np.diff(y, axis=1), 0.0).sum(axis=0)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return BreathSignal(np.concatenate(([0.0], means)), tracks.fps, SignalKind.raw)


@lru_cache(maxsize=64)
def design_bandpass(spec: FilterSpec, fs: float) -> np.ndarray:
    """Second-order sections of the pre-warped bilinear Butterworth design."""
    spec.check_rate(fs)
    return signal.butter(spec.order, [spec.low_cut, spec.high_cut], btype="band", fs=fs, output="sos")


def magnitude_response(spec: FilterSpec, fs: float, freqs) -> np.ndarray:
    """Power gain |H(f)|^2 of the designed filter, i.e. the gain of a forward-backward pass."""
    _, response = signal.sosfreqz(design_bandpass(spec, float(fs)), worN=np.atleast_1d(np.asarray(freqs, dtype=float)), fs=fs)
    return np.abs(response) ** 2


def bandpass(sig: BreathSignal, spec: FilterSpec = None) -> BreathSignal:
    """
    Zero-phase band-pass with odd reflection padding of three characteristic
    lengths on both ends; the padding is discarded.
    """
    spec = spec or FilterSpec()
    if sig.kind is not SignalKind.raw:
        raise InvalidInput(exception_messages["WrongSignalKind"](SignalKind.raw.value, sig.kind.value))
    sos = design_bandpass(spec, sig.fs)
    if len(sig) < spec.min_length:
        raise SignalTooShort(exception_messages["SignalTooShort"](len(sig), spec.min_length))
    filtered = signal.sosfiltfilt(sos, sig.samples, padtype="odd", padlen=spec.pad_length)
    logger.trace(f"Band-passed {len(sig)} samples at {sig.fs} Hz into {spec.low_cut}-{spec.high_cut} Hz.")
    return BreathSignal(filtered, sig.fs, SignalKind.filtered)


def detect_peaks(sig: BreathSignal):
    """
    Local maxima (plateaus resolved to their leftmost sample) with prominence of
    at least 0.3 standard deviations, thinned so that no two kept peaks are
    closer than 2 s. Higher peaks win a conflict, ties go to the earlier one.
    """
    if sig.kind is not SignalKind.filtered:
        raise InvalidInput(exception_messages["WrongSignalKind"](SignalKind.filtered.value, sig.kind.value))
    x = sig.samples
    spread = float(np.std(x))
    if spread == 0.0:
        return []
    _, properties = signal.find_peaks(x, prominence=PROMINENCE_FACTOR * spread, plateau_size=1)
    candidates = properties["left_edges"]
    if candidates.size == 0:
        return []

    distance = max(1, int(round(MIN_PEAK_SEPARATION_S * sig.fs)))
    order = np.lexsort((candidates, -x[candidates]))
    kept = []
    for index in candidates[order]:
        if all(abs(int(index) - other) >= distance for other in kept):
            kept.append(int(index))
    return sorted(kept)


def breathing_rate(n_peaks: int, duration_s: float) -> float:
    """Breaths per minute: peaks counted over the clip duration, times 60."""
    if not (math.isfinite(duration_s) and duration_s > 0):
        raise InvalidInput(exception_messages["InvalidDuration"](duration_s))
    if n_peaks < 0:
        raise InvalidInput(f"peak count must be non-negative, got {n_peaks}")
    if n_peaks == 0:
        logger.warning("No breathing peaks detected, reporting 0 bpm.")
    return n_peaks / duration_s * 60.0


def band_snr_db(raw: BreathSignal, filtered: BreathSignal) -> Optional[float]:
    """In-band power of the filtered signal against the out-of-band residual of the raw one."""
    residual = raw.samples - filtered.samples
    in_band = float(np.mean(filtered.samples**2))
    out_band = float(np.mean(residual**2))
    if in_band == 0.0 or out_band == 0.0:
        return None
    return 10.0 * math.log10(in_band / out_band)


@dataclass(frozen=True, eq=False)
class EstimateReport:
    bpm: float
    peak_indices: Tuple[int, ...]
    n_points_used: int
    n_points_lost: int
    duration_s: float
    kind: str
    flags: Tuple[str, ...] = ()
    snr_db: Optional[float] = None
    flow_config: dict = field(default_factory=dict)
    filter_spec: dict = field(default_factory=dict)
    raw: Optional[BreathSignal] = None
    filtered: Optional[BreathSignal] = None
    tracks: object = None

    @property
    def n_peaks(self) -> int:
        return len(self.peak_indices)

    def to_dict(self):
        return {
            "bpm": self.bpm,
            "n_peaks": self.n_peaks,
            "duration_s": self.duration_s,
            "kind": self.kind,
            "flags": list(self.flags),
            "points_used": self.n_points_used,
            "points_lost": self.n_points_lost,
            "peak_indices": [int(i) for i in self.peak_indices],
            "snr_db": self.snr_db,
            "flow_config": self.flow_config,
            "filter_spec": self.filter_spec,
        }

    def to_json(self, indent=2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def write_signal_csv(path, raw: BreathSignal, filtered: BreathSignal, peaks):
    """Dumps both signals side by side, followed by fs and peak trailer comments."""
    table = pd.DataFrame(
        {
            "sample_index": np.arange(len(raw)),
            "time_s": raw.times,
            "raw": raw.samples,
            "filtered": filtered.samples,
        }
    )
    with open(path, "w", encoding="utf-8", newline="") as handle:
        table.to_csv(handle, index=False, float_format="%.10g")
        handle.write(f"# fs: {raw.fs!r}\n")
        handle.write("# peaks: " + " ".join(str(int(i)) for i in peaks) + "\n")


def read_signal_csv(path):
    """
    Reads a signal dump back.

    Returns:
    :return: (raw, filtered, peaks)
    """
    table = pd.read_csv(path, comment="#")
    fs, peaks = None, []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.startswith("# fs:"):
                fs = float(line.split(":", 1)[1])
            elif line.startswith("# peaks:"):
                peaks = [int(token) for token in line.split(":", 1)[1].split()]
    if fs is None:
        times = table["time_s"].to_numpy()
        fs = (len(times) - 1) / (times[-1] - times[0])
    raw = BreathSignal(table["raw"].to_numpy(), fs, SignalKind.raw)
    filtered = BreathSignal(table["filtered"].to_numpy(), fs, SignalKind.filtered)
    return raw, filtered, peaks
