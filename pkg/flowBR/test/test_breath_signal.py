#!/usr/bin/env python3

import logging
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

from flowBR.breath_signal import (
    BreathSignal,
    FilterSpec,
    SignalKind,
    band_snr_db,
    bandpass,
    breathing_rate,
    detect_peaks,
    extract_raw,
    magnitude_response,
    read_signal_csv,
    write_signal_csv,
)
from flowBR.exceptions import EmptySignal, FilterDesignError, InvalidInput, SignalTooShort
from flowBR.optical_flow import TrackMatrix

fs = 30.0


def sine(freq, seconds, kind=SignalKind.raw, amplitude=1.0):
    t = np.arange(int(seconds * fs)) / fs
    return BreathSignal(amplitude * np.sin(2 * np.pi * freq * t), fs, kind)


def analytic_power_gain(freq, spec=FilterSpec()):
    """Squared magnitude of the pre-warped analog Butterworth band-pass."""

    def warp(f):
        return 2 * fs * np.tan(np.pi * f / fs)

    low, high, omega = warp(spec.low_cut), warp(spec.high_cut), warp(freq)
    x = (omega**2 - low * high) / (omega * (high - low))
    return 1.0 / (1.0 + x ** (2 * spec.order))


def track_matrix(ys, status=None):
    ys = np.asarray(ys, dtype=float)
    positions = np.stack((np.full_like(ys, 50.0), ys), axis=-1)
    if status is None:
        status = np.ones(ys.shape, dtype=bool)
    return TrackMatrix(positions, status, fs)


def test_extract_raw_01():
    assert np.all(extract_raw(track_matrix([[100.0] * 6])).samples == 0)
    raw = extract_raw(track_matrix([[100, 101, 103, 102]]))
    assert raw.samples.tolist() == [0.0, 1.0, 2.0, -1.0]
    assert raw.kind is SignalKind.raw
    two = extract_raw(track_matrix([[10, 11], [20, 23]]))
    assert two.samples.tolist() == [0.0, 2.0]


def test_extract_raw_02():
    status = np.array([[True, True, False, False], [True, True, True, True]])
    raw = extract_raw(track_matrix([[0, 5, 5, 5], [0, 1, 2, 3]], status))
    assert raw.samples.tolist() == [0.0, 3.0, 1.0, 1.0]
    with pytest.raises(EmptySignal):
        extract_raw(track_matrix([[0, 0, 0]], np.array([[True, False, False]])))


def test_bandpass_03():
    flat = bandpass(BreathSignal(np.ones(900), fs))
    assert np.max(np.abs(flat.samples)) < 1e-6
    assert flat.kind is SignalKind.filtered


def test_bandpass_04():
    passed = bandpass(sine(0.3, 60)).samples[450:1350]
    stopped = bandpass(sine(2.0, 60)).samples[450:1350]
    print(f"0.3 Hz amplitude {np.max(np.abs(passed)):.4f}, 2 Hz amplitude {np.max(np.abs(stopped)):.5f}")
    assert 0.9 <= np.max(np.abs(passed)) <= 1.0
    assert np.max(np.abs(stopped)) < 0.05


def test_bandpass_05():
    freqs = np.array([0.02, 0.1, 0.3, 0.5, 2.0])
    gain = magnitude_response(FilterSpec(), fs, freqs)
    assert np.allclose(gain, analytic_power_gain(freqs), atol=1e-9)
    gain_db = 20 * np.log10(gain)
    assert gain_db[2] >= -1.0
    assert gain_db[0] <= -20.0 and gain_db[4] <= -20.0


def test_bandpass_06():
    rng = np.random.default_rng(6)
    x = BreathSignal(rng.standard_normal(600), fs)
    reference = bandpass(x).samples
    for a in (-1.0, 0.5, 10.0):
        scaled = bandpass(BreathSignal(a * x.samples, fs)).samples
        assert np.max(np.abs(scaled - a * reference)) <= 1e-9 * np.max(np.abs(a * reference))


def test_bandpass_07():
    filtered = bandpass(sine(0.25, 60))
    peaks = [p for p in detect_peaks(filtered) if 300 <= p <= 1500]
    expected = [30 + 120 * k for k in range(15) if 300 <= 30 + 120 * k <= 1500]
    assert len(peaks) == len(expected)
    for found, analytic in zip(peaks, expected):
        assert abs(found - analytic) <= 1


def test_bandpass_08():
    with pytest.raises(FilterDesignError):
        bandpass(sine(0.3, 60), FilterSpec(0.1, 20.0))
    with pytest.raises(FilterDesignError):
        FilterSpec(0.5, 0.1)
    with pytest.raises(FilterDesignError):
        FilterSpec(order=0)
    with pytest.raises(SignalTooShort):
        bandpass(BreathSignal(np.zeros(24), fs))
    assert len(bandpass(BreathSignal(np.zeros(25), fs))) == 25
    with pytest.raises(InvalidInput):
        bandpass(sine(0.3, 10, SignalKind.filtered))


def test_peaks_09():
    assert detect_peaks(BreathSignal(np.zeros(300), fs, SignalKind.filtered)) == []
    peaks = detect_peaks(sine(0.3, 30, SignalKind.filtered))
    assert len(peaks) == 9
    for k, index in enumerate(peaks):
        assert abs(index - (25 + 100 * k)) <= 1
    with pytest.raises(InvalidInput):
        detect_peaks(sine(0.3, 30))


def test_peaks_10():
    n = np.arange(300)
    twin = np.exp(-(((n - 100) / 3.0) ** 2)) + np.exp(-(((n - 130) / 3.0) ** 2))
    assert detect_peaks(BreathSignal(twin, fs, SignalKind.filtered)) == [100]
    taller = np.exp(-(((n - 100) / 3.0) ** 2)) + 2 * np.exp(-(((n - 130) / 3.0) ** 2))
    assert detect_peaks(BreathSignal(taller, fs, SignalKind.filtered)) == [130]
    spaced = twin + np.exp(-(((n - 200) / 3.0) ** 2))
    assert detect_peaks(BreathSignal(spaced, fs, SignalKind.filtered)) == [100, 200]


def test_peaks_11():
    plateau = np.zeros(120)
    plateau[40:43] = 1.0
    assert detect_peaks(BreathSignal(plateau, fs, SignalKind.filtered)) == [40]


def test_peaks_12():
    rng = np.random.default_rng(12)
    smooth = ndimage.gaussian_filter1d(rng.standard_normal(900), 8)
    reference = detect_peaks(BreathSignal(smooth, fs, SignalKind.filtered))
    assert len(reference) > 0
    assert all(b - a >= 60 for a, b in zip(reference, reference[1:]))
    for c in (0.1, 3.0, 1000.0):
        assert detect_peaks(BreathSignal(c * smooth, fs, SignalKind.filtered)) == reference


def test_rate_13(caplog):
    assert breathing_rate(9, 30.0) == 18.0
    assert breathing_rate(7, 30.0) == 14.0
    with caplog.at_level(logging.WARNING, logger="flowBR.breath_signal"):
        assert breathing_rate(0, 30.0) == 0.0
    assert "No breathing peaks" in caplog.text
    with pytest.raises(InvalidInput):
        breathing_rate(3, 0.0)


def test_signal_csv_14(tmp_path):
    raw = sine(0.3, 30)
    filtered = bandpass(raw)
    peaks = detect_peaks(filtered)
    path = tmp_path / "signal.csv"
    write_signal_csv(path, raw, filtered, peaks)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample_index,time_s,raw,filtered"
    assert lines[-1] == "# peaks: " + " ".join(str(p) for p in peaks)
    raw_back, filtered_back, peaks_back = read_signal_csv(path)
    assert peaks_back == peaks
    assert raw_back.fs == fs
    assert np.allclose(raw_back.samples, raw.samples, rtol=1e-9, atol=1e-12)
    assert np.allclose(filtered_back.samples, filtered.samples, rtol=1e-9, atol=1e-12)


def test_snr_15():
    rng = np.random.default_rng(15)
    clean = sine(0.3, 30)
    noisy = BreathSignal(clean.samples + 0.1 * rng.standard_normal(len(clean)), fs)
    assert band_snr_db(noisy, bandpass(noisy)) > 0
    zeros = BreathSignal(np.zeros(100), fs)
    assert band_snr_db(zeros, bandpass(zeros)) is None


if __name__ == "__main__":
    test_extract_raw_01()
    test_extract_raw_02()
    test_bandpass_03()
    test_bandpass_04()
    test_bandpass_05()
    test_bandpass_06()
    test_bandpass_07()
    test_bandpass_08()
    test_peaks_09()
    test_peaks_10()
    test_peaks_11()
    test_peaks_12()
    test_signal_csv_14(Path(tempfile.mkdtemp()))
    test_snr_15()
