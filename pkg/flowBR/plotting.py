import logging

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

logger = logging.getLogger(__name__)


def plot_signal(path, raw, filtered, peaks, truth=None, title=None):
    """
    Draws the raw and filtered breathing signals with the detected peaks.

    Parameters:
    :param path: output file, the format follows the suffix (SVG by default in the CLI)
    :param raw: raw BreathSignal
    :param filtered: filtered BreathSignal
    :param peaks: peak sample indices
    :param truth: optional per-frame chest rise in pixels, drawn on a second axis
    :param title: optional figure title
    """
    times = raw.times
    peaks = np.asarray(peaks, dtype=int)
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.plot(times, raw.samples, color="0.7", linewidth=0.8, label="raw")
    ax.plot(times, filtered.samples, color="tab:blue", linewidth=1.5, label="filtered")
    if peaks.size:
        ax.plot(times[peaks], filtered.samples[peaks], "x", color="tab:red", label=f"peaks ({peaks.size})")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("vertical displacement per frame (px)")
    handles, labels = ax.get_legend_handles_labels()
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        twin = ax.twinx()
        twin.plot(np.arange(truth.size) / raw.fs, truth, color="tab:green", linestyle="--", linewidth=1.0, label="truth")
        twin.set_ylabel("chest rise (px)")
        more_handles, more_labels = twin.get_legend_handles_labels()
        handles, labels = handles + more_handles, labels + more_labels
    ax.legend(handles, labels, loc="upper right")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.debug(f"Wrote signal plot to {path}.")


def plot_suite(path, rmse_by_kind, title="RMSE per point configuration"):
    kinds = list(rmse_by_kind)
    values = [rmse_by_kind[k] if rmse_by_kind[k] is not None else np.nan for k in kinds]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(kinds, values, color="tab:blue")
    ax.set_ylabel("RMSE (bpm)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.debug(f"Wrote suite plot to {path}.")
