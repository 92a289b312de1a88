import datetime
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from flowBR.breath_signal import FilterSpec
from flowBR.exceptions import FlowBRError, InvalidInput, ManifestError, PipelineError
from flowBR.exception_messages import exception_messages
from flowBR.helpers import get_elapsed_time, window_to_half_width
from flowBR.logger import configure_logger, close_logger
from flowBR.optical_flow import FlowConfig
from flowBR.plotting import plot_suite
from flowBR.point_estimators import estimator_for_kind
from flowBR.progress_bars import set_progress_bars
from flowBR.roi_points import PointConfigKind, parse_keypoints
from flowBR.synthgen import load_truth
from flowBR.timeout import timeout
from flowBR.video_io import load_video

logger = logging.getLogger(__name__)

all_kinds = tuple(kind.value for kind in PointConfigKind)
row_columns = [
    "case_id",
    "kind",
    "truth_bpm",
    "bpm",
    "error",
    "abs_error",
    "n_peaks",
    "points_used",
    "points_lost",
    "flags",
    "status",
    "stage",
    "message",
]


@dataclass(frozen=True)
class GroundTruth:
    entries: Dict[str, float]

    def __post_init__(self):
        for key, bpm in self.entries.items():
            if not (isinstance(bpm, (int, float)) and bpm > 0):
                raise InvalidInput(exception_messages["InvalidTruth"](key, bpm))

    def __getitem__(self, key):
        return self.entries[key]


@dataclass(frozen=True)
class SuiteCase:
    case_id: str
    video: Path
    keypoints: Path
    kinds: Tuple[str, ...]
    truth_bpm: float
    flow_config: FlowConfig = field(default_factory=FlowConfig)
    filter_spec: FilterSpec = field(default_factory=FilterSpec)
    rows: int = 5
    fps: Optional[float] = None
    glob: str = "*"


@dataclass(frozen=True)
class SuiteManifest:
    cases: Tuple[SuiteCase, ...]
    path: Optional[Path] = None

    def __post_init__(self):
        if len(self.cases) == 0:
            raise ManifestError(exception_messages["EmptyManifest"])
        for index, case in enumerate(self.cases):
            if Path(case.video).resolve() == Path(case.keypoints).resolve():
                raise ManifestError(exception_messages["ManifestSamePath"](index))

    @property
    def ground_truth(self) -> GroundTruth:
        return GroundTruth({case.case_id: case.truth_bpm for case in self.cases})


def _case_from_entry(index: int, entry: dict, base: Path) -> SuiteCase:
    for name in ("video", "keypoints"):
        if name not in entry:
            raise ManifestError(exception_messages["ManifestField"](index, name))
    video = base / entry["video"]
    keypoints = base / entry["keypoints"]
    if "truth_bpm" in entry:
        truth_bpm = entry["truth_bpm"]
    elif "truth" in entry:
        try:
            truth_bpm = load_truth(base / entry["truth"]).bpm
        except (FlowBRError, OSError) as error:
            raise ManifestError(f"case {index}: {error}")
    else:
        raise ManifestError(exception_messages["ManifestField"](index, "truth_bpm"))
    case_id = str(entry.get("id") or Path(entry["video"]).with_suffix("").as_posix())
    if not (isinstance(truth_bpm, (int, float)) and truth_bpm > 0):
        raise ManifestError(exception_messages["InvalidTruth"](case_id, truth_bpm))

    kinds = entry.get("kinds", all_kinds)
    if isinstance(kinds, str):
        kinds = [kinds]
    try:
        kinds = tuple(PointConfigKind.parse(kind).value for kind in kinds)
        flow_config = FlowConfig(
            window_half_width=window_to_half_width(entry.get("window", 20)),
            pyramid_levels=int(entry.get("pyramid_levels", 3)),
        )
        filter_spec = FilterSpec(
            low_cut=float(entry.get("low_cut", 0.1)),
            high_cut=float(entry.get("high_cut", 0.5)),
        )
        rows = entry.get("rows", 5)
        if not isinstance(rows, int) or rows < 2:
            raise InvalidInput(exception_messages["TooFewRows"](rows))
    except FlowBRError as error:
        raise ManifestError(f"case {index}: {error}")
    return SuiteCase(
        case_id=case_id,
        video=video,
        keypoints=keypoints,
        kinds=kinds,
        truth_bpm=float(truth_bpm),
        flow_config=flow_config,
        filter_spec=filter_spec,
        rows=rows,
        fps=entry.get("fps"),
        glob=entry.get("glob", "*"),
    )


def load_manifest(path) -> SuiteManifest:
    """
    Reads a JSON manifest: an optional "defaults" object merged under every
    entry of the "cases" list. Paths are relative to the manifest's directory.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise ManifestError(exception_messages["ManifestSyntax"](path, f"line {error.lineno}: {error.msg}"))
    if not isinstance(document, dict) or not isinstance(document.get("cases", []), list):
        raise ManifestError(exception_messages["ManifestSyntax"](path, "expected an object with a 'cases' list"))
    defaults = document.get("defaults", {})
    entries = document.get("cases", [])
    if not entries:
        raise ManifestError(exception_messages["EmptyManifest"])
    cases = tuple(
        _case_from_entry(index, {**defaults, **entry}, path.parent) for index, entry in enumerate(entries)
    )
    logger.debug(f"Loaded {len(cases)} case(s) from {path}.")
    return SuiteManifest(cases, path)


def rmse(estimates, truths) -> float:
    """Root mean square error between paired estimates and references."""
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.shape != truths.shape:
        raise InvalidInput(exception_messages["LengthMismatch"](estimates.size, truths.size))
    if estimates.size == 0:
        raise InvalidInput(exception_messages["EmptyScores"])
    return float(np.sqrt(np.mean((estimates - truths) ** 2)))


def _failed_row(case: SuiteCase, kind: str, stage: str, error) -> dict:
    return {
        "case_id": case.case_id,
        "kind": kind,
        "truth_bpm": case.truth_bpm,
        "bpm": None,
        "error": None,
        "abs_error": None,
        "n_peaks": None,
        "points_used": None,
        "points_lost": None,
        "flags": "",
        "status": "failed",
        "stage": stage,
        "message": str(error),
    }


def _run_case(case: SuiteCase, case_timeout: int = 0) -> List[dict]:
    """Runs every kind of one case. Never raises for case-level errors."""
    rows = []
    try:
        with timeout(case_timeout, f"case {case.case_id} exceeded {case_timeout} s"):
            seq = load_video(case.video, fps=case.fps, glob=case.glob)
            keypoints = parse_keypoints(case.keypoints)
    except (FlowBRError, OSError, TimeoutError) as error:
        stage = "timeout" if isinstance(error, TimeoutError) else "load"
        return [_failed_row(case, kind, stage, error) for kind in case.kinds]
    except Exception as error:
        logger.error(f"Unexpected error loading case {case.case_id}: {error!r}")
        return [_failed_row(case, kind, "internal", error) for kind in case.kinds]

    for kind in case.kinds:
        start = datetime.datetime.now()
        try:
            with timeout(case_timeout, f"case {case.case_id} ({kind}) exceeded {case_timeout} s"):
                estimator = estimator_for_kind(
                    kind,
                    rows=case.rows,
                    flow_config=case.flow_config,
                    filter_spec=case.filter_spec,
                )
                report = estimator.estimate(seq, keypoints)
        except PipelineError as error:
            rows.append(_failed_row(case, kind, error.stage, error.cause))
            continue
        except TimeoutError as error:
            rows.append(_failed_row(case, kind, "timeout", error))
            continue
        except Exception as error:
            logger.error(f"Unexpected error in case {case.case_id} ({kind}): {error!r}")
            rows.append(_failed_row(case, kind, "internal", error))
            continue
        _, time_str = get_elapsed_time(start, datetime.datetime.now())
        logger.debug(f"Case {case.case_id} ({kind}) took {time_str}.")
        difference = report.bpm - case.truth_bpm
        rows.append(
            {
                "case_id": case.case_id,
                "kind": kind,
                "truth_bpm": case.truth_bpm,
                "bpm": report.bpm,
                "error": difference,
                "abs_error": abs(difference),
                "n_peaks": report.n_peaks,
                "points_used": report.n_points_used,
                "points_lost": report.n_points_lost,
                "flags": " ".join(report.flags),
                "status": "ok",
                "stage": "",
                "message": "",
            }
        )
    return rows


def _rmse_by_kind(rows: List[dict], kinds) -> Dict[str, Optional[float]]:
    result = {}
    for kind in kinds:
        scored = [row for row in rows if row["kind"] == kind and row["status"] == "ok"]
        result[kind] = rmse([r["bpm"] for r in scored], [r["truth_bpm"] for r in scored]) if scored else None
    return result


@dataclass
class SuiteReport:
    """
    Per-(case, kind) rows, failures listed separately, and RMSE per point
    configuration over the rows that produced an estimate.
    """

    rows: List[dict]
    rmse_by_kind: Dict[str, Optional[float]]
    manifest_path: Optional[str] = None

    @classmethod
    def from_rows(cls, rows, manifest_path=None):
        kinds = [kind for kind in all_kinds if any(row["kind"] == kind for row in rows)]
        return cls(rows, _rmse_by_kind(rows, kinds), manifest_path)

    @property
    def failures(self) -> List[dict]:
        return [row for row in self.rows if row["status"] != "ok"]

    @property
    def has_failures(self) -> bool:
        return bool(self.failures)

    def recomputed_rmse(self) -> Dict[str, Optional[float]]:
        return _rmse_by_kind(self.rows, list(self.rmse_by_kind))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=row_columns)

    def summary_frame(self) -> pd.DataFrame:
        table = self.to_frame()
        summary = []
        for kind, value in self.rmse_by_kind.items():
            subset = table[table["kind"] == kind]
            summary.append(
                {
                    "kind": kind,
                    "rmse_bpm": value,
                    "scored": int((subset["status"] == "ok").sum()),
                    "failed": int((subset["status"] != "ok").sum()),
                }
            )
        return pd.DataFrame(summary, columns=["kind", "rmse_bpm", "scored", "failed"])

    def to_table(self) -> str:
        cases = self.to_frame()[["case_id", "kind", "truth_bpm", "bpm", "abs_error", "status", "stage"]]
        return (
            cases.to_string(index=False, na_rep="-", float_format=lambda v: f"{v:.2f}")
            + "\n\n"
            + self.summary_frame().to_string(index=False, na_rep="-", float_format=lambda v: f"{v:.4f}")
        )

    def to_dict(self):
        return {
            "manifest": self.manifest_path,
            "rmse_by_kind": self.rmse_by_kind,
            "n_rows": len(self.rows),
            "failures": self.failures,
            "cases": self.rows,
        }

    def write(self, out_dir):
        """Writes report.json and report.csv into out_dir."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.json", "w", encoding="utf-8") as handle:
            json.dump(self.to_dict(), handle, indent=2)
            handle.write("\n")
        self.to_frame().to_csv(out / "report.csv", index=False)
        return out / "report.json", out / "report.csv"


class SuiteRunner:
    def __init__(
        self,
        jobs: int = 1,
        case_timeout: int = 0,
        progress_bars: bool = False,
        show_stats: bool = False,
        plot_results: bool = False,
        plot_file: str = "suite.svg",
        to_stderr: bool = False,
        to_file: bool = False,
        logger_file: str = "flowbr.log",
        logger_level: str = "INFO",
    ):
        """Runs every (case, kind) of a manifest and aggregates the scores.

        Parameters:
        :param jobs: number of worker processes, cases being the unit of work
        :type jobs: int
        :param case_timeout: wall-time limit per case in seconds, 0 disables it
        :type case_timeout: int
        :param progress_bars: whether to monkeypatch progress bars for monitoring the run
        :type progress_bars: bool
        :param show_stats: whether to print stats at the end
        :type show_stats: bool
        :param plot_results: whether to plot the per-kind RMSE at the end
        :type plot_results: bool
        :param plot_file: where the plot is written if plot_results is True
        :type plot_file: string
        :param to_stderr: whether to write log output to stderr
        :type to_stderr: bool
        :param to_file: whether to write log output to file
        :type to_file: bool
        :param logger_file: name of the file where output will be written if to_file is True
        :type logger_file: string
        """
        if to_stderr or to_file:
            self.logger = configure_logger(
                logger_file=logger_file,
                logger_level=logger_level,
                to_stderr=to_stderr,
                to_file=to_file,
            )
        else:
            self.logger = logging.getLogger(__name__)
        if not isinstance(jobs, int) or jobs < 1:
            raise InvalidInput(f"jobs must be a positive integer, got {jobs}")
        if case_timeout < 0:
            raise InvalidInput(f"case_timeout must be non-negative, got {case_timeout}")
        self.jobs = jobs
        self.case_timeout = case_timeout
        self.show_stats = show_stats
        self.plot_results = plot_results
        self.plot_file = plot_file
        self.report_ = None
        self.runtime_ = 0.0

        if progress_bars:
            self.logger.info("Setting up progress bars through monkeypatching.")
            set_progress_bars(self)

    def execute_cases(self, manifest: SuiteManifest, on_case_done=None) -> List[dict]:
        """Runs the cases, in worker processes if jobs > 1, and returns rows in manifest order."""
        rows = []
        if self.jobs == 1:
            for case in manifest.cases:
                rows.extend(_run_case(case, self.case_timeout))
                if on_case_done:
                    on_case_done()
            return rows
        with ProcessPoolExecutor(max_workers=self.jobs) as pool:
            futures = [pool.submit(_run_case, case, self.case_timeout) for case in manifest.cases]
            for case, future in zip(manifest.cases, futures):
                try:
                    rows.extend(future.result())
                except Exception as error:
                    self.logger.error(f"Worker for case {case.case_id} died: {error}")
                    rows.extend(_failed_row(case, kind, "worker", error) for kind in case.kinds)
                if on_case_done:
                    on_case_done()
        return rows

    def run(self, manifest: SuiteManifest) -> SuiteReport:
        """
        Executes every (case, kind); case failures are recorded, never raised.
        """
        start_time = datetime.datetime.now()
        rows = self.execute_cases(manifest)
        return self.finish(manifest, rows, start_time)

    def finish(self, manifest, rows, start_time) -> SuiteReport:
        self.report_ = SuiteReport.from_rows(rows, str(manifest.path) if manifest.path else None)
        for row in self.report_.failures:
            self.logger.warning(f"Case {row['case_id']} ({row['kind']}) failed in stage {row['stage']}: {row['message']}")

        if self.plot_results:
            plot_suite(self.plot_file, self.report_.rmse_by_kind)

        end_time = datetime.datetime.now()
        self.runtime_, time_str = get_elapsed_time(start_time, end_time)

        if self.show_stats:
            self.print_stats(time_str)
        return self.report_

    def print_stats(self, time_str):
        """
        Prints the statistics of the suite run.
        """

        self.logger.info("\n#############################")
        self.logger.info("#           STATS           #")
        self.logger.info("#############################\n\n")
        self.logger.info(f"Total running time: {time_str}\n")
        self.logger.info(f"Rows: {len(self.report_.rows)}, failures: {len(self.report_.failures)}")
        for kind, value in self.report_.rmse_by_kind.items():
            shown = "-" if value is None else f"{value:.4f}"
            self.logger.info(f"RMSE {kind}: {shown} bpm")

    def close_runner_logger(self):
        """
        Closes the logger of this runner. This avoid multiple loggers stacking when another runner is created.
        """
        close_logger(self.logger)


def run_suite(manifest: SuiteManifest, **options) -> SuiteReport:
    return SuiteRunner(**options).run(manifest)
