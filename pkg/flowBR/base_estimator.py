import datetime
import logging
from abc import abstractmethod

from flowBR.breath_signal import (
    ALL_ZERO,
    NO_BREATHING,
    POINTS_LOST,
    PYRAMID_REDUCED,
    EstimateReport,
    FilterSpec,
    band_snr_db,
    bandpass,
    breathing_rate,
    detect_peaks,
    extract_raw,
)
from flowBR.exceptions import FlowBRError, InvalidInput, PipelineError
from flowBR.helpers import get_elapsed_time
from flowBR.logger import configure_logger, close_logger
from flowBR.optical_flow import FlowConfig, track_sequence
from flowBR.plotting import plot_signal

pipeline_stages = ("select", "track", "extract", "filter", "peaks", "rate")


class BreathRateEstimator:
    def __init__(
        self,
        flow_config: FlowConfig = None,
        filter_spec: FilterSpec = None,
        rows: int = 5,
        apex_scale: float = 1.0,
        verbose: bool = False,
        show_stats: bool = False,
        plot_results: bool = False,
        plot_file: str = "breathing.svg",
        to_stderr: bool = False,
        to_file: bool = False,
        logger_file: str = "flowbr.log",
        logger_level: str = "INFO",
        kind: str = "base",
    ):
        """Base estimator class for breathing rate from sparse optical flow.
        Has the whole pipeline (track, extract, filter, peaks, rate) that any
        point configuration shares. The points to track must be chosen in a
        child class.

        Parameters:
        :param flow_config: Lucas-Kanade tracker parameters
        :type flow_config: FlowConfig
        :param filter_spec: band-pass parameters
        :type filter_spec: FilterSpec
        :param rows: number of rows of the chest grid
        :type rows: int
        :param apex_scale: depth of the chest grid apex in shoulder widths
        :type apex_scale: float
        :param verbose: whether to log each pipeline stage
        :type verbose: bool
        :param show_stats: whether to log a summary at the end
        :type show_stats: bool
        :param plot_results: whether to plot the signals at the end
        :type plot_results: bool
        :param plot_file: where the plot is written if plot_results is True
        :type plot_file: string
        :param to_stderr: whether to write log output to stderr
        :type to_stderr: bool
        :param to_file: whether to write log output to file
        :type to_file: bool
        :param logger_file: name of the file where output will be written if to_file is True
        :type logger_file: string
        :param logger_level: level of the configured logger
        :type logger_level: string
        :param kind: point configuration flag passed from the child class
        :type kind: string
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
        self.check_input_base(flow_config, filter_spec, rows, apex_scale)
        self.rows = rows
        self.apex_scale = apex_scale
        self.verbose = verbose
        self.show_stats = show_stats
        self.plot_results = plot_results
        self.plot_file = plot_file
        self.kind = kind
        self.report_ = None
        self.runtime_ = 0.0

    def check_input_base(self, flow_config, filter_spec, rows, apex_scale):
        """
        Checks the configuration objects handed to the estimator.
        """
        if flow_config is None:
            flow_config = FlowConfig()
        elif not isinstance(flow_config, FlowConfig):
            raise InvalidInput(f"flow_config must be a FlowConfig, got {type(flow_config).__name__}")
        if filter_spec is None:
            filter_spec = FilterSpec()
        elif not isinstance(filter_spec, FilterSpec):
            raise InvalidInput(f"filter_spec must be a FilterSpec, got {type(filter_spec).__name__}")
        if not isinstance(rows, int) or rows < 2:
            raise InvalidInput(f"rows must be an integer of at least 2, got {rows}")
        if not apex_scale > 0:
            raise InvalidInput(f"apex_scale must be positive, got {apex_scale}")
        self.flow_config = flow_config
        self.filter_spec = filter_spec

    @staticmethod
    def run_stage(stage, func, *args, **kwargs):
        try:
            return func(*args, **kwargs)
        except PipelineError:
            raise
        except FlowBRError as error:
            raise PipelineError(stage, error) from error

    @abstractmethod
    def select_points(self, keypoints, bounds):
        """
        Returns the initial (x, y) points for this configuration. To be implemented in each child class.
        """
        pass

    def track(self, seq, points):
        return track_sequence(seq, points, self.flow_config)

    def estimate(self, seq, keypoints) -> EstimateReport:
        """
        Runs select -> track -> extract -> filter -> peaks -> rate on one video.
        Errors are re-raised as PipelineError tagged with the failing stage.

        Parameters:
        :param seq: the video
        :type seq: FrameSequence
        :param keypoints: frame-0 landmarks
        :type keypoints: KeypointSet
        """

        start_time = datetime.datetime.now()
        bounds = (seq.width, seq.height)

        def select():
            keypoints.check_bounds(*bounds)
            return self.select_points(keypoints, bounds)

        points = self.run_stage("select", select)
        if self.verbose:
            self.logger.info(f"Selected {len(points)} {self.kind} point(s).")
        tracks = self.run_stage("track", self.track, seq, points)
        if self.verbose:
            self.logger.info(f"Tracked {tracks.n_points} point(s), {tracks.n_lost} lost.")
        raw = self.run_stage("extract", extract_raw, tracks)
        filtered = self.run_stage("filter", bandpass, raw, self.filter_spec)
        peaks = self.run_stage("peaks", detect_peaks, filtered)
        bpm = self.run_stage("rate", breathing_rate, len(peaks), seq.duration_s)
        if self.verbose:
            self.logger.info(f"Found {len(peaks)} peak(s) over {seq.duration_s:.2f} s: {bpm:.2f} bpm.")

        flags = []
        if not peaks:
            flags.append(NO_BREATHING)
        if not raw.samples.any():
            flags.append(ALL_ZERO)
        if tracks.n_lost:
            flags.append(POINTS_LOST)
        if tracks.pyramid_reduced:
            flags.append(PYRAMID_REDUCED)

        self.report_ = EstimateReport(
            bpm=bpm,
            peak_indices=tuple(peaks),
            n_points_used=tracks.n_points,
            n_points_lost=tracks.n_lost,
            duration_s=seq.duration_s,
            kind=self.kind,
            flags=tuple(flags),
            snr_db=band_snr_db(raw, filtered),
            flow_config=self.flow_config.to_dict(),
            filter_spec=self.filter_spec.to_dict(),
            raw=raw,
            filtered=filtered,
            tracks=tracks,
        )

        if self.plot_results:
            self.plot_signal_results(raw, filtered, peaks, self.plot_file, title=f"{self.kind}: {bpm:.2f} bpm")

        end_time = datetime.datetime.now()
        self.runtime_, time_str = get_elapsed_time(start_time, end_time)

        if self.show_stats:
            self.print_stats(time_str)
        return self.report_

    @staticmethod
    def plot_signal_results(raw, filtered, peaks, plot_file, title=None):
        """
        Plots the raw and filtered signal with peak markers using matplotlib.

        Parameters:
        :param raw: raw breathing signal
        :param filtered: band-passed breathing signal
        :param peaks: detected peak indices
        :param plot_file: output path
        """
        plot_signal(plot_file, raw, filtered, peaks, title=title)

    def print_stats(self, time_str):
        """
        Prints the statistics of the last estimate.
        """

        report = self.report_
        self.logger.info("\n#############################")
        self.logger.info("#           STATS           #")
        self.logger.info("#############################\n\n")
        self.logger.info(f"Total running time: {time_str}\n")
        self.logger.info(f"Point configuration: {self.kind}")
        self.logger.info(f"Window: {self.flow_config.window_size} px, pyramid levels: {self.flow_config.pyramid_levels}")
        self.logger.info(f"Band: {self.filter_spec.low_cut}-{self.filter_spec.high_cut} Hz")
        self.logger.info(f"Points used / lost: {report.n_points_used} / {report.n_points_lost}")
        self.logger.info(f"Peaks: {report.n_peaks} over {report.duration_s:.2f} s")
        self.logger.info(f"Breathing rate: {report.bpm:.2f} bpm")
        if report.flags:
            self.logger.info(f"Flags: {', '.join(report.flags)}")

    def close_estimator_logger(self):
        """
        Closes the logger of this estimator. This avoid multiple loggers stacking when another estimator is created.
        """
        close_logger(self.logger)
