import logging

from flowBR.base_estimator import BreathRateEstimator
from flowBR.breath_signal import EstimateReport, FilterSpec
from flowBR.optical_flow import FlowConfig
from flowBR.roi_points import PointConfigKind, select_points

logger = logging.getLogger(__name__)


class FacePointsEstimator(BreathRateEstimator):
    def __init__(
        self,
        flow_config: FlowConfig = None,
        filter_spec: FilterSpec = None,
        # Verbosity and printing options
        verbose: bool = False,
        show_stats: bool = False,
        plot_results: bool = False,
        plot_file: str = "breathing.svg",
        to_stderr: bool = False,
        to_file: bool = False,
        logger_file: str = "flowbr.log",
        logger_level: str = "INFO",
    ):
        """Tracks the midpoint between the eyes, the nose and the chin.
        Sensitive to head movement, which the chest configurations are not.
        Only the parameters specific for this child class are covered here.
        """

        BreathRateEstimator.__init__(
            self,
            flow_config=flow_config,
            filter_spec=filter_spec,
            verbose=verbose,
            show_stats=show_stats,
            plot_results=plot_results,
            plot_file=plot_file,
            to_stderr=to_stderr,
            to_file=to_file,
            logger_file=logger_file,
            logger_level=logger_level,
            kind=PointConfigKind.face_points.value,
        )

    def select_points(self, keypoints, bounds):
        return select_points(
            PointConfigKind.face_points,
            keypoints,
            bounds=bounds,
            half_width=self.flow_config.window_half_width,
        )


class ChestPointsEstimator(BreathRateEstimator):
    def __init__(
        self,
        flow_config: FlowConfig = None,
        filter_spec: FilterSpec = None,
        # Verbosity and printing options
        verbose: bool = False,
        show_stats: bool = False,
        plot_results: bool = False,
        plot_file: str = "breathing.svg",
        to_stderr: bool = False,
        to_file: bool = False,
        logger_file: str = "flowbr.log",
        logger_level: str = "INFO",
    ):
        """Tracks the left shoulder, the right shoulder and the neck."""

        BreathRateEstimator.__init__(
            self,
            flow_config=flow_config,
            filter_spec=filter_spec,
            verbose=verbose,
            show_stats=show_stats,
            plot_results=plot_results,
            plot_file=plot_file,
            to_stderr=to_stderr,
            to_file=to_file,
            logger_file=logger_file,
            logger_level=logger_level,
            kind=PointConfigKind.chest_points.value,
        )

    def select_points(self, keypoints, bounds):
        return select_points(
            PointConfigKind.chest_points,
            keypoints,
            bounds=bounds,
            half_width=self.flow_config.window_half_width,
        )


class ChestGridEstimator(BreathRateEstimator):
    def __init__(
        self,
        rows: int = 5,
        apex_scale: float = 1.0,
        # Parameters for base class
        flow_config: FlowConfig = None,
        filter_spec: FilterSpec = None,
        # Verbosity and printing options
        verbose: bool = False,
        show_stats: bool = False,
        plot_results: bool = False,
        plot_file: str = "breathing.svg",
        to_stderr: bool = False,
        to_file: bool = False,
        logger_file: str = "flowbr.log",
        logger_level: str = "INFO",
    ):
        """Tracks a triangular grid hanging below the shoulder segment.
        Only the parameters specific for this child class are covered here.

        Parameters:
        :param rows: number of grid rows, the shoulder segment being the first
        :type rows: int
        :param apex_scale: apex depth in shoulder-segment lengths
        :type apex_scale: float
        """

        BreathRateEstimator.__init__(
            self,
            flow_config=flow_config,
            filter_spec=filter_spec,
            rows=rows,
            apex_scale=apex_scale,
            verbose=verbose,
            show_stats=show_stats,
            plot_results=plot_results,
            plot_file=plot_file,
            to_stderr=to_stderr,
            to_file=to_file,
            logger_file=logger_file,
            logger_level=logger_level,
            kind=PointConfigKind.chest_grid.value,
        )

    def select_points(self, keypoints, bounds):
        return select_points(
            PointConfigKind.chest_grid,
            keypoints,
            rows=self.rows,
            bounds=bounds,
            half_width=self.flow_config.window_half_width,
            apex_scale=self.apex_scale,
        )


estimator_classes = {
    PointConfigKind.face_points: FacePointsEstimator,
    PointConfigKind.chest_points: ChestPointsEstimator,
    PointConfigKind.chest_grid: ChestGridEstimator,
}


def estimator_for_kind(kind, rows: int = 5, apex_scale: float = 1.0, **kwargs) -> BreathRateEstimator:
    kind = PointConfigKind.parse(kind)
    if kind is PointConfigKind.chest_grid:
        return ChestGridEstimator(rows=rows, apex_scale=apex_scale, **kwargs)
    return estimator_classes[kind](**kwargs)


def estimate(
    seq,
    keypoints,
    kind,
    flow_cfg: FlowConfig = None,
    filt: FilterSpec = None,
    rows: int = 5,
    apex_scale: float = 1.0,
) -> EstimateReport:
    """
    End-to-end breathing rate of one video for one point configuration.

    Parameters:
    :param seq: the video
    :type seq: FrameSequence
    :param keypoints: frame-0 landmarks
    :type keypoints: KeypointSet
    :param kind: face_points, chest_points or chest_grid
    :type kind: PointConfigKind or str
    :param flow_cfg: tracker parameters
    :type flow_cfg: FlowConfig
    :param filt: band-pass parameters
    :type filt: FilterSpec
    :param rows: chest grid rows
    :type rows: int
    """
    kind = BreathRateEstimator.run_stage("select", PointConfigKind.parse, kind)
    estimator = estimator_for_kind(kind, rows=rows, apex_scale=apex_scale, flow_config=flow_cfg, filter_spec=filt)
    return estimator.estimate(seq, keypoints)
