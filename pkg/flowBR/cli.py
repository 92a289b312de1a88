"""
Command-line entry point: ``flowbr synth|track|estimate|eval|plot``.

Machine-readable results go to stdout or files, diagnostics to stderr.
Exit codes: 0 success, 1 stage or IO error, 2 usage or validation error,
3 suite finished with failed cases.
"""

import argparse
import logging
import sys
from pathlib import Path

from flowBR.base_estimator import BreathRateEstimator
from flowBR.breath_signal import FilterSpec, read_signal_csv, write_signal_csv
from flowBR.evaluate import SuiteRunner, load_manifest
from flowBR.exceptions import FlowBRError, ManifestError, PipelineError
from flowBR.helpers import window_to_half_width
from flowBR.logger import configure_logger, close_logger
from flowBR.optical_flow import FlowConfig
from flowBR.plotting import plot_signal
from flowBR.point_estimators import estimator_for_kind
from flowBR.roi_points import PointConfigKind, parse_keypoints
from flowBR.synthgen import (
    SceneSpec,
    TextureSpec,
    allowed_textures,
    load_truth,
    render_breathing_video,
    write_scene,
)
from flowBR.video_io import load_video

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3


class UsageError(Exception):
    pass


def _positive(kind):
    def parse(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return parse


def _add_pipeline_flags(parser):
    parser.add_argument("--video", required=True, help="Y4M file or directory of PGM/PNG frames")
    parser.add_argument("--keypoints", required=True, help="JSON landmark file for frame 0")
    parser.add_argument("--kind", default=PointConfigKind.chest_grid.value, choices=[k.value for k in PointConfigKind])
    parser.add_argument("--window", type=_positive(int), default=20, help="full window size in pixels (20 or 40)")
    parser.add_argument("--levels", type=_positive(int), default=3, help="pyramid levels")
    parser.add_argument("--rows", type=int, default=5, help="chest grid rows")
    parser.add_argument("--fps", type=_positive(float), default=None, help="override the source frame rate")
    parser.add_argument("--glob", default="*", help="frame filename pattern for directories")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowbr", description="Breathing rate from sparse optical flow.")
    parser.add_argument("--log-level", default="INFO", help="TRACE, DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-file", default=None, help="also write the log to this file")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="render a synthetic breathing video")
    synth.add_argument("--bpm", type=float, default=18.0)
    synth.add_argument("--duration", type=_positive(float), default=30.0)
    synth.add_argument("--fps", type=_positive(float), default=30.0)
    synth.add_argument("--amp", type=float, default=2.0, help="breathing amplitude in pixels")
    synth.add_argument("--width", type=_positive(int), default=160)
    synth.add_argument("--height", type=_positive(int), default=224)
    synth.add_argument("--texture", default="checker", choices=allowed_textures)
    synth.add_argument("--period", type=_positive(float), default=32.0)
    synth.add_argument("--contrast", type=float, default=0.8)
    synth.add_argument("--head-noise", type=float, default=0.0, help="head jitter amplitude in pixels")
    synth.add_argument("--no-face", action="store_true", help="render the chest region only")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--format", default="pgm,y4m", help="comma separated subset of pgm, png, y4m")
    synth.add_argument("--out", required=True)

    track = sub.add_parser("track", help="track the points of one configuration")
    _add_pipeline_flags(track)
    track.add_argument("--out", default=None, help="CSV path, stdout when omitted")

    estimate = sub.add_parser("estimate", help="estimate the breathing rate of one video")
    _add_pipeline_flags(estimate)
    estimate.add_argument("--low", type=float, default=0.1, help="lower band edge in Hz")
    estimate.add_argument("--high", type=float, default=0.5, help="upper band edge in Hz")
    estimate.add_argument("--dump-signal", default=None, help="write the raw/filtered signal CSV here")
    estimate.add_argument("--plot", default=None, help="write an SVG of the signals here")
    estimate.add_argument("--report", default=None, help="also write the JSON report here")

    evaluate = sub.add_parser("eval", help="run a manifest of cases and score them")
    evaluate.add_argument("manifest")
    evaluate.add_argument("--out", default=".", help="directory for report.json and report.csv")
    evaluate.add_argument("--jobs", type=_positive(int), default=1)
    evaluate.add_argument("--timeout", type=int, default=0, help="per-case time limit in seconds")
    evaluate.add_argument("--plot", default=None, help="write an SVG of the RMSE per kind here")

    plot = sub.add_parser("plot", help="render a signal dump as SVG")
    plot.add_argument("--signal", required=True)
    plot.add_argument("--truth", default=None, help="truth CSV written by synth")
    plot.add_argument("--out", required=True)
    return parser


def _flow_config(args) -> FlowConfig:
    return FlowConfig(window_half_width=window_to_half_width(args.window), pyramid_levels=args.levels)


def cmd_synth(args) -> int:
    if not args.bpm > 0:
        raise UsageError(f"--bpm must be positive, got {args.bpm}")
    formats = tuple(fmt.strip() for fmt in args.format.split(",") if fmt.strip())
    if not formats or any(fmt not in ("pgm", "png", "y4m") for fmt in formats):
        raise UsageError(f"--format must list pgm, png or y4m, got {args.format}")
    try:
        spec = SceneSpec(
            width=args.width,
            height=args.height,
            fps=args.fps,
            duration=args.duration,
            breathing_freq=args.bpm / 60.0,
            breathing_amp=args.amp,
            chest_texture=TextureSpec(args.texture, args.period, args.contrast, seed=args.seed),
            chest_region=_scaled_region((16, 84, 144, 196), args.width, args.height),
            face_region=None if args.no_face else _scaled_region((50, 16, 110, 76), args.width, args.height),
            head_noise_amp=args.head_noise,
            seed=args.seed,
        )
    except FlowBRError as error:
        raise UsageError(str(error))
    seq, truth, keypoints = render_breathing_video(spec)
    write_scene(args.out, seq, truth, keypoints, formats)
    print(f"{args.out}: {truth.bpm:.2f} bpm, {seq.n_frames} frames {seq.width}x{seq.height} at {seq.fps:g} fps")
    return EXIT_OK


def _scaled_region(region, width, height):
    """Maps a region laid out for a 160x224 frame onto another frame size."""
    sx, sy = width / 160.0, height / 224.0
    x0, y0, x1, y1 = region
    return (int(round(x0 * sx)), int(round(y0 * sy)), int(round(x1 * sx)), int(round(y1 * sy)))


def _load_inputs(args):
    seq = load_video(args.video, fps=args.fps, glob=args.glob)
    keypoints = parse_keypoints(args.keypoints)
    return seq, keypoints


def cmd_track(args) -> int:
    try:
        estimator = estimator_for_kind(args.kind, rows=args.rows, flow_config=_flow_config(args))
    except FlowBRError as error:
        raise UsageError(str(error))
    seq, keypoints = _load_inputs(args)
    bounds = (seq.width, seq.height)

    def select():
        keypoints.check_bounds(*bounds)
        return estimator.select_points(keypoints, bounds)

    points = BreathRateEstimator.run_stage("select", select)
    tracks = BreathRateEstimator.run_stage("track", estimator.track, seq, points)
    if args.out:
        tracks.to_csv(args.out)
    else:
        sys.stdout.write(tracks.to_csv())
    logger.info(f"Tracked {tracks.n_points} point(s) over {tracks.n_frames} frames, {tracks.n_lost} lost.")
    return EXIT_OK


def cmd_estimate(args) -> int:
    try:
        estimator = estimator_for_kind(
            args.kind,
            rows=args.rows,
            flow_config=_flow_config(args),
            filter_spec=FilterSpec(low_cut=args.low, high_cut=args.high),
            verbose=True,
        )
    except FlowBRError as error:
        raise UsageError(str(error))
    seq, keypoints = _load_inputs(args)
    report = estimator.estimate(seq, keypoints)
    if args.dump_signal:
        write_signal_csv(args.dump_signal, report.raw, report.filtered, report.peak_indices)
    if args.plot:
        plot_signal(args.plot, report.raw, report.filtered, report.peak_indices, title=f"{report.kind}: {report.bpm:.2f} bpm")
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.timeout < 0:
        raise UsageError(f"--timeout must be non-negative, got {args.timeout}")
    manifest = load_manifest(args.manifest)
    runner = SuiteRunner(
        jobs=args.jobs,
        case_timeout=args.timeout,
        plot_results=bool(args.plot),
        plot_file=args.plot or "suite.svg",
    )
    report = runner.run(manifest)
    report.write(args.out)
    print(report.to_table())
    return EXIT_PARTIAL if report.has_failures else EXIT_OK


def cmd_plot(args) -> int:
    raw, filtered, peaks = read_signal_csv(args.signal)
    truth = load_truth(args.truth).chest_dy if args.truth else None
    plot_signal(args.out, raw, filtered, peaks, truth=truth)
    return EXIT_OK


commands = {
    "synth": cmd_synth,
    "track": cmd_track,
    "estimate": cmd_estimate,
    "eval": cmd_eval,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    root = configure_logger(
        logger_file=args.log_file or "",
        logger_level="WARNING" if args.quiet else args.log_level,
        to_stderr=True,
        to_file=bool(args.log_file),
    )
    try:
        return commands[args.command](args)
    except UsageError as error:
        logger.error(str(error))
        return EXIT_USAGE
    except PipelineError as error:
        logger.error(f"stage {error.stage} failed: {error.cause}")
        return EXIT_ERROR
    except FlowBRError as error:
        logger.error(f"{repr(error)}: {error}")
        return EXIT_USAGE if isinstance(error, ManifestError) else EXIT_ERROR
    except OSError as error:
        logger.error(str(error))
        return EXIT_ERROR
    finally:
        close_logger(root)


if __name__ == "__main__":
    sys.exit(main())
