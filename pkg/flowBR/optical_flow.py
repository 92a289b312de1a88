import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage

from flowBR.exceptions import AllPointsLost, InvalidInput, NumericError
from flowBR.exception_messages import exception_messages
from flowBR.helpers import as_points
from flowBR.video_io import Frame, FrameSequence

logger = logging.getLogger(__name__)

TRACKED = "tracked"
LOST = "lost"

binomial_kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
scharr_smoothing = np.array([3.0, 10.0, 3.0]) / 16.0
central_difference = np.array([-1.0, 0.0, 1.0]) / 2.0
scharr_x = np.outer(scharr_smoothing, central_difference)
scharr_y = np.outer(central_difference, scharr_smoothing)


@dataclass(frozen=True)
class FlowConfig:
    """
    Parameters of the pyramidal Lucas-Kanade tracker.

    Parameters:
    :param window_half_width: half-width h of the (2h+1)x(2h+1) integration window
    :type window_half_width: int
    :param pyramid_levels: requested number of pyramid levels, level 0 included
    :type pyramid_levels: int
    :param max_iterations: iteration cap per pyramid level
    :type max_iterations: int
    :param convergence_epsilon: step norm (pixels) below which a level has converged
    :type convergence_epsilon: float
    :param min_eigenvalue: threshold on the smaller eigenvalue of G divided by the window pixel count
    :type min_eigenvalue: float
    """

    window_half_width: int = 10
    pyramid_levels: int = 3
    max_iterations: int = 30
    convergence_epsilon: float = 0.01
    min_eigenvalue: float = 1e-4

    def __post_init__(self):
        checks = {
            "window_half_width": isinstance(self.window_half_width, (int, np.integer)) and self.window_half_width >= 1,
            "pyramid_levels": isinstance(self.pyramid_levels, (int, np.integer)) and self.pyramid_levels >= 1,
            "max_iterations": isinstance(self.max_iterations, (int, np.integer)) and self.max_iterations >= 1,
            "convergence_epsilon": np.isfinite(self.convergence_epsilon) and self.convergence_epsilon > 0,
            "min_eigenvalue": np.isfinite(self.min_eigenvalue) and self.min_eigenvalue >= 0,
        }
        for name, valid in checks.items():
            if not valid:
                raise InvalidInput(exception_messages["InvalidFlowConfig"](name, getattr(self, name)))

    @property
    def window_size(self) -> int:
        return 2 * self.window_half_width + 1

    def to_dict(self):
        return {
            "window_half_width": int(self.window_half_width),
            "pyramid_levels": int(self.pyramid_levels),
            "max_iterations": int(self.max_iterations),
            "convergence_epsilon": float(self.convergence_epsilon),
            "min_eigenvalue": float(self.min_eigenvalue),
        }


def _intensity(frame) -> np.ndarray:
    return frame.intensity if isinstance(frame, Frame) else np.asarray(frame, dtype=float)


def _reduce_rows(image: np.ndarray) -> np.ndarray:
    # binomial smoothing along axis 0 evaluated on even rows only, replicate border
    n_out = (image.shape[0] + 1) // 2
    padded = np.pad(image, ((2, 2), (0, 0)), mode="edge")
    reduced = binomial_kernel[0] * padded[0 : 2 * n_out : 2]
    for k in range(1, binomial_kernel.size):
        reduced += binomial_kernel[k] * padded[k : k + 2 * n_out : 2]
    return reduced


def downsample(frame) -> Frame:
    """Binomial low-pass followed by keeping every other row and column."""
    smooth = _reduce_rows(_reduce_rows(_intensity(frame)).T).T
    return Frame(np.ascontiguousarray(np.clip(smooth, 0.0, 1.0)))


def spatial_gradient(frame) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scharr derivatives with replicate borders.

    Returns:
    :return: (Ix, Iy), both with the frame's shape
    """
    image = _intensity(frame)
    ix = ndimage.correlate1d(image, central_difference, axis=1, mode="nearest")
    ix = ndimage.correlate1d(ix, scharr_smoothing, axis=0, mode="nearest")
    iy = ndimage.correlate1d(image, central_difference, axis=0, mode="nearest")
    iy = ndimage.correlate1d(iy, scharr_smoothing, axis=1, mode="nearest")
    return ix, iy


@dataclass(frozen=True, eq=False)
class Pyramid:
    """
    Multi-resolution stack of one frame, or of a rectangular crop of it.

    origin is the (x, y) of the crop's top-left pixel in the full frame and
    frame_size the full frame's (width, height); both default to the stack itself.
    """

    levels: Tuple[Frame, ...]
    requested_levels: int
    origin: Tuple[int, int] = (0, 0)
    frame_size: Optional[Tuple[int, int]] = None

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def reduced(self) -> bool:
        return self.n_levels < self.requested_levels

    @property
    def bounds(self) -> Tuple[int, int]:
        if self.frame_size is not None:
            return self.frame_size
        return self.levels[0].width, self.levels[0].height


def pyramid_depth(width: int, height: int, levels: int, half_width: int = 10) -> int:
    """Number of levels build_pyramid keeps for a width x height frame."""
    window = 2 * half_width + 1
    depth = 1
    while depth < levels:
        width, height = (width + 1) // 2, (height + 1) // 2
        if width < window or height < window:
            break
        depth += 1
    return depth


def _stack(frame: Frame, depth: int) -> Tuple[Frame, ...]:
    stack = [frame]
    while len(stack) < depth:
        stack.append(downsample(stack[-1]))
    return tuple(stack)


def build_pyramid(frame, levels: int, half_width: int = 10) -> Pyramid:
    """
    Builds the multi-resolution stack used for coarse-to-fine tracking.
    Level 0 is always kept; a coarser level is admitted only while both of its
    dimensions are at least one window (2*half_width+1) wide.

    Parameters:
    :param frame: level-0 frame
    :type frame: Frame
    :param levels: requested number of levels
    :type levels: int
    :param half_width: tracker window half-width bounding the coarsest level
    :type half_width: int
    """
    if levels < 1:
        raise InvalidInput(exception_messages["InvalidFlowConfig"]("pyramid_levels", levels))
    if not isinstance(frame, Frame):
        frame = Frame(frame)
    depth = pyramid_depth(frame.width, frame.height, levels, half_width)
    if depth < levels:
        logger.trace(f"Pyramid reduced from {levels} to {depth} levels for a {2 * half_width + 1} px window.")
    return Pyramid(_stack(frame, depth), levels)


def _tracking_box(points: np.ndarray, width: int, height: int, depth: int, half_width: int):
    """
    Crop (x0, y0, x1, y1) holding every window of points at every level plus
    a motion margin. The origin is a multiple of 2**(depth-1) so that each
    level of the crop lies on the grid of the full-frame level.
    """
    step = 2 ** (depth - 1)
    margin = (half_width + 8) * step
    x0 = max(int(np.floor((points[:, 0].min() - margin) / step)) * step, 0)
    y0 = max(int(np.floor((points[:, 1].min() - margin) / step)) * step, 0)
    x1 = min(int(np.ceil((points[:, 0].max() + margin + 1) / step)) * step, width)
    y1 = min(int(np.ceil((points[:, 1].max() + margin + 1) / step)) * step, height)
    return x0, y0, x1, y1


def crop_pyramid(frame: Frame, box, depth: int, requested_levels: int) -> Pyramid:
    """Pyramid of frame restricted to box, with exactly depth levels."""
    x0, y0, x1, y1 = box
    crop = Frame(frame.intensity[y0:y1, x0:x1])
    return Pyramid(_stack(crop, depth), requested_levels, origin=(x0, y0), frame_size=(frame.width, frame.height))


def _sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    coords = np.vstack((np.ravel(ys), np.ravel(xs)))
    return ndimage.map_coordinates(image, coords, order=1, mode="nearest").reshape(np.shape(xs))


def sample_bilinear(frame, x, y):
    """Bilinear interpolation; coordinates outside the grid clamp to the border pixel."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    image = _intensity(frame)
    xs = np.clip(xs, 0, image.shape[1] - 1)
    ys = np.clip(ys, 0, image.shape[0] - 1)
    values = _sample(image, xs, ys)
    if values.ndim == 0:
        return float(values)
    return values


def _window_offsets(half_width: int):
    span = np.arange(-half_width, half_width + 1, dtype=float)
    oy, ox = np.meshgrid(span, span, indexing="ij")
    return ox.ravel(), oy.ravel()


def _window_grid(centers: np.ndarray, half_width: int):
    corner = centers - half_width
    base = np.floor(corner)
    frac = corner - base
    return base.astype(np.int64), frac[:, 0, None, None], frac[:, 1, None, None]


def _grid_indices(base: np.ndarray, half_width: int, width: int, height: int):
    span = np.arange(2 * half_width + 2)
    cols = np.clip(base[:, 0, None] + span, 0, width - 1)
    rows = np.clip(base[:, 1, None] + span, 0, height - 1)
    return rows, cols


def _blend(grid: np.ndarray, ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    top = grid[:, :-1, :-1] * (1.0 - ax) + grid[:, :-1, 1:] * ax
    bottom = grid[:, 1:, :-1] * (1.0 - ax) + grid[:, 1:, 1:] * ax
    return (top * (1.0 - ay) + bottom * ay).reshape(len(grid), -1)


def _sample_windows(image: np.ndarray, centers: np.ndarray, half_width: int) -> np.ndarray:
    """
    Bilinear samples of the (2h+1)x(2h+1) window around each center, border
    pixels replicated. Rows follow the order of _window_offsets.
    """
    height, width = image.shape
    base, ax, ay = _window_grid(centers, half_width)
    rows, cols = _grid_indices(base, half_width, width, height)
    return _blend(image[rows[:, :, None], cols[:, None, :]], ax, ay)


def _window_gradients(image: np.ndarray, centers: np.ndarray, half_width: int):
    """
    Scharr derivatives sampled like _sample_windows, evaluated from the 3x3
    neighborhood of each grid pixel instead of over the whole image.
    Matches spatial_gradient followed by _sample_windows.
    """
    height, width = image.shape
    base, ax, ay = _window_grid(centers, half_width)
    rows, cols = _grid_indices(base, half_width, width, height)
    taps = np.arange(-1, 2)
    rows = np.clip(rows[:, :, None] + taps, 0, height - 1)
    cols = np.clip(cols[:, :, None] + taps, 0, width - 1)
    neighborhood = image[rows[:, :, None, :, None], cols[:, None, :, None, :]]
    gx = np.einsum("nijkl,kl->nij", neighborhood, scharr_x)
    gy = np.einsum("nijkl,kl->nij", neighborhood, scharr_y)
    return _blend(gx, ax, ay), _blend(gy, ax, ay)


def gradient_matrix(grads, point, half_width: int) -> np.ndarray:
    """Returns the 2x2 matrix G summed over the window centered on point."""
    ix, iy = grads
    ox, oy = _window_offsets(half_width)
    wx, wy = point[0] + ox, point[1] + oy
    gx = _sample(ix, wx, wy)
    gy = _sample(iy, wx, wy)
    gxy = np.sum(gx * gy)
    return np.array([[np.sum(gx * gx), gxy], [gxy, np.sum(gy * gy)]])


class RefineResult(NamedTuple):
    displacement: Tuple[float, float]
    min_eig: float
    converged: bool
    degenerate: bool


def _lk_refine_batch(prev, nxt, gx, gy, points, guesses, cfg: FlowConfig):
    """
    Iterative forward-additive Lucas-Kanade on all points of one frame pair at
    once. Points are (N, 2) arrays of (x, y) in the level's pixel grid; gx and
    gy hold the gradients of prev already sampled over each window.
    """
    half_width = cfg.window_half_width
    npix = cfg.window_size**2
    template = _sample_windows(prev, points, half_width)

    gxx = np.sum(gx * gx, axis=1)
    gxy = np.sum(gx * gy, axis=1)
    gyy = np.sum(gy * gy, axis=1)
    det = gxx * gyy - gxy * gxy
    min_eig = ((gxx + gyy) / 2.0 - np.sqrt(((gxx - gyy) / 2.0) ** 2 + gxy**2)) / npix
    degenerate = (min_eig < cfg.min_eigenvalue) | (det <= 0)

    d = np.array(guesses, dtype=float, copy=True)
    converged = np.zeros(len(points), dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(cfg.max_iterations):
            idx = np.flatnonzero(~degenerate & ~converged)
            if idx.size == 0:
                break
            warped = _sample_windows(nxt, points[idx] + d[idx], half_width)
            residual = template[idx] - warped
            bx = np.sum(gx[idx] * residual, axis=1)
            by = np.sum(gy[idx] * residual, axis=1)
            step_x = (gyy[idx] * bx - gxy[idx] * by) / det[idx]
            step_y = (gxx[idx] * by - gxy[idx] * bx) / det[idx]
            if not (np.all(np.isfinite(step_x)) and np.all(np.isfinite(step_y))):
                raise NumericError(exception_messages["NonFinite"])
            d[idx, 0] += step_x
            d[idx, 1] += step_y
            converged[idx[np.hypot(step_x, step_y) < cfg.convergence_epsilon]] = True
    if not np.all(np.isfinite(min_eig)):
        raise NumericError(exception_messages["NonFinite"])
    return d, min_eig, converged, degenerate


def _inside_inset(points: np.ndarray, width: int, height: int, half_width: int) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return (
        (x >= half_width)
        & (x <= width - 1 - half_width)
        & (y >= half_width)
        & (y <= height - 1 - half_width)
    )


def lk_refine(prev, next, grads, point, guess=(0.0, 0.0), cfg: FlowConfig = None) -> RefineResult:
    """
    Single-level iterative refinement of one point.

    Parameters:
    :param prev: frame the window is taken from
    :param next: frame the window is searched in
    :param grads: (Ix, Iy) of prev
    :param point: (x, y), at least window_half_width inside prev
    :param guess: initial displacement
    :param cfg: tracker parameters
    :type cfg: FlowConfig

    Returns:
    :return: RefineResult; a degenerate window returns the guess unconverged
    """
    cfg = cfg or FlowConfig()
    prev_image, next_image = _intensity(prev), _intensity(next)
    pts = as_points([point])
    height, width = prev_image.shape
    if not _inside_inset(pts, width, height, cfg.window_half_width)[0]:
        raise InvalidInput(exception_messages["PointOutsideInset"](tuple(point), cfg.window_half_width))
    d, min_eig, converged, degenerate = _lk_refine_batch(
        prev_image,
        next_image,
        _sample_windows(np.asarray(grads[0], dtype=float), pts, cfg.window_half_width),
        _sample_windows(np.asarray(grads[1], dtype=float), pts, cfg.window_half_width),
        pts,
        as_points([guess]),
        cfg,
    )
    return RefineResult(
        (float(d[0, 0]), float(d[0, 1])),
        float(min_eig[0]),
        bool(converged[0] and not degenerate[0]),
        bool(degenerate[0]),
    )


def _track_batch(pyr_prev: Pyramid, pyr_next: Pyramid, points: np.ndarray, cfg: FlowConfig):
    n_levels = min(pyr_prev.n_levels, pyr_next.n_levels)
    local = points - np.asarray(pyr_prev.origin, dtype=float)
    guess = np.zeros_like(points)
    ok = np.ones(len(points), dtype=bool)
    d = guess
    for level in reversed(range(n_levels)):
        level_points = local / 2.0**level
        prev_image = pyr_prev.levels[level].intensity
        gx, gy = _window_gradients(prev_image, level_points, cfg.window_half_width)
        d, _, converged, degenerate = _lk_refine_batch(
            prev_image,
            pyr_next.levels[level].intensity,
            gx,
            gy,
            level_points,
            guess,
            cfg,
        )
        ok &= converged & ~degenerate
        guess = 2.0 * d
    new_points = points + d
    width, height = pyr_prev.bounds
    ok &= _inside_inset(new_points, width, height, cfg.window_half_width)
    return new_points, ok


def track_point(pyr_prev: Pyramid, pyr_next: Pyramid, point, cfg: FlowConfig = None):
    """
    Coarse-to-fine tracking of one point between two pyramids.

    Returns:
    :return: ((x, y), "tracked" or "lost")
    """
    cfg = cfg or FlowConfig()
    if pyr_prev.origin != pyr_next.origin:
        raise InvalidInput(exception_messages["CropMismatch"](pyr_prev.origin, pyr_next.origin))
    pts = as_points([point])
    width, height = pyr_prev.bounds
    if not _inside_inset(pts, width, height, 0)[0]:
        raise InvalidInput(exception_messages["PointOutsideInset"](tuple(point), 0))
    new_points, ok = _track_batch(pyr_prev, pyr_next, pts, cfg)
    return (float(new_points[0, 0]), float(new_points[0, 1])), TRACKED if ok[0] else LOST


@dataclass(frozen=True, eq=False)
class TrackMatrix:
    """
    Sub-pixel positions of N points over T frames.

    positions has shape (N, T, 2) holding (x, y); status has shape (N, T) and
    is True while a point is tracked. A lost point keeps its last position.
    """

    positions: np.ndarray
    status: np.ndarray
    fps: float
    half_width: int = 10
    effective_levels: int = 1
    requested_levels: int = 1

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        status = np.asarray(self.status, dtype=bool)
        if positions.ndim != 3 or positions.shape[2] != 2 or status.shape != positions.shape[:2]:
            raise InvalidInput(f"inconsistent track shapes {positions.shape} and {status.shape}")
        if np.any(status[:, 1:] & ~status[:, :-1]):
            raise InvalidInput("a lost point cannot become tracked again")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "status", status)

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    @property
    def n_frames(self) -> int:
        return self.positions.shape[1]

    @property
    def n_lost(self) -> int:
        return int(np.sum(~self.status[:, -1]))

    @property
    def pyramid_reduced(self) -> bool:
        return self.effective_levels < self.requested_levels

    def lost_at(self) -> np.ndarray:
        """First frame at which each point is lost, -1 for points never lost."""
        lost = ~self.status
        return np.where(lost.any(axis=1), lost.argmax(axis=1), -1)

    def to_frame(self) -> pd.DataFrame:
        n_points, n_frames = self.status.shape
        frame_idx, point_idx = np.meshgrid(np.arange(n_frames), np.arange(n_points), indexing="ij")
        return pd.DataFrame(
            {
                "frame": frame_idx.ravel(),
                "point_id": point_idx.ravel(),
                "x": self.positions[:, :, 0].T.ravel(),
                "y": self.positions[:, :, 1].T.ravel(),
                "status": np.where(self.status.T.ravel(), TRACKED, LOST),
            }
        )

    def to_csv(self, path=None):
        """Writes frame,point_id,x,y,status rows; returns the text when no path is given."""
        return self.to_frame().to_csv(path, index=False, float_format="%.6f")


def track_sequence(seq: FrameSequence, initial_points, cfg: FlowConfig = None) -> TrackMatrix:
    """
    Chained frame-to-frame tracking: the output positions of frame t are the
    inputs of frame t+1. Points are never re-detected.

    Parameters:
    :param seq: frames to track through
    :type seq: FrameSequence
    :param initial_points: (x, y) positions in frame 0
    :type initial_points: sequence of pairs
    :param cfg: tracker parameters
    :type cfg: FlowConfig
    """
    cfg = cfg or FlowConfig()
    if seq.n_frames < 2:
        raise InvalidInput(exception_messages["NoFramesToTrack"])
    points = as_points(initial_points)
    if len(points) == 0:
        raise InvalidInput(exception_messages["NoPointsToTrack"])
    inside = _inside_inset(points, seq.width, seq.height, cfg.window_half_width)
    if not inside.all():
        bad = tuple(points[np.argmin(inside)])
        raise InvalidInput(exception_messages["PointOutsideInset"](bad, cfg.window_half_width))

    n_points, n_frames = len(points), seq.n_frames
    positions = np.zeros((n_points, n_frames, 2))
    status = np.zeros((n_points, n_frames), dtype=bool)
    positions[:, 0] = points
    status[:, 0] = True

    depth = pyramid_depth(seq.width, seq.height, cfg.pyramid_levels, cfg.window_half_width)
    if depth < cfg.pyramid_levels:
        logger.info(
            f"Pyramid depth reduced from {cfg.pyramid_levels} to {depth} "
            f"for {seq.width}x{seq.height} frames and a {cfg.window_size} px window."
        )

    box, pyr_prev = None, None
    for t in range(1, n_frames):
        alive = status[:, t - 1]
        wanted = _tracking_box(positions[alive, t - 1], seq.width, seq.height, depth, cfg.window_half_width)
        if wanted != box:
            box = wanted
            pyr_prev = crop_pyramid(seq[t - 1], box, depth, cfg.pyramid_levels)
            logger.trace(f"Frame {t}: tracking inside crop {box}.")
        pyr_next = crop_pyramid(seq[t], box, depth, cfg.pyramid_levels)
        positions[:, t] = positions[:, t - 1]
        new_points, ok = _track_batch(pyr_prev, pyr_next, positions[alive, t - 1], cfg)
        alive_idx = np.flatnonzero(alive)
        positions[alive_idx[ok], t] = new_points[ok]
        status[alive_idx, t] = ok
        if (~ok).any():
            logger.debug(f"Lost {int(np.sum(~ok))} point(s) at frame {t}.")
        logger.trace(f"Frame {t}: {int(status[:, t].sum())}/{n_points} points tracked.")
        if not status[:, t].any() and t < n_frames - 1:
            raise AllPointsLost(exception_messages["AllPointsLost"](t), frame_index=t)
        pyr_prev = pyr_next

    return TrackMatrix(
        positions,
        status,
        seq.fps,
        half_width=cfg.window_half_width,
        effective_levels=depth,
        requested_levels=cfg.pyramid_levels,
    )
