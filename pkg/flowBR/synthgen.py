import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage

from flowBR.exceptions import SpecError
from flowBR.exception_messages import exception_messages
from flowBR.roi_points import KeypointSet, write_keypoints
from flowBR.video_io import Frame, FrameSequence, write_frame_dir, write_y4m

logger = logging.getLogger(__name__)

BACKGROUND = 0.5
KEYPOINT_MARGIN = 14
allowed_textures = ("checker", "sinusoid2d", "noise", "flat")

Region = Tuple[int, int, int, int]


@dataclass(frozen=True)
class TextureSpec:
    """
    Procedural texture around mid-grey.

    checker: squares of period/2 px alternating 0.5 -/+ contrast/2
    sinusoid2d: 0.5 + contrast/2 * sin(2 pi x / period) * sin(2 pi y / period)
    noise: seeded white noise low-passed with sigma period/4, rescaled to the contrast
    flat: constant 0.5, no gradient at all
    """

    kind: str = "checker"
    period: float = 16.0
    contrast: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in allowed_textures:
            raise SpecError(exception_messages["InvalidTexture"](self.kind, allowed_textures))
        if not self.period > 0:
            raise SpecError(exception_messages["InvalidScene"](f"texture period {self.period}"))
        if not 0 <= self.contrast <= 1:
            raise SpecError(exception_messages["InvalidScene"](f"texture contrast {self.contrast}"))

    def render(self, width: int, height: int) -> np.ndarray:
        yy, xx = np.mgrid[0:height, 0:width].astype(float)
        half = self.contrast / 2.0
        if self.kind == "checker":
            parity = (np.floor(xx / (self.period / 2.0)) + np.floor(yy / (self.period / 2.0))) % 2
            return BACKGROUND + half * (2.0 * parity - 1.0)
        if self.kind == "sinusoid2d":
            wave = np.sin(2 * np.pi * xx / self.period) * np.sin(2 * np.pi * yy / self.period)
            return BACKGROUND + half * wave
        if self.kind == "noise":
            rng = np.random.default_rng(self.seed)
            smooth = ndimage.gaussian_filter(rng.standard_normal((height, width)), self.period / 4.0, mode="reflect")
            smooth -= smooth.mean()
            peak = np.abs(smooth).max()
            return BACKGROUND + half * (smooth / peak if peak > 0 else smooth)
        return np.full((height, width), BACKGROUND)


def _check_region(name: str, region: Region, width: int, height: int):
    x0, y0, x1, y1 = region
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise SpecError(exception_messages["InvalidScene"](f"{name} {region} is not inside a {width}x{height} frame"))


def _overlap(a: Region, b: Region) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


@dataclass(frozen=True)
class SceneSpec:
    """
    Scene with a static background, a chest region moving vertically with the
    breathing law and an optional face region following it plus head jitter.
    Regions are (x0, y0, x1, y1) with exclusive ends.
    """

    width: int = 160
    height: int = 224
    fps: float = 30.0
    duration: float = 30.0
    breathing_freq: float = 0.3
    breathing_amp: float = 2.0
    chest_texture: TextureSpec = field(default_factory=lambda: TextureSpec("checker", 32.0, 0.8))
    face_texture: TextureSpec = field(default_factory=lambda: TextureSpec("noise", 16.0, 0.8, seed=1))
    chest_region: Region = (16, 84, 144, 196)
    face_region: Optional[Region] = (50, 16, 110, 76)
    head_noise_amp: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise SpecError(exception_messages["InvalidScene"](f"frame size {self.width}x{self.height}"))
        if not self.fps > 0 or not self.duration > 0:
            raise SpecError(exception_messages["InvalidScene"]("fps and duration must be positive"))
        if self.n_frames < 2:
            raise SpecError(exception_messages["InvalidScene"]("the clip must last at least 2 frames"))
        if not 0 < self.breathing_freq < self.fps / 2.0:
            raise SpecError(exception_messages["InvalidScene"](f"breathing frequency {self.breathing_freq} Hz outside (0, fps/2)"))
        if self.breathing_amp < 0 or self.head_noise_amp < 0:
            raise SpecError(exception_messages["InvalidScene"]("amplitudes must be non-negative"))
        _check_region("chest_region", self.chest_region, self.width, self.height)
        if self.face_region is not None:
            _check_region("face_region", self.face_region, self.width, self.height)
            if _overlap(self.chest_region, self.face_region):
                raise SpecError(exception_messages["InvalidScene"]("chest and face regions overlap"))

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.fps))

    @property
    def bpm(self) -> float:
        return self.breathing_freq * 60.0


@dataclass(frozen=True, eq=False)
class SceneTruth:
    """
    chest_dy is the chest rise per frame in pixels, positive upward (content
    moves toward row 0). face_offset holds (dx, rise) of the face per frame.
    """

    bpm: float
    chest_dy: np.ndarray
    face_offset: np.ndarray
    fps: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "frame": np.arange(self.chest_dy.size),
                "time_s": np.arange(self.chest_dy.size) / self.fps,
                "chest_dy": self.chest_dy,
                "face_dx": self.face_offset[:, 0],
                "face_dy": self.face_offset[:, 1],
            }
        )


def breathing_offsets(spec: SceneSpec) -> np.ndarray:
    t = np.arange(spec.n_frames) / spec.fps
    return spec.breathing_amp * np.sin(2 * np.pi * spec.breathing_freq * t)


def head_jitter(spec: SceneSpec) -> np.ndarray:
    """Seeded random walk, smoothed over half a second, centered and scaled to head_noise_amp."""
    if spec.head_noise_amp == 0:
        return np.zeros((spec.n_frames, 2))
    rng = np.random.default_rng(spec.seed)
    walk = np.cumsum(rng.standard_normal((spec.n_frames, 2)), axis=0)
    walk = ndimage.gaussian_filter1d(walk, sigma=spec.fps / 2.0, axis=0, mode="nearest")
    walk -= walk.mean(axis=0)
    peak = np.abs(walk).max()
    return walk * (spec.head_noise_amp / peak) if peak > 0 else walk


def scene_keypoints(spec: SceneSpec) -> KeypointSet:
    """Shoulders and neck inside the chest region, eyes, nose and chin inside the face region."""
    x0, y0, x1, y1 = spec.chest_region
    xm = (x0 + x1) / 2.0
    neck = (xm, y0 + KEYPOINT_MARGIN)
    shoulder_y = neck[1] + 8
    span = min(x1 - x0 - 2 * KEYPOINT_MARGIN, y1 - shoulder_y - KEYPOINT_MARGIN)
    landmarks = {
        "neck": neck,
        "shoulder_left": (xm - span / 2.0, shoulder_y),
        "shoulder_right": (xm + span / 2.0, shoulder_y),
    }
    if spec.face_region is not None:
        fx0, fy0, fx1, fy1 = spec.face_region
        fw, fh = fx1 - fx0, fy1 - fy0
        fxm = (fx0 + fx1) / 2.0
        landmarks.update(
            {
                "eye_left": (fx0 + fw / 4.0, fy0 + 0.3 * fh),
                "eye_right": (fx1 - fw / 4.0, fy0 + 0.3 * fh),
                "nose": (fxm, fy0 + 0.5 * fh),
                "chin": (fxm, fy1 - 0.2 * fh),
            }
        )
    return KeypointSet(**landmarks)


def _layer(spec: SceneSpec, region: Region, texture: TextureSpec):
    x0, y0, x1, y1 = region
    content = np.zeros((spec.height, spec.width))
    mask = np.zeros((spec.height, spec.width))
    content[y0:y1, x0:x1] = texture.render(x1 - x0, y1 - y0)
    mask[y0:y1, x0:x1] = 1.0
    return content, mask, region


def _composite(canvas, content, mask, region, dx, rise):
    # only the region grown by the shift can change
    x0, y0, x1, y1 = region
    pad = int(np.ceil(max(abs(dx), abs(rise)))) + 2
    height, width = canvas.shape
    window = (slice(max(y0 - pad, 0), min(y1 + pad, height)), slice(max(x0 - pad, 0), min(x1 + pad, width)))
    shift = (-rise, dx)
    moved = ndimage.shift(content[window], shift, order=1, mode="constant", cval=0.0)
    cover = ndimage.shift(mask[window], shift, order=1, mode="constant", cval=0.0)
    out = canvas.copy()
    out[window] = canvas[window] * (1.0 - cover) + moved
    return out


def render_breathing_video(spec: SceneSpec = None):
    """
    Renders the scene frame by frame.

    Returns:
    :return: (FrameSequence, SceneTruth, KeypointSet)
    """
    spec = spec or SceneSpec()
    chest_dy = breathing_offsets(spec)
    jitter = head_jitter(spec)
    face_offset = np.column_stack((jitter[:, 0], chest_dy + jitter[:, 1]))

    chest = _layer(spec, spec.chest_region, spec.chest_texture)
    face = _layer(spec, spec.face_region, spec.face_texture) if spec.face_region else None
    background = np.full((spec.height, spec.width), BACKGROUND)

    frames = []
    for t in range(spec.n_frames):
        canvas = _composite(background, *chest, 0.0, chest_dy[t])
        if face is not None:
            canvas = _composite(canvas, *face, face_offset[t, 0], face_offset[t, 1])
        frames.append(Frame(np.clip(canvas, 0.0, 1.0)))
    logger.debug(f"Rendered {spec.n_frames} frames at {spec.bpm} bpm.")
    truth = SceneTruth(spec.bpm, chest_dy, face_offset, spec.fps)
    return FrameSequence(tuple(frames), spec.fps, source="synthetic"), truth, scene_keypoints(spec)


def render_shift_pair(texture: TextureSpec, shift, size: Tuple[int, int] = (64, 64)):
    """
    Returns (first, second) where second is first translated by shift = (dx, dy)
    with bilinear resampling and replicate borders.
    """
    width, height = size
    first = np.clip(texture.render(width, height), 0.0, 1.0)
    dx, dy = shift
    second = ndimage.shift(first, (dy, dx), order=1, mode="nearest")
    return Frame(first), Frame(np.clip(second, 0.0, 1.0))


def write_truth(path, truth: SceneTruth):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(f"# bpm: {truth.bpm!r}\n")
        handle.write(f"# fps: {truth.fps!r}\n")
        truth.to_frame().to_csv(handle, index=False, float_format="%.10g")


def load_truth(path) -> SceneTruth:
    bpm, fps = None, None
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition(":")
            if key.strip() == "bpm":
                bpm = float(value)
            elif key.strip() == "fps":
                fps = float(value)
    if bpm is None or not bpm > 0:
        raise SpecError(exception_messages["InvalidTruth"](str(path), bpm))
    table = pd.read_csv(path, comment="#")
    offsets = table[["face_dx", "face_dy"]].to_numpy(dtype=float)
    return SceneTruth(bpm, table["chest_dy"].to_numpy(dtype=float), offsets, fps or 30.0)


def write_scene(out_dir, seq: FrameSequence, truth: SceneTruth, keypoints: KeypointSet, formats=("pgm", "y4m")):
    """
    Writes frames/ (PGM or PNG), video.y4m, keypoints.json and truth.csv into out_dir.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for fmt in formats:
        if fmt in ("pgm", "png"):
            write_frame_dir(seq, out / "frames", fmt=fmt)
            written["frames"] = out / "frames"
        elif fmt == "y4m":
            write_y4m(out / "video.y4m", seq)
            written["video"] = out / "video.y4m"
        else:
            raise SpecError(exception_messages["InvalidScene"](f"unknown output format {fmt}"))
    write_keypoints(out / "keypoints.json", keypoints)
    write_truth(out / "truth.csv", truth)
    written["keypoints"] = out / "keypoints.json"
    written["truth"] = out / "truth.csv"
    logger.info(f"Wrote synthetic scene at {truth.bpm} bpm to {out}.")
    return written
