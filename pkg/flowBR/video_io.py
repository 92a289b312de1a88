import logging
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Tuple

import numpy as np
from PIL import Image

from flowBR.exceptions import (
    DimensionMismatch,
    FormatError,
    InsufficientInput,
    InvalidInput,
    TruncationError,
)
from flowBR.exception_messages import exception_messages

logger = logging.getLogger(__name__)

DEFAULT_FPS = 30.0
Y4M_MAGIC = b"YUV4MPEG2"
FRAME_MARKER = b"FRAME"
image_suffixes = {".pgm", ".png"}


@dataclass(frozen=True, eq=False)
class Frame:
    """Single-channel intensity grid, row-major, every sample in [0, 1]."""

    intensity: np.ndarray

    def __post_init__(self):
        arr = np.array(self.intensity, dtype=np.float64)
        if (
            arr.ndim != 2
            or arr.shape[0] < 1
            or arr.shape[1] < 1
            or not np.all(np.isfinite(arr))
            or arr.min() < 0.0
            or arr.max() > 1.0
        ):
            raise InvalidInput(exception_messages["InvalidFrame"])
        arr.setflags(write=False)
        object.__setattr__(self, "intensity", arr)

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.intensity.shape

    def to_bytes(self) -> bytes:
        """Quantizes back to 8-bit samples."""
        return np.round(self.intensity * 255.0).astype(np.uint8).tobytes()


@dataclass(frozen=True, eq=False)
class FrameSequence:
    frames: Tuple[Frame, ...]
    fps: float = DEFAULT_FPS
    source: str = field(default="", compare=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) == 0:
            raise InsufficientInput(exception_messages["EmptySequence"])
        if not (isinstance(self.fps, (int, float)) and math.isfinite(self.fps) and self.fps > 0):
            raise InvalidInput(exception_messages["InvalidFps"](self.fps))
        expected = frames[0].shape
        for index, frame in enumerate(frames):
            if frame.shape != expected:
                raise InvalidInput(
                    exception_messages["FrameShapeMismatch"](index, frame.shape, expected)
                )
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, index):
        return self.frames[index]

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.fps

    def stack(self) -> np.ndarray:
        """Returns all intensities as one (T, H, W) array."""
        return np.stack([frame.intensity for frame in self.frames])


def to_grayscale(r, g, b):
    """
    BT.601 luma of RGB samples in [0, 1]. Works on scalars and arrays alike.
    """
    y = np.clip(0.299 * np.asarray(r, dtype=float) + 0.587 * np.asarray(g, dtype=float) + 0.114 * np.asarray(b, dtype=float), 0.0, 1.0)
    if y.ndim == 0:
        return float(y)
    return y


def _parse_y4m_header(data: bytes):
    end = data.find(b"\n")
    if end < 0:
        raise FormatError(exception_messages["BadHeaderTag"]("<unterminated header>"), offset=len(data))
    header = data[:end]
    tokens = header.split(b" ")
    if tokens[0] != Y4M_MAGIC:
        raise FormatError(exception_messages["BadMagic"](tokens[0][:16]), offset=0)

    width = height = rate = None
    colorspace = "420jpeg"
    offset = len(tokens[0]) + 1
    for token in tokens[1:]:
        if not token:
            offset += 1
            continue
        tag, value = chr(token[0]), token[1:].decode("ascii", errors="replace")
        try:
            if tag == "W":
                width = int(value)
            elif tag == "H":
                height = int(value)
            elif tag == "F":
                num, den = value.split(":")
                rate = Fraction(int(num), int(den))
            elif tag == "C":
                colorspace = value
        except (ValueError, ZeroDivisionError):
            raise FormatError(exception_messages["BadHeaderTag"](token.decode("ascii", "replace")), offset=offset)
        if tag in "WH" and (width is not None and width < 1 or height is not None and height < 1):
            raise FormatError(exception_messages["BadHeaderTag"](token.decode("ascii", "replace")), offset=offset)
        if tag == "F" and rate <= 0:
            raise FormatError(exception_messages["BadHeaderTag"](token.decode("ascii", "replace")), offset=offset)
        offset += len(token) + 1

    for name, value in (("W", width), ("H", height)):
        if value is None:
            raise FormatError(exception_messages["MissingHeaderTag"](name), offset=end)
    if colorspace.startswith("420"):
        chroma = 2 * math.ceil(width / 2) * math.ceil(height / 2)
    elif colorspace == "mono":
        chroma = 0
    else:
        raise FormatError(exception_messages["UnsupportedColorspace"](colorspace), offset=end)
    return width, height, rate, chroma, end + 1


def load_y4m(path) -> FrameSequence:
    """
    Reads a YUV4MPEG2 stream and keeps the luma plane of every frame.

    Parameters:
    :param path: path of the .y4m file
    :type path: str or Path
    :return: the frame sequence, fps taken from the header's rational rate
    """
    data = Path(path).read_bytes()
    width, height, rate, chroma, pos = _parse_y4m_header(data)
    if rate is None:
        logger.warning(f"{path} carries no frame rate, assuming {DEFAULT_FPS} fps.")
        rate = Fraction(int(DEFAULT_FPS))
    luma = width * height

    frames = []
    while pos < len(data):
        index = len(frames)
        if data[pos : pos + len(FRAME_MARKER)] != FRAME_MARKER:
            if len(data) - pos < len(FRAME_MARKER) and FRAME_MARKER.startswith(data[pos:]):
                raise TruncationError(exception_messages["TruncatedFrame"](index, luma + chroma), frame_index=index)
            raise FormatError(exception_messages["BadFrameMarker"](index), offset=pos)
        eol = data.find(b"\n", pos)
        if eol < 0:
            raise TruncationError(exception_messages["TruncatedFrame"](index, luma + chroma), frame_index=index)
        start = eol + 1
        available = len(data) - start
        if available < luma + chroma:
            raise TruncationError(
                exception_messages["TruncatedFrame"](index, luma + chroma - available),
                frame_index=index,
            )
        plane = np.frombuffer(data, dtype=np.uint8, count=luma, offset=start)
        frames.append(Frame(plane.reshape(height, width) / 255.0))
        pos = start + luma + chroma

    if not frames:
        raise InsufficientInput(exception_messages["EmptySequence"])
    logger.debug(f"Loaded {len(frames)} frames of {width}x{height} at {float(rate)} fps from {path}.")
    return FrameSequence(tuple(frames), float(rate), source=str(path))


def write_y4m(path, seq: FrameSequence):
    """Writes a Cmono YUV4MPEG2 stream; the rate is stored as a reduced rational."""
    rate = Fraction(seq.fps).limit_denominator(1001)
    header = f"YUV4MPEG2 W{seq.width} H{seq.height} F{rate.numerator}:{rate.denominator} Ip A1:1 Cmono\n"
    with open(path, "wb") as handle:
        handle.write(header.encode("ascii"))
        for frame in seq:
            handle.write(FRAME_MARKER + b"\n")
            handle.write(frame.to_bytes())


_pgm_token = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def read_pgm(path) -> Frame:
    """Reads a binary (P5) PGM with maxval 255; header comments are allowed."""
    data = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        match = _pgm_token.match(data, pos)
        if match is None:
            raise FormatError(exception_messages["BadPgm"]("incomplete header"), offset=pos)
        fields.append(match.group(1))
        pos = match.end()
    if fields[0] != b"P5":
        raise FormatError(exception_messages["BadPgm"](f"magic {fields[0][:8]!r}"), offset=0)
    try:
        width, height, maxval = (int(value) for value in fields[1:])
    except ValueError:
        raise FormatError(exception_messages["BadPgm"]("non-numeric header field"), offset=pos)
    if maxval != 255:
        raise FormatError(exception_messages["BadPgm"](f"maxval {maxval} (only 255 is supported)"), offset=pos)
    if width < 1 or height < 1:
        raise FormatError(exception_messages["BadPgm"](f"size {width}x{height}"), offset=pos)
    # exactly one whitespace byte separates the header from the raster
    pos += 1
    if len(data) - pos < width * height:
        raise TruncationError(exception_messages["TruncatedFrame"](0, width * height - (len(data) - pos)), frame_index=0)
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return Frame(raster.reshape(height, width) / 255.0)


def write_pgm(path, frame: Frame):
    with open(path, "wb") as handle:
        handle.write(f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii"))
        handle.write(frame.to_bytes())


def read_png(path) -> Frame:
    with Image.open(path) as image:
        if image.mode == "L":
            return Frame(np.asarray(image, dtype=np.uint8) / 255.0)
        if image.mode == "RGB":
            rgb = np.asarray(image, dtype=np.uint8) / 255.0
            return Frame(to_grayscale(rgb[..., 0], rgb[..., 1], rgb[..., 2]))
        raise FormatError(exception_messages["UnsupportedPng"](image.mode), offset=0)


def read_image(path) -> Frame:
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    raise InvalidInput(exception_messages["UnsupportedImage"](Path(path).name))


def load_frame_dir(path, glob: str = "*", fps: float = DEFAULT_FPS) -> FrameSequence:
    """
    Loads a directory of PGM/PNG frames sorted lexicographically by file name.

    Parameters:
    :param path: directory holding the frames
    :type path: str or Path
    :param glob: filename pattern selecting the frames
    :type glob: str
    :param fps: frame rate of the sequence
    :type fps: float
    """
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    matches = sorted(
        (p for p in directory.glob(glob) if p.is_file()), key=lambda p: p.name
    )
    files = [p for p in matches if p.suffix.lower() in image_suffixes]
    if len(files) != len(matches):
        logger.debug(f"Skipped {len(matches) - len(files)} non-image files in {directory}.")
    if len(files) < 2:
        raise InsufficientInput(exception_messages["TooFewFrames"](len(files), str(directory / glob)))

    frames = []
    for image_path in files:
        frame = read_image(image_path)
        if frames and frame.shape != frames[0].shape:
            raise DimensionMismatch(
                exception_messages["MixedDimensions"](image_path.name, frame.shape, frames[0].shape),
                filename=image_path.name,
            )
        frames.append(frame)
    logger.debug(f"Loaded {len(frames)} frames from {directory}.")
    return FrameSequence(tuple(frames), fps, source=str(directory))


def write_frame_dir(seq: FrameSequence, path, fmt: str = "pgm"):
    """Writes one zero-padded file per frame, numbered from 1."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    digits = max(4, len(str(seq.n_frames)))
    for index, frame in enumerate(seq, start=1):
        target = directory / f"{index:0{digits}d}.{fmt}"
        if fmt == "pgm":
            write_pgm(target, frame)
        elif fmt == "png":
            quantized = np.round(frame.intensity * 255.0).astype(np.uint8)
            Image.fromarray(quantized).save(target)
        else:
            raise InvalidInput(exception_messages["UnsupportedImage"](target.name))


def load_video(path, fps: float = None, glob: str = "*") -> FrameSequence:
    """
    Loads either a .y4m file or a frame directory. An explicit fps overrides the Y4M header rate.
    """
    source = Path(path)
    if source.is_dir():
        return load_frame_dir(source, glob=glob, fps=fps or DEFAULT_FPS)
    if source.suffix.lower() == ".y4m":
        seq = load_y4m(source)
        if fps:
            seq = replace(seq, fps=float(fps))
        return seq
    if not source.exists():
        raise FileNotFoundError(f"{source} does not exist")
    raise InvalidInput(exception_messages["UnsupportedImage"](source.name))
