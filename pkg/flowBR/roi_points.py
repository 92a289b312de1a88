import json
import logging
import math
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from flowBR.exceptions import (
    DegenerateGrid,
    DuplicateLandmark,
    InvalidInput,
    KeypointParseError,
    MissingLandmark,
    UnknownLandmark,
)
from flowBR.exception_messages import exception_messages
from flowBR.helpers import midpoint

logger = logging.getLogger(__name__)

Point = Tuple[float, float]

LANDMARKS = (
    "eye_left",
    "eye_right",
    "nose",
    "chin",
    "shoulder_left",
    "shoulder_right",
    "neck",
)


class PointConfigKind(str, Enum):
    face_points = "face_points"
    chest_points = "chest_points"
    chest_grid = "chest_grid"

    @classmethod
    def parse(cls, kind):
        try:
            return cls(kind)
        except ValueError:
            raise InvalidInput(exception_messages["InvalidKind"](kind, [k.value for k in cls]))


@dataclass(frozen=True)
class KeypointSet:
    """
    Named landmarks in pixel coordinates (origin top-left, y downward). Every
    landmark is optional; builders ask for the ones they need.
    """

    eye_left: Optional[Point] = None
    eye_right: Optional[Point] = None
    nose: Optional[Point] = None
    chin: Optional[Point] = None
    shoulder_left: Optional[Point] = None
    shoulder_right: Optional[Point] = None
    neck: Optional[Point] = None

    def __post_init__(self):
        for item in fields(self):
            value = getattr(self, item.name)
            if value is not None:
                object.__setattr__(self, item.name, (float(value[0]), float(value[1])))

    @classmethod
    def from_dict(cls, mapping):
        for name in mapping:
            if name not in LANDMARKS:
                raise UnknownLandmark(exception_messages["UnknownLandmark"](name, LANDMARKS))
        return cls(**{name: tuple(value) for name, value in mapping.items()})

    def present(self) -> List[str]:
        return [name for name in LANDMARKS if getattr(self, name) is not None]

    def require(self, *names) -> List[Point]:
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise MissingLandmark(exception_messages["MissingLandmark"](missing[0]), name=missing[0])
        return [getattr(self, name) for name in names]

    def check_bounds(self, width: int, height: int):
        for name in self.present():
            x, y = getattr(self, name)
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                raise InvalidInput(exception_messages["LandmarkOutside"](name, (x, y)))

    def to_dict(self):
        return {name: list(getattr(self, name)) for name in self.present()}


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise DuplicateLandmark(exception_messages["DuplicateLandmark"](key))
        seen[key] = value
    return seen


def _line_of(text: str, name: str) -> int:
    position = text.find(f'"{name}"')
    return text.count("\n", 0, max(position, 0)) + 1


def parse_keypoints(path) -> KeypointSet:
    """
    Reads a UTF-8 JSON object mapping landmark names to [x, y]. Coordinates are
    checked against frame bounds at use time.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as error:
        raise KeypointParseError(
            exception_messages["KeypointSyntax"](error.lineno, error.msg), line=error.lineno
        )
    if not isinstance(document, dict):
        raise KeypointParseError(exception_messages["KeypointNotObject"], line=1)
    for name, value in document.items():
        if name not in LANDMARKS:
            raise UnknownLandmark(exception_messages["UnknownLandmark"](name, LANDMARKS))
        valid = (
            isinstance(value, list)
            and len(value) == 2
            and all(isinstance(c, (int, float)) and not isinstance(c, bool) and math.isfinite(c) for c in value)
        )
        if not valid:
            line = _line_of(text, name)
            raise KeypointParseError(exception_messages["KeypointValue"](name), line=line)
    keypoints = KeypointSet.from_dict(document)
    logger.debug(f"Parsed landmarks {', '.join(keypoints.present())} from {path}.")
    return keypoints


def write_keypoints(path, k: KeypointSet):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(k.to_dict(), handle, indent=2)
        handle.write("\n")


def face_points(k: KeypointSet) -> List[Point]:
    """Midpoint between the eyes, then nose, then chin."""
    eye_left, eye_right, nose, chin = k.require("eye_left", "eye_right", "nose", "chin")
    return [midpoint(eye_left, eye_right), nose, chin]


def _shoulders(k: KeypointSet):
    left, right = k.require("shoulder_left", "shoulder_right")
    if left[0] == right[0]:
        raise InvalidInput(exception_messages["EqualShoulderX"])
    return left, right


def chest_points(k: KeypointSet) -> List[Point]:
    left, right = _shoulders(k)
    (neck,) = k.require("neck")
    return [left, right, neck]


def _away_from_head(k: KeypointSet, center: np.ndarray, normal: np.ndarray) -> np.ndarray:
    head = k.chin if k.chin is not None else k.nose
    if head is not None:
        side = float(np.dot(normal, np.asarray(head) - center))
        if side != 0.0:
            return -normal if side > 0 else normal
    return normal if normal[1] >= 0 else -normal


def chest_grid(
    k: KeypointSet,
    rows: int = 5,
    apex_scale: float = 1.0,
    bounds: Tuple[int, int] = None,
    half_width: int = 10,
) -> List[Point]:
    """
    Triangular lattice with the shoulder segment as base.

    Row 0 holds `rows` points on the shoulder segment, row r holds rows - r
    points on the chord at fraction r/(rows-1) toward the apex. The apex sits
    apex_scale shoulder-widths from the shoulder midpoint, perpendicular to the
    segment and away from the head.

    Parameters:
    :param k: landmarks, both shoulders required
    :type k: KeypointSet
    :param rows: number of rows, at least 2
    :type rows: int
    :param apex_scale: apex depth in shoulder-segment lengths
    :type apex_scale: float
    :param bounds: (width, height) of the frame; when given, points closer than half_width to a border are dropped
    :type bounds: tuple, optional
    :param half_width: tracker window half-width used for dropping
    :type half_width: int
    """
    if not isinstance(rows, (int, np.integer)) or rows < 2:
        raise InvalidInput(exception_messages["TooFewRows"](rows))
    left, right = (np.asarray(p, dtype=float) for p in _shoulders(k))
    center = (left + right) / 2.0
    segment = right - left
    length = float(np.hypot(*segment))
    normal = _away_from_head(k, center, np.array([-segment[1], segment[0]]) / length)
    apex = center + normal * length * apex_scale

    points = []
    for r in range(rows):
        frac = r / (rows - 1)
        start = left + (apex - left) * frac
        stop = right + (apex - right) * frac
        count = rows - r
        if count == 1:
            points.append((float(apex[0]), float(apex[1])))
            continue
        for s in np.linspace(0.0, 1.0, count):
            p = start + (stop - start) * s
            points.append((float(p[0]), float(p[1])))

    if bounds is None:
        return points
    width, height = bounds
    kept = [
        p
        for p in points
        if half_width <= p[0] <= width - 1 - half_width and half_width <= p[1] <= height - 1 - half_width
    ]
    dropped = len(points) - len(kept)
    if dropped:
        logger.info(f"Dropped {dropped} of {len(points)} grid points too close to the frame border.")
    if 2 * dropped > len(points):
        raise DegenerateGrid(exception_messages["DegenerateGrid"](dropped, len(points)))
    return kept


def select_points(
    kind,
    k: KeypointSet,
    rows: int = 5,
    bounds: Tuple[int, int] = None,
    half_width: int = 10,
    apex_scale: float = 1.0,
) -> List[Point]:
    """Dispatches to the face triple, chest triple or chest grid builder."""
    kind = PointConfigKind.parse(kind)
    if kind is PointConfigKind.chest_grid:
        return chest_grid(k, rows=rows, apex_scale=apex_scale, bounds=bounds, half_width=half_width)
    points = face_points(k) if kind is PointConfigKind.face_points else chest_points(k)
    if bounds is not None:
        width, height = bounds
        for p in points:
            if not (half_width <= p[0] <= width - 1 - half_width and half_width <= p[1] <= height - 1 - half_width):
                raise InvalidInput(exception_messages["PointOutsideInset"](p, half_width))
    return points
