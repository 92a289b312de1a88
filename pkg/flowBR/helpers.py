import numpy as np


def window_to_half_width(window: int) -> int:
    """Maps a full window size (20 or 40 on the command line) to a half-width."""
    return int(window) // 2


def midpoint(a, b):
    return ((a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0)


def as_points(points) -> np.ndarray:
    """Turns a sequence of (x, y) pairs into a float (N, 2) array."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    return arr.reshape(-1, 2)


def get_elapsed_time(start_time, end_time):

    runtime = (end_time - start_time).total_seconds()

    hours, remainder = np.divmod(int(runtime), 3600)
    minutes, seconds = np.divmod(remainder, 60)

    time_str = ""

    if hours:
        time_str += f"{hours} hours, "

    if minutes:
        time_str += f"{minutes} minutes, "

    if seconds or not time_str:
        time_str += f"{seconds} seconds"

    return runtime, time_str
