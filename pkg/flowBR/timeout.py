import signal
import logging

logger = logging.getLogger(__name__)


class timeout:
    """
    Context manager bounding the wall time of one suite case.
    Only usable from the main thread of a process; a non-positive limit disables it.
    """

    def __init__(self, seconds=0, error_message="Case exceeded the time limit."):
        self.seconds = int(seconds or 0)
        self.error_message = error_message
        self._previous = None

    def handle_timeout(self, signum, frame):
        raise TimeoutError(self.error_message)

    def __enter__(self):
        if self.seconds > 0:
            self._previous = signal.signal(signal.SIGALRM, self.handle_timeout)
            signal.alarm(self.seconds)
        return self

    def __exit__(self, type, value, traceback):
        if self.seconds > 0:
            signal.alarm(0)
            signal.signal(signal.SIGALRM, self._previous or signal.SIG_DFL)
            logger.trace(f"Released the {self.seconds} s alarm.")
