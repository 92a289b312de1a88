import datetime
import logging
import types

from alive_progress import alive_bar

logger = logging.getLogger(__name__)


def run_progress(self, manifest):
    """
    Executes every (case, kind) of the manifest like SuiteRunner.run, with a
    progress bar advancing once per finished case.

    Parameters:
    :param manifest: the suite to run
    :type manifest: SuiteManifest
    """
    start_time = datetime.datetime.now()
    with alive_bar(len(manifest.cases)) as bar:
        rows = self.execute_cases(manifest, on_case_done=bar)
    return self.finish(manifest, rows, start_time)


def set_progress_bars(self):
    self.run = types.MethodType(run_progress, self)
