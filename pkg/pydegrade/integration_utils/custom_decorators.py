import functools
import logging
import time

from pydegrade.errors import TrainingDivergenceError

_BANNER = """
    ###############################

    There was an exception in pydegrade

    Error occured in function: %s

    Function summary : %s

    ################################
"""


def _summary(function) -> str:
    doc = (function.__doc__ or "").strip()
    return doc.splitlines()[0] if doc else "<undocumented>"


def pydegrade_logging_wrapper(function):
    """Log the wall time of an interface call, and a diagnostic banner when it fails."""

    @functools.wraps(function)
    def wrapped(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            result = function(*args, **kwargs)
        except TrainingDivergenceError as e:
            logging.error(
                "Training diverged in %s: component=%s step=%s provenance=%s",
                function.__name__,
                e.component,
                e.step,
                e.provenance,
            )
            raise
        except Exception:
            logging.exception(_BANNER, function.__name__, _summary(function))
            raise
        logging.info(
            "Elapsed time for %s: %f", function.__name__, time.perf_counter() - start_time
        )
        return result

    return wrapped
