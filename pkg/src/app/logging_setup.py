import logging
import sys

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    """
    Send diagnostics to stderr; stdout carries results only.

    verbosity 0 shows warnings, 1 adds the workflow node banners, 2 adds
    every gate event.
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(stream=sys.stderr, level=level, format=LOG_FORMAT, force=True)
