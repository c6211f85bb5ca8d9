"""
XDiff logging setup
Plain status lines in the project's emoji style, level from XDIFF_LOG_LEVEL
"""
import logging
import os

_CONFIGURED = False


def get_logger(name: str) -> logging.Logger:
    """Return a child of the 'xdiff' logger, configuring the root handler once"""
    global _CONFIGURED
    if not _CONFIGURED:
        root = logging.getLogger("xdiff")
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)
        root.setLevel(os.getenv("XDIFF_LOG_LEVEL", "INFO").upper())
        root.propagate = False
        _CONFIGURED = True
    if name == "xdiff" or name.startswith("xdiff."):
        return logging.getLogger(name)
    return logging.getLogger(f"xdiff.{name}")
