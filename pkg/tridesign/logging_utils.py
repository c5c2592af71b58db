"""Logging configuration for tridesign.

The package uses the standard :mod:`logging` library; this module only fixes a
naming scheme (``tridesign.<module>``) and a default handler.
"""

from __future__ import annotations

import logging
from typing import Optional

_ROOT = "tridesign"


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Return a logger below the ``"tridesign"`` namespace.

    A stream handler is attached the first time a given logger is requested so
    that library messages are visible without application-level setup.
    """

    logger = logging.getLogger(_ROOT if name is None else f"{_ROOT}.{name}")
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter(fmt="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
        )
        logger.addHandler(handler)
        logger.setLevel(logging.INFO)
    return logger


def set_verbosity(verbose: bool) -> None:
    """Switch every tridesign logger between INFO and DEBUG."""

    level = logging.DEBUG if verbose else logging.INFO
    for name, logger in logging.root.manager.loggerDict.items():
        if isinstance(logger, logging.Logger) and (name == _ROOT or name.startswith(_ROOT + ".")):
            logger.setLevel(level)
