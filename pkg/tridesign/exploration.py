"""Helpers describing which parameter values a sweep visits."""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping, Sequence
from itertools import product
from typing import Any, Dict, Iterator

from .exceptions import ConfigurationError

_RANGE = re.compile(r"^\s*(\d+)\s*\.\.\s*(\d+)\s*(?::\s*(\d+)\s*)?$")


def cartesian_product(space: Mapping[str, Sequence[Any]]) -> Iterable[Dict[str, Any]]:
    """Yield one dictionary per combination of the values in ``space``."""

    if not space:
        return []  # type: ignore[return-value]

    keys = list(space.keys())
    value_lists = [space[key] for key in keys]

    def _iter() -> Iterator[Dict[str, Any]]:
        for combo in product(*value_lists):
            yield dict(zip(keys, combo))

    return _iter()


def parse_n_range(text: str) -> list[int]:
    """Parse ``"lo..hi"`` or ``"lo..hi:step"`` into an inclusive list of counts."""

    match = _RANGE.match(text)
    if match is None:
        raise ConfigurationError(f"malformed N range {text!r}; expected 'lo..hi' or 'lo..hi:step'")
    lo, hi = int(match.group(1)), int(match.group(2))
    step = int(match.group(3) or 1)
    if hi < lo or step < 1:
        raise ConfigurationError(f"empty N range {text!r}")
    return list(range(lo, hi + 1, step))
