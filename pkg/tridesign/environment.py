"""Execution environment for parameter sweeps.

The Environment runs a function over every combination of a parameter space,
records one run per combination on a :class:`~tridesign.study.Study` and saves
the study when a storage service is attached. Sequential and threaded runs
record identical studies because results are merged in submission order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

from .exploration import cartesian_product
from .logging_utils import get_logger
from .storage import StorageService
from .study import Study

logger = get_logger("environment")

SweepFunction = Callable[[Mapping[str, Any]], Mapping[str, Any]]


@dataclass
class Environment:
    """Couples a study with an optional storage backend.

    Parameters
    ----------
    study:
        Receives one run record per visited combination.
    storage:
        Persists the study after a sweep; ``None`` keeps it in memory only.
    """

    study: Study
    storage: StorageService | None = None

    def _pending(
        self, space: Mapping[str, Sequence[Any]], resume: bool
    ) -> list[tuple[str, dict[str, Any]]]:
        existing = set(self.study.list_runs()) if resume else set()
        combos = [(f"{i:05d}", c) for i, c in enumerate(cartesian_product(space))]
        return [(run_id, c) for run_id, c in combos if run_id not in existing]

    def _record(
        self, run_id: str, combo: Mapping[str, Any], results: Mapping[str, Any]
    ) -> None:
        snapshot = {**self.study.parameter_values(), **dict(combo)}
        self.study.record_run(run_id, snapshot, results)

    def _finish(self) -> None:
        if self.storage is not None:
            self.storage.save(self.study)

    def run_exploration(
        self,
        func: SweepFunction,
        space: Mapping[str, Sequence[Any]],
        resume: bool = False,
    ) -> None:
        """Call ``func`` with baseline parameters updated by each combination.

        ``func`` returns the mapping of results recorded for that run.
        """

        baseline = self.study.parameter_values()
        for run_id, combo in self._pending(space, resume):
            logger.info("run %s: %s", run_id, combo)
            self._record(run_id, combo, dict(func({**baseline, **combo})))
        self._finish()

    def run_exploration_parallel(
        self,
        func: SweepFunction,
        space: Mapping[str, Sequence[Any]],
        max_workers: int | None = None,
        resume: bool = False,
    ) -> None:
        """Same as :meth:`run_exploration` on a thread pool.

        ``func`` must not touch the study; workers only see a copy of the
        parameters.
        """

        baseline = self.study.parameter_values()
        pending = self._pending(space, resume)
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            futures = [ex.submit(func, {**baseline, **combo}) for _, combo in pending]
            for (run_id, combo), fut in zip(pending, futures):
                self._record(run_id, combo, dict(fut.result()))
        logger.info("finished %d runs on %s workers", len(pending), max_workers or "default")
        self._finish()
