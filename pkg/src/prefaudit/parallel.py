"""Process-level parallelism helpers.

The estimators themselves are single-threaded by construction; parallelism
only spreads independent refits (Monte Carlo replications, robustness
variants) over processes.  ``PREFAUDIT_THREADS`` caps the worker count.
"""

from __future__ import annotations

import os


def max_workers(n_tasks: int) -> int:
    cap = os.environ.get("PREFAUDIT_THREADS")
    if cap is not None:
        try:
            limit = max(1, int(cap))
        except ValueError:
            limit = 1
    else:
        limit = os.cpu_count() or 1
    return max(1, min(limit, n_tasks))
