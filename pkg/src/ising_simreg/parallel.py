"""
Bounded concurrency for independent fits (folds, replicates, baseline columns).

map_concurrently is the synchronous entry point and gather_bounded the async
one; both hand the work to a concurrent.futures pool and never start an event
loop of their own, so they are safe inside a running loop. The solvers spend
much of their time in small numpy calls that hold the GIL, so fits run in
processes by default; ``executor="thread"`` keeps closures usable. With the
process pool, ``fn`` and the items must be picklable (module-level functions,
functools.partial). Results always come back in input order.
"""

import asyncio
import logging
from collections.abc import Callable
from collections.abc import Coroutine
from collections.abc import Iterable
from concurrent.futures import Executor
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures import ThreadPoolExecutor
from typing import Any
from typing import Literal
from typing import TypeVar

logger = logging.getLogger("ising_simreg.parallel")

T = TypeVar("T")
R = TypeVar("R")

ExecutorKind = Literal["process", "thread"]


def _pool(kind: ExecutorKind, max_workers: int) -> Executor:
    if kind == "process":
        return ProcessPoolExecutor(max_workers=max_workers)
    return ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="ising-simreg")


def map_concurrently(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_workers: int = 1,
    executor: ExecutorKind = "thread",
) -> list[R]:
    """Sequential when max_workers <= 1, otherwise fn mapped over a pool of max_workers."""
    work = list(items)
    if max_workers <= 1 or len(work) <= 1:
        return [fn(item) for item in work]
    logger.debug("Running %d tasks on %d %s workers", len(work), max_workers, executor)
    with _pool(executor, min(max_workers, len(work))) as pool:
        return list(pool.map(fn, work))


async def gather_bounded(
    fn: Callable[[T], R],
    items: Iterable[T],
    max_workers: int,
    executor: ExecutorKind = "thread",
) -> list[R]:
    work = list(items)
    if not work:
        return []
    loop = asyncio.get_running_loop()
    with _pool(executor, max(1, min(max_workers, len(work)))) as pool:
        return list(await asyncio.gather(*(loop.run_in_executor(pool, fn, item) for item in work)))


def run_sync(coro: Coroutine[Any, Any, R]) -> R:
    """asyncio.run, or asyncio.run on a helper thread when a loop is already running here."""
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coro)
    with ThreadPoolExecutor(max_workers=1) as pool:
        return pool.submit(asyncio.run, coro).result()
