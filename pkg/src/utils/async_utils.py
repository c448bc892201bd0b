import asyncio
from typing import Any, Callable, Iterable, List, Optional
from .logger import Logger

logger = Logger(__name__)

async def gather_bounded(
    func: Callable[[Any], Any],
    items: Iterable[Any],
    max_workers: int,
    timeout: Optional[float] = None
) -> List[Any]:
    """
    Run a blocking func over items on at most max_workers threads.
    Results come back in input order; exceptions propagate.
    """
    if max_workers < 1:
        raise ValueError("max_workers must be at least 1")
    semaphore = asyncio.Semaphore(max_workers)

    async def worker(item):
        async with semaphore:
            return await asyncio.to_thread(func, item)

    tasks = [worker(item) for item in items]
    gathered = asyncio.gather(*tasks)
    if timeout is None:
        return list(await gathered)
    try:
        return list(await asyncio.wait_for(gathered, timeout=timeout))
    except asyncio.TimeoutError:
        logger.error(f"Worker pool exceeded {timeout} seconds")
        raise

def map_bounded(
    func: Callable[[Any], Any],
    items: Iterable[Any],
    max_workers: int,
    timeout: Optional[float] = None
) -> List[Any]:
    """Synchronous front for gather_bounded"""
    return asyncio.run(gather_bounded(func, list(items), max_workers, timeout))
