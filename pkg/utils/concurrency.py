import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import wraps
from typing import Callable, List, Sequence, Tuple, Type, TypeVar

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


class ShardException(Exception):
    """Custom exception for failed shards"""
    pass


def retry(max_retries: int = 100, exceptions: Tuple[Type[Exception], ...] = (Exception,)):
    """
    Decorator to retry a function that fails with one of the given exceptions

    Args:
        max_retries: Maximum number of attempts
        exceptions: Exception types that trigger another attempt
    """
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            last_exception = None

            for attempt in range(max_retries):
                try:
                    return func(*args, **kwargs)
                except exceptions as e:
                    last_exception = e
                    logger.debug(f"Attempt {attempt + 1} failed: {str(e)}. Retrying...")

            logger.warning(f"All {max_retries} attempts failed")
            raise last_exception

        return wrapper
    return decorator


def split_shards(items: Sequence[T], jobs: int) -> List[List[T]]:
    """Split items into at most `jobs` contiguous, order-preserving shards"""
    jobs = max(1, min(jobs, len(items)))
    size, extra = divmod(len(items), jobs)
    shards, start = [], 0
    for k in range(jobs):
        stop = start + size + (1 if k < extra else 0)
        shards.append(list(items[start:stop]))
        start = stop
    return shards


async def run_sharded_async(check: Callable[[List[T]], R], items: Sequence[T], jobs: int) -> List[R]:
    """
    Run a pure check over shards of items concurrently on a thread pool

    Args:
        check: Function applied to one shard
        items: Work items
        jobs: Number of shards and worker threads

    Returns:
        Shard results in shard order

    Raises:
        ShardException: If any shard raised
    """
    shards = split_shards(items, jobs)
    loop = asyncio.get_running_loop()

    with ThreadPoolExecutor(max_workers=len(shards)) as executor:
        tasks = [loop.run_in_executor(executor, check, shard) for shard in shards]
        results = await asyncio.gather(*tasks, return_exceptions=True)

    failures = []
    for idx, result in enumerate(results):
        if isinstance(result, Exception):
            logger.error(f"Shard {idx} of {len(shards)} failed: {str(result)}")
            failures.append(result)
        else:
            logger.debug(f"Shard {idx} of {len(shards)} finished")

    if failures:
        raise ShardException(f"{len(failures)} shard(s) failed: {str(failures[0])}") from failures[0]
    return list(results)


def run_sharded(check: Callable[[List[T]], R], items: Sequence[T], jobs: int = 1) -> List[R]:
    """Synchronous entry point; jobs <= 1 runs the single shard in the calling thread"""
    if jobs <= 1 or len(items) <= 1:
        return [check(list(items))]
    return asyncio.run(run_sharded_async(check, items, jobs))
