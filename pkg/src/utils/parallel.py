import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from src.utils.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(max_workers: Optional[int] = None) -> int:
    """Worker count: explicit argument, else QSME_THREADS, else CPU count."""
    if max_workers is not None:
        return max(1, int(max_workers))
    env = os.environ.get("QSME_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring non-integer QSME_THREADS={env!r}")
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """Map `fn` over `items` on a thread pool; results keep submission order."""
    items = list(items)
    workers = min(resolve_threads(max_workers), len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(fn, item) for item in items]
        return [future.result() for future in futures]
