"""
One writer per output directory.
"""

from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Union

from filelock import FileLock, Timeout

from ..utils.errors import LocovError
from ..utils.logger import storage_logger


LOCK_NAME = ".locov.lock"


@contextmanager
def output_lock(directory: Union[str, Path], timeout: float = 0) -> Iterator[Path]:
    """Hold the directory's lock file for the duration of the block."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(directory / LOCK_NAME), timeout=timeout)
    try:
        lock.acquire()
    except Timeout as exc:
        raise LocovError("output-locked", f"{directory} is in use by another process") from exc
    storage_logger.debug("Output directory locked", path=str(directory))
    try:
        yield directory
    finally:
        lock.release()


__all__ = ['LOCK_NAME', 'output_lock']
