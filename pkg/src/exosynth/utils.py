import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, TextIO, Union

import pandas as pd

logger = logging.getLogger(__name__)

THREADS_ENV = "EXOSYNTH_THREADS"


def worker_count(explicit: Optional[int] = None) -> int:
    """Number of optimizer workers.

    An explicit value wins, then the EXOSYNTH_THREADS environment variable;
    0 or unset means one worker per CPU.
    """
    if explicit is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        try:
            explicit = int(raw) if raw else 0
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if explicit < 0:
        raise ValueError(f"Worker count must be non-negative, got {explicit}")
    if explicit == 0:
        return os.cpu_count() or 1
    return explicit


def emit_csv(frame: pd.DataFrame, handle: TextIO) -> None:
    """CSV with a header row, LF line endings and round-trip float precision."""
    frame.to_csv(handle, index=False, lineterminator="\n", float_format="%.17g")


def write_csv_atomic(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Write a CSV through a temporary file in the target directory, then rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            emit_csv(frame, handle)
        os.replace(tmp_name, path)
    except OSError as e:
        Path(tmp_name).unlink(missing_ok=True)
        raise OSError(f"Could not write {path}: {e}") from e
    logger.info(f"wrote {len(frame)} rows to {path}")
    return path
