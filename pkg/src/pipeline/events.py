"""JSONL progress stream for machine consumers: one {"seq", "ts", "event", "data"} object per line."""
from __future__ import annotations

import sys
import time
from pathlib import Path
from typing import Any, BinaryIO, Optional

import orjson
from loguru import logger

from ..errors import InvalidParameterError

EVENTS = frozenset(
    {
        "run_started",
        "phase_started",
        "curve_completed",
        "phase_completed",
        "run_completed",
        "run_failed",
    }
)

_DUMP_OPTIONS = orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_APPEND_NEWLINE


class PipelineEventSink:
    """
    Writes numbered events to stdout or a file. A sink without a stream is a no-op.

    A write failure detaches the stream, so the run carries on without events.
    """

    def __init__(self, fp: Optional[BinaryIO] = None, owns_fp: bool = False):
        self._fp = fp
        self._owns_fp = owns_fp
        self._seq = 0

    @classmethod
    def from_target(cls, target: Optional[str]) -> "PipelineEventSink":
        """None or "" disables, "-" is stdout, anything else is a file appended to."""
        if not target:
            return cls()
        if target == "-":
            return cls(sys.stdout.buffer)
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        return cls(path.open("ab", buffering=0), owns_fp=True)

    @property
    def enabled(self) -> bool:
        return self._fp is not None

    @property
    def emitted(self) -> int:
        return self._seq

    def emit(self, event: str, **data: Any) -> None:
        if event not in EVENTS:
            raise InvalidParameterError(f"unknown event {event!r}; expected one of {sorted(EVENTS)}")
        if self._fp is None:
            return
        try:
            line = orjson.dumps(
                {"seq": self._seq + 1, "ts": time.time(), "event": event, "data": data},
                option=_DUMP_OPTIONS,
            )
        except orjson.JSONEncodeError as e:
            logger.warning(f"[events] dropped {event}: {e}")
            return
        try:
            self._fp.write(line)
            self._fp.flush()
        except (OSError, ValueError) as e:
            logger.warning(f"[events] stream detached after {self._seq} events: {e}")
            self._fp = None
            return
        self._seq += 1

    def close(self) -> None:
        fp, self._fp = self._fp, None
        if fp is not None and self._owns_fp:
            try:
                fp.close()
            except OSError as e:
                logger.debug(f"[events] close failed: {e}")

    def __enter__(self) -> "PipelineEventSink":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()
