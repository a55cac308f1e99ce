"""Reading and writing event streams in the CSV and EVS1 binary formats.

CSV::

    # width=<W> height=<H> [duration=<D>]
    <t_us>,<x>,<y>,<p>
    ...

Binary (little-endian)::

    b"EVS1" | u32 width | u32 height | u64 count | count x (u64 t, u16 x, u16 y, i8 p)

``duration`` is not stored in the binary layout; readers derive it as
``last t + 1`` (0 for an empty stream). The CSV writer emits ``duration=`` only
when the header's value differs from that derived value.
"""

from __future__ import annotations

import io
import logging
import re
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from stackcnn.schemas.events import EventFormat, EventStream, SensorGeometryHeader
from stackcnn.utils.errors import EventFormatError

logger = logging.getLogger(__name__)

MAGIC = b"EVS1"
HEADER_DTYPE = np.dtype([("magic", "S4"), ("width", "<u4"), ("height", "<u4"), ("count", "<u8")])
RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])

MAX_BINARY_SIDE = 1 << 16

_CSV_HEADER = re.compile(r"^#\s*(?P<fields>(?:\w+=\d+\s*)+)$")
_CHUNK = 65_536


def derived_duration(events: EventStream) -> int:
    return int(events.t.max()) + 1 if len(events) else 0


def sniff_format(data: bytes) -> EventFormat:
    if data[:4] == MAGIC:
        return EventFormat.binary
    if data[:1] == b"#":
        return EventFormat.csv
    raise EventFormatError("unrecognised event file: expected EVS1 magic or CSV header", offset=0)


def _as_bytes(source: bytes | BinaryIO) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    return source.read()


def _parse_csv_header(line: str) -> tuple[int, int, int | None]:
    match = _CSV_HEADER.match(line.strip())
    if not match:
        raise EventFormatError("expected header '# width=<W> height=<H>'", line=1)
    fields: dict[str, int] = {}
    for token in match.group("fields").split():
        key, _, value = token.partition("=")
        fields[key] = int(value)
    unknown = set(fields) - {"width", "height", "duration"}
    if unknown:
        raise EventFormatError(f"unknown header field(s): {', '.join(sorted(unknown))}", line=1)
    if "width" not in fields or "height" not in fields:
        raise EventFormatError("header must declare width and height", line=1)
    if fields["width"] < 1 or fields["height"] < 1:
        raise EventFormatError("width and height must be at least 1", line=1)
    return fields["width"], fields["height"], fields.get("duration")


class _OrderCheck:
    """Tracks the running maximum timestamp across chunks."""

    def __init__(self, tolerance_us: int) -> None:
        self.tolerance_us = tolerance_us
        self.high = -1

    def check(self, t: np.ndarray, locate) -> bool:
        """Raise on a regression beyond tolerance; return True if any reordering is needed."""
        if not t.size:
            return False
        running = np.maximum.accumulate(np.concatenate(([self.high], t)))[:-1]
        lag = running - t
        bad = np.flatnonzero(lag > self.tolerance_us)
        if bad.size:
            i = int(bad[0])
            raise EventFormatError(
                f"timestamp regression: t={int(t[i])} after t={int(running[i])}", **locate(i)
            )
        self.high = max(self.high, int(t.max()))
        return bool((lag > 0).any())


def check_coordinates(x: np.ndarray, y: np.ndarray, width: int, height: int, locate=None) -> None:
    """Raise ``EventFormatError`` for the first event outside the sensor.

    ``locate(i)`` maps the offending index to ``line``/``offset`` keywords;
    without it the message names the index within the batch.
    """
    bad = np.flatnonzero((x < 0) | (x >= width) | (y < 0) | (y >= height))
    if bad.size:
        i = int(bad[0])
        where = locate(i) if locate is not None else {}
        detail = f"coordinate ({int(x[i])}, {int(y[i])}) outside {width}x{height} sensor"
        if locate is None:
            detail += f" at event {i}"
        raise EventFormatError(detail, **where)


def _iter_csv(data: bytes, tolerance_us: int, chunk_size: int):
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EventFormatError(f"CSV is not valid UTF-8: {exc.reason}", offset=exc.start) from exc
    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise EventFormatError("missing CSV header", line=1)
    width, height, duration = _parse_csv_header(lines[0])
    header = (width, height, duration)

    def chunks() -> Iterator[EventStream]:
        order = _OrderCheck(tolerance_us)
        rows: list[tuple[int, int, int, int]] = []
        line_numbers: list[int] = []

        def flush() -> EventStream:
            arr = np.asarray(rows, dtype=np.int64).reshape(-1, 4)
            numbers = list(line_numbers)
            rows.clear()
            line_numbers.clear()
            locate = lambda i: {"line": numbers[i]}  # noqa: E731
            check_coordinates(arr[:, 1], arr[:, 2], width, height, locate)
            reorder = order.check(arr[:, 0], locate)
            if reorder:
                arr = arr[np.argsort(arr[:, 0], kind="stable")]
            return EventStream(t=arr[:, 0], x=arr[:, 1], y=arr[:, 2], p=arr[:, 3])

        for number, raw in enumerate(lines[1:], start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise EventFormatError(f"expected 4 fields 't_us,x,y,p', got {len(parts)}", line=number)
            try:
                t, x, y, p = (int(part) for part in parts)
            except ValueError as exc:
                raise EventFormatError(f"non-integer field: {exc}", line=number) from exc
            if t < 0:
                raise EventFormatError("negative timestamp", line=number)
            if p not in (1, -1):
                raise EventFormatError(f"polarity must be 1 or -1, got {p}", line=number)
            rows.append((t, x, y, p))
            line_numbers.append(number)
            if len(rows) >= chunk_size:
                yield flush()
        if rows:
            yield flush()

    return header, chunks()


def _iter_binary(data: bytes, tolerance_us: int, chunk_size: int):
    if len(data) < HEADER_DTYPE.itemsize:
        raise EventFormatError("truncated binary header", offset=len(data))
    head = np.frombuffer(data, dtype=HEADER_DTYPE, count=1)[0]
    if bytes(head["magic"]) != MAGIC:
        raise EventFormatError(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}", offset=0)
    width, height, count = int(head["width"]), int(head["height"]), int(head["count"])
    if width < 1 or height < 1:
        raise EventFormatError("width and height must be at least 1", offset=4)
    expected = HEADER_DTYPE.itemsize + count * RECORD_DTYPE.itemsize
    if len(data) != expected:
        raise EventFormatError(
            f"body holds {len(data) - HEADER_DTYPE.itemsize} bytes, header declares {count} events",
            offset=min(len(data), expected),
        )
    records = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER_DTYPE.itemsize)

    def chunks() -> Iterator[EventStream]:
        order = _OrderCheck(tolerance_us)
        for start in range(0, count, chunk_size):
            block = records[start : start + chunk_size]
            locate = lambda i, s=start: {"offset": HEADER_DTYPE.itemsize + (s + i) * RECORD_DTYPE.itemsize}  # noqa: E731
            t = block["t"].astype(np.int64)
            if (block["t"] > np.iinfo(np.int64).max).any():
                raise EventFormatError("timestamp overflow", **locate(int(np.argmax(block["t"]))))
            x = block["x"].astype(np.int32)
            y = block["y"].astype(np.int32)
            p = block["p"].astype(np.int8)
            bad = np.flatnonzero((p != 1) & (p != -1))
            if bad.size:
                raise EventFormatError(f"polarity must be 1 or -1, got {int(p[bad[0]])}", **locate(int(bad[0])))
            check_coordinates(x, y, width, height, locate)
            if order.check(t, locate):
                idx = np.argsort(t, kind="stable")
                t, x, y, p = t[idx], x[idx], y[idx], p[idx]
            yield EventStream(t=t, x=x, y=y, p=p)

    return (width, height, None), chunks()


def _open(source: bytes | BinaryIO, fmt: EventFormat | str | None, tolerance_us: int, chunk_size: int):
    data = _as_bytes(source)
    fmt = sniff_format(data) if fmt is None else EventFormat(fmt)
    if fmt is EventFormat.csv:
        return _iter_csv(data, tolerance_us, chunk_size)
    return _iter_binary(data, tolerance_us, chunk_size)


def _finish_header(width: int, height: int, declared: int | None, events: EventStream) -> SensorGeometryHeader:
    derived = derived_duration(events)
    if declared is not None and declared < derived:
        raise EventFormatError(f"declared duration {declared} ends before last event at t={derived - 1}", line=1)
    return SensorGeometryHeader(width=width, height=height, duration=derived if declared is None else declared)


def read_events(
    source: bytes | BinaryIO,
    fmt: EventFormat | str | None = None,
    *,
    tolerance_us: int = 0,
) -> tuple[SensorGeometryHeader, EventStream]:
    """Parse a whole event file; ``fmt=None`` sniffs the format from the first bytes.

    Regressions of at most ``tolerance_us`` are accepted and stably re-sorted
    (only within one read chunk); anything larger raises ``EventFormatError``.
    """
    (width, height, declared), chunks = _open(source, fmt, tolerance_us, chunk_size=1 << 62)
    events = EventStream.concat(chunks)
    header = _finish_header(width, height, declared, events)
    logger.debug("read %d events (%dx%d, duration %d us)", len(events), width, height, header.duration)
    return header, events


def iter_event_chunks(
    source: bytes | BinaryIO,
    fmt: EventFormat | str | None = None,
    *,
    chunk_size: int = _CHUNK,
) -> tuple[SensorGeometryHeader, Iterator[EventStream]]:
    """Validate the header eagerly and yield the body in chunks of ``chunk_size`` events.

    The returned header's duration is the declared CSV value, or 0 when it has
    to be derived from the (not yet read) body; chunked reading is strict about
    ordering (zero tolerance).
    """
    (width, height, declared), chunks = _open(source, fmt, 0, chunk_size)
    return SensorGeometryHeader(width=width, height=height, duration=declared or 0), chunks


def write_events(
    events: EventStream,
    header: SensorGeometryHeader,
    fmt: EventFormat | str = EventFormat.csv,
) -> bytes:
    fmt = EventFormat(fmt)
    if not events.is_sorted():
        raise EventFormatError("events must be sorted by timestamp before writing")
    check_coordinates(events.x, events.y, header.width, header.height)
    if fmt is EventFormat.binary:
        if header.width > MAX_BINARY_SIDE or header.height > MAX_BINARY_SIDE:
            raise EventFormatError(
                f"binary format stores 16-bit coordinates; {header.width}x{header.height} sensor does not fit"
            )
        head = np.zeros(1, dtype=HEADER_DTYPE)
        head["magic"] = MAGIC
        head["width"] = header.width
        head["height"] = header.height
        head["count"] = len(events)
        body = np.empty(len(events), dtype=RECORD_DTYPE)
        body["t"] = events.t
        body["x"] = events.x
        body["y"] = events.y
        body["p"] = events.p
        return head.tobytes() + body.tobytes()

    out = io.StringIO()
    first = f"# width={header.width} height={header.height}"
    if header.duration != derived_duration(events):
        first += f" duration={header.duration}"
    out.write(first + "\n")
    if len(events):
        out.write(
            "\n".join(
                f"{t},{x},{y},{p}"
                for t, x, y, p in zip(events.t.tolist(), events.x.tolist(), events.y.tolist(), events.p.tolist())
            )
        )
        out.write("\n")
    return out.getvalue().encode("utf-8")


def load_events(path: str | Path, *, tolerance_us: int = 0) -> tuple[SensorGeometryHeader, EventStream]:
    return read_events(Path(path).read_bytes(), None, tolerance_us=tolerance_us)


def save_events(
    path: str | Path,
    events: EventStream,
    header: SensorGeometryHeader,
    fmt: EventFormat | str = EventFormat.csv,
) -> Path:
    path = Path(path)
    path.write_bytes(write_events(events, header, fmt))
    return path


__all__ = [
    "MAGIC",
    "MAX_BINARY_SIDE",
    "check_coordinates",
    "read_events",
    "write_events",
    "iter_event_chunks",
    "load_events",
    "save_events",
    "sniff_format",
    "derived_duration",
]
