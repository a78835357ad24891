"""Contact-log parsing and time binning.

Raw logs are whitespace-separated ``t i j`` lines (seconds, raw id, raw id),
one line per 20 s co-presence record as in the SocioPatterns releases.  Lines
with four fields ``i j bin count`` are taken as already binned.  Blank lines
and ``#`` comments are skipped.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple

from .tensor import EventRecord, InteractionTensor, Mode, build_tensor

PREBINNED_HEADER = ["person_a", "person_b", "bin", "count"]


class ParseError(ValueError):
    pass


class ContactEvent(NamedTuple):
    timestamp: float
    person_a: int
    person_b: int


@dataclass(frozen=True)
class BinningSpec:
    origin: float = 0.0
    bin_width: float = 900.0
    num_bins: int = 96
    drop_out_of_range: bool = True

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be > 0")
        if self.num_bins < 1:
            raise ValueError("num_bins must be >= 1")


class NodeMap(dict):
    """Raw id -> dense 0-based index, in first-appearance order."""

    def index(self, raw) -> int:
        if raw not in self:
            self[raw] = len(self)
        return self[raw]

    def raw_ids(self) -> list:
        return sorted(self, key=self.__getitem__)


def _parse_id(field: str, lineno: int):
    try:
        return int(field)
    except ValueError:
        raise ParseError(f"line {lineno}: node id {field!r} is not an integer") from None


def parse_contact_log(stream: Iterable[str], node_map: NodeMap | None = None):
    """Parse a contact log into events and a dense node index map.

    Returns ``(events, node_map)``.  Raw lines become :class:`ContactEvent`
    items, four-field lines become :class:`EventRecord` items; ids in both are
    already dense.
    """
    node_map = NodeMap() if node_map is None else node_map
    events = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) == 3:
            try:
                t = float(fields[0])
            except ValueError:
                raise ParseError(f"line {lineno}: bad timestamp {fields[0]!r}") from None
            if not math.isfinite(t):
                raise ParseError(f"line {lineno}: bad timestamp {fields[0]!r}")
            a, b = _parse_id(fields[1], lineno), _parse_id(fields[2], lineno)
            if a == b:
                raise ParseError(f"line {lineno}: self-contact of id {a}")
            events.append(ContactEvent(t, node_map.index(a), node_map.index(b)))
        elif len(fields) == 4:
            a, b = _parse_id(fields[0], lineno), _parse_id(fields[1], lineno)
            if a == b:
                raise ParseError(f"line {lineno}: self-contact of id {a}")
            try:
                u, n = int(fields[2]), int(fields[3])
            except ValueError:
                raise ParseError(f"line {lineno}: bin and count must be integers") from None
            if u < 0 or n < 0:
                raise ParseError(f"line {lineno}: negative bin or count")
            events.append(EventRecord(node_map.index(a), node_map.index(b), u, n))
        else:
            raise ParseError(f"line {lineno}: expected 3 or 4 fields, got {len(fields)}")
    return events, node_map


def write_contact_log(events, node_map: NodeMap, stream: IO[str]):
    """Inverse of :func:`parse_contact_log` (up to comments and whitespace)."""
    raw = node_map.raw_ids()
    for ev in events:
        if isinstance(ev, ContactEvent):
            t = int(ev.timestamp) if float(ev.timestamp).is_integer() else repr(ev.timestamp)
            stream.write(f"{t} {raw[ev.person_a]} {raw[ev.person_b]}\n")
        else:
            stream.write(f"{raw[ev.source]} {raw[ev.target]} {ev.bin} {ev.count}\n")


def bin_index(timestamp: float, spec: BinningSpec) -> int:
    return math.floor((timestamp - spec.origin) / spec.bin_width)


def aggregate_bins(events, spec: BinningSpec, num_nodes: int | None = None,
                   mode=Mode.UNDIRECTED) -> InteractionTensor:
    """Bin events into an interaction tensor; each raw event counts once.

    Bins are half-open ``[origin + u*w, origin + (u+1)*w)``.
    """
    records = []
    max_id = -1
    for ev in events:
        if isinstance(ev, ContactEvent):
            u = bin_index(ev.timestamp, spec)
            a, b, n = ev.person_a, ev.person_b, 1
        else:
            a, b, u, n = ev
        max_id = max(max_id, a, b)
        if not 0 <= u < spec.num_bins:
            if spec.drop_out_of_range:
                continue
            raise ValueError(f"event {tuple(ev)} falls in bin {u}, outside 0..{spec.num_bins - 1}")
        records.append((a, b, u, n))
    if num_nodes is None:
        num_nodes = max(max_id + 1, 1)
    return build_tensor(records, num_nodes, spec.num_bins, mode)


def read_prebinned_csv(stream: IO[str]) -> list[EventRecord]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None:
        return []
    if [h.strip() for h in header] != PREBINNED_HEADER:
        raise ParseError(f"expected header {','.join(PREBINNED_HEADER)}, got {','.join(header)}")
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"line {lineno}: expected 4 columns, got {len(row)}")
        try:
            records.append(EventRecord(*(int(v) for v in row)))
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer field in {row}") from None
    return records


def write_prebinned_csv(tensor: InteractionTensor, stream: IO[str]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(PREBINNED_HEADER)
    for i, j, u, n in zip(tensor.source, tensor.target, tensor.bin, tensor.count):
        writer.writerow([int(i), int(j), int(u), int(n)])


def write_node_map(node_map: NodeMap, stream: IO[str]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["raw_id", "dense_id"])
    for raw in node_map.raw_ids():
        writer.writerow([raw, node_map[raw]])
