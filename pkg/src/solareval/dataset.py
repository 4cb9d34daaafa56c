"""Dataset ingestion, frame-intensity quality control, and sample/sequence selection.

CSV schema (UTF-8, header required)::

    timestamp,ghi,sza_deg,saa_deg,ghi_clr,frame_mean_long,frame_mean_short

``timestamp`` is ISO-8601 UTC; every column after ``ghi`` may be left empty.

Randomness comes from numpy's PCG64 generator seeded with ``[seed, crc32(role)]``,
so each role's draw is reproducible and independent of the other roles.
"""
from __future__ import annotations

import bisect
import csv
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .series import contiguous_runs, format_timestamp, parse_timestamp

COLUMNS = ("timestamp", "ghi", "sza_deg", "saa_deg", "ghi_clr",
           "frame_mean_long", "frame_mean_short")
OPTIONAL = COLUMNS[2:]
GAMMA = 0.1
ROLES = ("train", "validation", "test")


class DatasetError(ValueError):
    pass


class ShortfallError(DatasetError):
    def __init__(self, what: str, requested: int, available: int):
        super().__init__(f"{what}: requested {requested}, only {available} available "
                         f"(short by {requested - available})")
        self.requested = requested
        self.available = available


@dataclass(frozen=True)
class Record:
    timestamp: int
    ghi: float
    sza_deg: float = math.nan
    saa_deg: float = math.nan
    ghi_clr: float = math.nan
    frame_mean_long: float = math.nan
    frame_mean_short: float = math.nan


@dataclass(frozen=True)
class RecordTable:
    """Column-oriented records sorted by timestamp; missing optionals are NaN."""

    timestamp: np.ndarray
    ghi: np.ndarray
    sza_deg: np.ndarray
    saa_deg: np.ndarray
    ghi_clr: np.ndarray
    frame_mean_long: np.ndarray
    frame_mean_short: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.timestamp).size
        for name in COLUMNS:
            dtype = np.int64 if name == "timestamp" else np.float64
            col = np.asarray(getattr(self, name), dtype=dtype).reshape(-1)
            if col.size != n:
                raise DatasetError(f"column {name} has {col.size} rows, expected {n}")
            object.__setattr__(self, name, col)

    @classmethod
    def from_records(cls, records) -> RecordTable:
        records = sorted(records, key=lambda r: r.timestamp)
        return cls(**{c: [getattr(r, c) for r in records] for c in COLUMNS})

    @classmethod
    def from_columns(cls, timestamp, ghi, **optional) -> RecordTable:
        n = np.asarray(timestamp).size
        cols = {c: optional.get(c, np.full(n, np.nan)) for c in OPTIONAL}
        return cls(timestamp=timestamp, ghi=ghi, **cols)

    def __len__(self) -> int:
        return int(self.timestamp.size)

    def __getitem__(self, i: int) -> Record:
        return Record(int(self.timestamp[i]), *(float(getattr(self, c)[i]) for c in COLUMNS[1:]))

    def take(self, index) -> RecordTable:
        return RecordTable(**{c: getattr(self, c)[index] for c in COLUMNS})

    @property
    def years(self) -> np.ndarray:
        return self.timestamp.astype("datetime64[s]").astype("datetime64[Y]").astype(np.int64) + 1970

    @property
    def months(self) -> np.ndarray:
        return self.timestamp.astype("datetime64[s]").astype("datetime64[M]").astype(np.int64) % 12 + 1

    def has(self, column: str) -> bool:
        return bool(np.all(np.isfinite(getattr(self, column)))) and len(self) > 0


def _parse_float(text: str, name: str, lineno: int, path) -> float:
    if text is None or text.strip() == "":
        if name == "ghi":
            raise DatasetError(f"{path}:{lineno}: missing ghi")
        return math.nan
    try:
        v = float(text)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: {name} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DatasetError(f"{path}:{lineno}: {name} is not finite")
    return v


def load_csv(path) -> RecordTable:
    """Read and validate a dataset CSV; rows are returned sorted by time."""
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        missing = [c for c in ("timestamp", "ghi") if c not in header]
        unknown = [c for c in header if c not in COLUMNS]
        if missing or unknown:
            raise DatasetError(f"{path}:1: bad header (missing {missing}, unknown {unknown})")
        pos = {c: header.index(c) for c in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[pos["timestamp"]])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: bad timestamp {row[pos['timestamp']]!r}") from None
            vals = {c: _parse_float(row[pos[c]], c, lineno, path) if c in pos else math.nan
                    for c in COLUMNS[1:]}
            if vals["ghi"] < 0:
                raise DatasetError(f"{path}:{lineno}: negative ghi {vals['ghi']}")
            for c in ("frame_mean_long", "frame_mean_short"):
                v = vals[c]
                if not math.isnan(v) and not 0 <= v <= 255:
                    raise DatasetError(f"{path}:{lineno}: {c} outside [0, 255]")
            if not math.isnan(vals["ghi_clr"]) and vals["ghi_clr"] < 0:
                raise DatasetError(f"{path}:{lineno}: negative ghi_clr")
            records.append((ts, lineno, vals))
    records.sort(key=lambda r: r[0])
    for (t0, l0, _), (t1, l1, _) in zip(records, records[1:]):
        if t0 == t1:
            raise DatasetError(f"{path}:{l1}: duplicate timestamp {format_timestamp(t1)} "
                               f"(first seen on line {l0})")
    return RecordTable.from_columns(
        np.array([r[0] for r in records], dtype=np.int64),
        np.array([r[2]["ghi"] for r in records]),
        **{c: np.array([r[2][c] for r in records]) for c in OPTIONAL})


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_csv(path, table: RecordTable) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        cols = [getattr(table, c).tolist() for c in COLUMNS[1:]]
        for i, ts in enumerate(table.timestamp.tolist()):
            w.writerow([format_timestamp(ts), *(_fmt(c[i]) for c in cols)])


def read_frame_mean(path) -> float:
    """Mean intensity of a raw 8-bit grayscale frame (``P5`` header, then pixel bytes)."""
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DatasetError(f"{path}: truncated frame header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise DatasetError(f"{path}: not a P5 frame")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise DatasetError(f"{path}: only maxval 255 is supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos + 1)
    return float(pixels.mean())


def write_frame(path, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def qc_channel_flags(means, gamma: float = GAMMA) -> np.ndarray:
    """Flag a frame whose mean intensity jumps by more than ``gamma`` times its predecessor's."""
    m = np.asarray(means, dtype=np.float64)
    flags = np.zeros(m.size, dtype=bool)
    if m.size > 1:
        prev, cur = m[:-1], m[1:]
        with np.errstate(invalid="ignore"):
            flags[1:] = (cur - prev) > gamma * prev
        flags[1:] &= np.isfinite(prev) & np.isfinite(cur)
    return flags


def qc_filter(records: RecordTable, gamma: float = GAMMA) -> np.ndarray:
    """Per-record QC flag: true when either exposure channel jumps."""
    return (qc_channel_flags(records.frame_mean_long, gamma)
            | qc_channel_flags(records.frame_mean_short, gamma))


@dataclass(frozen=True)
class SplitSpec:
    role_by_year: dict[int, str]
    sample_counts: dict[str, int]
    min_spacing: int = 240
    sza_max_deg: float = 80.0
    rng_seed: int = 0
    cadence: int = 120
    gamma: float = GAMMA
    sequence_length: int = 100
    sequence_gap: int = 1800
    sequence_count: int = 100
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        # None asks for every available candidate
        if any(c is not None and c < 0 for c in self.sample_counts.values()):
            raise DatasetError("sample counts must be >= 0")
        if self.min_spacing % self.cadence:
            raise DatasetError("min_spacing must be a multiple of the cadence")
        bad = set(self.role_by_year.values()) - set(ROLES)
        if bad:
            raise DatasetError(f"unknown roles {sorted(bad)}")

    def years_for(self, role: str) -> list[int]:
        return sorted(y for y, r in self.role_by_year.items() if r == role)


def role_rng(seed: int, role: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(role.encode())])


def candidate_mask(records: RecordTable, spec: SplitSpec, flags=None) -> np.ndarray:
    if flags is None:
        flags = qc_filter(records, spec.gamma)
    with np.errstate(invalid="ignore"):
        sun_ok = records.sza_deg < spec.sza_max_deg
    return sun_ok & ~np.asarray(flags, dtype=bool)


def thin(timestamps: np.ndarray, index: np.ndarray, min_spacing: int) -> np.ndarray:
    """Keep indices greedily in time order so that kept timestamps are ``min_spacing`` apart."""
    kept = []
    last = None
    for i, t in zip(index.tolist(), timestamps[index].tolist()):
        if last is None or t - last >= min_spacing:
            kept.append(i)
            last = t
    return np.array(kept, dtype=np.int64)


def select_samples(records: RecordTable, spec: SplitSpec, flags=None,
                   require=None) -> dict[str, np.ndarray]:
    """Seeded draw of anchor indices per role from spaced, sunlit, QC-clean records.

    ``require`` optionally narrows the candidates further (e.g. to anchors
    whose feature window is complete).
    """
    ok = candidate_mask(records, spec, flags)
    if require is not None:
        ok = ok & np.asarray(require, dtype=bool)
    years = records.years
    out = {}
    for role in ROLES:
        if role not in spec.sample_counts:
            continue
        count = spec.sample_counts[role]
        in_role = ok & np.isin(years, spec.years_for(role))
        cands = thin(records.timestamp, np.flatnonzero(in_role), spec.min_spacing)
        if count is None:
            count = int(cands.size)
        if cands.size < count:
            raise ShortfallError(f"{role} samples", count, int(cands.size))
        pick = role_rng(spec.rng_seed, role).choice(cands.size, size=count, replace=False)
        out[role] = np.sort(cands[pick])
    return out


@dataclass(frozen=True)
class SequenceSet:
    starts: np.ndarray  # index of the first record of each window
    length: int
    inter_sequence_gap: int

    @property
    def count(self) -> int:
        return int(self.starts.size)

    @property
    def windows(self) -> list[np.ndarray]:
        return [np.arange(s, s + self.length) for s in self.starts.tolist()]


def eligible_windows(records: RecordTable, spec: SplitSpec, years=None,
                     mask=None) -> np.ndarray:
    """Start indices of all contiguous windows whose last record has the sun high enough."""
    L = spec.sequence_length
    with np.errstate(invalid="ignore"):
        sun_ok = records.sza_deg < spec.sza_max_deg
    ok_rec = np.ones(len(records), bool) if mask is None else np.asarray(mask, bool)
    if years is not None:
        ok_rec = ok_rec & np.isin(records.years, list(years))
    bad_prefix = np.concatenate(([0], np.cumsum(~ok_rec)))
    starts = []
    for lo, hi in contiguous_runs(records.timestamp, spec.cadence):
        if hi - lo < L:
            continue
        s = np.arange(lo, hi - L + 1)
        good = sun_ok[s + L - 1] & (bad_prefix[s + L] - bad_prefix[s] == 0)
        starts.append(s[good])
    return np.concatenate(starts) if starts else np.zeros(0, np.int64)


def build_sequences(records: RecordTable, spec: SplitSpec, role: str | None = None,
                    mask=None, count: int | None = None) -> SequenceSet:
    """Seeded choice of non-overlapping windows, at least ``sequence_gap`` seconds apart."""
    count = spec.sequence_count if count is None else count
    years = spec.years_for(role) if role is not None else None
    starts = eligible_windows(records, spec, years, mask)
    order = role_rng(spec.rng_seed, f"sequences:{role or 'all'}").permutation(starts.size)
    ts = records.timestamp
    L = spec.sequence_length
    gap = spec.sequence_gap
    taken_start: list[int] = []  # window start times, kept sorted
    taken_end: list[int] = []
    chosen = []
    for k in order.tolist():
        if len(chosen) == count:
            break
        s = int(starts[k])
        t0, t1 = int(ts[s]), int(ts[s + L - 1])
        pos = bisect.bisect_left(taken_start, t0)
        if pos > 0 and t0 - taken_end[pos - 1] < gap:
            continue
        if pos < len(taken_start) and taken_start[pos] - t1 < gap:
            continue
        taken_start.insert(pos, t0)
        taken_end.insert(pos, t1)
        chosen.append(s)
    if len(chosen) < count:
        raise ShortfallError("sequence windows", count, len(chosen))
    return SequenceSet(np.sort(np.array(chosen, dtype=np.int64)), L, gap)


def split_stats(records: RecordTable, indices, sza_max: float = 80.0, bins: int = 10) -> dict:
    """Month histogram (1..12) and equal-width SZA-bin histogram over ``[0, sza_max)``."""
    idx = np.asarray(indices, dtype=np.int64)
    months = np.bincount(records.months[idx], minlength=13)[1:13] if idx.size else np.zeros(12, int)
    sza = records.sza_deg[idx]
    sza = sza[np.isfinite(sza)]
    edges = np.linspace(0.0, sza_max, bins + 1)
    sza_counts = np.histogram(np.clip(sza, 0, np.nextafter(sza_max, 0)), bins=edges)[0] \
        if sza.size else np.zeros(bins, int)
    return {"month": months.astype(int).tolist(), "sza_bins": edges.tolist(),
            "sza": sza_counts.astype(int).tolist()}


def write_split_stats(path, stats_by_role: dict[str, dict]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["role", "histogram", "bin", "count"])
        for role, st in stats_by_role.items():
            for m, c in enumerate(st["month"], start=1):
                w.writerow([role, "month", m, c])
            edges = st["sza_bins"]
            for k, c in enumerate(st["sza"]):
                w.writerow([role, "sza", f"{edges[k]:g}-{edges[k + 1]:g}", c])
