"""Cumulative-counting analysis of enter/leave logs from an observed trail section.

Input is a time-ordered list of enter/leave events per direction. Because
ants on a trail do not overtake, the n-th ant entering in one direction is
the n-th one leaving, which restores per-ant passages. From those follow
travel times, velocities, time- and distance-headways, and the time
averaged number of own-direction and counterflow ants each ant shared the
section with.

Times are in seconds and lengths in body lengths. The section length in
body lengths doubles as its capacity in sites, so densities are
comparable with lattice densities ``N / L``.
"""
from __future__ import annotations

import csv
import io
import math
import os
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (EmptyInput, EmptyInterval, MissingPredecessor,
                     NegativeCount, NonPositiveSample, NonPositiveTravelTime,
                     ParseError, UnsortedInputWarning)

DIRECTIONS = ("R", "L")
KINDS = ("enter", "leave")
EVENT_HEADER = ("t", "direction", "event")
METRICS_HEADER = ("n", "direction", "t_plus", "t_minus", "travel_time",
                  "velocity", "dt_enter", "dt_leave", "dd", "N_own", "N_cf",
                  "rho", "rho_cf", "class")


@dataclass(frozen=True)
class EventRecord:
    t: float
    direction: str
    kind: str


@dataclass
class EventLog:
    """Time-sorted events; ``section_length`` in body lengths (optional)."""

    records: list = field(default_factory=list)
    section_length: float | None = None

    def __post_init__(self):
        self.validate()

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def times(self):
        return np.array([r.t for r in self.records], dtype=float)

    def validate(self, lines=None):
        last = -math.inf
        count = dict.fromkeys(DIRECTIONS, 0)
        for k, r in enumerate(self.records):
            line = lines[k] if lines is not None else None
            if not (math.isfinite(r.t) and r.t >= 0):
                raise ParseError(f"time must be finite and >= 0, got {r.t}", line)
            if r.direction not in DIRECTIONS:
                raise ParseError(f"direction must be R or L, got {r.direction!r}", line)
            if r.kind not in KINDS:
                raise ParseError(f"event must be enter or leave, got {r.kind!r}", line)
            if r.t < last:
                raise ParseError("events are not sorted by time", line)
            last = r.t
            count[r.direction] += 1 if r.kind == "enter" else -1
            if count[r.direction] < 0:
                raise NegativeCount(
                    f"{r.direction} leave at t={r.t} with no ant inside", line)

    def max_count(self, direction):
        n = best = 0
        for r in self.records:
            if r.direction == direction:
                n += 1 if r.kind == "enter" else -1
                best = max(best, n)
        return best

    def to_csv(self, fh=None):
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        for r in self.records:
            w.writerow((repr(float(r.t)), r.direction, r.kind))
        if fh is None:
            return buf.getvalue()


def load_events(source, section_length=None):
    """Read an event CSV (``t,direction,event``) from a path or open file.

    Out-of-order rows are stably sorted by time with an
    :class:`UnsortedInputWarning`. Line numbers in errors count the header
    as line 1.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_events(fh, section_length)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != EVENT_HEADER:
        raise ParseError(f"expected header {','.join(EVENT_HEADER)}", 1)
    records, lines = [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line)
        t_s, d, k = (c.strip() for c in row)
        try:
            t = float(t_s)
        except ValueError:
            raise ParseError(f"bad time {t_s!r}", line) from None
        if d not in DIRECTIONS:
            raise ParseError(f"direction must be R or L, got {d!r}", line)
        if k not in KINDS:
            raise ParseError(f"event must be enter or leave, got {k!r}", line)
        if not (math.isfinite(t) and t >= 0):
            raise ParseError(f"time must be finite and >= 0, got {t_s}", line)
        records.append(EventRecord(t, d, k))
        lines.append(line)
    order = sorted(range(len(records)), key=lambda i: records[i].t)
    if order != list(range(len(records))):
        warnings.warn("event rows not in time order; sorted", UnsortedInputWarning,
                      stacklevel=2)
        records = [records[i] for i in order]
        lines = [lines[i] for i in order]
    log = EventLog.__new__(EventLog)
    log.records = records
    log.section_length = section_length
    log.validate(lines)
    return log


@dataclass(frozen=True)
class PairedPassage:
    n: int
    direction: str
    t_plus: float
    t_minus: float


@dataclass
class UTurnReport:
    """Per-direction enter counts and enters left without a matching leave.

    Unmatched enters are ants still inside when the log ends or ants that
    turned back; they are excluded from per-ant metrics.
    """

    entered: dict
    unmatched: dict

    def rate(self, direction):
        n = self.entered[direction]
        return self.unmatched[direction] / n if n else 0.0


def pair_passages(log):
    """Match the k-th enter with the k-th leave per direction (FIFO)."""
    enters = {d: [] for d in DIRECTIONS}
    leaves = {d: [] for d in DIRECTIONS}
    for r in log:
        (enters if r.kind == "enter" else leaves)[r.direction].append(r.t)
    pairs = []
    for d in DIRECTIONS:
        for n, (tp, tm) in enumerate(zip(enters[d], leaves[d]), start=1):
            pairs.append(PairedPassage(n, d, tp, tm))
    pairs.sort(key=lambda p: (p.t_plus, p.direction))
    report = UTurnReport(
        {d: len(enters[d]) for d in DIRECTIONS},
        {d: len(enters[d]) - len(leaves[d]) for d in DIRECTIONS},
    )
    return pairs, report


def travel_time_velocity(pairs, section_length):
    if section_length <= 0:
        raise ValueError("section_length must be positive")
    dT = np.array([p.t_minus - p.t_plus for p in pairs], dtype=float)
    bad = np.flatnonzero(dT <= 0)
    if bad.size:
        p = pairs[bad[0]]
        raise NonPositiveTravelTime(
            f"ant {p.direction}{p.n}: leave at {p.t_minus} not after enter at {p.t_plus}")
    return dT, section_length / dT


def _predecessors(pairs):
    """Index of the previous same-direction passage, -1 for the first."""
    last = {}
    prev = np.full(len(pairs), -1)
    for k in sorted(range(len(pairs)), key=lambda k: (pairs[k].direction, pairs[k].n)):
        d = pairs[k].direction
        prev[k] = last.get(d, -1)
        last[d] = k
    return prev


class Headways(NamedTuple):
    headway: np.ndarray
    flow: np.ndarray
    duplicate: np.ndarray


def time_headways(pairs, boundary="enter"):
    """Time-headways at the enter or leave boundary and their inverse (flow).

    Arrays align with ``pairs``; the first ant of a direction has NaN.
    A zero headway (duplicate timestamp) gets NaN flow and is flagged.
    """
    attr = {"enter": "t_plus", "leave": "t_minus"}[boundary]
    prev = _predecessors(pairs)
    h = np.full(len(pairs), np.nan)
    for k, j in enumerate(prev):
        if j >= 0:
            h[k] = getattr(pairs[k], attr) - getattr(pairs[j], attr)
    dup = h == 0
    with np.errstate(divide="ignore"):
        flow = np.where(dup, np.nan, 1.0 / h)
    return Headways(h, flow, dup)


def distance_headway(pairs, velocities, k):
    """Distance to the predecessor of passage ``k`` in body lengths."""
    j = _predecessors(pairs)[k]
    if j < 0:
        raise MissingPredecessor(f"ant {pairs[k].direction}{pairs[k].n} has no predecessor")
    return (pairs[k].t_plus - pairs[j].t_plus) * velocities[j]


def distance_headways(pairs, velocities):
    """Entry headway times the predecessor's velocity, per passage.

    Returns ``(dd, degenerate)``; first ants get NaN, and a zero
    predecessor velocity gives ``dd = 0`` flagged as degenerate.
    """
    velocities = np.asarray(velocities, dtype=float)
    prev = _predecessors(pairs)
    dd = np.full(len(pairs), np.nan)
    for k, j in enumerate(prev):
        if j >= 0:
            dd[k] = (pairs[k].t_plus - pairs[j].t_plus) * velocities[j]
    degenerate = np.zeros(len(pairs), dtype=bool)
    has_prev = prev >= 0
    degenerate[has_prev] = velocities[prev[has_prev]] == 0
    return dd, degenerate


class StepFunction:
    """Right-continuous integer step function, zero before the first jump."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=np.int64)

    def __call__(self, t):
        k = np.searchsorted(self.times, t, side="right") - 1
        if self.values.size == 0:
            return np.zeros(np.shape(t), dtype=np.int64) if np.ndim(t) else 0
        out = np.where(k >= 0, self.values[np.maximum(k, 0)], 0)
        return out if np.ndim(t) else int(out)


def instantaneous_counts(log):
    """Number of ants inside per direction, ``n_plus(t) - n_minus(t)``."""
    out = {}
    for d in DIRECTIONS:
        times, values = [], []
        n = 0
        for r in log:
            if r.direction != d:
                continue
            n += 1 if r.kind == "enter" else -1
            if times and times[-1] == r.t:
                values[-1] = n
            else:
                times.append(r.t)
                values.append(n)
        out[d] = StepFunction(times, values)
    return out


def merged_times(log):
    """Sorted distinct event times over both directions."""
    return np.unique(log.times)


def averaged_counts(pair, counts, times=None):
    """Time-averaged own and counterflow counts while ``pair`` is inside.

    Sums ``N(t_i) * (t_{i+1} - t_i)`` over merged event times in
    ``[t_plus, t_minus)``, the last interval cut at ``t_minus``, and divides
    by the travel time. ``times`` is the merged event-time list; when
    omitted the jump times of ``counts`` are used.
    """
    t0, t1 = pair.t_plus, pair.t_minus
    if not t1 > t0:
        raise EmptyInterval(f"empty interval [{t0}, {t1})")
    if times is None:
        times = np.union1d(counts["R"].times, counts["L"].times)
    lo = np.searchsorted(times, t0, side="left")
    hi = np.searchsorted(times, t1, side="left")
    grid = np.concatenate(([t0], times[lo:hi], [t1]))
    grid = grid[np.concatenate(([True], np.diff(grid) > 0))]
    left = grid[:-1]
    widths = np.diff(grid)
    own = pair.direction
    other = "L" if own == "R" else "R"
    A = float(np.sum(counts[own](left) * widths))
    B = float(np.sum(counts[other](left) * widths))
    dT = t1 - t0
    return A / dT, B / dT


def dimensionless_densities(n_own, n_cf, section_length):
    if section_length <= 0:
        raise ValueError("section_length must be positive")
    return n_own / section_length, n_cf / section_length


def classify_counterflow(n_cf, threshold=1.0):
    """``"uni"`` if the mean counterflow count is below ``threshold``, else ``"bi"``."""
    return "uni" if n_cf < threshold else "bi"


def _positive(samples, minimum=2):
    x = np.asarray(samples, dtype=float)
    if x.size < minimum:
        raise EmptyInput(f"need at least {minimum} samples, got {x.size}")
    if np.any(~(x > 0)):
        raise NonPositiveSample("samples must be positive")
    return x


def fit_negative_exponential(samples):
    """Maximum-likelihood rate of an exponential distribution."""
    return 1.0 / _positive(samples).mean()


def fit_lognormal(samples):
    """Maximum-likelihood ``(mu, sigma)`` of a log-normal distribution."""
    logs = np.log(_positive(samples))
    return float(logs.mean()), float(logs.std())


class Summary(NamedTuple):
    bins: list  # (lo, hi, count)
    mean: float
    variance: float


def bin_index(x, width):
    """Half-open bin ``[k*w, (k+1)*w)``; values on an edge go to the upper bin.

    A ratio ``x / w`` within 1e-9 (relative) of an integer counts as on
    the edge, so 0.3 with width 0.1 lands in bin 3.
    """
    r = x / width
    k = round(r)
    if abs(r - k) <= 1e-9 * max(1.0, abs(r)):
        return int(k)
    return math.floor(r)


def distribution_summary(values, bin_width):
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise EmptyInput("no values to summarize")
    ks = [bin_index(v, bin_width) for v in x]
    lo_k, hi_k = min(ks), max(ks)
    counts = np.bincount(np.array(ks) - lo_k, minlength=hi_k - lo_k + 1)
    bins = [(k * bin_width, (k + 1) * bin_width, int(c))
            for k, c in zip(range(lo_k, hi_k + 1), counts)]
    var = float(x.var(ddof=1)) if x.size > 1 else 0.0
    return Summary(bins, float(x.mean()), var)


@dataclass
class AntMetrics:
    n: int
    direction: str
    t_plus: float
    t_minus: float
    travel_time: float
    velocity: float
    dt_enter: float
    dt_leave: float
    dd: float
    N_own: float
    N_cf: float
    rho: float
    rho_cf: float
    cls: str

    def as_row(self):
        row = asdict(self)
        row["class"] = row.pop("cls")
        return row


def compute_metrics(log, section_length=None, threshold=1.0):
    """All per-ant quantities for paired passages of ``log``.

    Returns ``(metrics, report)`` with metrics ordered by entry time.
    """
    L = log.section_length if section_length is None else section_length
    if L is None:
        raise ValueError("section length required")
    pairs, report = pair_passages(log)
    if not pairs:
        return [], report
    dT, v = travel_time_velocity(pairs, L)
    h_in = time_headways(pairs, "enter").headway
    h_out = time_headways(pairs, "leave").headway
    dd, _ = distance_headways(pairs, v)
    counts = instantaneous_counts(log)
    times = merged_times(log)
    out = []
    for k, p in enumerate(pairs):
        n_own, n_cf = averaged_counts(p, counts, times)
        rho, rho_cf = dimensionless_densities(n_own, n_cf, L)
        out.append(AntMetrics(p.n, p.direction, p.t_plus, p.t_minus, float(dT[k]),
                              float(v[k]), float(h_in[k]), float(h_out[k]),
                              float(dd[k]), n_own, n_cf, rho, rho_cf,
                              classify_counterflow(n_cf, threshold)))
    return out, report


def _cell(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(x)
    return "" if math.isnan(x) else format(x, ".10g")


def write_metrics_csv(metrics, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for m in metrics:
        row = m.as_row()
        w.writerow([_cell(row[c]) for c in METRICS_HEADER])


def write_histogram_csv(summary, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("bin_lo", "bin_hi", "count"))
    for lo, hi, c in summary.bins:
        w.writerow((format(lo, ".10g"), format(hi, ".10g"), c))
