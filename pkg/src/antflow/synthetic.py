"""Event logs with known ground truth, from the simulator or constructed directly."""
from __future__ import annotations

import numpy as np

from .dynamics import observe_section
from .empirics import EventLog, EventRecord


def _log_from_rows(rows, section_length):
    # same-time events: enters before leaves keeps counts non-negative
    rows = sorted(rows, key=lambda r: (r[0], r[2] == "leave"))
    return EventLog([EventRecord(float(t), d, k) for t, d, k in rows], section_length)


def section_event_log(record, time_scale=1.0):
    """Convert a :class:`~antflow.dynamics.SectionRecord` to an EventLog.

    ``time_scale`` is seconds per sweep; the section length in body
    lengths is its size in sites.
    """
    rows = [(t * time_scale, str(d), str(k))
            for t, d, k in zip(record.time, record.direction, record.kind)]
    return _log_from_rows(rows, float(record.stop - record.start))


def simulated_log(state, sweeps, start, stop, time_scale=1.0):
    """Run ``state`` while observing ``[start, stop)``.

    Returns ``(log, truth)`` where ``truth`` maps direction to the list of
    ``(t_enter, t_leave)`` in seconds, in order of entry.
    """
    record = observe_section(state, sweeps, start, stop)
    truth = {"R": [], "L": []}
    for d, _, t0, t1 in record.passages():
        truth[d].append((t0 * time_scale, t1 * time_scale))
    return section_event_log(record, time_scale), truth


def constant_velocity_log(entries, section_length, velocity):
    """Every ant crosses in ``section_length / velocity``.

    ``entries`` maps direction to entry times.
    """
    dT = section_length / velocity
    rows, truth = [], {}
    for d, ts in entries.items():
        ts = sorted(ts)
        truth[d] = [(t, t + dT) for t in ts]
        for t in ts:
            rows += [(t, d, "enter"), (t + dT, d, "leave")]
    return _log_from_rows(rows, section_length), truth


def random_fifo_log(rng, n_right, n_left, section_length=10.0, resolution=1 / 64,
                    mean_gap=8, mean_travel=40, unmatched=0):
    """Random overtaking-free log with all times on a ``resolution`` grid.

    Entry gaps and travel times are drawn in grid units; a leave that would
    precede its predecessor's leave is pushed one unit after it, so FIFO
    order holds. ``unmatched`` trailing enters per direction are left open.
    Returns ``(log, truth)``.
    """
    rows, truth = [], {}
    for d, n in (("R", n_right), ("L", n_left)):
        enter = np.cumsum(rng.integers(1, 2 * mean_gap, size=n + unmatched))
        travel = rng.integers(1, 2 * mean_travel, size=n)
        leave = enter[:n] + travel
        for k in range(1, n):
            leave[k] = max(leave[k], leave[k - 1] + 1)
        truth[d] = [(e * resolution, l * resolution) for e, l in zip(enter[:n], leave)]
        rows += [(e * resolution, d, "enter") for e in enter]
        rows += [(l * resolution, d, "leave") for l in leave]
    return _log_from_rows(rows, section_length), truth
