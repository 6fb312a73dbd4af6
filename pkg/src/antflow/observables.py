"""Stationary measurements, fundamental-diagram sweeps and lattice statistics."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .dynamics import DIRECTIONS, Snapshot, TrailState, new_state, run
from .errors import DomainError, EmptyTrajectory, TooFewAnts

FD_COLUMNS = ("rho_R", "rho_L", "f", "V_R", "V_L", "F_R", "F_L", "F_tot",
              "F_eff", "stderr_V_R", "stderr_V_L", "n_replicas")

# Raster cell codes and their grey levels in the exported graymap.
EMPTY, MARK, ANT_R, ANT_L, ANT_BOTH = 0, 1, 2, 3, 4
GREY_LEVELS = np.array([255, 192, 0, 128, 64], dtype=np.uint8)


def tasep_exact(p, rho):
    """Exact stationary velocity and flow of the ring TASEP.

    >>> tasep_exact(0.9, 0.5)
    (0.45, 0.225)
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"rate {p} outside [0, 1]")
    if not 0.0 <= rho <= 1.0:
        raise DomainError(f"density {rho} outside [0, 1]")
    v = p * (1.0 - rho)
    return v, rho * v


def total_effective_flow(F_R, F_L):
    return F_R + F_L, F_R - F_L


@dataclass
class FdPoint:
    """One stationary measurement.

    Flows are computed as ``F = rho * V`` with ``rho = N / L`` and
    ``V = hops / (N * T)``; this equals ``hops / (L * T)`` up to one
    rounding and makes ``F - rho * V`` vanish exactly. A direction without
    ants reports ``V = F = 0`` and sets the matching ``empty_*`` flag.
    """

    rho_R: float
    rho_L: float
    f: float
    V_R: float
    V_L: float
    F_R: float
    F_L: float
    F_tot: float
    F_eff: float
    stderr_V_R: float = math.nan
    stderr_V_L: float = math.nan
    n_replicas: int = 1
    empty_R: bool = False
    empty_L: bool = False

    @property
    def stderr_F_R(self):
        return self.rho_R * self.stderr_V_R

    @property
    def stderr_F_L(self):
        return self.rho_L * self.stderr_V_L

    def as_row(self):
        return {c: getattr(self, c) for c in FD_COLUMNS}


def _point(rho_R, rho_L, f, V_R, V_L, **extra):
    F_R = rho_R * V_R
    F_L = rho_L * V_L
    F_tot, F_eff = total_effective_flow(F_R, F_L)
    return FdPoint(rho_R, rho_L, f, V_R, V_L, F_R, F_L, F_tot, F_eff,
                   empty_R=rho_R == 0, empty_L=rho_L == 0, **extra)


def stationary_averages(trajectory):
    T = trajectory.measure_sweeps
    if T == 0:
        raise EmptyTrajectory("trajectory has no measurement sweeps")
    L = trajectory.L
    hops = trajectory.counts[:, :2].sum(axis=0)
    V = [float(hops[d] / (n * T)) if n else 0.0
         for d, n in enumerate((trajectory.n_right, trajectory.n_left))]
    f = trajectory.params.f if trajectory.mode != "tasep" else math.nan
    return _point(trajectory.n_right / L, trajectory.n_left / L, f, V[0], V[1])


def combine_replicas(points):
    """Average replica measurements of one cell; errors are standard errors."""
    points = list(points)
    if not points:
        raise EmptyTrajectory("no replicas to combine")
    n = len(points)
    V_R = np.array([p.V_R for p in points])
    V_L = np.array([p.V_L for p in points])

    def sem(x):
        return float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan

    p0 = points[0]
    return _point(p0.rho_R, p0.rho_L, p0.f, float(V_R.mean()), float(V_L.mean()),
                  stderr_V_R=sem(V_R), stderr_V_L=sem(V_L), n_replicas=n)


@dataclass
class FdTable:
    points: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def sorted(self):
        key = lambda p: (_nan_last(p.f), p.rho_L, p.rho_R)  # noqa: E731
        return FdTable(sorted(self.points, key=key), dict(self.meta))

    def lookup(self, rho_R, rho_L=0.0, f=None, tol=1e-9):
        for p in self.points:
            if (abs(p.rho_R - rho_R) < tol and abs(p.rho_L - rho_L) < tol
                    and (f is None or abs(p.f - f) < tol)):
                return p
        raise KeyError((rho_R, rho_L, f))

    def to_csv(self, fh=None):
        """Write the table; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FD_COLUMNS)
        for p in self.points:
            w.writerow(format_row(p))
        if fh is None:
            return buf.getvalue()

    @classmethod
    def from_csv(cls, fh):
        points = []
        for row in csv.DictReader(fh):
            vals = {c: float(row[c]) for c in FD_COLUMNS[:-1]}
            points.append(FdPoint(**vals, n_replicas=int(row["n_replicas"]),
                                  empty_R=vals["rho_R"] == 0,
                                  empty_L=vals["rho_L"] == 0))
        return cls(points)


def _nan_last(x):
    return math.inf if math.isnan(x) else x


def fmt(x):
    return format(x, ".6g")


def format_row(p):
    return [fmt(getattr(p, c)) for c in FD_COLUMNS[:-1]] + [str(p.n_replicas)]


def replica_seed(master_seed, cell_index, replica):
    """Independent stream for one (cell, replica) task."""
    return np.random.SeedSequence(master_seed, spawn_key=(cell_index, replica))


def _replica_task(task):
    cell_index, replica, params, mode, n_right, n_left, master_seed, warmup, measure = task
    state = new_state(params, n_right, n_left,
                      replica_seed(master_seed, cell_index, replica), mode)
    return stationary_averages(run(state, warmup, measure))


def cell_counts(L, rho_R, rho_L):
    for rho in (rho_R, rho_L):
        if not 0.0 <= rho <= 1.0:
            raise DomainError(f"density {rho} outside [0, 1]")
    return int(round(rho_R * L)), int(round(rho_L * L))


def fundamental_diagram_sweep(cells, params, mode="uni", replicas=1, seed=0,
                              warmup=None, measure=1000, workers=1,
                              cell_indices=None, on_cell=None):
    """Measure one :class:`FdPoint` per ``(rho_R, rho_L, f)`` cell.

    Every (cell, replica) task draws its random stream from
    ``(seed, cell_index, replica)``, so results do not depend on
    ``workers`` or on execution order. ``cell_indices`` pins the index used
    for seeding (defaults to the position in ``cells``), which lets a
    partial re-run reproduce a full one. ``warmup`` defaults to ``10 * L``.
    ``on_cell(index, point)`` is called as each cell completes, in order.
    """
    cells = [tuple(c) for c in cells]
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    if cell_indices is None:
        cell_indices = list(range(len(cells)))
    L = params.L
    warmup = 10 * L if warmup is None else warmup
    tasks = []
    for idx, (rho_R, rho_L, f) in zip(cell_indices, cells):
        n_right, n_left = cell_counts(L, rho_R, rho_L)
        cell_params = replace(params, f=f)
        cell_params.validate(mode)
        for r in range(replicas):
            tasks.append((idx, r, cell_params, mode, n_right, n_left, seed,
                          warmup, measure))
    meta = {"params": params, "mode": mode, "replicas": replicas, "seed": seed,
            "warmup": warmup, "measure": measure}
    if not tasks:
        return FdTable([], meta)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = ex.map(_replica_task, tasks, chunksize=1)
            points = _group(results, cell_indices, replicas, on_cell)
    else:
        points = _group(map(_replica_task, tasks), cell_indices, replicas, on_cell)
    return FdTable(points, meta)


def _group(results, cell_indices, replicas, on_cell):
    points = []
    batch = []
    for res in results:
        batch.append(res)
        if len(batch) == replicas:
            point = combine_replicas(batch)
            if on_cell is not None:
                on_cell(cell_indices[len(points)], point)
            points.append(point)
            batch = []
    return points


def spacetime_raster(trajectory):
    """Cell codes per snapshot (rows) and site (columns).

    Codes: 0 empty, 1 mark only, 2 right-mover, 3 left-mover, 4 both.
    """
    snaps = trajectory.snapshots if hasattr(trajectory, "snapshots") else trajectory
    if not snaps:
        raise EmptyTrajectory("trajectory has no snapshots")
    rows = []
    for s in snaps:
        row = np.where(s.marked, MARK, EMPTY).astype(np.uint8)
        row[s.occ_R] = ANT_R
        row[s.occ_L] = ANT_L
        row[s.occ_R & s.occ_L] = ANT_BOTH
        rows.append(row)
    return np.vstack(rows)


def raster_to_pgm(raster):
    """Binary graymap (P5) bytes, grey levels from :data:`GREY_LEVELS`."""
    raster = np.asarray(raster)
    h, w = raster.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + GREY_LEVELS[raster].tobytes()


def write_pgm(raster, path):
    with open(path, "wb") as fh:
        fh.write(raster_to_pgm(raster))


def write_raster_csv(raster, path):
    np.savetxt(path, np.asarray(raster), fmt="%d", delimiter=",")


def _occupancy(snapshot, direction):
    d = DIRECTIONS[direction]
    if isinstance(snapshot, (Snapshot, TrailState)):
        return np.asarray(snapshot.occ_R if d == 0 else snapshot.occ_L, dtype=bool)
    return np.asarray(snapshot, dtype=bool)


def sim_distance_headways(snapshot, direction="R"):
    """Empty sites between consecutive same-direction ants around the ring.

    Gaps are listed starting from the lowest-index ant and follow the
    travel order of right-movers; ``gaps.sum() + N == L``.
    """
    occ = _occupancy(snapshot, direction)
    pos = np.flatnonzero(occ)
    if pos.size < 2:
        raise TooFewAnts(f"need at least two ants, got {pos.size}")
    return np.diff(np.append(pos, pos[0] + occ.size)) - 1


class ClusterStats(NamedTuple):
    cluster_count: int
    largest_cluster_fraction: float


def cluster_stats(snapshot, direction="R", gap_threshold=5):
    """Count circular runs of ants whose internal gaps are <= ``gap_threshold``.

    A ring with no gap wider than the threshold is one cluster.
    """
    if gap_threshold < 1:
        raise DomainError("gap_threshold must be >= 1")
    occ = _occupancy(snapshot, direction)
    n = int(occ.sum())
    if n == 0:
        return ClusterStats(0, 0.0)
    if n == 1:
        return ClusterStats(1, 1.0)
    gaps = sim_distance_headways(occ)
    breaks = np.flatnonzero(gaps > gap_threshold)
    if breaks.size == 0:
        return ClusterStats(1, 1.0)
    # gap k follows ant k; a cluster runs from just after one break to the next
    sizes = np.diff(np.append(breaks, breaks[0] + n))
    return ClusterStats(int(breaks.size), float(sizes.max() / n))
