"""Stochastic ring-lattice dynamics: TASEP, unidirectional and bidirectional
ant-trail models under random-sequential update.

One sweep is ``L`` elementary updates and advances the clock by one time
unit. Pheromone marks left behind by an ant get an exponentially
distributed lifetime at the moment the site is vacated, so the survival
probability after an elapsed time ``t`` is exactly ``(1 - f)**t``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .errors import DomainError, ExcessOccupancy, InvalidRates, NoAntAtSite

MODES = {"tasep": _k.TASEP, "uni": _k.UNI, "bi": _k.BI}
DIRECTIONS = {"R": _k.RIGHT, "L": _k.LEFT}
_DIR_NAMES = {_k.RIGHT: "R", _k.LEFT: "L", -1: None}
_OUTCOMES = {
    _k.NOOP: "no-op",
    _k.HOPPED: "hopped",
    _k.BLOCKED: "blocked",
    _k.STAYED: "stayed",
    _k.EVAPORATED: "evaporated",
}
_RATES = {_k.RATE_NONE: None, _k.RATE_SMALL_Q: "q", _k.RATE_BIG_Q: "Q", _k.RATE_K: "K"}

_NO_SECTION = np.array([-1, 0, 0], dtype=np.int64)
_NO_BUFFER = np.zeros((0, 4), dtype=np.int64)


@dataclass(frozen=True)
class ModelParams:
    """Lattice length and hopping/evaporation probabilities.

    In ``tasep`` mode ``q`` is the single hopping probability; ``Q``, ``K``
    and ``f`` are ignored.
    """

    L: int
    q: float
    Q: float = 1.0
    K: float = 0.0
    f: float = 0.0

    def validate(self, mode="uni"):
        if mode not in MODES:
            raise DomainError(f"unknown mode {mode!r}")
        if int(self.L) != self.L or self.L < 2:
            raise InvalidRates(f"L must be an integer >= 2, got {self.L}")
        for name in ("q", "Q", "K", "f"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidRates(f"{name}={v} outside [0, 1]")
        if mode == "uni" and not self.q <= self.Q:
            raise InvalidRates(f"uni mode needs q <= Q, got q={self.q}, Q={self.Q}")
        if mode == "bi" and not (self.K < self.q < self.Q):
            raise InvalidRates(
                f"bi mode needs K < q < Q, got K={self.K}, q={self.q}, Q={self.Q}")
        return self


@dataclass
class UpdateEvent:
    site: int
    direction: str | None
    outcome: str
    rate_used: str | None


@dataclass
class SweepStats:
    hops_R: int = 0
    hops_L: int = 0
    attempts_R: int = 0
    attempts_L: int = 0


@dataclass
class Snapshot:
    clock: float
    occ_R: np.ndarray
    occ_L: np.ndarray
    marked: np.ndarray

    @property
    def L(self):
        return self.occ_R.size


@dataclass
class Trajectory:
    """Measurement-phase record of a run.

    ``counts`` has one row per measurement sweep with columns
    ``hops_R, hops_L, attempts_R, attempts_L``.
    """

    params: ModelParams
    mode: str
    n_right: int
    n_left: int
    warmup_sweeps: int
    record_interval: int
    counts: np.ndarray
    snapshots: list = field(default_factory=list)

    @property
    def L(self):
        return self.params.L

    @property
    def measure_sweeps(self):
        return len(self.counts)

    def sweep_stats(self):
        return [SweepStats(*map(int, row)) for row in self.counts]


class TrailState:
    """Mutable lattice configuration plus its random generator and clock.

    Instances are single-owner. They pickle cleanly, so replicas can be
    shipped to worker processes.
    """

    def __init__(self, params, mode, ant, kind, vstep, life, step, rng):
        self.params = params
        self.mode = mode
        self.ant = ant
        self.kind = kind
        self.vstep = vstep
        self.life = life
        self.step = step
        self.rng = rng

    @property
    def L(self):
        return self.params.L

    @property
    def clock(self):
        """Elapsed time in sweeps."""
        return self.step[0] / self.params.L

    @property
    def occ_R(self):
        return self.ant[_k.RIGHT] >= 0

    @property
    def occ_L(self):
        return self.ant[_k.LEFT] >= 0

    @property
    def n_right(self):
        return int(np.count_nonzero(self.occ_R))

    @property
    def n_left(self):
        return int(np.count_nonzero(self.occ_L))

    def marks_present(self, t_query=None):
        """Boolean array of sites carrying a live mark at ``t_query``."""
        if self.mode == "tasep":
            return np.zeros(self.L, dtype=bool)
        t = self.clock if t_query is None else t_query
        vacate_time = self.vstep / self.L
        return (self.kind == _k.OCCUPIED) | (
            (self.kind == _k.VACATED) & (t - vacate_time < self.life))

    def vacate(self, sites):
        """Put ``sites`` into the vacated state now, sampling fresh lifetimes.

        Used to probe the evaporation law directly; sites must be empty.
        """
        sites = np.atleast_1d(np.asarray(sites, dtype=np.int64))
        if np.any(self.ant[:, sites] >= 0):
            raise DomainError("cannot vacate an occupied site")
        _k.vacate_sites(sites, self.kind, self.vstep, self.life,
                        self.step[0], float(self.params.f), self.rng)

    def snapshot(self):
        return Snapshot(self.clock, self.occ_R.copy(), self.occ_L.copy(),
                        self.marks_present())

    def copy(self):
        return copy.deepcopy(self)

    def __repr__(self):
        return (f"TrailState(mode={self.mode!r}, L={self.L}, N_R={self.n_right}, "
                f"N_L={self.n_left}, clock={self.clock:g})")


def new_state(params, n_right, n_left=0, seed=None, mode="uni"):
    """Place ants uniformly at random on fresh lattices.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence`, or an
    existing :class:`numpy.random.Generator` (used as-is).
    """
    params.validate(mode)
    L = int(params.L)
    if n_right > L or n_left > L:
        raise ExcessOccupancy(f"at most {L} ants per direction, got "
                              f"n_right={n_right}, n_left={n_left}")
    if n_right < 0 or n_left < 0:
        raise DomainError("ant counts must be non-negative")
    if mode != "bi" and n_left:
        raise DomainError(f"{mode} mode has no left-movers, got n_left={n_left}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    ant = np.full((2, L), -1, dtype=np.int64)
    for d, n in ((_k.RIGHT, n_right), (_k.LEFT, n_left)):
        sites = np.sort(rng.choice(L, size=n, replace=False))
        ant[d, sites] = np.arange(n)
    kind = np.zeros(L, dtype=np.int8)
    if mode != "tasep":
        kind[(ant >= 0).any(axis=0)] = _k.OCCUPIED
    return TrailState(params, mode, ant, kind,
                      np.zeros(L, dtype=np.int64), np.zeros(L, dtype=np.float64),
                      np.zeros(1, dtype=np.int64), rng)


def mark_present(state, site, t_query=None):
    """Whether ``site`` carries a pheromone mark at time ``t_query`` (sweeps).

    Vacated marks survive while the elapsed time is below the lifetime
    drawn once when the site was vacated, so repeated queries agree.
    """
    if state.mode == "tasep":
        return False
    t = state.clock if t_query is None else t_query
    k = state.kind[site]
    if k == _k.OCCUPIED:
        return True
    if k == _k.VACATED:
        return bool(t - state.vstep[site] / state.L < state.life[site])
    return False


def effective_hop_probability(state, site, direction):
    """Probability that the ``direction`` ant at ``site`` hops when selected.

    0 if the target holds a same-direction ant, ``K`` if it holds an
    opposing ant (bidirectional mode), ``Q`` if the target is marked and
    ``q`` otherwise. In TASEP mode the choice is between 0 and ``q``.
    """
    d = DIRECTIONS[direction]
    if state.ant[d, site] < 0:
        raise NoAntAtSite(f"no {direction}-mover at site {site}")
    p = state.params
    target = (site + 1) % state.L if d == _k.RIGHT else (site - 1) % state.L
    if state.ant[d, target] >= 0:
        return 0.0
    if state.mode == "tasep":
        return p.q
    if state.mode == "bi" and state.ant[1 - d, target] >= 0:
        return p.K
    return p.Q if mark_present(state, target) else p.q


def _kernel(state, n_updates, counts, sec=_NO_SECTION, buf=_NO_BUFFER,
            sn=None, trace=_NO_BUFFER, tn=None):
    p = state.params
    return _k.run_updates(
        n_updates, state.ant, state.kind, state.vstep, state.life, state.step,
        state.L, MODES[state.mode], float(p.q), float(p.Q), float(p.K),
        float(p.f), state.rng, counts, sec, buf,
        np.zeros(1, np.int64) if sn is None else sn, trace,
        np.zeros(1, np.int64) if tn is None else tn)


def elementary_update(state):
    """Pick one site uniformly and let its ants attempt a hop.

    Returns the list of :class:`UpdateEvent` produced, in processing order.
    """
    trace = np.zeros((3, 4), dtype=np.int64)
    tn = np.zeros(1, dtype=np.int64)
    _kernel(state, 1, np.zeros((1, 4), dtype=np.int64), trace=trace, tn=tn)
    return [UpdateEvent(int(r[0]), _DIR_NAMES[int(r[1])], _OUTCOMES[int(r[2])],
                        _RATES[int(r[3])]) for r in trace[:tn[0]]]


def _advance(state, n_sweeps):
    out = np.zeros((n_sweeps, 4), dtype=np.int64)
    if n_sweeps:
        _kernel(state, n_sweeps * state.L, out)
    return out


def sweep(state):
    """Perform ``L`` elementary updates (one time unit)."""
    return SweepStats(*map(int, _advance(state, 1)[0]))


def run(state, warmup_sweeps=0, measure_sweeps=0, record_interval=0):
    """Warm up, then measure; snapshot every ``record_interval`` sweeps.

    ``record_interval=0`` disables snapshots. Snapshots are taken after
    measurement sweeps ``k * record_interval``.
    """
    if warmup_sweeps < 0 or measure_sweeps < 0 or record_interval < 0:
        raise DomainError("sweep counts must be non-negative")
    n_right, n_left = state.n_right, state.n_left
    _advance(state, int(warmup_sweeps))
    traj = Trajectory(state.params, state.mode, n_right, n_left,
                      int(warmup_sweeps), int(record_interval),
                      np.zeros((0, 4), dtype=np.int64))
    if not measure_sweeps:
        return traj
    chunk = record_interval if record_interval else measure_sweeps
    blocks = []
    done = 0
    while done < measure_sweeps:
        n = min(chunk, measure_sweeps - done)
        blocks.append(_advance(state, n))
        done += n
        if record_interval and n == record_interval:
            traj.snapshots.append(state.snapshot())
    traj.counts = np.concatenate(blocks)
    return traj


@dataclass
class SectionRecord:
    """Boundary crossings of a section ``[start, stop)`` of the ring.

    Arrays are parallel; ``time`` is in sweeps, ``direction`` and ``kind``
    use ``"R"/"L"`` and ``"enter"/"leave"``, ``ant_id`` is the per-direction
    identity used as ground truth.
    """

    start: int
    stop: int
    time: np.ndarray
    direction: np.ndarray
    kind: np.ndarray
    ant_id: np.ndarray

    def __len__(self):
        return len(self.time)

    def passages(self):
        """Ground-truth (direction, ant_id, t_enter, t_leave) tuples, ordered by entry."""
        open_ = {}
        out = []
        for t, d, k, a in zip(self.time, self.direction, self.kind, self.ant_id):
            if k == "enter":
                open_[(d, a)] = len(out)
                out.append([str(d), int(a), float(t), None])
            else:
                out[open_.pop((d, a))][3] = float(t)
        return [tuple(p) for p in out if p[3] is not None]


def observe_section(state, sweeps, start, stop):
    """Advance ``state`` by ``sweeps`` sweeps, logging section crossings.

    Ants inside the section when observation starts are ignored until
    they re-enter, so every logged leave has a matching earlier enter.
    """
    L = state.L
    if not (0 <= start < stop <= L) or stop - start >= L:
        raise DomainError(f"section [{start}, {stop}) invalid for L={L}")
    sec = np.array([start, stop, L], dtype=np.int64)
    buf = np.empty((max(4 * L, 4096), 4), dtype=np.int64)
    sn = np.zeros(1, dtype=np.int64)
    rows = []
    remaining = int(sweeps) * L
    while remaining > 0:
        counts = np.zeros((remaining // L, 4), dtype=np.int64)
        remaining -= _kernel(state, remaining, counts, sec, buf, sn)
        rows.append(buf[:sn[0]].copy())
        sn[0] = 0
    data = np.concatenate(rows) if rows else np.empty((0, 4), np.int64)

    keep = np.ones(len(data), dtype=bool)
    entered = set()
    for n, (_, d, k, a) in enumerate(data):
        if k == _k.ENTER:
            entered.add((d, a))
        elif (d, a) in entered:
            entered.discard((d, a))
        else:
            keep[n] = False
    data = data[keep]
    return SectionRecord(
        start, stop,
        data[:, 0] / L,
        np.where(data[:, 1] == _k.RIGHT, "R", "L"),
        np.where(data[:, 2] == _k.ENTER, "enter", "leave"),
        data[:, 3].copy(),
    )
