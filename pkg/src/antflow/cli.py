"""Command-line front end.

Exit codes: 0 ok, 1 I/O failure, 2 configuration error, 3 input parse
error, 4 validation failure.
"""
from __future__ import annotations

import argparse
import configparser
import dataclasses
import io
import itertools
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import empirics, observables, validation
from .dynamics import ModelParams, new_state, run
from .errors import (AntflowError, NegativeCount, NonPositiveTravelTime,
                     ParseError)
from .observables import FdTable, cell_counts, fmt

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_PARSE, EXIT_VALIDATION = 0, 1, 2, 3, 4
SECTION = "antflow"


class ConfigError(Exception):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    mode: str = "uni"
    L: int = 1000
    q: float = 0.2
    Q: float = 0.9
    K: float = 0.1
    f: list = field(default_factory=lambda: [0.002])
    rho: list = field(default_factory=list)
    rho_R: list = field(default_factory=list)
    rho_L: list = field(default_factory=list)
    seed: int = 0
    warmup: int | None = None
    sweeps: int = 1000
    replicas: int = 1
    record_interval: int = 1
    workers: int = 1
    out: str = ""
    section: str = ""
    time_scale: float = 1.0

    LISTS = ("f", "rho", "rho_R", "rho_L")

    def params(self):
        return ModelParams(L=self.L, q=self.q, Q=self.Q, K=self.K, f=self.f[0])

    def warmup_sweeps(self):
        return 10 * self.L if self.warmup is None else self.warmup

    def validate(self):
        if self.mode not in ("tasep", "uni", "bi"):
            raise ConfigError("mode", f"must be tasep, uni or bi, got {self.mode!r}")
        if self.L < 2:
            raise ConfigError("L", f"must be >= 2, got {self.L}")
        for key in ("q", "Q", "K"):
            v = getattr(self, key)
            if not 0 <= v <= 1:
                raise ConfigError(key, f"{v} outside [0, 1]")
        for key in self.LISTS:
            for v in getattr(self, key):
                if not 0 <= v <= 1:
                    raise ConfigError(key, f"{v} outside [0, 1]")
        if self.mode == "uni" and not self.q <= self.Q:
            raise ConfigError("q", f"uni mode needs q <= Q (q={self.q}, Q={self.Q})")
        if self.mode == "bi" and not self.K < self.q < self.Q:
            raise ConfigError("K", f"bi mode needs K < q < Q "
                                   f"(K={self.K}, q={self.q}, Q={self.Q})")
        if self.mode != "bi" and any(self.rho_L):
            raise ConfigError("rho_L", f"{self.mode} mode has no left-movers")
        for key in ("sweeps", "record_interval"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "must be >= 0")
        if self.warmup is not None and self.warmup < 0:
            raise ConfigError("warmup", "must be >= 0")
        for key in ("replicas", "workers"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be >= 1")
        if not self.f:
            raise ConfigError("f", "at least one evaporation rate required")
        return self

    def grid(self):
        """Sorted ``(rho_R, rho_L, f)`` cells described by this config."""
        if self.mode == "bi":
            if self.rho_R or self.rho_L:
                pairs = itertools.product(self.rho_R or [0.0], self.rho_L or [0.0])
            else:
                pairs = ((r, r) for r in self.rho)
        else:
            pairs = ((r, 0.0) for r in (self.rho_R or self.rho))
        fs = [math.nan] if self.mode == "tasep" else self.f
        cells = {(r, l, f) for (r, l) in pairs for f in fs}
        return sorted(cells, key=lambda c: (_nan_last(c[2]), c[1], c[0]))

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        items = {}
        for fld in dataclasses.fields(self):
            v = getattr(self, fld.name)
            if v is None:
                continue
            if fld.name in self.LISTS:
                v = " ".join(repr(float(x)) for x in v)
            items[fld.name] = str(v)
        cp[SECTION] = items
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("config", str(exc)) from None
        if SECTION not in cp:
            raise ConfigError("config", f"missing [{SECTION}] section")
        return cls(**_coerce(dict(cp[SECTION])))


def _nan_last(x):
    return math.inf if math.isnan(x) else x


_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def parse_values(key, text):
    """Space/comma separated numbers; ``a:b:step`` expands to an inclusive range."""
    out = []
    for tok in text.replace(",", " ").split():
        try:
            if ":" in tok:
                a, b, s = (float(x) for x in tok.split(":"))
                if s <= 0:
                    raise ValueError
                n = int(math.floor((b - a) / s + 1e-9)) + 1
                out += [round(a + k * s, 10) for k in range(n)]
            else:
                out.append(float(tok))
        except ValueError:
            raise ConfigError(key, f"cannot parse {tok!r}") from None
    return out


def _coerce(raw):
    out = {}
    for key, val in raw.items():
        if key not in _TYPES:
            raise ConfigError(key, "unknown key")
        if key in RunConfig.LISTS:
            out[key] = parse_values(key, val) if isinstance(val, str) else list(val)
            continue
        typ = _TYPES[key]
        try:
            if "int" in str(typ):
                out[key] = int(val)
            elif "float" in str(typ):
                out[key] = float(val)
            else:
                out[key] = str(val)
        except ValueError:
            raise ConfigError(key, f"cannot parse {val!r}") from None
    return out


def build_config(args, keys):
    """Defaults < config file < environment seed < explicit flags."""
    values = {}
    if os.environ.get("ANTFLOW_SEED"):
        values["seed"] = os.environ["ANTFLOW_SEED"]
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
        file_cfg = RunConfig.from_ini(text)
        names = [k for k in _TYPES if k in _ini_keys(text)]
        values.update({k: getattr(file_cfg, k) for k in names})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            values[k] = v
    cfg = RunConfig(**_coerce(values))
    return cfg.validate()


def _ini_keys(text):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    return set(cp[SECTION]) if SECTION in cp else set()


class _Join(argparse.Action):
    """Repeatable numeric flag whose occurrences accumulate into one list."""

    def __call__(self, parser, ns, value, option_string=None):
        cur = getattr(ns, self.dest) or []
        setattr(ns, self.dest, cur + parse_values(self.dest, value))


def _model_flags(p):
    p.add_argument("--config", help="INI file with an [antflow] section")
    p.add_argument("--mode", choices=("tasep", "uni", "bi"))
    p.add_argument("--L", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--Q", type=float)
    p.add_argument("--K", type=float)
    p.add_argument("--f", action=_Join, help="evaporation rate(s), repeatable")
    p.add_argument("--rho", action=_Join, help="density, or a:b:step range")
    p.add_argument("--rho-R", dest="rho_R", action=_Join)
    p.add_argument("--rho-L", dest="rho_L", action=_Join)
    p.add_argument("--seed", type=int, help="master seed (default $ANTFLOW_SEED or 0)")
    p.add_argument("--warmup", type=int, help="warmup sweeps (default 10*L)")
    p.add_argument("--sweeps", type=int, help="measurement sweeps")
    p.add_argument("--workers", type=int)


MODEL_KEYS = ("mode", "L", "q", "Q", "K", "f", "rho", "rho_R", "rho_L", "seed",
              "warmup", "sweeps", "workers")


def make_parser():
    parser = argparse.ArgumentParser(prog="antflow", allow_abbrev=False,
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", allow_abbrev=False,
                         help="single run: space-time raster and summary")
    _model_flags(sim)
    sim.add_argument("--record-interval", dest="record_interval", type=int)
    sim.add_argument("--section", help="observe sites a:b and export an event log")
    sim.add_argument("--time-scale", dest="time_scale", type=float,
                     help="seconds per sweep in exported event logs")
    sim.add_argument("--out", help="output directory")

    sw = sub.add_parser("sweep", allow_abbrev=False, help="fundamental-diagram grid")
    _model_flags(sw)
    sw.add_argument("--replicas", type=int)
    sw.add_argument("--out", help="output CSV")
    sw.add_argument("--resume", action="store_true", help="skip rows already in --out")

    an = sub.add_parser("analyze", allow_abbrev=False, help="cumulative-counting analysis")
    an.add_argument("events", help="event CSV (t,direction,event)")
    an.add_argument("--section-length", dest="section_length", type=float, required=True,
                    help="section length in body lengths")
    an.add_argument("--out", default="analysis", help="output directory")
    an.add_argument("--bin-width", dest="bin_width", type=float, default=0.1,
                    help="velocity histogram bin width")
    an.add_argument("--dd-bin-width", dest="dd_bin_width", type=float, default=1.0,
                    help="distance-headway histogram bin width")
    an.add_argument("--threshold", type=float, default=1.0,
                    help="mean counterflow count at which an ant counts as bidirectional")

    va = sub.add_parser("validate", allow_abbrev=False, help="built-in limit-case checks")
    va.add_argument("--quick", action="store_true")
    va.add_argument("--seed", type=int, default=None)
    va.add_argument("--workers", type=int, default=1)
    va.add_argument("--inject-rate-error", dest="rate_error", type=float, default=0.0,
                    help=argparse.SUPPRESS)
    return parser


def cmd_simulate(args):
    cfg = build_config(args, MODEL_KEYS + ("record_interval", "section",
                                           "time_scale", "out"))
    cells = cfg.grid()
    if len(cells) != 1:
        raise ConfigError("rho", f"simulate needs exactly one density cell, got {len(cells)}")
    rho_R, rho_L, f = cells[0]
    params = dataclasses.replace(cfg.params(), f=0.0 if math.isnan(f) else f)
    n_right, n_left = cell_counts(cfg.L, rho_R, rho_L)
    out = Path(cfg.out or "simulate_out")
    out.mkdir(parents=True, exist_ok=True)
    state = new_state(params, n_right, n_left, observables.replica_seed(cfg.seed, 0, 0),
                      cfg.mode)
    traj = run(state, cfg.warmup_sweeps(), cfg.sweeps, cfg.record_interval)
    point = observables.stationary_averages(traj) if cfg.sweeps else None
    if traj.snapshots:
        raster = observables.spacetime_raster(traj)
        observables.write_pgm(raster, out / "raster.pgm")
        observables.write_raster_csv(raster, out / "raster.csv")
    if point is not None:
        with open(out / "summary.csv", "w", newline="") as fh:
            FdTable([point]).to_csv(fh)
        print(f"rho_R={fmt(point.rho_R)} rho_L={fmt(point.rho_L)} "
              f"V_R={fmt(point.V_R)} V_L={fmt(point.V_L)} "
              f"F_R={fmt(point.F_R)} F_L={fmt(point.F_L)}")
    if cfg.section:
        try:
            a, b = (int(x) for x in cfg.section.split(":"))
        except ValueError:
            raise ConfigError("section", f"expected a:b, got {cfg.section!r}") from None
        from .synthetic import simulated_log
        try:
            log, _ = simulated_log(state, cfg.sweeps, a, b, cfg.time_scale)
        except AntflowError as exc:
            raise ConfigError("section", str(exc)) from None
        with open(out / "events.csv", "w", newline="") as fh:
            log.to_csv(fh)
        print(f"events: {len(log)} written to {out / 'events.csv'}")
    (out / "config.ini").write_text(cfg.to_ini())
    return EXIT_OK


def _key(rho_R, rho_L, f):
    return fmt(rho_R), fmt(rho_L), fmt(f)


def cmd_sweep(args):
    cfg = build_config(args, MODEL_KEYS + ("replicas", "out"))
    cells = cfg.grid()
    if not cells:
        raise ConfigError("rho", "empty density grid")
    if cfg.sweeps < 1:
        raise ConfigError("sweeps", "sweep needs at least one measurement sweep")
    out = Path(cfg.out or "fd.csv")
    done = {}
    if args.resume and out.exists():
        with open(out, newline="") as fh:
            for p in FdTable.from_csv(fh):
                done[_key(p.rho_R, p.rho_L, p.f)] = p
    todo, idx = [], []
    for k, (r, l, f) in enumerate(cells):
        n_r, n_l = cell_counts(cfg.L, r, l)
        if _key(n_r / cfg.L, n_l / cfg.L, f) not in done:
            todo.append((r, l, f if not math.isnan(f) else 0.0))
            idx.append(k)
    mode = "a" if done else "w"
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, mode, newline="") as fh:
        if not done:
            fh.write(",".join(observables.FD_COLUMNS) + "\n")

        def on_cell(k, point):
            if math.isnan(cells[k][2]):
                point.f = math.nan
            fh.write(",".join(observables.format_row(point)) + "\n")
            fh.flush()
            done[_key(point.rho_R, point.rho_L, point.f)] = point
            print(f"[{len(done)}/{len(cells)}] rho_R={fmt(point.rho_R)} "
                  f"rho_L={fmt(point.rho_L)} f={fmt(point.f)} "
                  f"V_R={fmt(point.V_R)} F_R={fmt(point.F_R)}", file=sys.stderr)

        observables.fundamental_diagram_sweep(
            todo, cfg.params(), cfg.mode, cfg.replicas, cfg.seed,
            cfg.warmup_sweeps(), cfg.sweeps, cfg.workers, idx, on_cell)
    # normalise: one sorted table, values re-read from their printed form
    with open(out, newline="") as fh:
        table = FdTable.from_csv(fh).sorted()
    with open(out, "w", newline="") as fh:
        table.to_csv(fh)
    print(f"{len(table)} rows written to {out}")
    return EXIT_OK


def _summarize(metrics, report, args, out):
    lines = []
    for d in empirics.DIRECTIONS:
        ms = [m for m in metrics if m.direction == d]
        lines.append(f"{d}: entered={report.entered[d]} paired={len(ms)} "
                     f"unmatched={report.unmatched[d]} ({100 * report.rate(d):.1f}%)")
        for cls in ("uni", "bi"):
            v = np.array([m.velocity for m in ms if m.cls == cls])
            if v.size:
                s = empirics.distribution_summary(v, args.bin_width)
                with open(out / f"hist_velocity_{d}_{cls}.csv", "w", newline="") as fh:
                    empirics.write_histogram_csv(s, fh)
                lines.append(f"  {cls}: n={v.size} mean v={s.mean:.4g} var={s.variance:.4g}")
        dd = np.array([m.dd for m in ms])
        dd = dd[np.isfinite(dd) & (dd > 0)]
        if dd.size >= 2:
            s = empirics.distribution_summary(dd, args.dd_bin_width)
            with open(out / f"hist_dd_{d}.csv", "w", newline="") as fh:
                empirics.write_histogram_csv(s, fh)
            lam = empirics.fit_negative_exponential(dd)
            mu, sigma = empirics.fit_lognormal(dd)
            lines.append(f"  distance-headway fits: exponential rate={lam:.4g}; "
                         f"lognormal mu={mu:.4g} sigma={sigma:.4g}")
    return lines


def cmd_analyze(args):
    if args.section_length <= 0:
        raise ConfigError("section_length", "must be positive")
    if args.bin_width <= 0 or args.dd_bin_width <= 0:
        raise ConfigError("bin_width", "must be positive")
    log = empirics.load_events(args.events, args.section_length)
    metrics, report = empirics.compute_metrics(log, args.section_length, args.threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as fh:
        empirics.write_metrics_csv(metrics, fh)
    with open(out / "uturn.csv", "w", newline="") as fh:
        fh.write("direction,entered,unmatched,rate\n")
        for d in empirics.DIRECTIONS:
            fh.write(f"{d},{report.entered[d]},{report.unmatched[d]},{report.rate(d):.6g}\n")
    for line in _summarize(metrics, report, args, out):
        print(line)
    return EXIT_OK


def cmd_validate(args):
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("ANTFLOW_SEED", 12345))
    checks = validation.run_checks(quick=args.quick, seed=seed,
                                   rate_error=args.rate_error, workers=args.workers)
    for c in checks:
        print(c.line())
    ok = all(c.passed for c in checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return EXIT_OK if ok else EXIT_VALIDATION


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep,
            "analyze": cmd_analyze, "validate": cmd_validate}


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, NegativeCount, NonPositiveTravelTime) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except AntflowError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
