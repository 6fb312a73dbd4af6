"""Built-in checks of the simulator against exactly known limits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ModelParams, new_state
from .observables import fundamental_diagram_sweep, tasep_exact


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


@dataclass
class Budget:
    L: int
    rhos: tuple
    warmup: int
    measure: int
    replicas: int
    tol: float
    n_marks: int


FULL = Budget(1000, tuple(np.round(np.arange(0.1, 0.95, 0.1), 10)), 2000, 10_000, 8,
              0.01, 100_000)
QUICK = Budget(200, (0.2, 0.5, 0.8), 500, 2000, 4, 0.03, 20_000)


def velocity_check(name, table, rate, tol):
    worst = 0.0
    ok = True
    for p in table:
        exact, _ = tasep_exact(rate, p.rho_R)
        allowed = max(tol, 3 * p.stderr_V_R)
        dev = abs(p.V_R - exact)
        worst = max(worst, dev / allowed)
        ok &= dev <= allowed
    return Check(name, bool(ok), f"{len(table)} densities, worst |dV|/allowed = {worst:.2f}")


def survival_check(f, lags, n_marks, seed):
    """Fraction of freshly vacated marks still present after each lag."""
    L = n_marks
    state = new_state(ModelParams(L=L, q=0.2, Q=0.9, f=f), 0, 0, seed, "uni")
    state.vacate(np.arange(L))
    details = []
    ok = True
    for lag in lags:
        p = (1 - f) ** lag
        frac = state.marks_present(state.clock + lag).mean()
        sigma = np.sqrt(p * (1 - p) / n_marks)
        passed = abs(frac - p) <= 3 * sigma if sigma > 0 else frac == p
        ok &= passed
        details.append(f"dt={lag}: {frac:.4f} vs {p:.4f}")
    return Check(f"mark survival f={f}", bool(ok), "; ".join(details))


def run_checks(quick=False, seed=12345, rate_error=0.0, workers=1):
    """Run the limit-case suite; ``rate_error`` perturbs simulated rates (negative control)."""
    b = QUICK if quick else FULL
    scale = 1.0 - rate_error
    cells = [(r, 0.0, 0.0) for r in b.rhos]
    kw = dict(replicas=b.replicas, seed=seed, warmup=b.warmup, measure=b.measure,
              workers=workers)
    checks = []

    p = 0.9
    tab = fundamental_diagram_sweep(cells, ModelParams(L=b.L, q=p * scale), "tasep", **kw)
    checks.append(velocity_check(f"TASEP exact p={p}", tab, p, b.tol))

    uni = ModelParams(L=b.L, q=0.2 * scale, Q=0.9 * scale)
    tab0 = fundamental_diagram_sweep([(r, 0.0, 0.0) for r in b.rhos], uni, "uni", **kw)
    checks.append(velocity_check("uni f=0 -> TASEP with Q=0.9", tab0, 0.9, b.tol))
    tab1 = fundamental_diagram_sweep([(r, 0.0, 1.0) for r in b.rhos], uni, "uni", **kw)
    checks.append(velocity_check("uni f=1 -> TASEP with q=0.2", tab1, 0.2, b.tol))

    resid = max(abs(pt.F_R - pt.rho_R * pt.V_R) for t in (tab, tab0, tab1) for pt in t)
    checks.append(Check("estimator identity F = rho V", resid == 0.0,
                        f"max residual {resid:g}"))

    for f in (0.02, 0.2):
        checks.append(survival_check(f, (1, 5, 10), b.n_marks, seed))
    return checks
