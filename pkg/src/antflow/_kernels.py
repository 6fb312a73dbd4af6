"""Compiled inner loop for the random-sequential update.

All lattice state lives in plain numpy arrays so the kernel stays
nopython-compatible:

* ``ant``    int64 (2, L), ant id per direction lattice, -1 when empty
* ``kind``   int8 (L,), pheromone record: ABSENT / OCCUPIED / VACATED
* ``vstep``  int64 (L,), elementary-update index at which the mark was vacated
* ``life``   float64 (L,), sampled mark lifetime in sweeps
* ``step``   int64 (1,), number of elementary updates performed so far

Time in sweeps is ``step / L``. The update is written as a single loop
body on purpose: numba keeps array refcounting around every helper call,
which costs several times the update itself.
"""
import numba as nb
import numpy as np

TASEP, UNI, BI = 0, 1, 2
RIGHT, LEFT = 0, 1
ABSENT, OCCUPIED, VACATED = 0, 1, 2

NOOP, HOPPED, BLOCKED, STAYED, EVAPORATED = 0, 1, 2, 3, 4
RATE_NONE, RATE_SMALL_Q, RATE_BIG_Q, RATE_K = 0, 1, 2, 3

ENTER, LEAVE = 0, 1


@nb.njit(cache=True)
def lifetime_scale(f):
    """Mean lifetime in sweeps; ``inf`` for f=0 and 0 for f=1."""
    if f <= 0.0:
        return np.inf
    if f >= 1.0:
        return 0.0
    return 1.0 / (-np.log1p(-f))


@nb.njit(cache=True)
def run_updates(n_updates, ant, kind, vstep, life, stepa, L, mode, q, Q, K, f,
                gen, counts, sec, sbuf, sn, trace, tn):
    """Perform up to ``n_updates`` elementary updates.

    Counters ``hops_R, hops_L, attempts_R, attempts_L`` of update ``u`` are
    added to ``counts[u // L]``. When ``trace`` has rows, the events of the
    last update are written there (``site, dir, outcome, rate``) and their
    number to ``tn[0]``. With ``sec[0] >= 0`` boundary crossings of the
    section ``[sec[0], sec[1])`` go to ``sbuf``; the loop returns early at a
    sweep boundary if the buffer might overflow. Returns the number of
    updates performed.
    """
    scale = lifetime_scale(f)
    tracing = trace.shape[0] > 0
    observing = sec[0] >= 0
    a = sec[0]
    b = sec[1]
    b_site = b if b < L else 0
    a_prev = a - 1 if a > 0 else L - 1
    step = stepa[0]
    for u in range(n_updates):
        if observing and u % L == 0 and sn[0] + 2 * L > sbuf.shape[0]:
            stepa[0] = step
            return u
        row = u // L
        nev = 0
        i = int(gen.random() * L)
        if i >= L:
            i = L - 1
        first = RIGHT
        if ant[RIGHT, i] < 0:
            first = LEFT
        elif ant[LEFT, i] >= 0 and gen.random() >= 0.5:
            first = LEFT
        for k in range(2):
            d = first if k == 0 else 1 - first
            if ant[d, i] < 0:
                continue
            counts[row, 2 + d] += 1
            j = i + 1 if d == RIGHT else i - 1
            if j == L:
                j = 0
            elif j < 0:
                j = L - 1
            if ant[d, j] >= 0:
                rate = 0.0
                code = RATE_NONE
            elif mode == TASEP:
                rate = q
                code = RATE_SMALL_Q
            elif mode == BI and ant[1 - d, j] >= 0:
                rate = K
                code = RATE_K
            elif kind[j] == OCCUPIED or (
                    kind[j] == VACATED and (step - vstep[j]) / L < life[j]):
                rate = Q
                code = RATE_BIG_Q
            else:
                rate = q
                code = RATE_SMALL_Q
            if code == RATE_NONE:
                outcome = BLOCKED
            elif gen.random() >= rate:
                outcome = STAYED
            else:
                outcome = HOPPED
                ant_id = ant[d, i]
                ant[d, j] = ant_id
                ant[d, i] = -1
                counts[row, d] += 1
                if mode != TASEP:
                    kind[j] = OCCUPIED
                    if ant[1 - d, i] < 0:
                        kind[i] = VACATED
                        vstep[i] = step
                        if scale == np.inf or scale == 0.0:
                            life[i] = scale
                        else:
                            life[i] = gen.standard_exponential() * scale
                if observing:
                    ev = -1
                    if d == RIGHT:
                        if j == a and i == a_prev:
                            ev = ENTER
                        elif i == b - 1 and j == b_site:
                            ev = LEAVE
                    else:
                        if i == b_site and j == b - 1:
                            ev = ENTER
                        elif i == a and j == a_prev:
                            ev = LEAVE
                    if ev >= 0:
                        n = sn[0]
                        sbuf[n, 0] = step
                        sbuf[n, 1] = d
                        sbuf[n, 2] = ev
                        sbuf[n, 3] = ant_id
                        sn[0] = n + 1
            if tracing:
                trace[nev, 0] = i
                trace[nev, 1] = d
                trace[nev, 2] = outcome
                trace[nev, 3] = code
            nev += 1
        evaporated = False
        if (mode != TASEP and kind[i] == VACATED and ant[RIGHT, i] < 0
                and ant[LEFT, i] < 0 and not (step - vstep[i]) / L < life[i]):
            kind[i] = ABSENT
            evaporated = True
        if tracing:
            if evaporated or nev == 0:
                trace[nev, 0] = i
                trace[nev, 1] = -1
                trace[nev, 2] = EVAPORATED if evaporated else NOOP
                trace[nev, 3] = RATE_NONE
                nev += 1
            tn[0] = nev
        step += 1
    stepa[0] = step
    return n_updates


@nb.njit(cache=True)
def vacate_sites(sites, kind, vstep, life, step, f, gen):
    scale = lifetime_scale(f)
    for s in sites:
        kind[s] = VACATED
        vstep[s] = step
        if scale == np.inf or scale == 0.0:
            life[s] = scale
        else:
            life[s] = gen.standard_exponential() * scale
