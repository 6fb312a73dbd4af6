import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antflow.dynamics import ModelParams, new_state
from antflow.empirics import (averaged_counts, compute_metrics, instantaneous_counts,
                              merged_times, pair_passages, travel_time_velocity)
from antflow.synthetic import constant_velocity_log, random_fifo_log, simulated_log
from oracles import fifo_truth, quadrature_counts

RES = 1 / 64


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_r=st.integers(1, 12), n_l=st.integers(0, 12))
def test_averaged_counts_match_quadrature(seed, n_r, n_l):
    log, _ = random_fifo_log(np.random.default_rng(seed), n_r, n_l, resolution=RES)
    pairs, _ = pair_passages(log)
    counts, times = instantaneous_counts(log), merged_times(log)
    for p in pairs:
        got = averaged_counts(p, counts, times)
        want = quadrature_counts(log, p.direction, p.t_plus, p.t_minus, RES / 2)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), unmatched=st.integers(0, 3))
def test_pairing_recovers_truth(seed, unmatched):
    log, truth = random_fifo_log(np.random.default_rng(seed), 10, 7, unmatched=unmatched)
    pairs, rep = pair_passages(log)
    assert sorted((p.direction, p.t_plus, p.t_minus) for p in pairs) == fifo_truth(truth)
    assert rep.unmatched == {"R": unmatched, "L": unmatched}


def test_constant_velocity_exact():
    log, truth = constant_velocity_log({"R": [0.0, 0.5, 3.0], "L": [1.0]}, 15.0, 1.5)
    pairs, _ = pair_passages(log)
    dT, v = travel_time_velocity(pairs, 15.0)
    assert (dT == 10.0).all() and (v == 1.5).all()


def test_simulator_log_matches_ground_truth():
    state = new_state(ModelParams(L=300, q=0.2, Q=0.9, K=0.1, f=0.005), 40, 15, 21, "bi")
    log, truth = simulated_log(state, 3000, 50, 62, time_scale=0.25)
    metrics, rep = compute_metrics(log)
    assert len(metrics) > 50
    got = sorted((m.direction, m.t_plus, m.t_minus) for m in metrics)
    assert got == fifo_truth(truth)
    for m in metrics:
        assert m.velocity == pytest.approx(12.0 / (m.t_minus - m.t_plus), rel=1e-12)
