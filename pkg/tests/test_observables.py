import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antflow.dynamics import ModelParams, new_state, run
from antflow.errors import DomainError, EmptyTrajectory, TooFewAnts
from antflow.observables import (ANT_BOTH, ANT_L, ANT_R, EMPTY, FD_COLUMNS, MARK,
                                 FdTable, cluster_stats, combine_replicas,
                                 fundamental_diagram_sweep, raster_to_pgm,
                                 sim_distance_headways, spacetime_raster,
                                 stationary_averages, tasep_exact, total_effective_flow)


def occ(L, sites):
    a = np.zeros(L, dtype=bool)
    a[list(sites)] = True
    return a


class TestTasepExact:
    def test_half_filling(self):
        assert tasep_exact(0.9, 0.5) == pytest.approx((0.45, 0.225))

    def test_empty_and_jammed(self):
        assert tasep_exact(0.7, 0.0) == (0.7, 0.0)
        assert tasep_exact(0.7, 1.0) == (0.0, 0.0)

    def test_domain(self):
        with pytest.raises(DomainError):
            tasep_exact(0.5, 1.2)


class TestFlows:
    def test_examples(self):
        assert total_effective_flow(0.2, 0.2) == (0.4, 0.0)
        assert total_effective_flow(0.3, 0.1) == pytest.approx((0.4, 0.2))

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_swap_symmetry(self, a, b):
        t1, e1 = total_effective_flow(a, b)
        t2, e2 = total_effective_flow(b, a)
        assert t1 == t2 and e1 == -e2


class TestStationaryAverages:
    def test_no_hops(self):
        traj = run(new_state(ModelParams(L=10, q=0.5), 10, 0, 1, "tasep"), 0, 50)
        p = stationary_averages(traj)
        assert p.V_R == 0 and p.F_R == 0

    def test_empty_trajectory(self):
        traj = run(new_state(ModelParams(L=10, q=0.5), 3, 0, 1, "tasep"), 5, 0)
        with pytest.raises(EmptyTrajectory):
            stationary_averages(traj)

    def test_tasep_half_filling(self):
        s = new_state(ModelParams(L=1000, q=0.9), 500, 0, 2, "tasep")
        p = stationary_averages(run(s, 1000, 10_000))
        assert abs(p.V_R - 0.45) < 0.01

    @settings(max_examples=20, deadline=None)
    @given(n_r=st.integers(0, 30), n_l=st.integers(0, 30), seed=st.integers(0, 10**6))
    def test_estimator_identity(self, n_r, n_l, seed):
        s = new_state(ModelParams(L=30, q=0.3, Q=0.8, K=0.1, f=0.05), n_r, n_l, seed, "bi")
        p = stationary_averages(run(s, 5, 20))
        assert p.F_R - p.rho_R * p.V_R == 0
        assert p.F_L - p.rho_L * p.V_L == 0
        assert (p.F_tot, p.F_eff) == total_effective_flow(p.F_R, p.F_L)

    def test_tasep_reports_no_f(self):
        p = stationary_averages(run(new_state(ModelParams(L=10, q=0.5), 3, 0, 1, "tasep"), 0, 5))
        assert math.isnan(p.f)


class TestSweep:
    params = ModelParams(L=200, q=0.2, Q=0.9, K=0.1)

    def test_tasep_reduction_f0(self):
        tab = fundamental_diagram_sweep([(0.5, 0.0, 0.0)], ModelParams(L=500, q=0.2, Q=0.9),
                                        "uni", replicas=4, seed=1, warmup=1000, measure=4000)
        p = tab.points[0]
        assert abs(p.V_R - 0.45) <= 3 * p.stderr_V_R + 1e-3

    def test_empty_grid(self):
        assert len(fundamental_diagram_sweep([], self.params, "uni")) == 0

    def test_workers_match_sequential(self):
        cells = [(0.1, 0.05, 0.01), (0.2, 0.1, 0.05)]
        kw = dict(replicas=2, seed=5, warmup=20, measure=50)
        a = fundamental_diagram_sweep(cells, self.params, "bi", workers=1, **kw)
        b = fundamental_diagram_sweep(cells, self.params, "bi", workers=2, **kw)
        assert a.to_csv() == b.to_csv()

    def test_cell_index_pins_stream(self):
        cells = [(0.1, 0.0, 0.01), (0.2, 0.0, 0.01)]
        kw = dict(replicas=2, seed=5, warmup=20, measure=50)
        full = fundamental_diagram_sweep(cells, self.params, "uni", **kw)
        part = fundamental_diagram_sweep(cells[1:], self.params, "uni", cell_indices=[1], **kw)
        assert part.points[0] == full.points[1]

    def test_single_replica_stderr_nan(self):
        tab = fundamental_diagram_sweep([(0.1, 0.0, 0.01)], self.params, "uni",
                                        warmup=5, measure=5)
        assert math.isnan(tab.points[0].stderr_V_R)

    def test_csv_roundtrip_sorted(self):
        cells = [(0.3, 0.0, 0.05), (0.1, 0.0, 0.01), (0.2, 0.0, 0.01)]
        tab = fundamental_diagram_sweep(cells, self.params, "uni", replicas=2,
                                        warmup=5, measure=10).sorted()
        assert [(p.f, p.rho_R) for p in tab] == [(0.01, 0.1), (0.01, 0.2), (0.05, 0.3)]
        text = tab.to_csv()
        assert text.splitlines()[0] == ",".join(FD_COLUMNS)
        assert FdTable.from_csv(io.StringIO(text)).to_csv() == text

    def test_combine(self):
        tab = fundamental_diagram_sweep([(0.2, 0.0, 0.01)], self.params, "uni",
                                        replicas=3, warmup=5, measure=10)
        p = tab.points[0]
        assert p.n_replicas == 3 and p.stderr_V_R >= 0
        with pytest.raises(EmptyTrajectory):
            combine_replicas([])


class TestRaster:
    def test_empty_lattice(self):
        traj = run(new_state(ModelParams(L=8, q=0.2, Q=0.9), 0, 0, 1, "uni"), 0, 4, 1)
        assert (spacetime_raster(traj) == EMPTY).all()

    def test_single_ant_leaves_trace(self):
        traj = run(new_state(ModelParams(L=50, q=0.5, Q=0.9, f=0.0), 1, 0, 1, "uni"), 0, 20, 1)
        r = spacetime_raster(traj)
        assert ((r == ANT_R).sum(axis=1) == 1).all()
        # a permanent trail: once marked, a site stays marked or occupied
        seen = r != EMPTY
        assert (seen[1:] >= seen[:-1]).all()
        assert (r == MARK).any()

    def test_codes_and_pgm(self):
        traj = run(new_state(ModelParams(L=20, q=0.3, Q=0.8, K=0.1, f=0.1), 8, 8, 3, "bi"),
                   0, 30, 1)
        r = spacetime_raster(traj)
        assert set(np.unique(r)) <= {EMPTY, MARK, ANT_R, ANT_L, ANT_BOTH}
        pgm = raster_to_pgm(r)
        assert pgm.startswith(b"P5\n20 30\n255\n")
        assert len(pgm) == len(b"P5\n20 30\n255\n") + 600

    def test_no_snapshots(self):
        traj = run(new_state(ModelParams(L=8, q=0.2, Q=0.9), 0, 0, 1, "uni"), 0, 4, 0)
        with pytest.raises(EmptyTrajectory):
            spacetime_raster(traj)


class TestHeadwaysAndClusters:
    def test_two_ants(self):
        # circular gaps must sum to L - N
        assert list(sim_distance_headways(occ(10, [0, 3]))) == [2, 6]

    def test_full(self):
        assert (sim_distance_headways(np.ones(7, bool)) == 0).all()

    def test_too_few(self):
        with pytest.raises(TooFewAnts):
            sim_distance_headways(occ(10, [4]))

    def test_sparse_gaps_geometric(self):
        rng = np.random.default_rng(0)
        L, N = 100_000, 1000
        gaps = sim_distance_headways(occ(L, rng.choice(L, N, replace=False)))
        rho = N / L
        # mean gap (1 - rho) / rho; P(gap = 0) close to rho
        assert gaps.mean() == pytest.approx((L - N) / N)
        assert abs((gaps == 0).mean() - rho) < 3 * np.sqrt(rho / N)

    @given(st.integers(2, 60).flatmap(
        lambda L: st.tuples(st.just(L), st.sets(st.integers(0, L - 1), min_size=2))))
    def test_gap_sum(self, args):
        L, sites = args
        gaps = sim_distance_headways(occ(L, sites))
        assert gaps.sum() + len(sites) == L and (gaps >= 0).all()

    def test_adjacent_block(self):
        assert cluster_stats(occ(50, range(10, 20))) == (1, 1.0)

    def test_opposite_ends(self):
        assert cluster_stats(occ(100, [0, 50]), gap_threshold=5) == (2, 0.5)

    def test_equidistant_ring(self):
        assert cluster_stats(occ(30, range(0, 30, 3)), gap_threshold=5) == (1, 1.0)

    def test_wraparound_cluster(self):
        c = cluster_stats(occ(100, [98, 99, 0, 1, 50]), gap_threshold=2)
        assert c == (2, 0.8)

    def test_no_ants(self):
        assert cluster_stats(occ(10, [])) == (0, 0.0)

    def test_snapshot_input(self):
        s = new_state(ModelParams(L=100, q=0.2, Q=0.9), 20, 0, 1, "uni")
        assert cluster_stats(s.snapshot()) == cluster_stats(s.occ_R)
