import numpy as np
import pytest

import lotkit as lk
from lotkit.errors import (
    DimensionError,
    InvalidCost,
    InvalidMarginals,
    InvalidParameter,
    KernelUnderflow,
    NonConvergenceWarning,
)
from lotkit.transport import (
    CostMatrix,
    SinkhornConfig,
    TransportPlan,
    _solve_assignment,
    _solve_lp,
    barycentric_projection,
    cost_matrix,
    solve_exact,
    solve_sinkhorn,
    w2_distance,
    write_cost_csv,
    write_plan_csv,
)

from conftest import make_cloud
from oracles import loop_barycentric, loop_cost_matrix, monotone_1d_cost, permutation_min_cost


def uniform(n):
    return np.full(n, 1.0 / n)


class TestCostMatrix:
    def test_three_four_five(self):
        src = lk.uniform_measure(np.array([[0.0, 0.0]]))
        dst = lk.uniform_measure(np.array([[3.0, 4.0]]))
        assert cost_matrix(src, dst, 2).entries[0, 0] == pytest.approx(25.0)
        assert cost_matrix(src, dst, 1).entries[0, 0] == pytest.approx(5.0)

    def test_zero_diagonal_on_self(self, rng):
        cloud = make_cloud(rng, 2, 3)
        M = cost_matrix(cloud, cloud, 2).entries
        assert np.array_equal(np.diag(M), [0.0, 0.0])

    @pytest.mark.parametrize("exponent", [1, 2])
    def test_matches_double_loop(self, rng, exponent):
        src = make_cloud(rng, 3, 2)
        dst = make_cloud(rng, 4, 2)
        M = cost_matrix(src, dst, exponent).entries
        assert np.abs(M - loop_cost_matrix(src.points, dst.points, exponent)).max() <= 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            cost_matrix(make_cloud(rng, 3, 2), make_cloud(rng, 3, 3))

    def test_invalid_entries(self):
        with pytest.raises(InvalidCost):
            CostMatrix(np.array([[1.0, np.inf]]), 2)
        with pytest.raises(InvalidCost):
            CostMatrix(np.array([[-1.0]]), 2)
        with pytest.raises(InvalidParameter):
            CostMatrix(np.array([[1.0]]), 3)


class TestSolveExact:
    def test_matches_permutation_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(2, 6))
            M = CostMatrix(rng.random((n, n)), 2)
            plan = solve_exact(uniform(n), uniform(n), M)
            want = permutation_min_cost(M.entries)
            assert plan.objective == pytest.approx(want, rel=1e-9)

    def test_matches_1d_sorting_oracle(self, rng):
        for _ in range(10):
            n, m = int(rng.integers(3, 60)), int(rng.integers(3, 60))
            x = rng.normal(size=n)
            y = rng.normal(size=m)
            M = cost_matrix(lk.uniform_measure(x), lk.uniform_measure(y), 2)
            plan = solve_exact(uniform(n), uniform(m), M)
            want = monotone_1d_cost(x, y)
            assert plan.objective == pytest.approx(want, rel=1e-9)

    def test_lp_path_matches_1d_oracle_nonuniform(self, rng):
        # nonuniform masses route through the LP; 1-D stays independently checkable
        for _ in range(6):
            n, m = int(rng.integers(3, 25)), int(rng.integers(3, 25))
            x, y = rng.normal(size=n), rng.normal(size=m)
            a = rng.dirichlet(np.ones(n))
            b = rng.dirichlet(np.ones(m))
            M = cost_matrix(lk.uniform_measure(x), lk.uniform_measure(y), 2)
            plan = solve_exact(a, b, M)
            assert plan.objective == pytest.approx(monotone_1d_cost(x, y, a, b), rel=1e-9)

    def test_lp_and_assignment_paths_agree(self, rng):
        M = CostMatrix(rng.random((12, 18)), 2)
        a, b = uniform(12), uniform(18)
        G_lp = _solve_lp(a, b, M.entries)
        G_as = _solve_assignment(M.entries)
        assert np.vdot(G_lp, M.entries) == pytest.approx(np.vdot(G_as, M.entries), rel=1e-9)

    def test_permutation_plan_property(self, rng):
        n = 15
        M = cost_matrix(make_cloud(rng, n, 2), make_cloud(rng, n, 2), 2)
        plan = solve_exact(uniform(n), uniform(n), M)
        G = plan.coupling
        assert np.count_nonzero(G) == n
        assert (np.count_nonzero(G, axis=0) == 1).all()
        assert (np.count_nonzero(G, axis=1) == 1).all()
        assert np.abs(G[G > 0] - 1.0 / n).max() <= 1e-9

    def test_marginal_validation(self, rng):
        M = CostMatrix(rng.random((3, 3)), 2)
        with pytest.raises(InvalidMarginals):
            solve_exact(np.array([0.5, 0.3, 0.3]), uniform(3), M)
        with pytest.raises(InvalidMarginals):
            solve_exact(np.array([0.5, 0.5, 0.0]), uniform(3), M)
        with pytest.raises(DimensionError):
            solve_exact(uniform(4), uniform(3), M)

    def test_plan_feasibility_and_objective(self, rng):
        src, dst = make_cloud(rng, 9, 2), make_cloud(rng, 14, 2)
        M = cost_matrix(src, dst, 2)
        plan = solve_exact(src.masses, dst.masses, M)
        assert np.abs(plan.coupling.sum(axis=1) - src.masses).max() <= 1e-6
        assert np.abs(plan.coupling.sum(axis=0) - dst.masses).max() <= 1e-6
        assert (plan.coupling >= 0).all()
        recomputed = float(np.vdot(plan.coupling, M.entries))
        assert plan.objective == pytest.approx(recomputed, rel=1e-9)

    def test_determinism(self, rng):
        src, dst = make_cloud(rng, 8, 2), make_cloud(rng, 11, 2)
        M = cost_matrix(src, dst, 2)
        p1 = solve_exact(src.masses, dst.masses, M)
        p2 = solve_exact(src.masses, dst.masses, M)
        assert p1.coupling.tobytes() == p2.coupling.tobytes()


class TestSinkhorn:
    def test_marginals_within_tolerance(self, two_cloud_fixture):
        src, dst, M = two_cloud_fixture
        for lambd in (0.5, 0.1, 0.02):
            plan = solve_sinkhorn(src.masses, dst.masses, M, SinkhornConfig(lambd=lambd))
            assert plan.converged
            viol = max(
                np.abs(plan.coupling.sum(axis=1) - src.masses).max(),
                np.abs(plan.coupling.sum(axis=0) - dst.masses).max(),
            )
            assert viol <= 1e-6

    def test_cost_decreases_toward_exact(self, two_cloud_fixture):
        src, dst, M = two_cloud_fixture
        exact = solve_exact(src.masses, dst.masses, M).objective
        gaps = []
        for lambd in (0.5, 0.1, 0.02):
            plan = solve_sinkhorn(src.masses, dst.masses, M, SinkhornConfig(lambd=lambd))
            gaps.append(plan.objective - exact)
        assert all(g > 0 for g in gaps)
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] <= 0.01 * exact

    def test_identity_instance_concentrates(self, rng):
        cloud = make_cloud(rng, 12, 2, spread=3.0)
        M = cost_matrix(cloud, cloud, 2)
        scale = float(np.median(M.entries[M.entries > 0]))
        plan = solve_sinkhorn(
            cloud.masses, cloud.masses, M, SinkhornConfig(lambd=0.005 * scale)
        )
        assert plan.converged
        off_diagonal = plan.coupling.sum() - np.trace(plan.coupling)
        assert off_diagonal <= 0.05

    def test_log_and_scaling_domains_agree(self, two_cloud_fixture):
        src, dst, M = two_cloud_fixture
        # lambd right around the 0.05 * median(M) switch: both modes must agree
        plain = solve_sinkhorn(src.masses, dst.masses, M, SinkhornConfig(lambd=0.051))
        from lotkit.transport import _sinkhorn_log

        G_log, ok, _ = _sinkhorn_log(src.masses, dst.masses, M.entries, SinkhornConfig(lambd=0.051))
        assert ok
        assert np.abs(plain.coupling - G_log).max() <= 1e-8

    def test_kernel_underflow(self, rng):
        # one source point far from every target: its Gibbs row underflows in
        # plain-scaling mode (lambd just above the log-domain switch)
        pts = np.vstack([rng.normal(size=(5, 2)), [[1000.0, 1000.0]]])
        src = lk.uniform_measure(pts)
        dst = make_cloud(rng, 6, 2)
        M = cost_matrix(src, dst, 2)
        lambd = 0.06 * float(np.median(M.entries))
        with pytest.raises(KernelUnderflow):
            solve_sinkhorn(src.masses, dst.masses, M, SinkhornConfig(lambd=lambd))

    def test_nonconvergence_warns(self, two_cloud_fixture):
        src, dst, M = two_cloud_fixture
        cfg = SinkhornConfig(lambd=0.02, max_iters=3)
        with pytest.warns(NonConvergenceWarning):
            plan = solve_sinkhorn(src.masses, dst.masses, M, cfg)
        assert not plan.converged

    def test_config_validation(self):
        with pytest.raises(InvalidParameter):
            SinkhornConfig(lambd=0.0)
        with pytest.raises(InvalidParameter):
            SinkhornConfig(lambd=0.1, max_iters=0)
        with pytest.raises(InvalidParameter):
            SinkhornConfig(lambd=0.1, marginal_tol=0.0)


class TestBarycentricProjection:
    def test_permutation_plan_reorders_targets(self, rng):
        n = 6
        src, dst = make_cloud(rng, n, 2), make_cloud(rng, n, 2)
        plan = solve_exact(uniform(n), uniform(n), cost_matrix(src, dst, 2))
        emb = barycentric_projection(plan, dst.points)
        perm = plan.coupling.argmax(axis=1)
        assert np.abs(emb.map - dst.points[perm]).max() <= 1e-9

    def test_forced_merge(self):
        plan = TransportPlan(
            coupling=np.array([[0.5], [0.5]]),
            objective=1.0,
            method="exact",
            source_masses=np.array([0.5, 0.5]),
            target_masses=np.array([1.0]),
        )
        target = np.array([[2.0, 7.0]])
        emb = barycentric_projection(plan, target)
        assert np.abs(emb.map - target[0]).max() <= 1e-9

    def test_matches_loop_oracle(self, rng):
        src, dst = make_cloud(rng, 7, 3), make_cloud(rng, 5, 3)
        plan = solve_exact(src.masses, dst.masses, cost_matrix(src, dst, 2))
        emb = barycentric_projection(plan, dst.points)
        want = loop_barycentric(plan.coupling, dst.points)
        assert np.abs(emb.map - want).max() <= 1e-12

    def test_rows_in_convex_hull_interval(self, rng):
        src, dst = make_cloud(rng, 10, 2), make_cloud(rng, 8, 2)
        plan = solve_exact(src.masses, dst.masses, cost_matrix(src, dst, 2))
        emb = barycentric_projection(plan, dst.points)
        lo, hi = dst.points.min(axis=0), dst.points.max(axis=0)
        assert (emb.map >= lo - 1e-9).all() and (emb.map <= hi + 1e-9).all()

    def test_column_mismatch(self, rng):
        src, dst = make_cloud(rng, 4, 2), make_cloud(rng, 5, 2)
        plan = solve_exact(src.masses, dst.masses, cost_matrix(src, dst, 2))
        with pytest.raises(DimensionError):
            barycentric_projection(plan, dst.points[:4])


class TestW2Distance:
    def test_identical_measures(self, rng):
        cloud = make_cloud(rng, 10, 2)
        assert w2_distance(cloud, cloud) <= 1e-9

    def test_single_points(self):
        a = lk.uniform_measure(np.array([[0.0, 0.0]]))
        b = lk.uniform_measure(np.array([[3.0, 4.0]]))
        assert w2_distance(a, b) == pytest.approx(5.0, abs=1e-12)

    def test_translation(self, rng):
        cloud = make_cloud(rng, 17, 3)
        v = np.array([1.0, -2.0, 0.5])
        shifted = lk.uniform_measure(cloud.points + v)
        assert w2_distance(cloud, shifted) == pytest.approx(np.linalg.norm(v), abs=1e-9)

    def test_symmetry(self, rng):
        a, b = make_cloud(rng, 9, 2), make_cloud(rng, 13, 2)
        assert w2_distance(a, b) == pytest.approx(w2_distance(b, a), abs=1e-9)

    def test_triangle_inequality_sampled(self, rng):
        for _ in range(10):
            a, b, c = (make_cloud(rng, int(rng.integers(4, 12)), 2) for _ in range(3))
            assert w2_distance(a, c) <= w2_distance(a, b) + w2_distance(b, c) + 1e-7


class TestCsvDumps:
    def test_cost_and_plan_files(self, rng, tmp_path):
        src, dst = make_cloud(rng, 3, 2), make_cloud(rng, 4, 2)
        M = cost_matrix(src, dst, 2)
        plan = solve_exact(src.masses, dst.masses, M)
        write_cost_csv(M, tmp_path / "cost.csv")
        write_plan_csv(plan, tmp_path / "plan.csv")
        cost_lines = (tmp_path / "cost.csv").read_text().splitlines()
        plan_lines = (tmp_path / "plan.csv").read_text().splitlines()
        assert cost_lines[0] == "rows,cols,exponent" and cost_lines[1] == "3,4,2"
        assert plan_lines[0] == "rows,cols,method" and plan_lines[1] == "3,4,exact"
        values = np.array([[float(v) for v in line.split(",")] for line in plan_lines[2:]])
        assert values.tobytes() == plan.coupling.tobytes()
