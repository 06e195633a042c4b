import math

import numpy as np
import pytest

from eulerreach.discretization import (
    dyadic_invariants_ok,
    initial_discretization,
    subdivide,
    uniform_discretization,
    Discretization,
)
from eulerreach.errors import CouplingError, InvariantViolation
from eulerreach.refine import (
    VolumeSplines,
    algorithm_adaptive,
    algorithm_uniform,
    cost_component,
    cost_components,
    cost_estimate,
    default_ladder,
    delta_cost,
    delta_cost_all,
    delta_error,
    delta_error_all,
    error_component,
    error_components,
    error_partial_sums,
    error_total,
    estimator_relative_error,
    greedy_select,
    uniform_step_count,
)
from eulerreach.systems import make_exponential_system, make_michaelis_menten

E = math.e


def _flat_splines(value=1.0):
    return VolumeSplines(
        np.array([0.0, 1.0]), np.array([value, value]), np.array([1.0, 1.0])
    )


class TestErrorBound:
    def test_initial_components(self):
        # L = P = T = 1: rho_0 = 2, so the node-0 term is e and the single
        # step term is (e - 1)(1 + 1 + 1)
        disc = initial_discretization(1.0, 1.0, 1.0)
        assert error_component(disc, 1.0, 1.0, 0) == pytest.approx(E)
        assert error_component(disc, 1.0, 1.0, 1) == pytest.approx(3 * (E - 1))
        assert error_total(disc, 1.0, 1.0) == pytest.approx(4 * E - 3)

    def test_components_vector_matches_scalar(self):
        disc = subdivide(subdivide(initial_discretization(1.0, 2.0, 0.5), 1), 2)
        comp = error_components(disc, 2.0, 0.5)
        for j in range(disc.n + 1):
            assert comp[j] == pytest.approx(error_component(disc, 2.0, 0.5, j))

    def test_partial_sums(self):
        disc = subdivide(initial_discretization(1.0, 1.0, 1.0), 1)
        ps = error_partial_sums(disc, 1.0, 1.0)
        comp = error_components(disc, 1.0, 1.0)
        assert np.allclose(ps, np.cumsum(comp))
        assert ps[-1] == pytest.approx(error_total(disc, 1.0, 1.0))

    def test_index_out_of_range(self):
        disc = initial_discretization(1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            error_component(disc, 1.0, 1.0, 2)


class TestDeltaError:
    def test_initial_values(self):
        disc = initial_discretization(1.0, 1.0, 1.0)
        # quartering rho_0 = 2 changes the node-0 term by -3/8 * e * 2
        assert delta_error(disc, 1.0, 1.0, 0) == pytest.approx(-0.75 * E)
        assert delta_error(disc, 1.0, 1.0, 1) == pytest.approx(-1.75 * (E - 1))

    def test_requires_coupling(self):
        disc = uniform_discretization(1.0, 4)  # rho = h^2, not 2*L*P*h^2
        with pytest.raises(CouplingError):
            delta_error(disc, 1.0, 1.0, 1)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_recomputation(self, seed):
        rng = np.random.default_rng(seed)
        L, P = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 3.0))
        disc = initial_discretization(1.0, L, P)
        for _ in range(int(rng.integers(3, 15))):
            disc = subdivide(disc, int(rng.integers(0, disc.n + 1)))
        e = error_total(disc, L, P)
        for k in range(disc.n + 1):
            de = delta_error(disc, L, P, k)
            assert de == pytest.approx(
                error_total(subdivide(disc, k), L, P) - e, rel=1e-10, abs=1e-12 * e
            )

    def test_at_least_half_component(self):
        rng = np.random.default_rng(123)
        L, P = 2.0, 1.5
        disc = initial_discretization(1.0, L, P)
        for _ in range(20):
            disc = subdivide(disc, int(rng.integers(0, disc.n + 1)))
        de = delta_error_all(disc, L, P)
        comp = error_components(disc, L, P)
        assert np.all(de <= -0.5 * comp + 1e-15)


class TestVolumeSplines:
    def test_reproduces_node_values(self):
        s = VolumeSplines(
            np.array([0.0, 0.5, 1.0]),
            np.array([1.0, 3.0, 2.0]),
            np.array([4.0, 1.0, 2.0]),
        )
        assert s.v_R(0.5) == 3.0
        assert s.v_F(1.0) == 2.0
        assert s.v_RF(0.0) == 4.0

    def test_linear_between_nodes(self):
        s = VolumeSplines(
            np.array([0.0, 1.0]), np.array([1.0, 3.0]), np.array([2.0, 2.0])
        )
        assert s.v_R(0.25) == pytest.approx(1.5)

    def test_rejects_nonpositive_values(self):
        with pytest.raises(ValueError):
            VolumeSplines(np.array([0.0, 1.0]), np.array([1.0, 0.0]), np.ones(2))


class TestCostEstimator:
    def test_flat_spline_uniform_grid(self):
        # h = 1/2, rho = 1 everywhere, V = 1: each step predicts h/1 = 1/2
        disc = Discretization(1.0, (0.5, 0.5), (0.0, 0.5, 1.0), (1.0, 1.0, 1.0))
        s = _flat_splines()
        assert cost_component(disc, s, 1, 1, 0) == pytest.approx(0.5)
        assert cost_estimate(disc, s, 1, 1) == pytest.approx(1.0)

    def test_components_match_scalar(self):
        disc = subdivide(subdivide(initial_discretization(1.0, 1.0, 1.0), 1), 1)
        s = VolumeSplines(
            np.array([0.0, 1.0]), np.array([1.0, 5.0]), np.array([2.0, 1.0])
        )
        comp = cost_components(disc, s, 2, 1)
        for j in range(disc.n):
            assert comp[j] == pytest.approx(cost_component(disc, s, 2, 1, j))

    def test_exact_on_own_run(self):
        system = make_exponential_system(1, 1.0)
        _, record = algorithm_uniform(system, 1.0)
        splines = VolumeSplines.from_run(record)
        assert estimator_relative_error(record, splines) <= 1e-9

    def test_exact_on_own_run_mixed_exponents(self):
        from eulerreach.euler import euler_run

        system = make_michaelis_menten()
        record = euler_run(system, uniform_discretization(1.0, 10))
        assert estimator_relative_error(record, VolumeSplines.from_run(record)) <= 1e-9


class TestDeltaCost:
    def test_first_index_closed_form(self):
        # V = 1, d_R = d_F = 1: quartering rho_0 = 1 multiplies the first
        # summand h_0 / (rho_0 * rho_1) = 1/2 by 4, a change of +3/2
        disc = Discretization(1.0, (0.5, 0.5), (0.0, 0.5, 1.0), (1.0, 1.0, 1.0))
        assert delta_cost(disc, _flat_splines(), 1, 1, 0) == pytest.approx(1.5)

    @pytest.mark.parametrize("d_R,d_F", [(1, 1), (2, 2), (2, 1), (3, 2)])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_recomputation(self, d_R, d_F, seed):
        rng = np.random.default_rng(seed)
        disc = initial_discretization(1.0, 1.0, 1.0)
        for _ in range(int(rng.integers(2, 12))):
            disc = subdivide(disc, int(rng.integers(0, disc.n + 1)))
        s = VolumeSplines(
            np.array([0.0, 0.3, 1.0]),
            rng.uniform(0.5, 4.0, size=3),
            rng.uniform(0.5, 4.0, size=3),
        )
        c = cost_estimate(disc, s, d_R, d_F)
        for k in range(disc.n + 1):
            dc = delta_cost(disc, s, d_R, d_F, k)
            assert dc == pytest.approx(
                cost_estimate(subdivide(disc, k), s, d_R, d_F) - c,
                rel=1e-10,
                abs=1e-12 * c,
            )
            assert dc > 0.0

    def test_all_matches_scalar(self):
        disc = subdivide(subdivide(initial_discretization(1.0, 1.0, 1.0), 1), 2)
        s = _flat_splines(3.0)
        all_dc = delta_cost_all(disc, s, 2, 1)
        for k in range(disc.n + 1):
            assert all_dc[k] == pytest.approx(delta_cost(disc, s, 2, 1, k))

    def test_index_out_of_range(self):
        disc = initial_discretization(1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            delta_cost(disc, _flat_splines(), 1, 1, 2)


class TestGreedySelect:
    def test_consistent_with_manual_argmax(self):
        rng = np.random.default_rng(17)
        L, P = 1.0, 1.0
        disc = initial_discretization(1.0, L, P)
        s = VolumeSplines(
            np.array([0.0, 1.0]), np.array([1.0, 2.0]), np.array([1.5, 1.0])
        )
        for _ in range(15):
            ratios = -delta_error_all(disc, L, P) / delta_cost_all(disc, s, 1, 1)
            k = greedy_select(disc, L, P, s, 1, 1)
            assert k == int(np.argmax(ratios))
            disc = subdivide(disc, k)


class TestUniformSolver:
    @pytest.mark.parametrize("eps", [0.25, 0.125, 1.0, 3.0])
    def test_step_count_minimal(self, eps):
        system = make_exponential_system(1, 1.0)
        n = uniform_step_count(system, eps)
        L, P = system.lipschitz, system.bound
        assert error_total(uniform_discretization(1.0, n), L, P) <= eps
        if n > 1:
            assert error_total(uniform_discretization(1.0, n - 1), L, P) > eps

    def test_step_count_brute_scan(self):
        system = make_exponential_system(1, 1.0)
        L, P = system.lipschitz, system.bound
        for eps in (20.0, 9.0, 2.0, 0.6):
            n = uniform_step_count(system, eps)
            want = next(
                m
                for m in range(1, 500)
                if error_total(uniform_discretization(1.0, m), L, P) <= eps
            )
            assert n == want

    def test_solver_meets_tolerance(self):
        system = make_exponential_system(1, 1.0)
        disc, record = algorithm_uniform(system, 0.5)
        assert record.error_bound <= 0.5
        assert disc.n == uniform_step_count(system, 0.5)

    def test_invalid_eps(self):
        with pytest.raises(ValueError):
            uniform_step_count(make_exponential_system(1, 1.0), 0.0)


class TestLadder:
    def test_powers_of_two_down_to_target(self):
        assert default_ladder(7.87, 0.25) == [4.0, 2.0, 1.0, 0.5, 0.25]

    def test_starts_strictly_below_initial(self):
        assert default_ladder(8.0, 2.0) == [4.0, 2.0]

    def test_target_appended_if_not_power(self):
        assert default_ladder(10.0, 1.5) == [8.0, 4.0, 2.0, 1.5]

    def test_invalid(self):
        with pytest.raises(ValueError):
            default_ladder(1.0, 0.0)


class TestAdaptiveSolver:
    def test_trivial_ladder_two_runs_no_refinement(self):
        system = make_exponential_system(1, 1.0)
        e0 = error_total(
            initial_discretization(1.0, system.lipschitz, system.bound),
            system.lipschitz,
            system.bound,
        )
        disc, record, trace = algorithm_adaptive(system, [2.0 * e0])
        assert disc.n == 1
        assert len(trace.iterations) == 0
        assert len(trace.thresholds) == 2
        assert trace.thresholds[0].eps is None
        assert trace.thresholds[0].planning_splines is None
        assert trace.thresholds[1].planning_splines is not None

    def test_meets_target_and_invariants(self):
        system = make_exponential_system(1, 1.0)
        disc, record, trace = algorithm_adaptive(system, [4.0, 2.0, 1.0])
        assert record.error_bound <= 1.0
        assert dyadic_invariants_ok(disc)
        errs = [it.error_after for it in trace.iterations]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert trace.thresholds[-1].cost_cumulative == sum(
            th.record.cost_total for th in trace.thresholds
        )

    def test_threshold_errors_meet_their_eps(self):
        system = make_exponential_system(1, 1.0)
        _, _, trace = algorithm_adaptive(system, [4.0, 1.0, 0.5])
        for th in trace.thresholds[1:]:
            assert th.record.error_bound <= th.eps

    def test_replayed_iterations_reproduce_discretization(self):
        system = make_exponential_system(1, 1.0)
        disc, _, trace = algorithm_adaptive(system, [4.0, 1.0])
        replay = initial_discretization(1.0, system.lipschitz, system.bound)
        for it in trace.iterations:
            replay = subdivide(replay, it.k)
            assert replay.n == it.n_after
        assert replay.h == disc.h and replay.rho == disc.rho

    def test_invalid_ladders(self):
        system = make_exponential_system(1, 1.0)
        with pytest.raises(ValueError):
            algorithm_adaptive(system, [])
        with pytest.raises(ValueError):
            algorithm_adaptive(system, [1.0, 2.0])
        with pytest.raises(ValueError):
            algorithm_adaptive(system, [1.0, -1.0])
