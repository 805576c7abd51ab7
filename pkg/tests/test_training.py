import numpy as np
import pytest

from volpinn import network
from volpinn.network import MLP
from volpinn.problems import LinearIVP, get_problem, zero_fn
from volpinn.quadrature import (
    SIMPSON,
    TRAPEZOID,
    QuadratureRule,
    UniformGrid,
    prefix_trapezoid_matrix,
)
from volpinn.training import (
    SegmentDivergedError,
    SegmentPlan,
    TrainConfig,
    TrainingDivergedError,
    TrainReport,
    higher_order_ic_transfer,
    loss,
    solve_sequential,
    train_segment,
)
from volpinn.weakform import (
    SystemIntegralForm,
    build_volterra,
    kernel_prefix_matrix,
)

from test_network import flatten_grad, get_flat_params, set_flat_params
from test_problems import case1_d2u, case1_du, case1_u, case2_du

FAST = TrainConfig(collocation_count=31, epochs=150, hidden_layers=(16, 16),
                   seed=0)


def case2_form():
    return build_volterra(get_problem("case2").ivp)


class TestLoss:
    def test_exact_derivative_stub_sits_at_quadrature_floor(self):
        # with the exact v the only residual is trapezoid error, whose
        # squared mean over this grid was measured once at 1.233e-5
        grid = UniformGrid(0.0, 0.05, 101)
        value = loss([case2_du], case2_form(), grid)
        assert value == pytest.approx(1.2328e-5, rel=1e-3)
        assert value < 2.3e-5                      # (max residual model)^2

    def test_zero_network_loss_pinned_by_direct_evaluation(self):
        grid = UniformGrid(0.0, 0.05, 101)
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        value = loss([zero], case2_form(), grid)
        xs = grid.nodes()
        direct = float(np.mean((100.0 - np.exp(-xs)) ** 2))
        assert value == pytest.approx(direct, rel=1e-14)
        assert value == pytest.approx(9805.868925346707, rel=1e-12)

    def test_empty_equation_has_zero_loss(self):
        ivp = LinearIVP(order=1, coeffs=(zero_fn,), forcing=zero_fn,
                        domain=(0.0, 1.0), init_values=(0.0,))
        grid = UniformGrid(0.0, 1.0, 21)
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        assert loss([zero], build_volterra(ivp), grid) == 0.0

    def test_nonnegative_and_wrong_count_rejected(self):
        grid = UniformGrid(0.0, 0.05, 11)
        rng = np.random.default_rng(0)
        noisy = lambda x: rng.normal(size=np.asarray(x).shape)
        assert loss([noisy], case2_form(), grid) >= 0.0
        with pytest.raises(ValueError):
            loss([noisy, noisy], case2_form(), grid)


class TestGradientAssembly:
    """Finite-difference verification of the full training gradient,
    including the integral-operator transpose terms."""

    def test_linear_path_gradient_matches_finite_differences(self):
        ivp = get_problem("case2").ivp.restricted(0.0, 0.02, (2.0,))
        form = build_volterra(ivp)
        grid = UniformGrid(0.0, 0.02, 31)
        xs = grid.nodes()
        m = xs.size
        K = kernel_prefix_matrix(form, grid)
        g = np.asarray(form.forcing(xs))
        net = MLP.initialized((1, 5, 1), "tanh", seed=3)

        v, acts, zs = network._forward_cached(net, xs)
        R = v + K @ v - g
        dv = (2.0 / m) * (R + K.T @ R)
        analytic = flatten_grad(network._backprop(net, acts, zs, dv))

        flat = get_flat_params(net)
        fd = np.empty_like(flat)
        for i in range(flat.size):
            for sign, slot in ((1.0, 0), (-1.0, 1)):
                bumped = flat.copy()
                bumped[i] += sign * 1e-6
                set_flat_params(net, bumped)
                value = loss([net], form, grid)
                if slot == 0:
                    up = value
                else:
                    down = value
            fd[i] = (up - down) / 2e-6
        set_flat_params(net, flat)
        mask = np.abs(analytic) > 1e-8
        rel = np.abs(analytic[mask] - fd[mask]) / np.abs(analytic[mask])
        assert rel.max() < 1e-5

    def test_system_path_gradient_matches_finite_differences(self):
        # also checks the per-species coupling: each residual row depends on
        # every network through the reconstructed state
        prob = get_problem("case3")
        sub = prob.system.restricted(0.0, 0.3, prob.system.init_values)
        sif = SystemIntegralForm(system=sub, lower_limit=0.0,
                                 init_values=sub.init_values)
        grid = UniformGrid(0.0, 0.3, 21)
        xs = grid.nodes()
        m = xs.size
        C = prefix_trapezoid_matrix(m, grid.spacing)
        nets = [MLP.initialized((1, 5, 1), "tanh", seed=3),
                MLP.initialized((1, 5, 1), "tanh", seed=4)]

        V = np.empty((2, m))
        caches = []
        for k, net in enumerate(nets):
            v, acts, zs = network._forward_cached(net, xs)
            V[k] = v
            caches.append((acts, zs))
        U = sub.init_values[:, None] + V @ C.T
        Q = np.empty_like(V)
        for j in range(m):
            Q[:, j] = sub.rhs(U[:, j], xs[j])
        R = V - Q
        JR = np.empty_like(V)
        for j in range(m):
            J = sub.jacobian(U[:, j], xs[j])
            JR[:, j] = J.T @ R[:, j]

        for k, net in enumerate(nets):
            dv = (2.0 / m) * (R[k] - C.T @ JR[k])
            acts, zs = caches[k]
            analytic = flatten_grad(network._backprop(net, acts, zs, dv))
            flat = get_flat_params(net)
            fd = np.empty_like(flat)
            for i in range(flat.size):
                bumped = flat.copy()
                bumped[i] += 1e-6
                set_flat_params(net, bumped)
                up = loss(nets, sif, grid)
                bumped[i] -= 2e-6
                set_flat_params(net, bumped)
                down = loss(nets, sif, grid)
                fd[i] = (up - down) / 2e-6
            set_flat_params(net, flat)
            mask = np.abs(analytic) > 1e-8
            rel = np.abs(analytic[mask] - fd[mask]) / np.abs(analytic[mask])
            assert rel.max() < 1e-5


class TestTrainSegment:
    def test_single_epoch_returns_valid_report(self):
        cfg = TrainConfig(collocation_count=21, epochs=1, hidden_layers=(8,))
        nets, report = train_segment(get_problem("case2").ivp, (0.0, 0.05),
                                     (2.0,), cfg)
        assert len(nets) == 1
        assert np.isfinite(report.final_loss)
        assert report.loss_history.shape == (1,)
        assert report.boundary_state.shape == (1,)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_carries_epoch(self):
        cfg = TrainConfig(collocation_count=21, epochs=10, hidden_layers=(8,),
                          learning_rate=1e200)
        with pytest.raises(TrainingDivergedError) as err:
            train_segment(get_problem("case2").ivp, (0.0, 0.05), (2.0,), cfg)
        assert err.value.epoch >= 2

    def test_best_epoch_parameters_are_returned(self):
        nets, report = train_segment(get_problem("case2").ivp, (0.0, 0.05),
                                     (2.0,), FAST)
        grid = UniformGrid(0.0, 0.05, FAST.collocation_count)
        form = build_volterra(get_problem("case2").ivp.restricted(0.0, 0.05, (2.0,)))
        final = loss(nets, form, grid)
        assert final == pytest.approx(report.final_loss, rel=1e-12)
        assert report.final_loss == report.loss_history.min()
        assert report.best_epoch == int(np.argmin(report.loss_history)) + 1

    def test_loss_history_descends_overall(self):
        _, report = train_segment(get_problem("case2").ivp, (0.0, 0.05),
                                  (2.0,), FAST)
        assert report.final_loss < report.initial_loss

    def test_system_segment_smoke(self):
        prob = get_problem("case3")
        nets, report = train_segment(prob.system, (0.0, 0.2),
                                     prob.system.init_values, FAST)
        assert len(nets) == 2
        assert report.boundary_state.shape == (2,)
        assert report.final_loss < report.initial_loss


class TestIcTransfer:
    def test_zero_v_gives_taylor_values(self):
        form = build_volterra(get_problem("case1").ivp)
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        out = higher_order_ic_transfer([zero], form, 0.1)
        assert out == pytest.approx([2.0, 10.0], abs=1e-14)

    def test_exact_v_recovers_solution_and_derivative(self):
        form = build_volterra(get_problem("case1").ivp)
        out = higher_order_ic_transfer([case1_d2u], form, 0.1,
                                       quad=QuadratureRule(TRAPEZOID, 2001))
        assert abs(out[0] - case1_u(0.1)) < 1e-5
        assert abs(out[1] - case1_du(0.1)) < 1e-5

    def test_first_order_problem_single_entry(self):
        form = build_volterra(get_problem("case2").ivp)
        out = higher_order_ic_transfer([case2_du], form, 0.05,
                                       quad=QuadratureRule(TRAPEZOID, 2001))
        assert out.shape == (1,)
        assert abs(out[0] - 0.18190763859222239) < 1e-6


class TestSolveSequential:
    def test_single_segment_reduces_to_train_segment(self):
        plan = SegmentPlan.single(0.0, 0.05, FAST)
        table, reports = solve_sequential(get_problem("case2").ivp, plan)
        assert len(reports) == 1
        assert table.grid[0] == 0.0 and table.grid[-1] == 0.05
        assert table.values.shape == (FAST.collocation_count, 1)

    def test_boundary_handoff_is_bitwise(self):
        plan = SegmentPlan((0.0, 0.1, 0.4), FAST)
        table, reports = solve_sequential(get_problem("case1").ivp, plan)
        j = FAST.collocation_count - 1   # index of the first interior boundary
        assert table.grid[j] == 0.1
        assert table.values[j, 0] == reports[0].boundary_state[0]
        assert table.derivs[j, 0] == reports[0].boundary_state[1]

    def test_case1_alternate_plan_shapes(self):
        # the segment layout is caller-controlled; a (0, 0.3) split of the
        # same domain is equally runnable
        plan = SegmentPlan((0.0, 0.3, 0.4), FAST)
        table, reports = solve_sequential(get_problem("case1").ivp, plan)
        assert len(reports) == 2
        assert table.grid[-1] == 0.4

    def test_plan_prefix_of_domain_is_allowed(self):
        table, _ = solve_sequential(get_problem("case2").ivp,
                                    SegmentPlan((0.0, 0.02), FAST))
        assert table.grid[-1] == 0.02

    def test_plan_must_start_at_initial_conditions(self):
        with pytest.raises(ValueError):
            solve_sequential(get_problem("case2").ivp,
                             SegmentPlan((0.01, 0.05), FAST))

    def test_plan_must_stay_inside_domain(self):
        with pytest.raises(ValueError):
            solve_sequential(get_problem("case2").ivp,
                             SegmentPlan((0.0, 0.08), FAST))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_segment_and_partial(self):
        bad = TrainConfig(collocation_count=21, epochs=10, hidden_layers=(8,),
                          learning_rate=1e200)
        plan = SegmentPlan((0.0, 0.1, 0.4), bad)
        with pytest.raises(SegmentDivergedError) as err:
            solve_sequential(get_problem("case1").ivp, plan)
        assert err.value.segment_index == 0
        assert err.value.partial is None

    def test_system_sequential_smoke(self):
        prob = get_problem("case3")
        plan = SegmentPlan.uniform(0.0, 1.0, 2, FAST)
        table, reports = solve_sequential(prob.system, plan)
        assert table.values.shape[1] == 2
        assert len(reports) == 2
        assert table.grid.size == 2 * FAST.collocation_count - 1

    def test_simpson_transfer_path(self):
        cfg = TrainConfig(collocation_count=9, epochs=50, hidden_layers=(8,),
                          transfer_quadrature=SIMPSON)
        plan = SegmentPlan((0.0, 0.025, 0.05), cfg)
        table, reports = solve_sequential(get_problem("case2").ivp, plan)
        assert np.all(np.isfinite(table.values))


class TestPlansAndConfig:
    def test_plan_validation(self):
        with pytest.raises(ValueError):
            SegmentPlan((0.0,), FAST)
        with pytest.raises(ValueError):
            SegmentPlan((0.0, 0.5, 0.5), FAST)

    def test_logspaced_plan(self):
        plan = SegmentPlan.logspaced(1e-5, 1e-1, 4, FAST)
        assert plan.boundaries == pytest.approx((1e-5, 1e-4, 1e-3, 1e-2, 1e-1))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(collocation_count=1)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(transfer_quadrature="gauss")

    def test_report_normalization_and_csv(self, tmp_path):
        report = TrainReport(segment=(0.0, 1.0),
                             loss_history=np.array([4.0, 2.0, 1.0]),
                             initial_loss=4.0, final_loss=1.0, best_epoch=3,
                             wall_time=0.1, boundary_state=np.array([1.0]))
        assert report.normalized_final == pytest.approx(0.25)
        assert report.normalized_history[-1] == pytest.approx(0.25)
        path = tmp_path / "conv.csv"
        report.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,loss,normalized_loss"
        assert len(lines) == 4
