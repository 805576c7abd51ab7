import numpy as np
import pytest

from volpinn.quadrature import (
    QuadratureRule,
    UniformGrid,
    cumulative_trapezoid,
    prefix_trapezoid_matrix,
    simpson3,
    trapezoid,
)


class TestTrapezoid:
    def test_exact_for_linear(self):
        assert trapezoid([0.0, 0.5, 1.0], 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_constant_integrand(self):
        for n in (2, 5, 11, 100):
            xs = np.linspace(0.0, 5.0, n)
            assert trapezoid(np.ones(n), xs[1] - xs[0]) == pytest.approx(5.0, abs=1e-12)

    def test_quadratic_on_unit_interval(self):
        # error is exactly (b-a) * dx^2 * h'' / 12 = 1 * 1e-4 * 2 / 12 for x^2
        xs = np.linspace(0.0, 1.0, 101)
        value = trapezoid(xs ** 2, xs[1] - xs[0])
        assert abs(value - 1.0 / 3.0) < 2e-5
        assert abs(value - 1.0 / 3.0) == pytest.approx(2e-4 / 12.0, rel=1e-10)

    def test_rejects_short_input(self):
        with pytest.raises(ValueError):
            trapezoid([1.0], 0.1)

    def test_rejects_bad_spacing(self):
        with pytest.raises(ValueError):
            trapezoid([1.0, 2.0], 0.0)

    def test_second_order_convergence(self):
        for fn in (lambda x: x ** 2, np.sin, np.exp):
            errors = []
            for n in (33, 65, 129):
                xs = np.linspace(0.0, 1.0, n)
                exact = trapezoid(fn(np.linspace(0.0, 1.0, 20001)), 1.0 / 20000)
                errors.append(abs(trapezoid(fn(xs), xs[1] - xs[0]) - exact))
            for coarse, fine in zip(errors[:-1], errors[1:]):
                assert 3.0 < coarse / fine < 5.0

    def test_linearity(self):
        rng = np.random.default_rng(3)
        u = rng.normal(size=64)
        w = rng.normal(size=64)
        alpha, beta = 1.7, -0.4
        lhs = trapezoid(alpha * u + beta * w, 0.01)
        rhs = alpha * trapezoid(u, 0.01) + beta * trapezoid(w, 0.01)
        assert abs(lhs - rhs) < 1e-13


class TestCumulativeTrapezoid:
    def test_hand_summed_prefixes(self):
        out = cumulative_trapezoid([0.0, 1.0, 2.0], 0.5)
        assert out == pytest.approx([0.0, 0.25, 1.0], abs=1e-15)

    def test_zero_input(self):
        assert np.all(cumulative_trapezoid(np.zeros(17), 0.1) == 0.0)

    def test_exponential_endpoint(self):
        xs = np.linspace(0.0, 1.0, 201)
        out = cumulative_trapezoid(np.exp(xs), xs[1] - xs[0])
        assert abs(out[-1] - (np.e - 1.0)) < 1e-4

    def test_consistent_with_total(self):
        rng = np.random.default_rng(11)
        values = rng.normal(size=301)
        out = cumulative_trapezoid(values, 0.003)
        assert abs(out[-1] - trapezoid(values, 0.003)) < 1e-14

    def test_monotone_for_nonnegative(self):
        rng = np.random.default_rng(4)
        values = np.abs(rng.normal(size=100))
        out = cumulative_trapezoid(values, 0.05)
        assert np.all(np.diff(out) >= 0.0)


class TestSimpson3:
    def test_exact_for_cubic(self):
        assert simpson3(0.0, 0.125, 1.0, 0.0, 1.0) == pytest.approx(0.25, abs=1e-16)

    def test_constant(self):
        assert simpson3(1.0, 1.0, 1.0, 2.0, 4.0) == pytest.approx(2.0, abs=1e-15)

    def test_short_exponential_interval(self):
        f = np.exp
        value = simpson3(f(0.0), f(0.005), f(0.01), 0.0, 0.01)
        assert abs(value - (np.exp(0.01) - 1.0)) < 1e-12

    def test_exact_for_random_cubics(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            c = rng.normal(size=4)
            a = rng.uniform(-3.0, 3.0)
            b = a + rng.uniform(0.1, 4.0)
            poly = np.polynomial.Polynomial(c)
            exact = poly.integ()(b) - poly.integ()(a)
            got = simpson3(poly(a), poly(0.5 * (a + b)), poly(b), a, b)
            assert abs(got - exact) < 1e-12 * max(1.0, abs(exact))

    def test_rejects_reversed_interval(self):
        with pytest.raises(ValueError):
            simpson3(0.0, 0.0, 0.0, 1.0, 1.0)


class TestPrefixMatrix:
    def test_matches_cumulative_trapezoid(self):
        rng = np.random.default_rng(5)
        values = rng.normal(size=41)
        C = prefix_trapezoid_matrix(41, 0.02)
        assert np.allclose(C @ values, cumulative_trapezoid(values, 0.02), atol=1e-14)

    def test_lower_triangular(self):
        C = prefix_trapezoid_matrix(10, 0.1)
        assert np.all(C[np.triu_indices(10, k=1)] == 0.0)
        assert np.all(C[0] == 0.0)


class TestRuleAndGrid:
    def test_grid_nodes(self):
        grid = UniformGrid(0.0, 1.0, 11)
        assert grid.spacing == pytest.approx(0.1)
        nodes = grid.nodes()
        assert nodes[0] == 0.0 and nodes[-1] == 1.0
        assert np.allclose(np.diff(nodes), 0.1)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            UniformGrid(0.0, 1.0, 1)
        with pytest.raises(ValueError):
            UniformGrid(1.0, 1.0, 5)

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            QuadratureRule(kind="gauss")
        with pytest.raises(ValueError):
            QuadratureRule(points=1)
