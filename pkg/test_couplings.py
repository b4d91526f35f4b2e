import numpy as np
import pytest

from app.core.exceptions import NotOrdered, InputError
from app.enum import OrderKind
from app.models.coupling import Coupling
from app.services import generators
from app.services.couplings import (
    product_coupling, diagonal_coupling, martingale_coupling, submartingale_coupling, verify_martingale,
    verify_submartingale, marginal_residual, drift, conditional_kernel, conditional_means, compose_chain,
    path_marginals, path_residuals, icx_decompose,
)
from app.services.measures import dirac, new_measure
from app.services.orders import check_cx

MARGINAL_TOL = 1e-9
VERIFY_TOL = 1e-8
EXAMPLE_PLAN = [[3 / 8, 1 / 8], [1 / 8, 3 / 8]]


class TestConstructions:
    def test_product(self):
        assert product_coupling(dirac(0), dirac(1)).plan.tolist() == [[1.0]]
        half = new_measure([0, 1], [0.5, 0.5])
        assert product_coupling(half, half).plan.tolist() == [[0.25, 0.25], [0.25, 0.25]]

    def test_product_marginals(self, symmetric_pair):
        assert marginal_residual(product_coupling(*symmetric_pair)) == 0.0

    def test_martingale_example(self, symmetric_pair):
        c = martingale_coupling(*symmetric_pair)
        assert np.allclose(c.plan, EXAMPLE_PLAN, atol=1e-12)

    def test_identity_is_feasible(self, symmetric_pair):
        mu, _ = symmetric_pair
        assert verify_martingale(martingale_coupling(mu, mu)).passes

    def test_unequal_means(self):
        with pytest.raises(NotOrdered) as info:
            martingale_coupling(dirac(0), dirac(1))
        assert info.value.gap > 0

    def test_submartingale(self):
        c = submartingale_coupling(dirac(0), new_measure([0, 1], [0.5, 0.5]))
        assert np.allclose(c.plan, [[0.5, 0.5]])
        with pytest.raises(NotOrdered):
            submartingale_coupling(dirac(1), dirac(0))


class TestVerify:
    def test_example_plan(self, symmetric_pair):
        c = Coupling(*symmetric_pair, plan=np.array(EXAMPLE_PLAN))
        assert verify_martingale(c, tol=1e-12).passes

    def test_product_is_not_martingale(self, symmetric_pair):
        report = verify_martingale(product_coupling(*symmetric_pair))
        assert not report.passes
        assert report.drift_residual == pytest.approx(0.5)

    def test_diagonal(self, symmetric_pair):
        assert verify_martingale(diagonal_coupling(symmetric_pair[0])).passes
        assert verify_submartingale(diagonal_coupling(symmetric_pair[1])).passes

    def test_submartingale_orientation(self):
        up = Coupling(dirac(0), new_measure([0, 1], [0.5, 0.5]), np.array([[0.5, 0.5]]))
        assert verify_submartingale(up).passes
        assert not verify_martingale(up).passes
        down = Coupling(dirac(1), dirac(0), np.array([[1.0]]))
        assert not verify_submartingale(down).passes


class TestConditionalKernel:
    def test_example_rows(self, symmetric_pair):
        kernel = conditional_kernel(Coupling(*symmetric_pair, plan=np.array(EXAMPLE_PLAN)))
        assert np.allclose(kernel.rows, [[0.75, 0.25], [0.25, 0.75]])

    def test_product_and_diagonal(self, symmetric_pair):
        mu, nu = symmetric_pair
        assert np.allclose(conditional_kernel(product_coupling(mu, nu)).rows, [nu.weights, nu.weights])
        assert np.allclose(conditional_kernel(diagonal_coupling(mu)).rows, np.eye(2))

    def test_drift_matches_conditional_means(self):
        for seed in range(40):
            mu, nu = generators.spread_pair(OrderKind.CX, atoms=4, dim=1 + seed % 2, seed=seed)
            for c in (martingale_coupling(mu, nu), product_coupling(mu, nu)):
                kernel = conditional_kernel(c)
                assert np.allclose(kernel.rows.sum(axis=1), 1.0, atol=1e-12)
                excess = conditional_means(kernel) - mu.points
                assert np.allclose(drift(c), mu.weights[:, None] * excess, atol=1e-12)


class TestRandomCouplings:
    @pytest.mark.parametrize("kind", list(OrderKind))
    def test_marginals_and_verification(self, kind):
        verify = verify_martingale if kind == OrderKind.CX else verify_submartingale
        build = martingale_coupling if kind == OrderKind.CX else submartingale_coupling
        for seed in range(60):
            mu, nu = generators.spread_pair(kind, atoms=4, dim=1 + seed % 3, seed=seed)
            c = build(mu, nu)
            assert marginal_residual(c) <= MARGINAL_TOL
            assert verify(c, tol=VERIFY_TOL).passes

    def test_deterministic(self):
        mu, nu = generators.spread_pair(OrderKind.CX, atoms=5, dim=2, seed=11)
        assert martingale_coupling(mu, nu) == martingale_coupling(mu, nu)


class TestComposeChain:
    def test_doubling_spreads(self):
        chain = [new_measure([-s, s], [0.5, 0.5]) for s in (1, 2, 4)]
        path = compose_chain(chain, OrderKind.CX)
        assert path.length == 3
        for kernel in path.kernels:
            assert np.allclose(kernel.rows, [[0.75, 0.25], [0.25, 0.75]])
        assert np.allclose(path_marginals(path)[1], [0.5, 0.5])

    def test_constant_chain(self, symmetric_pair):
        mu = symmetric_pair[0]
        path = compose_chain([mu, mu, mu], OrderKind.CX)
        for kernel in path.kernels:
            assert np.allclose(kernel.rows, np.eye(2))

    def test_break_reports_step(self):
        with pytest.raises(NotOrdered) as info:
            compose_chain([dirac(0), dirac(1)], OrderKind.CX)
        assert info.value.step == 2

    def test_needs_two_measures(self):
        with pytest.raises(InputError):
            compose_chain([dirac(0)], OrderKind.CX)

    @pytest.mark.parametrize("kind", list(OrderKind))
    def test_random_chains(self, kind):
        for seed in range(100):
            chain = generators.spread_chain(kind, length=5, atoms=2, dim=1 + seed % 2, seed=seed)
            residuals = path_residuals(compose_chain(chain, kind))
            assert residuals.max_marginal <= MARGINAL_TOL
            assert residuals.max_drift <= MARGINAL_TOL

    @pytest.mark.parametrize("kind, seeds", [(OrderKind.CX, (1, 3, 17)), (OrderKind.ICX, (1, 5, 15))])
    def test_planar_chains(self, kind, seeds):
        for seed in seeds:
            chain = generators.spread_chain(kind, length=5, atoms=2, dim=2, seed=seed)
            path = compose_chain(chain, kind)
            residuals = path_residuals(path)
            assert residuals.max_marginal <= MARGINAL_TOL
            assert residuals.max_drift <= MARGINAL_TOL


class TestIcxDecompose:
    def test_single_source(self):
        result = icx_decompose(dirac(0), new_measure([0, 1], [0.5, 0.5]))
        assert result.intermediate == dirac(0.5)
        assert result.dominated

    def test_everything_moves_to_one_point(self):
        result = icx_decompose(new_measure([0, 1], [0.5, 0.5]), dirac(2))
        assert result.images.tolist() == [[2.0], [2.0]]
        assert result.intermediate == dirac(2)
        assert result.dominated

    def test_random_pairs(self):
        for seed in range(200):
            mu, nu = generators.spread_pair(OrderKind.ICX, atoms=3, dim=1 + seed % 2, seed=seed)
            result = icx_decompose(mu, nu)
            assert result.dominated
            assert check_cx(result.intermediate, nu).holds
