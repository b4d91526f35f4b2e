import numpy as np
import pytest

from app.core.config import config
from app.core.exceptions import ParamMismatch, PerLabelFailure, WeightSumError, DimensionError
from app.enum import OrderKind
from app.services import couplings, generators
from app.services.kernels import (
    new_kernel, check_pointwise, pointwise_coupling, assemble_conditional, conditional_residuals, x_marginal,
    y_marginal, x_theta_marginal, mixture, check_conditional, sequence_pointwise_coupling,
    pointwise_icx_decompose,
)
from app.services.measures import dirac, new_measure

SPREAD = new_measure([-1, 1], [0.5, 0.5])


@pytest.fixture
def split_kernels():
    """Label a is a spread of d(0); label b moves d(1) down to d(0)."""
    P = new_kernel(["a", "b"], {"a": dirac(0), "b": dirac(1)})
    Q = new_kernel(["a", "b"], {"a": SPREAD, "b": dirac(0)})
    return P, Q


@pytest.fixture
def ordered_kernels():
    P = new_kernel(["a", "b"], {"a": dirac(0), "b": dirac(1)})
    Q = new_kernel(["a", "b"], {"a": SPREAD, "b": new_measure([0, 2], [0.5, 0.5])})
    return P, Q


class TestNewKernel:
    def test_labels_must_match_measures(self):
        with pytest.raises(ParamMismatch):
            new_kernel(["a"], {"b": dirac(0)})
        with pytest.raises(ParamMismatch):
            new_kernel([], {})

    def test_dimensions_must_agree(self):
        with pytest.raises(DimensionError):
            new_kernel(["a", "b"], {"a": dirac(0), "b": dirac([0, 0])})

    def test_different_label_sets(self, split_kernels):
        P, _ = split_kernels
        with pytest.raises(ParamMismatch):
            check_pointwise(P, new_kernel(["a"], {"a": SPREAD}), OrderKind.CX)


class TestPointwise:
    def test_failure_names_label(self, split_kernels):
        report = check_pointwise(*split_kernels, OrderKind.CX)
        assert not report.holds
        assert report.failing == ("b",)
        assert report.verdicts["a"].holds

    def test_coupling_failure_lists_every_failing_label(self, split_kernels):
        with pytest.raises(PerLabelFailure) as info:
            pointwise_coupling(*split_kernels, OrderKind.CX)
        assert list(info.value.failures) == ["b"]
        assert info.value.first[1].label == "b"

    def test_icx_also_fails_on_b(self, split_kernels):
        assert check_pointwise(*split_kernels, OrderKind.ICX).failing == ("b",)

    def test_label_order_does_not_matter(self, ordered_kernels):
        P, Q = ordered_kernels
        P2 = new_kernel(["b", "a"], dict(P.measures))
        Q2 = new_kernel(["b", "a"], dict(Q.measures))
        first = pointwise_coupling(P, Q, OrderKind.CX)
        second = pointwise_coupling(P2, Q2, OrderKind.CX)
        assert first.params == second.params == ("a", "b")
        assert all(first[label] == second[label] for label in first.params)

    def test_worker_pool_gives_identical_results(self, monkeypatch):
        P, Q, _ = generators.kernel_pair(OrderKind.CX, labels=50, atoms=2, seed=4)
        serial = pointwise_coupling(P, Q, OrderKind.CX)
        monkeypatch.setattr(config, "MAX_WORKERS", 4)
        pooled = pointwise_coupling(P, Q, OrderKind.CX)
        assert all(serial[label] == pooled[label] for label in serial.params)

    def test_zero_weight_labels_are_vacuous(self, split_kernels):
        report = check_pointwise(*split_kernels, OrderKind.CX, theta_law={"a": 1.0, "b": 0.0})
        assert report.holds
        assert report.vacuous == ("b",)

    def test_zero_weight_label_is_not_coupled(self, split_kernels):
        R = pointwise_coupling(*split_kernels, OrderKind.CX, theta_law={"a": 1.0, "b": 0.0})
        assert R.params == ("a",)
        cc = assemble_conditional({"a": 1.0, "b": 0.0}, R)
        assert cc.vacuous == ("b",)
        assert conditional_residuals(cc).passes

    def test_reversed_labels_give_identical_plans(self):
        P, Q, _ = generators.kernel_pair(OrderKind.CX, labels=50, atoms=3, seed=8)
        P2 = new_kernel(P.params[::-1], dict(P.measures))
        Q2 = new_kernel(Q.params[::-1], dict(Q.measures))
        first = pointwise_coupling(P, Q, OrderKind.CX)
        second = pointwise_coupling(P2, Q2, OrderKind.CX)
        assert first.params == second.params
        for label in first.params:
            assert first[label].plan.tobytes() == second[label].plan.tobytes()

    @pytest.mark.parametrize("kind", list(OrderKind))
    def test_verified_couplings_imply_pointwise_order(self, kind):
        for seed in range(250):
            P, Q, _ = generators.kernel_pair(kind, labels=2, atoms=2, dim=1 + seed % 2, seed=seed)
            R = pointwise_coupling(P, Q, kind)
            assert all(couplings.verify(R[label], kind, tol=1e-8).passes for label in R.params)
            assert check_pointwise(P, Q, kind).holds


class TestConditional:
    def test_assembled_law(self, ordered_kernels):
        P, Q = ordered_kernels
        cc = assemble_conditional({"a": 0.5, "b": 0.5}, pointwise_coupling(P, Q, OrderKind.CX))
        assert x_marginal(cc) == new_measure([0, 1], [0.5, 0.5])
        assert y_marginal(cc) == new_measure([-1, 0, 1, 2], [0.25, 0.25, 0.25, 0.25])
        assert np.allclose(x_theta_marginal(cc)["a"], [0.5])
        assert conditional_residuals(cc).passes

    def test_theta_law_must_match(self, ordered_kernels):
        R = pointwise_coupling(*ordered_kernels, OrderKind.CX)
        with pytest.raises(ParamMismatch):
            assemble_conditional({"a": 1.0}, R)
        with pytest.raises(WeightSumError):
            assemble_conditional({"a": 0.5, "b": 0.6}, R)

    def test_zero_weight_label_dropped(self, ordered_kernels):
        cc = assemble_conditional({"a": 1.0, "b": 0.0}, pointwise_coupling(*ordered_kernels, OrderKind.CX))
        assert cc.params == ("a",)
        assert cc.vacuous == ("b",)
        assert x_marginal(cc) == dirac(0)

    def test_mixture(self, ordered_kernels):
        P, _ = ordered_kernels
        assert mixture(P, {"a": 0.25, "b": 0.75}) == new_measure([0, 1], [0.25, 0.75])

    def test_conditional_order_implies_unconditional(self):
        for seed in range(50):
            for kind in OrderKind:
                P, Q, law = generators.kernel_pair(kind, labels=3, atoms=2, seed=seed)
                report = check_conditional(P, Q, law, kind)
                assert report.holds
                assert report.mixture.holds
                cc = assemble_conditional(law, pointwise_coupling(P, Q, kind))
                residuals = conditional_residuals(cc)
                assert residuals.passes
                assert residuals.x_theta <= 1e-9
                assert residuals.y_theta <= 1e-9

    def test_failing_label_breaks_conditional_order(self, split_kernels):
        report = check_conditional(*split_kernels, {"a": 0.5, "b": 0.5}, OrderKind.CX)
        assert not report.holds
        assert report.pointwise.failing == ("b",)


class TestSequences:
    def test_chains_per_label(self):
        K1 = new_kernel(["a", "b"], {"a": dirac(0), "b": dirac(1)})
        K2 = new_kernel(["a", "b"], {"a": SPREAD, "b": dirac(1)})
        K3 = new_kernel(["a", "b"], {"a": new_measure([-2, 2], [0.5, 0.5]), "b": new_measure([0, 2], [0.5, 0.5])})
        paths = sequence_pointwise_coupling([K1, K2, K3], OrderKind.CX)
        assert list(paths) == ["a", "b"]
        assert paths["a"].length == 3
        assert np.allclose(paths["a"].kernels[1].rows, [[0.75, 0.25], [0.25, 0.75]])

    def test_broken_chain_reports_step_and_label(self):
        K1 = new_kernel(["a", "b"], {"a": dirac(0), "b": dirac(1)})
        K2 = new_kernel(["a", "b"], {"a": SPREAD, "b": dirac(0)})
        with pytest.raises(PerLabelFailure) as info:
            sequence_pointwise_coupling([K1, K2], OrderKind.CX)
        label, error = info.value.first
        assert label == "b" and error.step == 2

    def test_pointwise_icx_decompose(self):
        P = new_kernel(["a", "b"], {"a": dirac(0), "b": new_measure([0, 1], [0.5, 0.5])})
        Q = new_kernel(["a", "b"], {"a": new_measure([0, 1], [0.5, 0.5]), "b": dirac(2)})
        parts = pointwise_icx_decompose(P, Q)
        assert parts["a"].intermediate == dirac(0.5)
        assert parts["b"].intermediate == dirac(2)
        assert all(part.dominated for part in parts.values())
