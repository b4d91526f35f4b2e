import json

import numpy as np
import pytest

from app.core.config import config
from app.core.exceptions import EXIT_OK, EXIT_PREDICATE_FALSE, EXIT_ERROR
from app.routes import run

SPREAD_PAIR = {"mu": {"points": [-1, 1], "weights": [0.5, 0.5]},
               "nu": {"points": [-2, 2], "weights": [0.5, 0.5]}}
REVERSED_PAIR = {"mu": SPREAD_PAIR["nu"], "nu": SPREAD_PAIR["mu"]}
NOISY = {"points": [0.5, 1.5], "weights": [0.5, 0.5]}
EXACT = {"points": [1], "weights": [1]}


def pm_spec(weights):
    return {"states": ["a", "b"], "target": [1 / 3, 2 / 3], "proposal": [[0, 1], [1, 0]],
            "weights": {"a": weights, "b": weights}}


@pytest.fixture
def invoke(tmp_path, capsys):
    """Write ``doc`` to a file, run the command on it and return (exit code, parsed report)."""
    def call(*argv, doc=None):
        args = list(argv)
        if doc is not None:
            path = tmp_path / "input.json"
            path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
            args.append(str(path))
        code = run(args)
        return code, json.loads(capsys.readouterr().out)
    return call


class TestOrderCommands:
    def test_check_order(self, invoke):
        code, report = invoke("check-order", doc=SPREAD_PAIR)
        assert code == EXIT_OK
        assert report["holds"] and report["method"] == "UnivariateBreakpoint"

    def test_check_order_two_files(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        a.write_text(json.dumps({"points": [0], "weights": [1]}))
        b.write_text(json.dumps({"points": [1], "weights": [1]}))
        assert run(["check-order", "--kind", "cx", str(a), str(b)]) == EXIT_PREDICATE_FALSE
        assert json.loads(capsys.readouterr().out)["witness"]["test"] == "mean"

    def test_check_order_fails_with_witness(self, invoke):
        code, report = invoke("check-order", "--method", "lp", doc=REVERSED_PAIR)
        assert code == EXIT_PREDICATE_FALSE
        assert report["witness"]["test"] == "lp_gap"

    def test_couple(self, invoke):
        code, report = invoke("couple", doc=SPREAD_PAIR)
        assert code == EXIT_OK
        assert np.allclose(report["coupling"]["plan"], [[0.375, 0.125], [0.125, 0.375]])
        assert report["verification"]["passes"]

    def test_couple_icx_reports_intermediate(self, invoke):
        pair = {"mu": {"points": [0], "weights": [1]}, "nu": {"points": [0, 1], "weights": [0.5, 0.5]}}
        code, report = invoke("couple", "--kind", "icx", doc=pair)
        assert code == EXIT_OK
        assert report["intermediate"] == {"points": [[0.5]], "weights": [1.0]}

    def test_couple_unordered(self, invoke):
        code, report = invoke("couple", doc=REVERSED_PAIR)
        assert code == EXIT_PREDICATE_FALSE
        assert report["error"] == "NotOrdered" and report["gap"] > 0

    def test_verify(self, invoke):
        coupling = {"source": SPREAD_PAIR["mu"], "target": SPREAD_PAIR["nu"],
                    "plan": [[0.375, 0.125], [0.125, 0.375]]}
        assert invoke("verify", doc=coupling)[0] == EXIT_OK
        coupling["plan"] = [[0.25, 0.25], [0.25, 0.25]]
        code, report = invoke("verify", doc=coupling)
        assert code == EXIT_PREDICATE_FALSE
        assert report["drift_residual"] == pytest.approx(0.5)

    def test_couple_then_verify(self, invoke):
        for seed in ("1", "2", "3"):
            _, generated = invoke("gen", "--atoms", "3", "--dim", "2", "--seed", seed)
            _, coupled = invoke("couple", doc=generated["instance"])
            code, report = invoke("verify", doc=coupled["coupling"])
            assert code == EXIT_OK and report["passes"]

    def test_compose_break(self, invoke):
        doc = {"measures": [{"points": [0], "weights": [1]}, {"points": [1], "weights": [1]}]}
        code, report = invoke("compose", doc=doc)
        assert code == EXIT_PREDICATE_FALSE
        assert report["step"] == 2

    def test_conditional_names_failing_label(self, invoke):
        doc = {"P": {"measures": {"a": {"points": [0], "weights": [1]}, "b": {"points": [1], "weights": [1]}}},
               "Q": {"measures": {"a": SPREAD_PAIR["mu"], "b": {"points": [0], "weights": [1]}}}}
        code, report = invoke("conditional", doc=doc)
        assert code == EXIT_PREDICATE_FALSE
        assert report["pointwise"]["a"]["holds"] and not report["pointwise"]["b"]["holds"]

    def test_conditional_zero_weight_label(self, invoke):
        doc = {"P": {"measures": {"a": {"points": [0], "weights": [1]}, "b": {"points": [1], "weights": [1]}}},
               "Q": {"measures": {"a": SPREAD_PAIR["mu"], "b": {"points": [0], "weights": [1]}}},
               "theta_law": {"a": 1.0, "b": 0.0}}
        code, report = invoke("conditional", doc=doc)
        assert code == EXIT_OK
        assert report["vacuous"] == ["b"]
        assert list(report["couplings"]["couplings"]) == ["a"]
        assert report["residuals"]["passes"]

    def test_screen(self, invoke):
        code, report = invoke("screen", "--count", "200", doc=REVERSED_PAIR)
        assert code == EXIT_PREDICATE_FALSE
        assert report["witness"]["test"] == "member"
        assert "slopes" in report["member"]

    def test_screen_family_round_trip(self, invoke, tmp_path):
        code, first = invoke("screen", "--count", "200", "--show-family", doc=REVERSED_PAIR)
        family = first["family_document"]
        assert len(family["members"]) == 200
        path = tmp_path / "family.json"
        path.write_text(json.dumps(family))
        code, second = invoke("screen", "--family-file", str(path), doc=REVERSED_PAIR)
        assert code == EXIT_PREDICATE_FALSE
        assert second["witness"] == first["witness"]
        assert second["member"] == first["member"]

    def test_screen_family_dimension(self, invoke, tmp_path):
        path = tmp_path / "family.json"
        path.write_text(json.dumps({"kind": "MaxAffine", "dim": 2,
                                    "members": [{"slopes": [["1", "0"]], "intercepts": ["0"]}]}))
        code, report = invoke("screen", "--family-file", str(path), doc=REVERSED_PAIR)
        assert code == EXIT_ERROR
        assert report["error"] == "InputError"


class TestTransportCommands:
    def test_w1_with_dual_bound(self, invoke):
        code, report = invoke("w1", "--family-count", "100", doc=SPREAD_PAIR)
        assert code == EXIT_OK
        assert report["value"] == pytest.approx(1.0)
        assert report["univariate_value"] == pytest.approx(1.0)
        assert report["dual_lower_bound"] <= 1.0 + 1e-9

    def test_mot_and_ot(self, invoke):
        assert invoke("mot", doc=SPREAD_PAIR)[1]["value"] == pytest.approx(3.0)
        assert invoke("ot", doc=SPREAD_PAIR)[1]["value"] == pytest.approx(1.0)

    def test_cost_bound_violation(self, invoke):
        doc = {"mu": EXACT, "nu": EXACT, "cost_table": [[-1.0]]}
        code, report = invoke("mot", doc=doc)
        assert code == EXIT_ERROR
        assert report["error"] == "CostBoundViolation"


class TestChainCommands:
    def test_pm_build_pair(self, invoke):
        code, report = invoke("pm-build", doc={"spec": pm_spec(EXACT), "spec_prime": pm_spec(NOISY)})
        assert code == EXIT_OK
        assert np.allclose(report["kernel"]["matrix"], [[0.0, 1.0], [0.5, 0.5]])
        assert max(report["breve_residuals"].values()) <= 1e-10

    def test_pm_compare(self, invoke):
        code, report = invoke("pm-compare", doc={"spec": pm_spec(EXACT), "spec_prime": pm_spec(NOISY),
                                                 "f": [0, 1]})
        assert code == EXIT_OK
        assert report["ordered"]

    def test_pm_compare_unordered_weights(self, invoke):
        code, report = invoke("pm-compare", doc={"spec": pm_spec(NOISY), "spec_prime": pm_spec(EXACT),
                                                 "f": [0, 1]})
        assert code == EXIT_PREDICATE_FALSE
        assert report["error"] == "NotOrderedWeights"
        assert report["states"] == ["a", "b"]

    def test_invalid_spec(self, invoke):
        code, report = invoke("pm-build", doc={"spec": pm_spec({"points": [1, 2], "weights": [0.5, 0.5]})})
        assert code == EXIT_ERROR
        assert report["error"] == "InvalidSpec"

    def test_simulate_matrix(self, invoke):
        doc = {"matrix": [[0.5, 0.5], [0.5, 0.5]], "f": [0, 1]}
        code, report = invoke("simulate", "--steps", "2000", "--seed", "3", doc=doc)
        assert code == EXIT_OK
        assert report["seed"] == 3 and report["steps"] == 2000
        assert report["exact_mean"] == pytest.approx(0.5)
        assert report["exact_variance"] == pytest.approx(0.25)


class TestGen:
    @pytest.mark.parametrize("what, command", [("pair", "check-order"), ("chain", "compose"),
                                               ("kernel", "conditional")])
    def test_generated_instances_are_ordered(self, invoke, what, command):
        for kind in ("cx", "icx"):
            code, report = invoke("gen", "--what", what, "--kind", kind, "--seed", "4")
            assert code == EXIT_OK and report["ordered"]
            assert invoke(command, "--kind", kind, doc=report["instance"])[0] == EXIT_OK

    def test_broken_pair(self, invoke):
        _, report = invoke("gen", "--broken", "--seed", "2")
        assert not report["ordered"]
        assert invoke("check-order", doc=report["instance"])[0] == EXIT_PREDICATE_FALSE

    def test_pm_instance(self, invoke):
        _, report = invoke("gen", "--what", "pm", "--seed", "1")
        assert invoke("pm-compare", doc=report["instance"])[0] == EXIT_OK

    def test_broken_needs_pair(self, invoke):
        code, report = invoke("gen", "--what", "chain", "--broken")
        assert code == EXIT_ERROR
        assert report["error"] == "InputError"

    def test_deterministic(self, invoke):
        assert invoke("gen", "--what", "kernel", "--seed", "9") == invoke("gen", "--what", "kernel", "--seed", "9")


class TestInputHandling:
    def test_malformed_json_names_line(self, invoke):
        code, report = invoke("check-order", doc='{\n  "mu": [1,\n}')
        assert code == EXIT_ERROR
        assert report["error"] == "InputError"
        assert "line 3" in report["detail"]

    def test_missing_field(self, invoke):
        code, report = invoke("check-order", doc={"mu": SPREAD_PAIR["mu"]})
        assert code == EXIT_ERROR
        assert "nu" in report["detail"]

    def test_weight_sum(self, invoke):
        doc = {"mu": {"points": [0, 1], "weights": [0.5, 0.6]}, "nu": SPREAD_PAIR["nu"]}
        code, report = invoke("check-order", doc=doc)
        assert code == EXIT_ERROR
        assert report["error"] == "WeightSumError"

    def test_missing_file(self, invoke):
        code, report = invoke("check-order", "/nonexistent/input.json")
        assert code == EXIT_ERROR
        assert report["error"] == "InputError"

    def test_negative_tolerance_is_a_usage_error(self):
        with pytest.raises(SystemExit) as info:
            run(["check-order", "--tol", "-1", "input.json"])
        assert info.value.code == 2

    def test_overrides_are_restored(self, invoke):
        before = config.model_dump()
        invoke("check-order", "--tol", "1e-6", "--seed", "5", "--workers", "3", doc=SPREAD_PAIR)
        assert config.model_dump() == before

    def test_identical_output(self, invoke):
        assert invoke("couple", doc=SPREAD_PAIR) == invoke("couple", doc=SPREAD_PAIR)

    def test_out_file(self, tmp_path, capsys):
        doc, out = tmp_path / "pair.json", tmp_path / "report.json"
        doc.write_text(json.dumps(SPREAD_PAIR))
        assert run(["check-order", "--out", str(out), str(doc)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        assert json.loads(out.read_text())["holds"]

    def test_schema(self, invoke):
        code, schema = invoke("schema", "OrderVerdictReport")
        assert code == EXIT_OK
        assert "holds" in schema["properties"]
