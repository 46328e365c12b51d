import math

import pytest

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.schemas.config import Command, RunConfig
from app.utils.validators import evaluate_expression, parse_grid, parse_levels, parse_tolerance_overrides


class TestParseGrid:
    def test_explicit_list(self):
        grid = parse_grid("[0, pi/12, pi/6]")
        assert grid.u == pytest.approx((0.0, math.pi / 12, math.pi / 6))
        assert grid.origin == 0

    def test_linspace(self):
        grid = parse_grid("linspace(0, pi/2, 4)")
        assert len(grid.u) == 5
        assert grid.u[-1] == pytest.approx(math.pi / 2)

    def test_expression_with_negative_indices(self):
        grid = parse_grid("expr(0.1*n, -2, 3)")
        assert grid.origin == 2
        assert grid.u == pytest.approx((-0.2, -0.1, 0.0, 0.1, 0.2, 0.3))

    def test_expression_default_start(self):
        grid = parse_grid("expr(arccosh(2)*(1 - n/4), 4)")
        assert grid.u[0] == pytest.approx(math.acosh(2.0))
        assert grid.u[-1] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "[0, 0.5, 0.25]",
            "[0, 0, 1]",
            "linspace(0, 1)",
            "linspace(0, 1, 0)",
            "expr(n, 1, 3)",
            "expr(n, 0, 2.5)",
            "range(3)",
            "[__import__('os')]",
            "[1/0]",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)


def test_evaluate_expression_rejects_attributes():
    with pytest.raises(ConfigError):
        evaluate_expression("math.pi")


class TestOverrides:
    def test_parses_pairs(self):
        overrides = parse_tolerance_overrides(["CONVERGENCE_TOLERANCE=1e-9", "FLOW_DT = 0.002"])
        assert overrides == {"CONVERGENCE_TOLERANCE": 1e-9, "FLOW_DT": 0.002}

    @pytest.mark.parametrize("item", ["CONVERGENCE_TOLERANCE", "lower=1", "FLOW_DT=fast"])
    def test_rejects(self, item):
        with pytest.raises(ConfigError):
            parse_tolerance_overrides([item])

    def test_levels(self):
        assert parse_levels("8, 16,32") == (8, 16, 32)
        for text in ("8", "8,x", "0,8"):
            with pytest.raises(ConfigError):
                parse_levels(text)


class TestRunConfig:
    def test_unknown_setting(self):
        with pytest.raises(ConfigError):
            RunConfig.build(command=Command.CHECK, tolerances={"NOT_A_SETTING": 1.0})

    def test_non_positive_tolerance(self):
        with pytest.raises(ConfigError):
            RunConfig.build(command="check", tolerances={"STEINER_TOLERANCE": 0.0})

    def test_apply_updates_settings(self, monkeypatch):
        monkeypatch.setattr(settings, "CONVERGENCE_TOLERANCE", settings.CONVERGENCE_TOLERANCE)
        RunConfig.build(command="flow", tolerances={"CONVERGENCE_TOLERANCE": 1e-7}).apply()
        assert settings.CONVERGENCE_TOLERANCE == 1e-7
