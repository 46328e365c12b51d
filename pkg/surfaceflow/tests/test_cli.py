import json

import pytest

from app.core.config import settings
from app.main import main


def _spindle_json(output_dir):
    assert main(["parametrize", "--family", "sphere", "--p", "0.9", "--out", "s.obj", "--json", "s.json"]) == 0
    return str(output_dir / "s.json")


class TestParametrize:
    def test_writes_outputs(self, output_dir):
        code = main(["parametrize", "--family", "pseudosphere", "--l", "12", "--out", "p.obj", "--csv", "p.csv"])
        assert code == 0
        assert (output_dir / "p.obj").read_text().startswith("# obj export")
        assert len((output_dir / "p.csv").read_text().splitlines()) == 1 + 5

    def test_custom_grid(self, output_dir):
        code = main(["parametrize", "--family", "catenoid", "--grid", "expr(0.3*n, -2, 2)", "--csv", "c.csv"])
        assert code == 0
        rows = (output_dir / "c.csv").read_text().splitlines()
        assert rows[1].startswith("-2,")

    @pytest.mark.parametrize(
        "argv",
        [
            ["parametrize", "--family", "sinh", "--q", "1.5"],
            ["parametrize", "--family", "torus"],
            ["parametrize", "--family", "sphere", "--p", "0.9", "--grid", "[0, 1, 0.5]"],
            ["parametrize", "--family", "sphere", "--p", "0.9", "--tol", "NOT_A_SETTING=1"],
            ["parametrize", "--family", "sphere", "--p", "0.9", "--tol", "STEINER_TOLERANCE=abc"],
        ],
    )
    def test_configuration_errors(self, output_dir, argv):
        assert main(argv) == 2

    def test_domain_violation(self, output_dir):
        assert main(["parametrize", "--family", "sphere", "--p", "1.2", "--grid", "linspace(0, 1.2, 4)"]) == 2

    def test_missing_family_is_usage_error(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["parametrize"])
        assert exc_info.value.code == 2


class TestFlow:
    def test_fixture_with_fit(self, output_dir, capsys):
        code = main(["flow", "--fixture", "sphere", "--t-end", "0.01", "--dt", "1e-3", "--out", "t.csv", "--fit"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["c"] == pytest.approx(1.0, abs=1e-8)
        assert payload["h_err"] < 1e-8
        assert (output_dir / "t.csv").exists()

    def test_profile_input_and_meshes(self, output_dir):
        path = _spindle_json(output_dir)
        code = main(["flow", "--init", path, "--t-end", "0.004", "--dt", "1e-3", "--stride", "1", "--mesh-every", "0.002"])
        assert code == 0
        assert sorted(p.name for p in (output_dir / "meshes").iterdir()) == ["00000.obj", "00002.obj", "00004.obj"]

    def test_mesh_period_is_flow_time(self, output_dir):
        path = _spindle_json(output_dir)
        argv = ["flow", "--init", path, "--t-end", "0.005", "--dt", "1e-3", "--stride", "1", "--mesh-every", "0.0025"]
        assert main(argv) == 0
        names = sorted(p.name for p in (output_dir / "meshes").iterdir())
        assert names == ["00000.obj", "00003.obj", "00005.obj"]
        header = (output_dir / "meshes" / "00003.obj").read_text().splitlines()[1]
        assert float(header.split("=")[1]) == pytest.approx(0.003, abs=1e-15)

    def test_barrel_fixture_runs_with_cusp(self, output_dir):
        assert main(["flow", "--fixture", "barrel", "--t-end", "0.01", "--dt", "1e-3", "--out", "b.csv"]) == 0
        assert len((output_dir / "b.csv").read_text().splitlines()) > 1

    def test_tolerance_override_is_restored(self, output_dir):
        before = settings.CONVERGENCE_TOLERANCE
        assert main(["flow", "--fixture", "sphere", "--t-end", "0.002", "--dt", "1e-3", "--tol", "CONVERGENCE_TOLERANCE=1e-3"]) == 0
        assert settings.CONVERGENCE_TOLERANCE == before

    @pytest.mark.parametrize(
        "argv",
        [
            ["flow", "--fixture", "neg-cone", "--bc", "pos-cone", "--t-end", "0.1"],
            ["flow", "--fixture", "dumbbell", "--bc", "pos-cusp", "--t-end", "0.1"],
            ["flow", "--fixture", "barrel", "--bc", "neg-cusp", "--t-end", "0.1"],
            ["flow", "--bc", "sideways", "--t-end", "0.1"],
            ["flow", "--bc", "neg-cone", "--unnormalized", "--t-end", "0.1"],
            ["flow", "--t-end", "0.1", "--mesh-every", "-1"],
            ["flow", "--init", "missing.json", "--t-end", "0.1"],
            ["flow", "--fixture", "sphere", "--t-end", "0.1", "--dt", "-1"],
        ],
    )
    def test_errors(self, output_dir, argv):
        assert main(argv) == 2


class TestCompareAndCheck:
    def test_compare_prints_order(self, output_dir, capsys):
        code = main(["compare", "--family", "sphere", "--p", "0.9", "--upper", "1.0", "--levels", "8,16,32", "--out", "cmp.csv"])
        assert code == 0
        order = float(capsys.readouterr().out.split(":")[1])
        assert order == pytest.approx(2.0, abs=0.3)
        assert (output_dir / "cmp.csv").exists()

    def test_compare_single_level(self, output_dir):
        assert main(["compare", "--family", "sphere", "--p", "0.9", "--levels", "8"]) == 2

    def test_check_without_trials(self, output_dir):
        assert main(["check", "--trials", "0", "--report", "report.json"]) == 0
        report = json.loads((output_dir / "report.json").read_text())
        assert report["trials"] == 0

    def test_check_invariant_failure(self, output_dir, monkeypatch):
        monkeypatch.setattr(settings, "STEINER_TOLERANCE", 1e-30)
        assert main(["check", "--trials", "2", "--seed", "7"]) == 1


class TestDeterminism:
    def test_parametrize_csv_is_reproducible(self, output_dir):
        for name in ("a.csv", "b.csv"):
            argv = ["parametrize", "--family", "sphere", "--p", "0.9", "--csv", name]
            assert main(argv) == 0
        assert (output_dir / "a.csv").read_bytes() == (output_dir / "b.csv").read_bytes()

    def test_check_report_is_reproducible(self, output_dir):
        for name in ("a.json", "b.json"):
            assert main(["check", "--trials", "2", "--seed", "7", "--report", name]) == 0
        assert (output_dir / "a.json").read_bytes() == (output_dir / "b.json").read_bytes()
