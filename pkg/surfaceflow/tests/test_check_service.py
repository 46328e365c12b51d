import pytest

from app.core.exceptions import InvariantViolationException
from app.schemas.surface import NormalProfile
from app.services.check_service import CheckReport, SuiteResult, check_service


class TestRunCheck:
    def test_seeded_run_passes(self):
        report = check_service.run_check(seed=42, trials=5)
        assert report.passed, report.first_failure()
        names = {result.name for result in report.results}
        assert {"steiner", "mixed_area", "curvature_oracle", "rhs_cross_validation", "jacobian_oracle"} <= names
        assert all(result.checks > 0 for result in report.results)

    def test_zero_trials(self):
        report = check_service.run_check(trials=0)
        assert report.passed
        assert report.results == ()

    def test_negative_trials(self):
        with pytest.raises(ValueError):
            check_service.run_check(trials=-1)


class TestCheckSurface:
    def test_family_surface_passes(self, spindle):
        surface, normals = spindle
        assert all(result.passed for result in check_service.check_surface(surface, normals, m=3))

    def test_corrupted_normal_fails(self, spindle):
        surface, normals = spindle
        broken = NormalProfile.model_construct(a=tuple(1.01 * x for x in normals.a), b=normals.b)
        results = {result.name: result for result in check_service.check_surface(surface, broken)}
        assert not results["unit_normal"].passed
        assert "a(n)^2 + b(n)^2" in results["unit_normal"].message


class TestRaiseOnFailure:
    def test_passing_report(self):
        check_service.raise_on_failure(CheckReport(seed=1, trials=0))

    def test_failure_names_suite(self):
        failed = SuiteResult(name="steiner", tolerance=1e-10, checks=4, failures=1, worst=1.0, message="n=2, t=0.5")
        report = CheckReport(seed=1, trials=1, results=(SuiteResult(name="circularity", tolerance=1e-10, checks=4), failed))
        with pytest.raises(InvariantViolationException) as exc_info:
            check_service.raise_on_failure(report)
        assert exc_info.value.code == "steiner"
        assert "1/4" in exc_info.value.message
