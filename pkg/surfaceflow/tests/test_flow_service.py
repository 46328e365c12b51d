import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.config import settings
from app.core.constants import DUMBBELL_TERMINAL_CURVATURE, DUMBBELL_TERMINAL_HEIGHTS
from app.core.exceptions import (
    DivisionByZeroException,
    DomainViolationException,
    FitDomainException,
    SingularJacobianException,
    StepFailureException,
)
from app.schemas.family import CgcFamily, FamilyKind
from app.schemas.flow import BoundaryCondition, FlowState
from app.schemas.surface import ProfileCurve
from app.services.cgc_service import cgc_service
import app.services.flow_service as flow_module
from app.services.flow_service import flow_service
from app.utils.fixtures import neg_cone_state, neg_cusp_state, random_cone_state, sphere_state


def _cgc_cone_state(p=0.9, k=6, l=24):
    u = np.linspace(0.0, math.pi / 2, k + 1)
    f, h, _, _ = cgc_service.positive_arrays(p, 1.0, u)
    return FlowState.from_profile(ProfileCurve(f=tuple(f), h=tuple(h)), BoundaryCondition.POS_CONE, l)


def _cosh_cusp_state(p=1.0, k=6, l=24):
    family = CgcFamily(kind=FamilyKind.COSH_NEGATIVE, p=p)
    u = 0.1 * np.arange(k + 1)
    f, h, _, _ = cgc_service.negative_arrays(family, u)
    return FlowState.from_profile(ProfileCurve(f=tuple(f), h=tuple(h)), BoundaryCondition.NEG_CUSP, l)


def _sinh_cone_state(q=0.5, k=6, l=24):
    family = CgcFamily(kind=FamilyKind.SINH_NEGATIVE, q=q)
    u = np.linspace(math.acosh(1.0 / q), 0.0, k + 1)
    f, h, _, _ = cgc_service.negative_arrays(family, u)
    return FlowState.from_profile(ProfileCurve(f=tuple(f), h=tuple(h)), BoundaryCondition.NEG_CONE, l)


class TestFlowState:
    def test_cone_requires_tip_on_axis(self):
        with pytest.raises(ValidationError):
            FlowState(f=(1.0, 0.5), dh=(1.0,), a0b0=(1.0, 0.0), bc="pos-cone", l=12)

    def test_boundary_tag_is_normalized(self):
        state = FlowState(f=(1.0, 0.0), dh=(1.0,), a0b0=(1.0, 0.0), bc="Pos-Cone", l=12)
        assert state.bc == BoundaryCondition.POS_CONE
        assert state.dimension == 3

    def test_unnormalized_variant(self):
        assert BoundaryCondition.POS_CUSP.unnormalized() == BoundaryCondition.UNNORMALIZED_POS_CUSP
        with pytest.raises(ValueError):
            BoundaryCondition.NEG_CONE.unnormalized()


class TestMeanCurvatureWeight:
    def test_round_sphere(self, sphere_cone):
        assert flow_service.r_of_t(sphere_cone) == pytest.approx(2.0, abs=1e-12)

    def test_scaling(self, dumbbell):
        r = flow_service.r_of_t(dumbbell)
        assert flow_service.r_of_t(flow_service.scaled(dumbbell, 3.0)) == pytest.approx(r / 9.0, rel=1e-12)

    def test_single_band(self):
        state = FlowState(f=(1.0, 0.0), dh=(0.7,), a0b0=(1.0, 0.0), bc=BoundaryCondition.POS_CONE, l=12)
        K = flow_service.geometry(state)["K"]
        assert flow_service.r_of_t(state) == pytest.approx(2.0 * K[0])


class TestRightHandSide:
    @pytest.mark.parametrize("bc", [BoundaryCondition.POS_CONE, BoundaryCondition.POS_CUSP])
    def test_round_sphere_is_stationary(self, bc):
        assert np.max(np.abs(flow_service.rhs_generic(sphere_state(6, 24, bc)))) < 1e-12

    def test_unnormalized_sphere_shrinks_self_similarly(self):
        state = sphere_state(6, 24, BoundaryCondition.UNNORMALIZED_POS_CONE)
        x_dot = flow_service.rhs_generic(state)
        # ρ' = -1/ρ at ρ = 1
        np.testing.assert_allclose(x_dot, -state.vector(), atol=1e-12)

    def test_explicit_matches_generic(self, rng):
        for _ in range(100):
            state = random_cone_state(rng)
            generic = flow_service.rhs_generic(state)
            explicit = flow_service.rhs_explicit(state)
            assert np.max(np.abs(generic - explicit)) < 1e-10 * np.max(np.abs(generic))

    def test_printed_sign_disagrees(self, rng):
        state = random_cone_state(rng, k=5, l=24)
        generic = flow_service.rhs_generic(state)
        printed = flow_service.rhs_explicit(state, as_printed=True)
        k = state.k
        np.testing.assert_allclose(printed[: k + 1], generic[: k + 1], rtol=1e-10, atol=1e-14)
        assert np.max(np.abs(printed[k + 1:] - generic[k + 1:])) > 1e-6 * np.max(np.abs(generic))

    def test_explicit_needs_cone(self, sphere_cusp):
        with pytest.raises(ValueError):
            flow_service.rhs_explicit(sphere_cusp)

    def test_explicit_zero_height_step(self):
        state = FlowState(f=(1.0, 0.5, 0.0), dh=(0.0, 0.5), a0b0=(1.0, 0.0), bc=BoundaryCondition.POS_CONE, l=12)
        with pytest.raises(DivisionByZeroException):
            flow_service.rhs_explicit(state)

    def test_singular_jacobian(self, sphere_cone, monkeypatch):
        monkeypatch.setattr(settings, "JACOBIAN_CONDITION_LIMIT", 1.0)
        with pytest.raises(SingularJacobianException) as info:
            flow_service.rhs_generic(sphere_cone)
        assert info.value.condition > 1.0


class TestJacobian:
    def test_cone_matches_finite_differences(self, rng):
        for _ in range(20):
            state = random_cone_state(rng)
            analytic = flow_service.jacobian(state)
            numeric = flow_service.finite_difference_jacobian(state)
            assert np.max(np.abs(analytic - numeric)) < 1e-6 * np.max(np.abs(analytic))

    def test_cusp_constraint_row(self):
        state = neg_cusp_state(6, 24)
        analytic = flow_service.jacobian(state)
        numeric = flow_service.finite_difference_jacobian(state)
        assert np.max(np.abs(analytic - numeric)) < 1e-6 * np.max(np.abs(analytic))

    def test_constraint_map_of_cone(self, sphere_cone):
        g = flow_service.constraint_map(sphere_cone)
        assert len(g) == sphere_cone.dimension
        assert g[-1] == 0.0


class TestProjection:
    def test_cone_tip_reset(self, sphere_cone):
        x = sphere_cone.vector()
        x[sphere_cone.k] = 1e-9
        projected, x_residual = flow_service._project(x, sphere_cone.k, 1.0, 0.0, sphere_cone.bc)
        assert x_residual == pytest.approx(1e-9)
        assert projected[sphere_cone.k] == 0.0

    def test_cusp_pins_vertical_normal(self):
        state = neg_cusp_state(6, 24)
        assert flow_service.pinned_residual(state) < 1e-12
        assert flow_service.normals(state).b[-1] == pytest.approx(-1.0)

    def test_barrel_pins_upward_normal(self, barrel):
        assert barrel.f[-1] > 0.0
        assert flow_service.pinned_residual(barrel) < 1e-12
        assert flow_service.normals(barrel).b[-1] == pytest.approx(1.0)

    def test_area_restore_undoes_uniform_scaling(self, dumbbell):
        x = dumbbell.vector()
        target = float(np.sum(flow_service.geometry(dumbbell)["area"]))
        restored, defect = flow_service._restore_area(1.01 * x, dumbbell.k, dumbbell.l, 1.0, 0.0, target)
        assert defect == pytest.approx(1.01 ** 2 - 1.0, rel=1e-12)
        np.testing.assert_allclose(restored, x, rtol=1e-13, atol=1e-15)
        assert restored[dumbbell.k] == 0.0


class TestIntegrate:
    def test_sphere_cusp_is_stationary(self, sphere_cusp):
        trace = flow_service.integrate(sphere_cusp, 1.0, dt=1e-3, stop_on_convergence=False)
        assert trace.times[-1] == pytest.approx(1.0)
        assert np.max(np.abs(np.asarray(trace.final.f) - np.asarray(sphere_cusp.f))) < 1e-8

    def test_sphere_cone_converges_immediately(self, sphere_cone):
        trace = flow_service.integrate(sphere_cone, 1.0, dt=1e-3, stride=10)
        assert trace.converged
        assert trace.stop_reason == "converged"

    def test_unnormalized_sphere(self):
        state = sphere_state(6, 24, BoundaryCondition.UNNORMALIZED_POS_CONE)
        trace = flow_service.integrate(state, 0.4, dt=1e-3, stride=50)
        for t, snapshot in zip(trace.times, trace.states):
            assert abs(snapshot.f[0] - math.sqrt(1.0 - 2.0 * t)) < 1e-6
        assert not trace.converged

    def test_adaptive_unnormalized_sphere(self):
        state = sphere_state(6, 24, BoundaryCondition.UNNORMALIZED_POS_CONE)
        trace = flow_service.integrate(state, 0.2, dt=1e-2, adaptive=True)
        assert trace.final.f[0] == pytest.approx(math.sqrt(0.6), abs=1e-8)

    def test_area_is_conserved(self, dumbbell):
        trace = flow_service.integrate(dumbbell, 0.2, dt=1e-3, stride=20)
        assert trace.relative_area_drift() < 1e-12
        assert len(trace.area_defects) == len(trace.times)
        assert np.max(np.abs(trace.area_defects)) < 1e-4

    def test_area_restore_can_be_disabled(self, dumbbell, monkeypatch):
        monkeypatch.setattr(settings, "RESTORE_AREA", False)
        trace = flow_service.integrate(dumbbell, 0.05, dt=1e-3, stride=10)
        assert all(defect == 0.0 for defect in trace.area_defects)
        assert trace.relative_area_drift() < 1e-4

    def test_barrel_cusp_stays_pinned(self, barrel):
        trace = flow_service.integrate(barrel, 0.5, dt=1e-3, stride=10, stop_on_convergence=False)
        assert trace.times[-1] == pytest.approx(0.5)
        for state in trace.states:
            assert flow_service.pinned_residual(state) < 1e-12
            assert state.f[-1] > 0.0

    def test_geometric_snapshots(self, dumbbell):
        trace = flow_service.integrate(dumbbell, 0.02, dt=1e-3, geometric_stride=True)
        np.testing.assert_allclose(trace.times, [0.0, 0.001, 0.002, 0.004, 0.008, 0.016, 0.02], atol=1e-15)

    def test_max_steps(self, dumbbell):
        trace = flow_service.integrate(dumbbell, 1.0, dt=1e-3, stride=3, max_steps=7)
        assert trace.stop_reason == "max_steps"
        assert trace.steps == 7
        assert len(trace.constraint_residuals) == len(trace.times)

    def test_scaling_covariance(self, dumbbell):
        lam = 2.0
        base = flow_service.integrate(dumbbell, 0.05, dt=1e-3, stop_on_convergence=False)
        big = flow_service.integrate(flow_service.scaled(dumbbell, lam), 0.05 * lam * lam, dt=1e-3 * lam * lam, stop_on_convergence=False)
        np.testing.assert_allclose(big.final.vector(), lam * base.final.vector(), rtol=1e-10, atol=1e-12)

    def test_rejects_bad_step(self, dumbbell):
        with pytest.raises(DomainViolationException):
            flow_service.integrate(dumbbell, 1.0, dt=0.0)

    def test_breakdown_detection(self):
        with pytest.raises(StepFailureException) as info:
            flow_service._check_breakdown(np.array([1.0, -0.1, 0.0, 0.5, 0.5]), 2, 0.3)
        assert info.value.time == 0.3
        assert info.value.code == "negative_radius"


class TestStability:
    def test_spectral_radius_of_linear_field(self):
        A = np.diag([-3.0, -1.0, 0.5])
        assert flow_module._spectral_radius(lambda y: A @ y, np.ones(3)) == pytest.approx(3.0, rel=1e-6)

    def test_oversized_step_is_split(self):
        state = sphere_state(6, 24, BoundaryCondition.UNNORMALIZED_POS_CONE)
        trace = flow_service.integrate(state, 0.4, dt=0.1, stride=1)
        np.testing.assert_allclose(trace.times, [0.0, 0.1, 0.2, 0.3, 0.4], atol=1e-15)
        for t, snapshot in zip(trace.times, trace.states):
            assert abs(snapshot.f[0] - math.sqrt(1.0 - 2.0 * t)) < 1e-6

    def test_orientation_flags_folded_height(self, dumbbell):
        x = dumbbell.vector()
        dh_sign, a_sign = flow_module._orientation(x, dumbbell.k, 1.0, 0.0)
        assert np.all(dh_sign > 0)
        x[dumbbell.k + 2] *= -1.0
        folded, _ = flow_module._orientation(x, dumbbell.k, 1.0, 0.0)
        assert folded[1] < 0

    def test_folded_state_never_converges(self, sphere_cone, monkeypatch):
        original = flow_module._orientation
        calls = []

        def flip_after_start(x, k, a0, b0):
            dh_sign, a_sign = original(x, k, a0, b0)
            calls.append(k)
            return (dh_sign if len(calls) == 1 else -dh_sign), a_sign

        monkeypatch.setattr(flow_module, "_orientation", flip_after_start)
        trace = flow_service.integrate(sphere_cone, 0.2, dt=1e-3, stride=10)
        assert not trace.converged
        assert trace.stop_reason == "t_end"


class TestFit:
    def test_exact_positive_round_trip(self):
        report = flow_service.fit_cgc(_cgc_cone_state())
        assert report.c == pytest.approx(1.0, abs=1e-12)
        assert report.p == pytest.approx(0.9)
        assert report.h_err < 1e-12

    def test_exact_negative_round_trip(self):
        report = flow_service.negative_fit(_cosh_cusp_state())
        assert report.family == FamilyKind.COSH_NEGATIVE.value
        assert report.c == pytest.approx(-1.0, abs=1e-12)
        assert report.p == pytest.approx(1.0)
        assert report.h_err < 1e-12

    def test_sinh_cone_round_trip(self):
        # a(0) = 0 은 제곱근 경계 위라서 복원 높이에 반올림 오차가 남음
        report = flow_service.negative_fit(_sinh_cone_state())
        assert report.family == FamilyKind.SINH_NEGATIVE.value
        assert report.q == pytest.approx(0.5, abs=1e-7)
        assert report.h_err < 1e-7

    def test_wrong_family(self, sphere_cone):
        with pytest.raises(FitDomainException):
            flow_service.negative_fit(sphere_cone)

    def test_dispatch(self):
        assert flow_service.fit(_sinh_cone_state()).family == FamilyKind.SINH_NEGATIVE.value
        assert flow_service.fit(_cgc_cone_state()).family == FamilyKind.SPHERE_POSITIVE.value

    def test_printed_height_list_round_trip(self):
        state = flow_service.synthetic_cgc_state(DUMBBELL_TERMINAL_CURVATURE, DUMBBELL_TERMINAL_HEIGHTS)
        report = flow_service.fit_cgc(state)
        assert report.c == pytest.approx(DUMBBELL_TERMINAL_CURVATURE, rel=1e-10)
        np.testing.assert_allclose(report.h_pred, DUMBBELL_TERMINAL_HEIGHTS, atol=1e-6)
        u = np.asarray(report.u)
        assert u[0] == 0.0
        assert u[-1] == pytest.approx(math.pi / (2.0 * math.sqrt(report.c)), rel=1e-12)
        assert np.all(np.diff(u) > 0.0)
        assert report.p * math.sqrt(report.c) < 1.0


def _assert_monotone_profile(state):
    df = np.diff(state.f)
    dh = np.asarray(state.dh)
    assert np.all(df > 0) or np.all(df < 0)
    assert np.all(dh > 0) or np.all(dh < 0)


@pytest.mark.slow
def test_dumbbell_converges_to_constant_curvature(dumbbell):
    trace = flow_service.integrate(dumbbell, 200.0, dt=5e-3, stride=100)
    final = trace.final
    K = flow_service.geometry(final)["K"]
    r = flow_service.r_of_t(final)
    assert trace.stop_reason == "converged"
    assert np.max(np.abs(K - 0.5 * r)) < 1e-8
    assert trace.relative_area_drift() < 1e-12
    _assert_monotone_profile(final)
    assert flow_service.fit_cgc(final).h_err < 1e-6


@pytest.mark.slow
def test_barrel_converges_with_cusp(barrel):
    trace = flow_service.integrate(barrel, 200.0, dt=5e-3, stride=100)
    assert trace.stop_reason == "converged"
    assert flow_service.pinned_residual(trace.final) < 1e-12
    _assert_monotone_profile(trace.final)
    assert flow_service.fit_cgc(trace.final).h_err < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("make_state", [neg_cone_state, neg_cusp_state], ids=["neg-cone", "neg-cusp"])
def test_negative_flows(make_state):
    trace = flow_service.integrate(make_state(6, 24), 200.0, dt=5e-3, stride=100)
    K = flow_service.geometry(trace.final)["K"]
    assert trace.stop_reason == "converged"
    assert np.max(K) - np.min(K) < 1e-6
    assert np.mean(K) < 0.0
    _assert_monotone_profile(trace.final)
    assert flow_service.negative_fit(trace.final).h_err < 1e-5
