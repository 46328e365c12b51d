import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.core.exceptions import DegenerateStepException, DomainViolationException
from app.schemas.family import CgcFamily, FamilyKind, SampleGrid
from app.schemas.surface import RevolutionSurface
from app.services.cgc_service import cgc_service
from app.services.surface_service import surface_service


def _curvatures(family, grid=None, l=24):
    grid = grid or cgc_service.default_grid(family)
    profile, normals = cgc_service.parametrize(family, grid)
    faces = surface_service.surface_geometry(RevolutionSurface(profile=profile, l=l), normals)
    return np.array([face.K for face in faces]), np.array([face.H for face in faces])


class TestConstantCurvature:
    @pytest.mark.parametrize("p", [0.9, 1.0, 1.2])
    def test_positive_family(self, p):
        K, _ = _curvatures(CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=p))
        assert np.max(np.abs(K - 1.0)) < 1e-10

    @pytest.mark.parametrize(
        "family",
        [
            CgcFamily(kind=FamilyKind.PSEUDOSPHERE),
            CgcFamily(kind=FamilyKind.COSH_NEGATIVE, p=1.0),
            CgcFamily(kind=FamilyKind.SINH_NEGATIVE, q=0.5),
        ],
        ids=["pseudosphere", "cosh", "sinh"],
    )
    def test_negative_families(self, family):
        K, _ = _curvatures(family)
        assert np.max(np.abs(K + 1.0)) < 1e-10

    def test_positive_family_with_other_curvature(self):
        family = CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=0.6, c=2.0)
        K, _ = _curvatures(family)
        assert np.max(np.abs(K - 2.0)) < 1e-10

    @pytest.mark.parametrize("kind, extra", [(FamilyKind.COSH_NEGATIVE, {"p": 0.5}), (FamilyKind.SINH_NEGATIVE, {"q": 0.4})])
    def test_negative_family_with_other_curvature(self, kind, extra):
        family = CgcFamily(kind=kind, c=-2.0, **extra)
        grid = cgc_service.default_grid(family)
        K, _ = _curvatures(family, SampleGrid(u=tuple(0.5 * v for v in grid.u)))
        assert np.max(np.abs(K + 2.0)) < 1e-10


class TestPositiveFamily:
    def test_bulge_grid_ends_with_vertical_normal(self):
        family = CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=1.2)
        grid = cgc_service.default_grid(family)
        assert grid.u[-1] == pytest.approx(math.asin(1 / 1.2))
        _, normals = cgc_service.parametrize(family, grid)
        assert normals.a[-1] == pytest.approx(0.0, abs=1e-7)

    def test_outside_domain(self):
        grid = SampleGrid(u=(0.0, 0.6, 1.2))
        with pytest.raises(DomainViolationException):
            cgc_service.cgc_positive(1.2, 1.0, grid)

    def test_degenerate_step(self):
        with pytest.raises(DegenerateStepException):
            cgc_service.cgc_positive(0.9, 1.0, SampleGrid(u=(-0.1, 0.1)))

    def test_origin_is_height_zero(self):
        grid = SampleGrid(u=(-0.2, -0.1, 0.0, 0.1), origin=2)
        profile, _ = cgc_service.cgc_positive(0.9, 1.0, grid)
        assert profile.h[2] == 0.0
        assert profile.h[0] < profile.h[1] < 0.0 < profile.h[3]

    def test_heights_from_normals_match_closed_form(self, spindle):
        surface, normals = spindle
        f, h = surface.profile.arrays()
        a, b = normals.arrays()
        np.testing.assert_allclose(cgc_service.heights_from_normals(f, a, b), h, atol=1e-12)


class TestNegativeFamilies:
    def test_sinh_family_starts_with_vertical_normal(self):
        family = CgcFamily(kind=FamilyKind.SINH_NEGATIVE, q=0.5)
        _, normals = cgc_service.parametrize(family, cgc_service.default_grid(family))
        assert normals.a[0] == pytest.approx(0.0, abs=1e-7)
        assert normals.b[0] == pytest.approx(1.0)

    def test_sinh_family_needs_decreasing_grid(self):
        family = CgcFamily(kind=FamilyKind.SINH_NEGATIVE, q=0.5)
        with pytest.raises(DomainViolationException):
            cgc_service.parametrize(family, SampleGrid(u=(0.1, 0.5, 1.0)))

    def test_pseudosphere_normals_follow_profile(self):
        family = CgcFamily(kind=FamilyKind.PSEUDOSPHERE)
        profile, normals = cgc_service.parametrize(family, cgc_service.default_grid(family))
        propagated = surface_service.propagate_normal(profile, normals.a[0], normals.b[0])
        np.testing.assert_allclose(propagated.a, normals.a, atol=1e-10)
        np.testing.assert_allclose(propagated.b, normals.b, atol=1e-10)

    @pytest.mark.parametrize(
        "data",
        [{"kind": "sinh_negative", "q": 1.5}, {"kind": "cosh_negative"}, {"kind": "cosh_negative", "p": 1.0, "c": 1.0}],
    )
    def test_invalid_parameters(self, data):
        with pytest.raises(ValidationError):
            CgcFamily(**data)


class TestCatenoid:
    def test_first_height(self):
        profile, _ = cgc_service.catenoid(SampleGrid(u=tuple(0.3 * n for n in range(9))))
        assert profile.h[1] == pytest.approx(0.3045203, abs=1e-7)
        assert profile.h[1] == pytest.approx(math.sinh(0.3), abs=1e-15)

    @pytest.mark.parametrize("u", [tuple(0.3 * n for n in range(9)), tuple(0.1 * n * n for n in range(9))])
    def test_minimal(self, u):
        profile, normals = cgc_service.catenoid(SampleGrid(u=u))
        faces = surface_service.surface_geometry(RevolutionSurface(profile=profile, l=24), normals)
        assert max(abs(face.H) for face in faces) < 1e-12

    def test_waist_tangent_is_vertical(self):
        ratios = []
        for eps in (1e-1, 1e-2, 1e-3):
            profile, _ = cgc_service.catenoid(SampleGrid(u=(0.0, eps)))
            ratios.append(profile.h[1] / (profile.f[1] - profile.f[0]))
        assert ratios[0] < ratios[1] < ratios[2]


class TestDelaunay:
    @pytest.mark.parametrize("p", [0.9, 1.2])
    def test_constant_mean_curvature(self, p):
        family = CgcFamily(kind=FamilyKind.DELAUNAY, p=p, eps=1)
        _, H = _curvatures(family)
        assert np.max(H) - np.min(H) < 1e-10
        assert np.mean(H) == pytest.approx(0.5, abs=1e-10)

    def test_negative_radius(self):
        with pytest.raises(DomainViolationException):
            cgc_service.delaunay(0.9, 1.0, -1, cgc_service.default_grid(CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=0.9)))

    def test_profile_only_variant(self):
        grid = SampleGrid.uniform(0.0, math.pi / 3, 4)
        profile = cgc_service.delaunay(0.9, 1.0, 1, grid)
        with_normals, _ = cgc_service.delaunay_with_normals(0.9, 1.0, 1, grid)
        assert profile == with_normals


class TestSmoothReference:
    def test_unit_sphere_quarter(self):
        f, h = cgc_service.smooth_reference(CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=1.0), math.pi / 2)
        assert f == pytest.approx(0.0, abs=1e-15)
        assert h == pytest.approx(1.0, abs=1e-12)

    def test_pseudosphere(self):
        f, h = cgc_service.smooth_reference(CgcFamily(kind=FamilyKind.PSEUDOSPHERE), 1.0)
        assert f == pytest.approx(0.6480543, abs=1e-7)
        assert h == pytest.approx(0.2384058, abs=1e-7)

    def test_catenoid(self):
        assert cgc_service.smooth_reference(CgcFamily(kind=FamilyKind.CATENOID), 0.5) == pytest.approx((math.cosh(0.5), 0.5))

    def test_discrete_spindle_approaches_smooth_curve(self):
        family = CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=0.9)
        coarse, _ = cgc_service.parametrize(family, SampleGrid.uniform(0.0, 1.0, 8))
        fine, _ = cgc_service.parametrize(family, SampleGrid.uniform(0.0, 1.0, 64))
        _, h_smooth = cgc_service.smooth_reference(family, 1.0)
        assert abs(fine.h[-1] - h_smooth) < abs(coarse.h[-1] - h_smooth) / 16.0
