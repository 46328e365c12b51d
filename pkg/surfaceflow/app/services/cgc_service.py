import math
import logging
from typing import Optional, Tuple

import numpy as np
from scipy import integrate

from ..core.config import settings
from ..core.constants import COSH_GRID_STEP, SINH_GRID_START, SPINDLE_GRID_STEP
from ..core.exceptions import DegenerateStepException, DomainViolationException
from ..schemas.family import CgcFamily, FamilyKind, SampleGrid
from ..schemas.surface import NormalProfile, ProfileCurve

logger = logging.getLogger(__name__)

# sin(w_i + w_{i-1}) 이 이 값보다 작으면 높이 합이 0/0
_STEP_GUARD = 1e-12


def _clamped_sqrt(arg: np.ndarray, what: str) -> np.ndarray:
    """반올림 범위의 음수는 0으로 보정, 그보다 작으면 정의역 위반"""
    arg = np.asarray(arg, dtype=float)
    tol = settings.SQRT_CLAMP_TOLERANCE
    if np.any(arg < -tol):
        n = int(np.flatnonzero(arg < -tol)[0])
        raise DomainViolationException(
            f"{what} 의 제곱근 인자가 음수입니다: index={n}, value={arg.flat[n]:.3e}",
            code="domain_violation",
        )
    return np.sqrt(np.maximum(arg, 0.0))


def _telescope(increments: np.ndarray, origin: int) -> np.ndarray:
    """h(origin) = 0 이 되도록 증분을 누적 (n < 0 쪽은 반대 부호 합)"""
    h = np.concatenate([[0.0], np.cumsum(increments)])
    return h - h[origin]


def _check_steps(pair_sum: np.ndarray, family: str) -> None:
    bad = np.abs(pair_sum) < _STEP_GUARD
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0]) + 1
        raise DegenerateStepException(
            f"{family}: a(i) = a(i-1) 인 표본 간격 (i={i})", code="degenerate_step"
        )


def _to_models(f, h, a, b) -> Tuple[ProfileCurve, NormalProfile]:
    return (
        ProfileCurve(f=tuple(float(v) for v in f), h=tuple(float(v) for v in h)),
        NormalProfile(a=tuple(float(v) for v in a), b=tuple(float(v) for v in b)),
    )


class CgcParametrizationService:
    """이산 CGC / 현수면 / Delaunay 회전면의 닫힌 형식 매개화와 매끄러운 기준 곡선"""

    @staticmethod
    def heights_from_normals(
        f: np.ndarray,
        a: np.ndarray,
        b: np.ndarray,
        origin: int = 0,
    ) -> np.ndarray:
        """
        법선에서 높이 복원
        h(n) = h(0) + Σ (b(i)-b(i-1)) / (a(i)-a(i-1)) · (f(i)-f(i-1)),  h(origin) = 0
        """
        f = np.asarray(f, dtype=float)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        da = np.diff(a)
        if np.any(da == 0.0):
            i = int(np.flatnonzero(da == 0.0)[0]) + 1
            raise DegenerateStepException(f"a(i) = a(i-1) 이어서 높이가 정해지지 않습니다: i={i}")
        return _telescope(np.diff(b) / da * np.diff(f), origin)

    @staticmethod
    def positive_arrays(p: float, c: float, u: np.ndarray, origin: int = 0):
        """K = c > 0 계열의 (f, h, a, b) 배열"""
        if p <= 0 or c <= 0:
            raise DomainViolationException(f"p > 0, c > 0 이어야 합니다: p={p}, c={c}")
        rc = math.sqrt(c)
        w = rc * np.asarray(u, dtype=float)
        f = p * np.cos(w)
        if np.any(f < -1e-14 * p):
            raise DomainViolationException("f(n) = p cos(√c u_n) 가 음수입니다 (|√c u_n| <= π/2 필요)")
        a = _clamped_sqrt(1.0 - (p * p * c) * np.sin(w) ** 2, "1 - p²c sin²(√c u)")
        b = p * rc * np.sin(w)

        # 반각 형태: (b_i - b_{i-1})(f_i - f_{i-1}) / (a_i - a_{i-1}) = (a_i + a_{i-1}) tan(Δw/2) / √c
        _check_steps(np.sin(w[1:] + w[:-1]), "sphere_positive")
        dw = 0.5 * np.diff(w)
        h = _telescope((a[1:] + a[:-1]) * np.tan(dw) / rc, origin)
        return f, h, a, b

    def cgc_positive(self, p: float, c: float, grid: SampleGrid) -> Tuple[ProfileCurve, NormalProfile]:
        """f(n) = p cos(√c u_n), (a, b) = (√(1 - p²c sin²(√c u_n)), p√c sin(√c u_n))"""
        f, h, a, b = self.positive_arrays(p, c, grid.values(), grid.origin)
        logger.debug(f"cgc_positive: p={p}, c={c}, k={len(f) - 1}")
        return _to_models(f, h, a, b)

    @staticmethod
    def negative_arrays(family: CgcFamily, u: np.ndarray, origin: int = 0):
        """K = -κ 계열 (의구면, cosh 형, sinh 형) 의 (f, h, a, b) 배열"""
        u = np.asarray(u, dtype=float)
        kind = family.kind

        if kind == FamilyKind.PSEUDOSPHERE:
            ch = np.cosh(u)
            f = 1.0 / ch
            a = np.tanh(u)
            b = 1.0 / ch
            du = np.diff(u)
            h = _telescope(np.diff(ch) ** 2 / (np.sinh(du) * ch[1:] * ch[:-1]), origin)
            return f, h, a, b

        kappa = -family.curvature
        rk = math.sqrt(kappa)
        w = rk * u
        d = 0.5 * np.diff(w)

        if kind == FamilyKind.COSH_NEGATIVE:
            p = family.p
            f = p * np.cosh(w)
            a = _clamped_sqrt(1.0 - (p * p * kappa) * np.sinh(w) ** 2, "1 - p²κ sinh²(√κ u)")
            b = -p * rk * np.sinh(w)
            _check_steps(np.sinh(w[1:] + w[:-1]), "cosh_negative")
            h = _telescope((a[1:] + a[:-1]) * np.tanh(d) / rk, origin)
            return f, h, a, b

        if kind == FamilyKind.SINH_NEGATIVE:
            q = family.q
            if len(u) > 1 and not np.all(np.diff(u) < 0):
                raise DomainViolationException("sinh_negative 계열의 u_n 은 감소해야 합니다")
            f = (q / rk) * np.sinh(w)
            if np.any(f < -1e-14):
                raise DomainViolationException("f(n) = q sinh(√κ u_n) 가 음수입니다 (u_n >= 0 필요)")
            a = _clamped_sqrt(1.0 - (q * q) * np.cosh(w) ** 2, "1 - q² cosh²(√κ u)")
            b = q * np.cosh(w)
            _check_steps(np.sinh(w[1:] + w[:-1]), "sinh_negative")
            h = _telescope(-(a[1:] + a[:-1]) * np.tanh(d) / rk, origin)
            return f, h, a, b

        raise DomainViolationException(f"음의 곡률 계열이 아닙니다: {kind.value}")

    def cgc_negative(self, family: CgcFamily, grid: SampleGrid) -> Tuple[ProfileCurve, NormalProfile]:
        f, h, a, b = self.negative_arrays(family, grid.values(), grid.origin)
        logger.debug(f"cgc_negative: kind={family.kind.value}, k={len(f) - 1}")
        return _to_models(f, h, a, b)

    @staticmethod
    def catenoid(grid: SampleGrid) -> Tuple[ProfileCurve, NormalProfile]:
        """f(n) = cosh u_n, h(n) = Σ sinh(u_i - u_{i-1}); f(n)a(n) = 1 이므로 H = 0"""
        u = grid.values()
        du = np.diff(u)
        if np.any(du == 0.0):
            raise DegenerateStepException("u_i = u_{i-1} 인 표본 간격", code="degenerate_step")
        f = np.cosh(u)
        h = _telescope(np.sinh(du), grid.origin)
        return _to_models(f, h, 1.0 / f, -np.tanh(u))

    def delaunay(self, p: float, c: float, eps: int, grid: SampleGrid) -> ProfileCurve:
        """CGC K = c 곡면의 거리 ε/√c 평행곡면 (법선은 그대로 상속)"""
        profile, _ = self.delaunay_with_normals(p, c, eps, grid)
        return profile

    def delaunay_with_normals(
        self,
        p: float,
        c: float,
        eps: int,
        grid: SampleGrid,
    ) -> Tuple[ProfileCurve, NormalProfile]:
        if eps not in (1, -1):
            raise DomainViolationException(f"eps 는 ±1 이어야 합니다: {eps}")
        f, h, a, b = self.positive_arrays(p, c, grid.values(), grid.origin)
        shift = eps / math.sqrt(c)
        f_d = f + shift * a
        h_d = h + shift * b
        if np.any(f_d < -1e-14 * max(1.0, float(np.max(np.abs(f_d))))):
            n = int(np.flatnonzero(f_d < 0)[0])
            raise DomainViolationException(
                f"평행곡면의 반지름이 음수입니다: n={n}, f={f_d[n]:.6g}", code="domain_violation"
            )
        return _to_models(f_d, h_d, a, b)

    def parametrize(self, family: CgcFamily, grid: SampleGrid) -> Tuple[ProfileCurve, NormalProfile]:
        """계열 종류에 따른 분기"""
        kind = family.kind
        if kind == FamilyKind.SPHERE_POSITIVE:
            return self.cgc_positive(family.p, family.curvature, grid)
        if kind == FamilyKind.CATENOID:
            return self.catenoid(grid)
        if kind == FamilyKind.DELAUNAY:
            return self.delaunay_with_normals(family.p, family.curvature, family.eps, grid)
        return self.cgc_negative(family, grid)

    @staticmethod
    def _quad(integrand, u: float) -> float:
        if u == 0.0:
            return 0.0
        value, _ = integrate.quad(
            integrand,
            0.0,
            u,
            epsabs=settings.QUADRATURE_ABS_TOLERANCE,
            epsrel=settings.QUADRATURE_ABS_TOLERANCE,
            limit=200,
        )
        return float(value)

    def smooth_reference(self, family: CgcFamily, u: float) -> Tuple[float, float]:
        """매끄러운 생성 곡선 (f(u), h(u)); 타원 적분은 적응형 구적법으로 계산"""
        kind = family.kind
        tol = settings.SQRT_CLAMP_TOLERANCE

        if kind in (FamilyKind.SPHERE_POSITIVE, FamilyKind.DELAUNAY):
            p, c = family.p, family.curvature
            rc = math.sqrt(c)
            w = rc * u
            peak = 1.0 if abs(w) >= math.pi / 2 else math.sin(abs(w)) ** 2
            if 1.0 - p * p * c * peak < -tol:
                raise DomainViolationException(f"1 - p²c sin²(√c s) < 0 인 구간: u={u}")
            h = self._quad(lambda s: math.sqrt(max(1.0 - p * p * c * math.sin(rc * s) ** 2, 0.0)), u)
            f = p * math.cos(w)
            if kind == FamilyKind.SPHERE_POSITIVE:
                return f, h
            a = math.sqrt(max(1.0 - p * p * c * math.sin(w) ** 2, 0.0))
            b = p * rc * math.sin(w)
            shift = family.eps / rc
            return f + shift * a, h + shift * b

        if kind == FamilyKind.PSEUDOSPHERE:
            return 1.0 / math.cosh(u), u - math.tanh(u)

        if kind == FamilyKind.CATENOID:
            return math.cosh(u), u

        kappa = -family.curvature
        rk = math.sqrt(kappa)
        w = rk * u

        if kind == FamilyKind.COSH_NEGATIVE:
            p = family.p
            if 1.0 - p * p * kappa * math.sinh(w) ** 2 < -tol:
                raise DomainViolationException(f"1 - p²κ sinh²(√κ s) < 0 인 구간: u={u}")
            h = self._quad(lambda s: math.sqrt(max(1.0 - p * p * kappa * math.sinh(rk * s) ** 2, 0.0)), u)
            return p * math.cosh(w), h

        q = family.q
        if 1.0 - q * q * math.cosh(w) ** 2 < -tol:
            raise DomainViolationException(f"1 - q² cosh²(√κ s) < 0 인 구간: u={u}")
        h = self._quad(lambda s: math.sqrt(max(1.0 - q * q * math.cosh(rk * s) ** 2, 0.0)), u)
        return (q / rk) * math.sinh(w), h

    @staticmethod
    def smooth_height_sign(family: CgcFamily) -> float:
        """이산 높이와 매끄러운 높이의 방향 (감소 격자를 쓰는 sinh 형만 반대)"""
        return -1.0 if family.kind == FamilyKind.SINH_NEGATIVE else 1.0

    @staticmethod
    def default_grid(family: CgcFamily, steps: Optional[int] = None) -> SampleGrid:
        """그림에 쓰인 표본 격자"""
        kind = family.kind
        if kind in (FamilyKind.SPHERE_POSITIVE, FamilyKind.DELAUNAY):
            p, c = family.p, family.curvature
            n = steps or 6
            if p * math.sqrt(c) > 1.0:
                return SampleGrid.uniform(0.0, math.asin(1.0 / (p * math.sqrt(c))) / math.sqrt(c), n)
            return SampleGrid.uniform(0.0, SPINDLE_GRID_STEP * n / math.sqrt(c), n)
        if kind == FamilyKind.PSEUDOSPHERE:
            n = steps or 4
            return SampleGrid.uniform(0.0, float(n), n)
        if kind == FamilyKind.COSH_NEGATIVE:
            n = steps or 4
            return SampleGrid.uniform(0.0, COSH_GRID_STEP * n, n)
        if kind == FamilyKind.SINH_NEGATIVE:
            n = steps or 4
            return SampleGrid.uniform(SINH_GRID_START, 0.0, n)
        n = steps or 8
        return SampleGrid(u=tuple(0.3 * i for i in range(n + 1)))


# 싱글톤 인스턴스
cgc_service = CgcParametrizationService()
