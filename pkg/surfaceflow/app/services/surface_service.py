import math
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..core.config import settings
from ..core.exceptions import (
    DegenerateBandException,
    DomainViolationException,
    NonParallelException,
    ShapeMismatchException,
    ZeroEdgeException,
)
from ..schemas.surface import FaceGeometry, NormalProfile, ProfileCurve, RevolutionSurface

logger = logging.getLogger(__name__)


def reflect_normals(f: np.ndarray, dh: np.ndarray, a0: float, b0: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    변 방향 반사 점화식으로 (a(n), b(n)) 전파
    ν(n+1) = ν(n) - 2 (ν(n)·e) e / |e|^2,  e = (Δf, Δh)
    """
    k = len(f) - 1
    a = np.empty(k + 1)
    b = np.empty(k + 1)
    a[0], b[0] = a0, b0
    for n in range(k):
        df = f[n + 1] - f[n]
        d = dh[n]
        q = df * df + d * d
        if q == 0.0:
            raise ZeroEdgeException(f"길이 0 인 변: n={n}", code="zero_edge")
        s = a[n] * df + b[n] * d
        a[n + 1] = a[n] - 2.0 * df * s / q
        b[n + 1] = b[n] - 2.0 * d * s / q
    return a, b


def layer_geometry(
    f: np.ndarray,
    dh: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    l: int,
) -> Dict[str, np.ndarray]:
    """
    모든 층의 g11, g22, K, H, A 를 한 번에 계산 (흐름 적분용 벡터 경로)
    f(n+1)^2 ≈ f(n)^2 인 층은 형태 연산자의 대각 성분으로 대체합니다.
    """
    cos2 = math.cos(math.pi / l) ** 2
    sin2 = math.sin(math.pi / l) ** 2
    df = np.diff(f)
    sf = f[1:] + f[:-1]
    da = np.diff(a)
    db = np.diff(b)
    sa = a[1:] + a[:-1]

    if np.any(sf == 0.0):
        n = int(np.flatnonzero(sf == 0.0)[0])
        raise DegenerateBandException(f"f(n) = f(n+1) = 0 인 띠: n={n}", code="degenerate_band")

    g11 = df * df * cos2 + dh * dh
    g22 = sf * sf * sin2

    denom = f[1:] ** 2 - f[:-1] ** 2
    eps_deg = settings.DEGENERATE_BAND_FACTOR * float(np.max(f)) ** 2
    regular = np.abs(denom) >= eps_deg
    safe = np.where(regular, denom, 1.0)

    K = (a[1:] ** 2 - a[:-1] ** 2) / safe
    H = (f[1:] * a[1:] - f[:-1] * a[:-1]) / safe
    if not np.all(regular):
        # S = diag(II11/g11, II22/g22)
        s11 = (df * da * cos2 + dh * db) / g11
        s22 = sa / sf
        K = np.where(regular, K, s11 * s22)
        H = np.where(regular, H, 0.5 * (s11 + s22))

    return {
        "g11": g11,
        "g22": g22,
        "K": K,
        "H": H,
        "area": np.sqrt(g11 * g22),
        "regular": regular,
    }


class SurfaceService:
    """원형 그물로서의 이산 회전면: 꼭짓점, 법선, 기본형식, 곡률, 혼합 면적"""

    @staticmethod
    def build_vertices(surface: RevolutionSurface) -> np.ndarray:
        """x(m,n) 격자, shape = (l, k+1, 3)"""
        f, h = surface.profile.arrays()
        theta = 2.0 * np.pi * np.arange(surface.l) / surface.l
        grid = np.empty((surface.l, len(f), 3))
        grid[:, :, 0] = np.outer(np.cos(theta), f)
        grid[:, :, 1] = np.outer(np.sin(theta), f)
        grid[:, :, 2] = h[np.newaxis, :]
        return grid

    @staticmethod
    def build_normals(surface: RevolutionSurface, normals: NormalProfile) -> np.ndarray:
        """ν(m,n) 격자, shape = (l, k+1, 3)"""
        a, b = normals.arrays()
        theta = 2.0 * np.pi * np.arange(surface.l) / surface.l
        grid = np.empty((surface.l, len(a), 3))
        grid[:, :, 0] = np.outer(np.cos(theta), a)
        grid[:, :, 1] = np.outer(np.sin(theta), a)
        grid[:, :, 2] = b[np.newaxis, :]
        return grid

    @staticmethod
    def propagate_normal(profile: ProfileCurve, a0: float, b0: float) -> NormalProfile:
        """a(0), b(0) 에서 시작하는 대칭 단위 법선"""
        if abs(a0 * a0 + b0 * b0 - 1.0) > settings.UNIT_NORMAL_TOLERANCE:
            raise DomainViolationException(f"(a0, b0) 는 단위 벡터여야 합니다: ({a0}, {b0})")
        f, h = profile.arrays()
        a, b = reflect_normals(f, np.diff(h), a0, b0)
        return NormalProfile(a=tuple(a), b=tuple(b))

    @staticmethod
    def face_quad(grid: np.ndarray, n: int, m: int = 0) -> np.ndarray:
        """면 (ijkl) = x(m,n), x(m+1,n), x(m+1,n+1), x(m,n+1)"""
        l = grid.shape[0]
        m1 = (m + 1) % l
        return np.array([grid[m, n], grid[m1, n], grid[m1, n + 1], grid[m, n + 1]])

    @staticmethod
    def face_derivatives(quad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """이산 편미분 x_u, x_v (법선 면에도 같은 식 적용)"""
        xi, xj, xk, xl = np.asarray(quad, dtype=float)
        x_u = 0.5 * (xk - xj) + 0.5 * (xl - xi)
        x_v = 0.5 * (xk - xl) + 0.5 * (xj - xi)
        return x_u, x_v

    @staticmethod
    def face_polygon(quad: np.ndarray) -> np.ndarray:
        """x_u × x_v 방향에 대해 양의 방향인 순회 (i, l, k, j)"""
        quad = np.asarray(quad, dtype=float)
        return quad[[0, 3, 2, 1]]

    @staticmethod
    def face_normal(x_u: np.ndarray, x_v: np.ndarray) -> np.ndarray:
        cross = np.cross(x_u, x_v)
        norm = np.linalg.norm(cross)
        if norm == 0.0:
            raise DegenerateBandException("면 법선을 정의할 수 없습니다 (x_u × x_v = 0)")
        return cross / norm

    @staticmethod
    def shape_operator(
        x_u: np.ndarray,
        x_v: np.ndarray,
        nu_u: np.ndarray,
        nu_v: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(I, II, S = I^{-1} II)"""
        first = np.array([[x_u @ x_u, x_u @ x_v], [x_v @ x_u, x_v @ x_v]])
        second = np.array([[x_u @ nu_u, x_u @ nu_v], [x_v @ nu_u, x_v @ nu_v]])
        return first, second, np.linalg.solve(first, second)

    def face_shape_operator(
        self,
        surface: RevolutionSurface,
        normals: NormalProfile,
        n: int,
        m: int = 0,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x_u, x_v = self.face_derivatives(self.face_quad(self.build_vertices(surface), n, m))
        nu_u, nu_v = self.face_derivatives(self.face_quad(self.build_normals(surface, normals), n, m))
        return self.shape_operator(x_u, x_v, nu_u, nu_v)

    def face_geometry(
        self,
        surface: RevolutionSurface,
        normals: NormalProfile,
        n: int,
    ) -> FaceGeometry:
        """층 n 의 닫힌 형식 계량/곡률; f(n+1)^2 ≈ f(n)^2 이면 형태 연산자 사용"""
        k = surface.k
        if not 0 <= n <= k - 1:
            raise IndexError(f"층 인덱스 범위 밖: n={n}, k={k}")
        f, h = surface.profile.arrays()
        a, _ = normals.arrays()
        f0, f1 = f[n], f[n + 1]
        if f0 == 0.0 and f1 == 0.0:
            raise DegenerateBandException(f"f(n) = f(n+1) = 0 인 띠: n={n}", code="degenerate_band")

        df = f1 - f0
        dh = h[n + 1] - h[n]
        g11 = df * df * math.cos(math.pi / surface.l) ** 2 + dh * dh
        g22 = (f1 + f0) ** 2 * math.sin(math.pi / surface.l) ** 2
        denom = f1 * f1 - f0 * f0
        eps_deg = settings.DEGENERATE_BAND_FACTOR * float(np.max(f)) ** 2

        if abs(denom) >= eps_deg:
            K = (a[n + 1] ** 2 - a[n] ** 2) / denom
            H = (f1 * a[n + 1] - f0 * a[n]) / denom
            fallback = False
        else:
            _, _, S = self.face_shape_operator(surface, normals, n)
            K = float(np.linalg.det(S))
            H = 0.5 * float(np.trace(S))
            fallback = True

        return FaceGeometry(
            n=n,
            g11=g11,
            g22=g22,
            g12=0.0,
            K=float(K),
            H=float(H),
            area=math.sqrt(g11 * g22),
            via_shape_operator=fallback,
        )

    def surface_geometry(self, surface: RevolutionSurface, normals: NormalProfile) -> List[FaceGeometry]:
        return [self.face_geometry(surface, normals, n) for n in range(surface.k)]

    def principal_curvatures(
        self,
        surface: RevolutionSurface,
        normals: NormalProfile,
        n: int,
    ) -> Tuple[float, float]:
        """형태 연산자의 고윳값 (k1 <= k2)"""
        _, _, S = self.face_shape_operator(surface, normals, n)
        values = np.sort(np.real(np.linalg.eigvals(S)))
        return float(values[0]), float(values[1])

    @staticmethod
    def mixed_area(P: np.ndarray, Q: np.ndarray, N: np.ndarray) -> float:
        """A(P,Q) = 1/4 Σ (det(p_j, q_{j+1}, N) + det(q_j, p_{j+1}, N))"""
        P = np.asarray(P, dtype=float)
        Q = np.asarray(Q, dtype=float)
        N = np.asarray(N, dtype=float)
        if P.shape != Q.shape:
            raise ShapeMismatchException(f"꼭짓점 수가 다릅니다: {len(P)} != {len(Q)}", code="shape_mismatch")

        ep = np.roll(P, -1, axis=0) - P
        eq = np.roll(Q, -1, axis=0) - Q
        cross = np.linalg.norm(np.cross(ep, eq), axis=1)
        scale = np.linalg.norm(ep, axis=1) * np.linalg.norm(eq, axis=1)
        bad = cross > settings.PARALLEL_TOLERANCE * scale
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise NonParallelException(f"대응하는 변이 평행하지 않습니다: j={j}", code="non_parallel")

        P1 = np.roll(P, -1, axis=0)
        Q1 = np.roll(Q, -1, axis=0)
        total = np.cross(P, Q1) @ N + np.cross(Q, P1) @ N
        return 0.25 * float(np.sum(total))

    def lemma_areas(self, quad_x: np.ndarray, quad_nu: np.ndarray) -> Dict[str, float]:
        """
        혼합 면적 정의와 행렬식 항등식으로 계산한 A(x), A(ν), A(x,ν)
        N 은 x_u × x_v 방향의 면 단위 법선입니다.
        """
        x_u, x_v = self.face_derivatives(quad_x)
        nu_u, nu_v = self.face_derivatives(quad_nu)
        N = self.face_normal(x_u, x_v)
        P = self.face_polygon(quad_x)
        Q = self.face_polygon(quad_nu)

        def det(u, v):
            return float(np.linalg.det(np.array([u, v, N])))

        return {
            "A_x": self.mixed_area(P, P, N),
            "A_nu": self.mixed_area(Q, Q, N),
            "A_x_nu": self.mixed_area(P, Q, N),
            "det_x": det(x_u, x_v),
            "det_nu": det(nu_u, nu_v),
            "det_x_nu": 0.5 * (det(x_u, nu_v) + det(nu_u, x_v)),
        }

    def steiner_check(
        self,
        quad_x: np.ndarray,
        quad_nu: np.ndarray,
        t: float,
        K: float,
        H: float,
    ) -> float:
        """|A(x + tν) - (1 + 2tH + t^2 K) A(x)|"""
        quad_x = np.asarray(quad_x, dtype=float)
        quad_nu = np.asarray(quad_nu, dtype=float)
        x_u, x_v = self.face_derivatives(quad_x)
        N = self.face_normal(x_u, x_v)
        area_x = float(np.linalg.det(np.array([x_u, x_v, N])))
        offset = self.face_polygon(quad_x + t * quad_nu)
        area_offset = self.mixed_area(offset, offset, N)
        return abs(area_offset - (1.0 + 2.0 * t * H + t * t * K) * area_x)

    @staticmethod
    def circularity_residual(quad: np.ndarray) -> float:
        """네 꼭짓점의 외심 거리 편차 / 면 지름"""
        quad = np.asarray(quad, dtype=float)
        p0, p1, p2 = quad[0], quad[1], quad[2]
        u = p1 - p0
        v = p2 - p0
        w = np.cross(u, v)
        ww = w @ w
        if ww == 0.0:
            return 0.0
        center = p0 + np.cross((u @ u) * v - (v @ v) * u, w) / (2.0 * ww)
        dist = np.linalg.norm(quad - center, axis=1)
        diameter = max(np.linalg.norm(quad[i] - quad[j]) for i in range(4) for j in range(i + 1, 4))
        return float((dist.max() - dist.min()) / diameter)

    def tip_normals(self, surface: RevolutionSurface, normals: NormalProfile) -> Optional[np.ndarray]:
        """원뿔 꼭짓점의 m 별 법선 ν(m,k); 꼭짓점이 없으면 None"""
        if not surface.has_cone_tip:
            return None
        return self.build_normals(surface, normals)[:, -1, :]

    def column_area(self, surface: RevolutionSurface, normals: NormalProfile) -> float:
        """회전 방향 한 열 (m 고정) 의 면 넓이 합"""
        return float(sum(face.area for face in self.surface_geometry(surface, normals)))

    def total_area(self, surface: RevolutionSurface, normals: NormalProfile) -> float:
        """전체 곡면 넓이 = l x 한 열의 넓이"""
        return surface.l * self.column_area(surface, normals)


# 싱글톤 인스턴스
surface_service = SurfaceService()
