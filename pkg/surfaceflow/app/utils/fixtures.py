import math
from typing import Optional, Tuple

import numpy as np

from ..core.config import settings
from ..core.exceptions import ConfigError
from ..schemas.family import CgcFamily, FamilyKind
from ..schemas.flow import BoundaryCondition, FlowState
from ..schemas.surface import NormalProfile, ProfileCurve, RevolutionSurface
from ..services.cgc_service import cgc_service
from ..services.flow_service import flow_service
from ..services.surface_service import surface_service

FIXTURE_NAMES = ("sphere", "dumbbell", "barrel", "neg-cone", "neg-cusp")

# 반아령 프로파일: f = cos θ (1 - 0.3 cos²(2θ)), h = 1.2 sin θ
DUMBBELL_WAIST = 0.3
DUMBBELL_HEIGHT = 1.2

# 술통형 띠: p = 1.2, c = 1, u_k = arcsin(1/p) 에서 a(k) = 0, b(k) = 1
BARREL_RADIUS = 1.2


def sphere_state(k: int = 6, l: int = 24, bc=BoundaryCondition.POS_CONE) -> FlowState:
    """단위 구면의 위쪽 반: f = cos(πn/2k), h = sin(πn/2k), 꼭대기 f(k) = 0"""
    theta = 0.5 * math.pi * np.arange(k + 1) / k
    f = np.cos(theta)
    f[-1] = 0.0
    profile = ProfileCurve(f=tuple(f), h=tuple(np.sin(theta)))
    return FlowState.from_profile(profile, bc, l)


def dumbbell_state(k: int = 6, l: int = 24, bc=BoundaryCondition.POS_CONE) -> FlowState:
    """적도 부근이 잘록한 반아령형 초기 곡면"""
    theta = 0.5 * math.pi * np.arange(k + 1) / k
    f = np.cos(theta) * (1.0 - DUMBBELL_WAIST * np.cos(2.0 * theta) ** 2)
    f[-1] = 0.0
    h = DUMBBELL_HEIGHT * np.sin(theta)
    return FlowState.from_profile(ProfileCurve(f=tuple(f), h=tuple(h)), bc, l)


def _bump(k: int, amplitude: float) -> np.ndarray:
    return 1.0 + amplitude * np.sin(math.pi * np.arange(k + 1) / k)


def barrel_state(
    k: int = 6,
    l: int = 24,
    bc=BoundaryCondition.POS_CUSP,
    amplitude: float = 0.03,
) -> FlowState:
    """f(k) > 0 인 양의 CGC 술통형 띠의 허리를 조인 뒤 b(k) = 1 로 재투영한 초기값"""
    u = np.linspace(0.0, math.asin(1.0 / BARREL_RADIUS), k + 1)
    f, h, _, _ = cgc_service.positive_arrays(BARREL_RADIUS, 1.0, u)
    f = f * _bump(k, -amplitude)
    state = FlowState.from_profile(ProfileCurve(f=tuple(f), h=tuple(h)), bc, l)
    return settle(state)


def neg_cone_state(k: int = 6, l: int = 24, amplitude: float = 0.04) -> FlowState:
    """sinh 형 (q = 1/2, u_n = (1 - n/k) arccosh 2) 곡면의 반지름을 조금 흔든 초기값"""
    family = CgcFamily(kind=FamilyKind.SINH_NEGATIVE, q=0.5)
    u = (1.0 - np.arange(k + 1) / k) * math.acosh(2.0)
    f, h, _, _ = cgc_service.negative_arrays(family, u)
    f = f * _bump(k, amplitude)
    f[-1] = 0.0
    return FlowState.from_profile(ProfileCurve(f=tuple(f), h=tuple(h)), BoundaryCondition.NEG_CONE, l)


def neg_cusp_state(k: int = 6, l: int = 24, amplitude: float = 0.03) -> FlowState:
    """cosh 형 (p = 1, u_n = n log(1+√2)/k) 곡면을 흔든 뒤 b(k) = -1 로 재투영한 초기값"""
    family = CgcFamily(kind=FamilyKind.COSH_NEGATIVE, p=1.0)
    u = np.arange(k + 1) * math.log(1.0 + math.sqrt(2.0)) / k
    f, h, _, _ = cgc_service.negative_arrays(family, u)
    f = f * _bump(k, amplitude)
    state = FlowState.from_profile(ProfileCurve(f=tuple(f), h=tuple(h)), BoundaryCondition.NEG_CUSP, l)
    return settle(state)


def settle(state: FlowState, max_iterations: int = 20) -> FlowState:
    """고정 조건 잔차가 허용치 아래가 될 때까지 재투영 반복"""
    for _ in range(max_iterations):
        state, residual = flow_service.project(state)
        if residual <= settings.CONSTRAINT_TOLERANCE:
            break
    return state


def fixture_state(name: str, k: int = 6, l: int = 24, bc: Optional[BoundaryCondition] = None) -> FlowState:
    """CLI --fixture 이름으로 초기 상태 생성"""
    key = name.strip().lower().replace("_", "-")
    if key == "sphere":
        return sphere_state(k, l, bc or BoundaryCondition.POS_CONE)
    if key == "dumbbell":
        if bc is not None and bc.is_cusp:
            # f(k) = 0 인 프로파일은 b(k) = 1 고정과 양립하지 않음
            raise ConfigError(f"fixture dumbbell 은 원뿔 조건 전용입니다 (뾰족점은 barrel): {bc.value}")
        return dumbbell_state(k, l, bc or BoundaryCondition.POS_CONE)
    if key == "barrel":
        if bc is not None and bc.pinned_b != 1.0:
            raise ConfigError(f"fixture barrel 은 양의 뾰족점 조건 전용입니다: {bc.value}")
        return barrel_state(k, l, bc or BoundaryCondition.POS_CUSP)
    if key == "neg-cone":
        return neg_cone_state(k, l)
    if key == "neg-cusp":
        return neg_cusp_state(k, l)
    raise ConfigError(f"지원하지 않는 fixture: {name}")


def random_surface(
    rng: np.random.Generator,
    k: Optional[int] = None,
    l: Optional[int] = None,
) -> Tuple[RevolutionSurface, NormalProfile]:
    """양의 반지름과 서로 다른 f(n)^2 를 갖는 임의 회전면과 전파된 법선"""
    k = int(rng.integers(3, 13)) if k is None else k
    l = int(rng.integers(3, 41)) if l is None else l
    gaps = rng.uniform(0.05, 0.3, size=k)
    f = rng.uniform(0.2, 1.0) + np.concatenate([np.cumsum(gaps[::-1])[::-1], [0.0]])
    if rng.random() < 0.5:
        f = f[::-1].copy()
    h = np.concatenate([[0.0], np.cumsum(rng.uniform(-0.5, 0.5, size=k))])
    angle = rng.uniform(0.0, 2.0 * math.pi)
    profile = ProfileCurve(f=tuple(f), h=tuple(h))
    normals = surface_service.propagate_normal(profile, math.cos(angle), math.sin(angle))
    return RevolutionSurface(profile=profile, l=l), normals


def random_cone_state(rng: np.random.Generator, k: Optional[int] = None, l: Optional[int] = None) -> FlowState:
    """f(k) = 0 이고 Δh > 0 인 임의 PosCone 상태"""
    k = int(rng.integers(2, 10)) if k is None else k
    l = int(rng.integers(6, 41)) if l is None else l
    gaps = rng.uniform(0.05, 0.4, size=k)
    f = np.concatenate([np.cumsum(gaps[::-1])[::-1], [0.0]])
    dh = rng.uniform(0.1, 0.6, size=k)
    return FlowState(f=tuple(f), dh=tuple(dh), a0b0=(1.0, 0.0), bc=BoundaryCondition.POS_CONE, l=l)
