import math

import numpy as np
import pytest

from app.core.config import settings
from app.schemas.family import CgcFamily, FamilyKind, SampleGrid
from app.schemas.flow import BoundaryCondition
from app.schemas.surface import RevolutionSurface
from app.services.cgc_service import cgc_service
from app.utils.fixtures import barrel_state, dumbbell_state, sphere_state


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """상대 출력 경로가 임시 디렉토리로 가도록 OUTPUT_DIR 변경"""
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path))
    return tmp_path


@pytest.fixture
def spindle():
    """p = 0.9, c = 1, u_n = πn/12 (n = 0..6) 의 방추형 CGC 곡면"""
    family = CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=0.9)
    grid = SampleGrid(u=tuple(math.pi * n / 12 for n in range(7)))
    profile, normals = cgc_service.parametrize(family, grid)
    return RevolutionSurface(profile=profile, l=24), normals


@pytest.fixture
def unit_sphere():
    """p = 1 인 이산 구면: 꼭짓점이 단위 구 위에 있고 ν = x"""
    family = CgcFamily(kind=FamilyKind.SPHERE_POSITIVE, p=1.0)
    profile, normals = cgc_service.parametrize(family, cgc_service.default_grid(family))
    return RevolutionSurface(profile=profile, l=24), normals


@pytest.fixture
def sphere_cone():
    return sphere_state(6, 24, BoundaryCondition.POS_CONE)


@pytest.fixture
def sphere_cusp():
    return sphere_state(6, 24, BoundaryCondition.POS_CUSP)


@pytest.fixture
def dumbbell():
    return dumbbell_state(6, 24, BoundaryCondition.POS_CONE)


@pytest.fixture
def barrel():
    return barrel_state(6, 24)
