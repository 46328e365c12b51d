from enum import Enum
from typing import Optional

import numpy as np
from pydantic import Field, field_validator, model_validator

from .common import EnumNormalizerMixin, FrozenModel, FloatTuple


class FamilyKind(str, Enum):
    SPHERE_POSITIVE = "sphere_positive"    # K = c > 0 (구면/방추형/팽대형)
    PSEUDOSPHERE = "pseudosphere"          # K = -1, 의구면
    COSH_NEGATIVE = "cosh_negative"        # K < 0, f = p cosh
    SINH_NEGATIVE = "sinh_negative"        # K < 0, f = q sinh
    CATENOID = "catenoid"                  # H = 0
    DELAUNAY = "delaunay"                  # H 상수, CGC 의 평행곡면


class SampleGrid(FrozenModel):
    """표본 매개변수 u_{k1}..u_{k2}; origin 은 n = 0 인 위치"""
    u: FloatTuple = Field(..., min_length=1, description="순단조 표본 매개변수")
    origin: int = Field(default=0, ge=0, description="u 안에서 n = 0 의 인덱스")

    @model_validator(mode="after")
    def validate_monotonic(self):
        if self.origin >= len(self.u):
            raise ValueError(f"origin 이 범위를 벗어났습니다: {self.origin}")
        if len(self.u) > 1:
            steps = np.diff(np.asarray(self.u, dtype=float))
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ValueError("u 는 순단조여야 합니다")
        return self

    @property
    def decreasing(self) -> bool:
        return len(self.u) > 1 and self.u[1] < self.u[0]

    @property
    def k1(self) -> int:
        return -self.origin

    @property
    def k2(self) -> int:
        return len(self.u) - 1 - self.origin

    def indices(self) -> np.ndarray:
        return np.arange(self.k1, self.k2 + 1)

    def values(self) -> np.ndarray:
        return np.asarray(self.u, dtype=float)

    @classmethod
    def uniform(cls, start: float, stop: float, steps: int) -> "SampleGrid":
        return cls(u=tuple(np.linspace(start, stop, steps + 1)))


class CgcFamily(EnumNormalizerMixin, FrozenModel):
    """닫힌 형식 매개화 계열과 매개변수"""
    kind: FamilyKind
    p: Optional[float] = Field(default=None, gt=0)
    q: Optional[float] = Field(default=None, gt=0, lt=1)
    c: Optional[float] = Field(default=None, description="곡률 크기 (양수 계열은 c > 0, 음수 계열은 c < 0)")
    eps: Optional[int] = Field(default=None, description="평행곡면 방향 ±1")

    @field_validator("eps")
    @classmethod
    def validate_eps(cls, v):
        if v is not None and v * v != 1:
            raise ValueError("eps 는 +1 또는 -1 이어야 합니다")
        return v

    @model_validator(mode="after")
    def validate_parameters(self):
        kind = self.kind
        if kind in (FamilyKind.SPHERE_POSITIVE, FamilyKind.DELAUNAY):
            if self.p is None:
                raise ValueError(f"{kind.value} 계열에는 p 가 필요합니다")
            if self.c is not None and self.c <= 0:
                raise ValueError("양의 곡률 계열에는 c > 0 이어야 합니다")
        if kind == FamilyKind.DELAUNAY and self.eps is None:
            raise ValueError("delaunay 계열에는 eps 가 필요합니다")
        if kind == FamilyKind.COSH_NEGATIVE and self.p is None:
            raise ValueError("cosh_negative 계열에는 p 가 필요합니다")
        if kind == FamilyKind.SINH_NEGATIVE and self.q is None:
            raise ValueError("sinh_negative 계열에는 0 < q < 1 이 필요합니다")
        if kind in (FamilyKind.COSH_NEGATIVE, FamilyKind.SINH_NEGATIVE) and self.c is not None and self.c >= 0:
            raise ValueError("음의 곡률 계열에는 c < 0 이어야 합니다")
        if kind == FamilyKind.PSEUDOSPHERE and self.c is not None and self.c != -1:
            raise ValueError("의구면은 K = -1 만 지원합니다")
        return self

    @property
    def curvature(self) -> float:
        """계열이 갖는 가우스 곡률 (catenoid/delaunay 는 생성 CGC 곡률)"""
        if self.kind in (FamilyKind.SPHERE_POSITIVE, FamilyKind.DELAUNAY):
            return 1.0 if self.c is None else self.c
        if self.kind == FamilyKind.CATENOID:
            return float("nan")
        return -1.0 if self.c is None else self.c
