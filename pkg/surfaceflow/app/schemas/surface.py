from typing import Optional

import numpy as np
from pydantic import Field, field_validator, model_validator

from ..core.constants import SCHEMA_VERSION, MIN_ROTATIONAL_DIVISIONS
from .common import FrozenModel, FloatTuple

# 반올림으로 생긴 아주 작은 음의 반지름은 축 위의 점으로 간주
_AXIS_SNAP = 1e-14
# 생성 시 단위 법선 검증 (불변량 검사는 check_service 에서 더 엄격하게 수행)
_UNIT_GUARD = 1e-9


class ProfileCurve(FrozenModel):
    """회전면의 생성 곡선 (f(n), h(n)), n = 0..k"""
    f: FloatTuple = Field(..., min_length=1, description="반지름 좌표")
    h: FloatTuple = Field(..., min_length=1, description="높이 좌표")

    @field_validator("f", mode="before")
    @classmethod
    def snap_axis(cls, v):
        values = [float(x) for x in v]
        scale = max([abs(x) for x in values] + [1.0])
        return tuple(0.0 if -_AXIS_SNAP * scale < x < 0 else x for x in values)

    @model_validator(mode="after")
    def validate_profile(self):
        if len(self.f) != len(self.h):
            raise ValueError(f"f, h 길이가 다릅니다: {len(self.f)} != {len(self.h)}")
        if any(x < 0 for x in self.f):
            raise ValueError("f(n) >= 0 이어야 합니다")
        for n in range(len(self.f) - 1):
            df = self.f[n + 1] - self.f[n]
            dh = self.h[n + 1] - self.h[n]
            if df * df + dh * dh <= 0:
                raise ValueError(f"연속한 프로파일 점이 같습니다: n={n}")
        return self

    @property
    def k(self) -> int:
        return len(self.f) - 1

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.f, dtype=float), np.asarray(self.h, dtype=float)


class NormalProfile(FrozenModel):
    """회전 대칭 단위 법선 ν = (a cos θ, a sin θ, b)"""
    a: FloatTuple = Field(..., min_length=1)
    b: FloatTuple = Field(..., min_length=1)

    @model_validator(mode="after")
    def validate_unit(self):
        if len(self.a) != len(self.b):
            raise ValueError(f"a, b 길이가 다릅니다: {len(self.a)} != {len(self.b)}")
        for n, (a, b) in enumerate(zip(self.a, self.b)):
            if abs(a * a + b * b - 1.0) > _UNIT_GUARD:
                raise ValueError(f"단위 법선이 아닙니다: n={n}, a^2+b^2={a * a + b * b}")
        return self

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float)


class RevolutionSurface(FrozenModel):
    """프로파일을 l 등분 회전시켜 얻는 원형 그물"""
    profile: ProfileCurve
    l: int = Field(..., ge=MIN_ROTATIONAL_DIVISIONS, description="회전 방향 분할 수")

    @property
    def k(self) -> int:
        return self.profile.k

    @property
    def has_cone_tip(self) -> bool:
        return self.profile.k > 0 and self.profile.f[-1] == 0.0


class FaceGeometry(FrozenModel):
    """층 n 의 면에 대한 계량, 곡률, 혼합 면적 (m 에 무관)"""
    n: int = Field(..., ge=0, description="면의 아래층 인덱스")
    g11: float
    g22: float
    g12: float = 0.0
    K: float = Field(..., description="가우스 곡률")
    H: float = Field(..., description="평균 곡률")
    area: float = Field(..., description="혼합 면적 A(x)")
    via_shape_operator: bool = False

    @model_validator(mode="after")
    def validate_metric(self):
        if self.g11 <= 0:
            raise ValueError(f"g11 > 0 이어야 합니다: {self.g11}")
        if self.g22 < 0:
            raise ValueError(f"g22 >= 0 이어야 합니다: {self.g22}")
        return self


class ProfileDocument(FrozenModel):
    """프로파일 JSON 문서 (version 1)"""
    version: int = SCHEMA_VERSION
    k: int
    l: int = Field(..., ge=MIN_ROTATIONAL_DIVISIONS)
    f: FloatTuple
    h: FloatTuple
    a: Optional[FloatTuple] = None
    b: Optional[FloatTuple] = None
    u: Optional[FloatTuple] = None
    family: Optional[str] = None

    @model_validator(mode="after")
    def validate_document(self):
        if self.version != SCHEMA_VERSION:
            raise ValueError(f"지원하지 않는 문서 버전: {self.version}")
        if len(self.f) != self.k + 1 or len(self.h) != self.k + 1:
            raise ValueError("f, h 길이는 k+1 이어야 합니다")
        for name in ("a", "b", "u"):
            values = getattr(self, name)
            if values is not None and len(values) != self.k + 1:
                raise ValueError(f"{name} 길이는 k+1 이어야 합니다")
        return self

    @classmethod
    def from_models(
        cls,
        profile: ProfileCurve,
        l: int,
        normals: Optional[NormalProfile] = None,
        u: Optional[FloatTuple] = None,
        family: Optional[str] = None,
    ) -> "ProfileDocument":
        return cls(
            k=profile.k,
            l=l,
            f=profile.f,
            h=profile.h,
            a=normals.a if normals else None,
            b=normals.b if normals else None,
            u=tuple(u) if u is not None else None,
            family=family,
        )

    def profile(self) -> ProfileCurve:
        return ProfileCurve(f=self.f, h=self.h)

    def normals(self) -> Optional[NormalProfile]:
        if self.a is None or self.b is None:
            return None
        return NormalProfile(a=self.a, b=self.b)
