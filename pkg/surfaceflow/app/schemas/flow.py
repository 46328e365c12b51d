from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import Field, model_validator

from ..core.constants import MIN_ROTATIONAL_DIVISIONS
from .common import EnumNormalizerMixin, FrozenModel, FloatTuple
from .surface import ProfileCurve


class BoundaryCondition(str, Enum):
    POS_CONE = "pos_cone"
    NEG_CONE = "neg_cone"
    POS_CUSP = "pos_cusp"
    NEG_CUSP = "neg_cusp"
    UNNORMALIZED_POS_CONE = "unnormalized_pos_cone"
    UNNORMALIZED_POS_CUSP = "unnormalized_pos_cusp"

    @property
    def is_cone(self) -> bool:
        return self in (
            BoundaryCondition.POS_CONE,
            BoundaryCondition.NEG_CONE,
            BoundaryCondition.UNNORMALIZED_POS_CONE,
        )

    @property
    def is_cusp(self) -> bool:
        return not self.is_cone

    @property
    def normalized(self) -> bool:
        return self in (
            BoundaryCondition.POS_CONE,
            BoundaryCondition.NEG_CONE,
            BoundaryCondition.POS_CUSP,
            BoundaryCondition.NEG_CUSP,
        )

    @property
    def pinned_b(self) -> Optional[float]:
        """첨점 조건의 b(k) 고정값"""
        if self == BoundaryCondition.NEG_CUSP:
            return -1.0
        if self in (BoundaryCondition.POS_CUSP, BoundaryCondition.UNNORMALIZED_POS_CUSP):
            return 1.0
        return None

    @property
    def seed_normal(self) -> Tuple[float, float]:
        """n = 0 에서 고정되는 (a(0), b(0))"""
        if self == BoundaryCondition.NEG_CONE:
            return (0.0, 1.0)
        return (1.0, 0.0)

    def unnormalized(self) -> "BoundaryCondition":
        if self == BoundaryCondition.POS_CONE:
            return BoundaryCondition.UNNORMALIZED_POS_CONE
        if self == BoundaryCondition.POS_CUSP:
            return BoundaryCondition.UNNORMALIZED_POS_CUSP
        if self.normalized:
            raise ValueError(f"비정규화 흐름이 없는 경계 조건: {self.value}")
        return self


class FlowState(EnumNormalizerMixin, FrozenModel):
    """상태 X(t) = (f(0..k), Δh(0..k-1)) 와 경계 조건"""
    f: FloatTuple = Field(..., min_length=2)
    dh: FloatTuple = Field(..., min_length=1)
    a0b0: Tuple[float, float]
    bc: BoundaryCondition
    l: int = Field(..., ge=MIN_ROTATIONAL_DIVISIONS)
    t: float = 0.0

    @model_validator(mode="after")
    def validate_dimension(self):
        if len(self.dh) != len(self.f) - 1:
            raise ValueError(f"dh 길이는 k 이어야 합니다: {len(self.dh)} != {len(self.f) - 1}")
        a0, b0 = self.a0b0
        if abs(a0 * a0 + b0 * b0 - 1.0) > 1e-12:
            raise ValueError("(a(0), b(0)) 는 단위 벡터여야 합니다")
        if self.bc.is_cone and self.f[-1] != 0.0:
            raise ValueError("원뿔 조건에서는 f(k) = 0 이어야 합니다")
        return self

    @property
    def k(self) -> int:
        return len(self.f) - 1

    @property
    def dimension(self) -> int:
        return 2 * self.k + 1

    def vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.f, dtype=float), np.asarray(self.dh, dtype=float)])

    def heights(self) -> np.ndarray:
        """h(0) = 0 기준 절대 높이"""
        return np.concatenate([[0.0], np.cumsum(np.asarray(self.dh, dtype=float))])

    def profile(self) -> ProfileCurve:
        return ProfileCurve(f=self.f, h=tuple(self.heights()))

    def with_vector(self, x: np.ndarray, t: Optional[float] = None) -> "FlowState":
        k = self.k
        return FlowState(
            f=tuple(float(v) for v in x[: k + 1]),
            dh=tuple(float(v) for v in x[k + 1:]),
            a0b0=self.a0b0,
            bc=self.bc,
            l=self.l,
            t=self.t if t is None else t,
        )

    @classmethod
    def from_profile(
        cls,
        profile: ProfileCurve,
        bc: BoundaryCondition,
        l: int,
        a0b0: Optional[Tuple[float, float]] = None,
        t: float = 0.0,
    ) -> "FlowState":
        bc = _as_bc(bc)
        f = list(profile.f)
        if bc.is_cone:
            f[-1] = 0.0
        return cls(
            f=tuple(f),
            dh=tuple(np.diff(np.asarray(profile.h, dtype=float))),
            a0b0=a0b0 if a0b0 is not None else bc.seed_normal,
            bc=bc,
            l=l,
            t=t,
        )


class FlowTrace(FrozenModel):
    """적분 결과 - 스냅샷 시계열과 감시량"""
    times: FloatTuple = ()
    states: Tuple[FlowState, ...] = ()
    K_history: Tuple[FloatTuple, ...] = ()
    area_history: FloatTuple = ()
    r_history: FloatTuple = ()
    constraint_residuals: FloatTuple = Field(default=(), description="재투영 전 고정 조건 잔차")
    area_defects: FloatTuple = Field(default=(), description="면적 복원 전 상대 면적 오차 (정규화 흐름)")
    converged: bool = False
    steps: int = 0
    stop_reason: str = "t_end"

    @model_validator(mode="after")
    def validate_lengths(self):
        n = len(self.times)
        for name in ("states", "K_history", "area_history", "r_history", "constraint_residuals", "area_defects"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} 길이가 times 와 다릅니다")
        return self

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def relative_area_drift(self) -> float:
        """단위 시간당 상대 면적 변화의 최댓값"""
        if len(self.times) < 2:
            return 0.0
        areas = np.asarray(self.area_history)
        times = np.asarray(self.times)
        elapsed = max(times[-1] - times[0], 1.0)
        return float(np.max(np.abs(areas - areas[0])) / areas[0] / elapsed)


class FitReport(FrozenModel):
    """흐름 종단 상태와 닫힌 형식 CGC 계열의 비교"""
    family: str
    c: float
    p: Optional[float] = None
    q: Optional[float] = None
    u: FloatTuple
    h_pred: FloatTuple
    h_err: float
    K_spread: float


def _as_bc(bc) -> BoundaryCondition:
    if isinstance(bc, BoundaryCondition):
        return bc
    return BoundaryCondition(str(bc).strip().lower().replace("-", "_"))
