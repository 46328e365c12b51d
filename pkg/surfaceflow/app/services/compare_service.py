import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field

from ..core.constants import DEFAULT_REFINEMENT_LEVELS
from ..core.exceptions import ConfigError, SurfaceFlowException
from ..schemas.common import FrozenModel, FloatTuple
from ..schemas.family import CgcFamily, SampleGrid
from .cgc_service import cgc_service

logger = logging.getLogger(__name__)


class CompareLevel(FrozenModel):
    """한 세분 단계 M 의 표본별 비교"""
    M: int
    u: FloatTuple
    f_smooth: FloatTuple
    h_smooth: FloatTuple
    f_discrete: FloatTuple
    h_discrete: FloatTuple
    gap: FloatTuple

    @property
    def end_gap(self) -> float:
        return self.gap[-1]

    def rows(self):
        for j in range(len(self.u)):
            yield (self.M, self.u[j], self.f_smooth[j], self.h_smooth[j], self.f_discrete[j], self.h_discrete[j], self.gap[j])


class CompareReport(FrozenModel):
    family: str
    upper: float
    levels: Tuple[CompareLevel, ...]
    order: Optional[float] = Field(default=None, description="끝점 간격의 log-log 기울기로 추정한 수렴 차수")
    grid_level: Optional[CompareLevel] = None

    def rows(self):
        if self.grid_level is not None:
            yield from self.grid_level.rows()
        for level in self.levels:
            yield from level.rows()


class CompareService:
    """이산 프로파일과 매끄러운 기준 곡선의 겹쳐 보기와 세분 수렴 차수"""

    @staticmethod
    def compare_grid(family: CgcFamily, grid: SampleGrid, label: int = 0) -> CompareLevel:
        """주어진 격자에서 이산/매끄러운 (f, h) 비교; 높이는 n = 0 기준으로 맞춥니다"""
        profile, _ = cgc_service.parametrize(family, grid)
        u = grid.values()
        f_d, h_d = profile.arrays()
        sign = cgc_service.smooth_height_sign(family)

        smooth = [cgc_service.smooth_reference(family, float(value)) for value in u]
        f_s = np.array([s[0] for s in smooth])
        h_s = np.array([s[1] for s in smooth])
        h_s = sign * (h_s - h_s[grid.origin])
        h_d = h_d - h_d[grid.origin]
        gap = np.hypot(f_d - f_s, h_d - h_s)
        return CompareLevel(
            M=label or len(u) - 1,
            u=tuple(u),
            f_smooth=tuple(f_s),
            h_smooth=tuple(h_s),
            f_discrete=tuple(f_d),
            h_discrete=tuple(h_d),
            gap=tuple(gap),
        )

    def run_compare(
        self,
        family: CgcFamily,
        upper: Optional[float] = None,
        levels: Sequence[int] = DEFAULT_REFINEMENT_LEVELS,
        grid: Optional[SampleGrid] = None,
        start: Optional[float] = None,
    ) -> CompareReport:
        """
        u_n = start + (U - start) n / M 로 M 을 바꿔 가며 끝점 간격을 측정하고
        log(gap) 대 log(M) 기울기로 수렴 차수를 추정합니다.
        """
        if len(levels) < 2:
            raise ConfigError("두 개 이상의 세분 단계가 필요합니다")
        base = cgc_service.default_grid(family)
        if start is None:
            start = base.u[0]
        if upper is None:
            upper = base.u[-1]
        if upper == start:
            raise ConfigError("비교 구간의 길이가 0 입니다")

        compared: List[CompareLevel] = []
        for M in levels:
            try:
                compared.append(self.compare_grid(family, SampleGrid.uniform(start, upper, M), label=M))
            except SurfaceFlowException as e:
                raise ConfigError(f"M={M} 비교 실패: {e.message}")

        gaps = np.array([level.end_gap for level in compared])
        order = None
        if np.all(gaps > 0):
            slope, _ = np.polyfit(np.log(np.asarray(levels, dtype=float)), np.log(gaps), 1)
            order = float(-slope)
        logger.info(f"run_compare: family={family.kind.value}, gaps={gaps.tolist()}, order={order}")

        grid_level = self.compare_grid(family, grid) if grid is not None else None
        return CompareReport(
            family=family.kind.value,
            upper=float(upper),
            levels=tuple(compared),
            order=order,
            grid_level=grid_level,
        )


# 싱글톤 인스턴스
compare_service = CompareService()
