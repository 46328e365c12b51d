from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import Field, ValidationError, field_validator

from ..core.config import Settings, settings
from ..core.exceptions import ConfigError
from .common import EnumNormalizerMixin, FrozenModel
from .family import SampleGrid


class Command(str, Enum):
    PARAMETRIZE = "parametrize"
    FLOW = "flow"
    COMPARE = "compare"
    CHECK = "check"


class RunConfig(EnumNormalizerMixin, FrozenModel):
    """
    한 번의 CLI 실행 설정
    서브커맨드, 숫자 매개변수, 출력 경로, 허용 오차 덮어쓰기를 묶습니다.
    """
    command: Command
    parameters: Dict[str, Any] = Field(default_factory=dict, description="서브커맨드별 숫자/문자 매개변수")
    grid: Optional[SampleGrid] = None
    outputs: Dict[str, str] = Field(default_factory=dict, description="출력 종류 -> 경로")
    inputs: List[str] = Field(default_factory=list, description="입력 프로파일 JSON 경로")
    tolerances: Dict[str, float] = Field(default_factory=dict)

    @field_validator("tolerances")
    @classmethod
    def validate_tolerances(cls, v):
        for name, value in v.items():
            if name not in Settings.model_fields:
                raise ValueError(f"알 수 없는 설정 이름: {name}")
            if value <= 0:
                raise ValueError(f"{name} 는 0보다 커야 합니다")
        return v

    def resolved_settings(self) -> Settings:
        """덮어쓰기를 적용하고 Settings 검증기를 다시 통과시킨 설정"""
        try:
            return settings.with_overrides(self.tolerances)
        except ValidationError as e:
            raise ConfigError(f"설정 덮어쓰기가 올바르지 않습니다: {e.errors()[0]['msg']}")

    def apply(self) -> Settings:
        """검증된 덮어쓰기를 전역 settings 에 반영"""
        resolved = self.resolved_settings()
        for name in self.tolerances:
            setattr(settings, name, getattr(resolved, name))
        return settings

    @classmethod
    def build(cls, **data) -> "RunConfig":
        try:
            return cls(**data)
        except ValidationError as e:
            error = e.errors()[0]
            location = ".".join(str(part) for part in error["loc"])
            raise ConfigError(f"실행 설정 오류 ({location}): {error['msg']}")
