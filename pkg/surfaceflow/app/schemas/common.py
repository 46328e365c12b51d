from typing import Tuple
from pydantic import BaseModel, ConfigDict, field_validator

FloatTuple = Tuple[float, ...]


class EnumNormalizerMixin(BaseModel):
    """CLI 스타일 태그('pos-cone', 'Pos_Cone')를 enum 값('pos_cone')으로 정규화"""
    @field_validator("*", mode='before')
    @classmethod
    def normalize_enum(cls, v):
        if isinstance(v, str):
            return v.strip().lower().replace("-", "_")
        return v


class FrozenModel(BaseModel):
    """생성 후 변경 불가능한 값 객체 - 스레드 간 공유 가능"""
    model_config = ConfigDict(frozen=True)
