from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator


class Settings(BaseSettings):
    """
    라이브러리/CLI 전체 설정을 관리하는 클래스
    환경 변수(SURFACEFLOW_ 접두사)와 .env 파일을 읽어와 검증하고 타입을 보장합니다.
    """

    model_config = SettingsConfigDict(
        env_prefix="SURFACEFLOW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # 기본 애플리케이션 설정
    APP_NAME: str = "Discrete Surface Flow"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False
    LOG_LEVEL: str = "INFO"

    # 출력 경로 - 환경변수로 덮어쓸 수 있는 유일한 경로
    OUTPUT_DIR: Optional[str] = Field(
        default=None,
        description="상대 출력 경로의 기준 디렉토리"
    )

    # 이산 곡면 설정
    DEFAULT_ROTATIONAL_DIVISIONS: int = Field(
        default=24,
        ge=3,
        description="회전 방향 분할 수 l"
    )

    DEGENERATE_BAND_FACTOR: float = Field(
        default=1e-9,
        description="|f(n+1)^2 - f(n)^2| < 계수 * max(f)^2 이면 형태 연산자로 곡률 계산"
    )

    PARALLEL_TOLERANCE: float = Field(
        default=1e-9,
        description="혼합 면적 계산 시 변 평행성 상대 허용 오차"
    )

    UNIT_NORMAL_TOLERANCE: float = Field(
        default=1e-12,
        description="a^2 + b^2 = 1 허용 오차"
    )

    CIRCULARITY_TOLERANCE: float = Field(
        default=1e-10,
        description="면의 원형성 잔차 (면 지름 대비)"
    )

    STEINER_TOLERANCE: float = Field(
        default=1e-10,
        description="Steiner 공식 잔차 (A(x) 대비)"
    )

    CURVATURE_ORACLE_TOLERANCE: float = Field(
        default=1e-9,
        description="닫힌 형식 곡률과 형태 연산자 곡률의 상대 허용 오차"
    )

    MIXED_AREA_TOLERANCE: float = Field(
        default=1e-10,
        description="혼합 면적 행렬식 항등식 상대 허용 오차"
    )

    CONSTANT_CURVATURE_TOLERANCE: float = Field(
        default=1e-10,
        description="CGC/CMC 매개화 곡률 상수성 허용 오차"
    )

    SQRT_CLAMP_TOLERANCE: float = Field(
        default=1e-12,
        description="제곱근 인자가 이 값 이내의 음수이면 0으로 보정"
    )

    QUADRATURE_ABS_TOLERANCE: float = Field(
        default=1e-12,
        description="매끄러운 기준 곡선 적분 절대 허용 오차"
    )

    # 리치 흐름 설정
    FLOW_DT: float = Field(
        default=1e-3,
        description="기본 시간 간격"
    )

    FLOW_STRIDE: int = Field(
        default=100,
        ge=1,
        description="스냅샷 기록 간격 (스텝 수)"
    )

    CONSTRAINT_TOLERANCE: float = Field(
        default=1e-12,
        description="고정 조건 (f(k) 또는 a(k)) 재투영 임계값"
    )

    CONVERGENCE_TOLERANCE: float = Field(
        default=1e-10,
        description="max_n |K(n) - r/2| 수렴 판정 값"
    )

    CONVERGENCE_WINDOW: int = Field(
        default=10,
        ge=1,
        description="연속으로 수렴 조건을 만족해야 하는 스냅샷 수"
    )

    JACOBIAN_CONDITION_LIMIT: float = Field(
        default=1e12,
        description="이 조건수를 넘으면 야코비안을 특이로 간주"
    )

    FD_JACOBIAN_STEP: float = Field(
        default=1e-6,
        description="중앙 차분 야코비안 스텝 (상태 크기 대비)"
    )

    ADAPTIVE_TOLERANCE: float = Field(
        default=1e-12,
        description="스텝 반감 적응형 RK4의 국소 오차 허용치"
    )

    STABILITY_SAFETY: float = Field(
        default=0.5,
        le=1.0,
        description="부분 스텝 h 의 상한 = 배율 x 2.785 / (선형화 우변의 스펙트럼 반지름)"
    )

    STABILITY_INTERVAL: int = Field(
        default=10,
        ge=1,
        description="스펙트럼 반지름을 다시 추정하는 스텝 간격"
    )

    RESTORE_AREA: bool = Field(
        default=True,
        description="정규화 흐름에서 매 스텝 균일 배율로 총면적을 초기값으로 복원"
    )

    MAX_WORKERS: Optional[int] = Field(
        default=None,
        description="배치 적분 프로세스 수 (None 이면 CPU 수)"
    )

    @field_validator(
        "DEGENERATE_BAND_FACTOR",
        "PARALLEL_TOLERANCE",
        "UNIT_NORMAL_TOLERANCE",
        "CIRCULARITY_TOLERANCE",
        "STEINER_TOLERANCE",
        "CURVATURE_ORACLE_TOLERANCE",
        "MIXED_AREA_TOLERANCE",
        "CONSTANT_CURVATURE_TOLERANCE",
        "SQRT_CLAMP_TOLERANCE",
        "QUADRATURE_ABS_TOLERANCE",
        "FLOW_DT",
        "CONSTRAINT_TOLERANCE",
        "CONVERGENCE_TOLERANCE",
        "JACOBIAN_CONDITION_LIMIT",
        "FD_JACOBIAN_STEP",
        "ADAPTIVE_TOLERANCE",
        "STABILITY_SAFETY",
    )
    @classmethod
    def validate_positive(cls, v, info):
        if v <= 0:
            raise ValueError(f"{info.field_name}는 0보다 커야 합니다")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v):
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"지원하지 않는 로그 레벨: {v}")
        return level

    def with_overrides(self, overrides: dict) -> "Settings":
        """허용 오차 덮어쓰기를 적용한 새 설정 (검증 포함)"""
        if not overrides:
            return self
        data = self.model_dump()
        data.update(overrides)
        return Settings(**data)


settings = Settings()
