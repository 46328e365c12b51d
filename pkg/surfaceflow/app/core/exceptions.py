import logging
from typing import Optional

logger = logging.getLogger(__name__)


class SurfaceFlowException(Exception):
    """애플리케이션 기본 예외 클래스"""
    def __init__(self, message: str, code: Optional[str] = None):
        self.message = message
        self.code = code
        super().__init__(self.message)


class ZeroEdgeException(SurfaceFlowException):
    """연속한 프로파일 점이 같은 경우 (Δf^2 + Δh^2 = 0)"""
    pass


class DegenerateBandException(SurfaceFlowException):
    """f(n) = f(n+1) = 0 인 퇴화 띠"""
    pass


class ShapeMismatchException(SurfaceFlowException):
    """두 다각형의 꼭짓점 수가 다른 경우"""
    pass


class NonParallelException(SurfaceFlowException):
    """대응하는 변이 평행하지 않은 경우"""
    pass


class DomainViolationException(SurfaceFlowException):
    """매개변수 또는 제곱근 인자가 정의역을 벗어난 경우"""
    pass


class DegenerateStepException(SurfaceFlowException):
    """높이 합의 분모가 0이 되는 표본 간격"""
    pass


class SingularJacobianException(SurfaceFlowException):
    """흐름 방향이 결정되지 않는 퇴화 배치"""
    def __init__(self, message: str, condition: float, code: Optional[str] = None):
        self.condition = condition
        super().__init__(message, code)


class DivisionByZeroException(SurfaceFlowException):
    """명시적 우변에서 높이 차가 0인 경우"""
    pass


class StepFailureException(SurfaceFlowException):
    """적분 중 면이 퇴화한 경우"""
    def __init__(self, message: str, time: float, code: Optional[str] = None):
        self.time = time
        super().__init__(message, code)


class FitDomainException(SurfaceFlowException):
    """CGC 맞춤이 정의역을 벗어난 경우"""
    pass


class ConfigError(SurfaceFlowException):
    """실행 설정 오류"""
    pass


class InvariantViolationException(SurfaceFlowException):
    """성질 검사 실패 - code 에 불변량 이름을 담습니다"""
    pass


def handle_surface_flow_exception(exc: SurfaceFlowException) -> int:
    """전역 예외 처리기 - 종료 코드를 반환"""
    if isinstance(exc, InvariantViolationException):
        logger.error(f"Invariant violated [{exc.code}]: {exc.message}")
        return 1
    if isinstance(exc, ConfigError):
        logger.error(f"Configuration error: {exc.message}")
        return 2
    extra = ""
    if isinstance(exc, StepFailureException):
        extra = f" (t={exc.time:.6g})"
    elif isinstance(exc, SingularJacobianException):
        extra = f" (cond={exc.condition:.3e})"
    logger.error(f"{exc.__class__.__name__}: {exc.message}{extra}")
    return 2
