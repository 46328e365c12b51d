import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence

from ..core.config import settings
from ..core.exceptions import SurfaceFlowException
from ..schemas.flow import FlowState, FlowTrace
from ..services.flow_service import flow_service

logger = logging.getLogger(__name__)


def _integrate_one(payload: Dict) -> Dict:
    """하위 프로세스에서 실행되는 단일 적분 (직렬화 가능한 입출력만 사용)"""
    for name, value in payload.get("overrides", {}).items():
        setattr(settings, name, value)
    state = FlowState.model_validate_json(payload["state"])
    try:
        trace = flow_service.integrate(state, payload["t_end"], **payload["options"])
    except SurfaceFlowException as e:
        return {"index": payload["index"], "error": e.message, "code": e.code, "kind": e.__class__.__name__}
    return {"index": payload["index"], "trace": trace.model_dump_json()}


class BatchResult:
    """배치 적분 결과 - 입력 순서를 유지"""

    def __init__(self, traces: List[Optional[FlowTrace]], errors: Dict[int, str]):
        self.traces = traces
        self.errors = errors

    @property
    def ok(self) -> bool:
        return not self.errors


class FlowBatchWorker:
    """여러 초기 상태를 프로세스 풀에서 독립적으로 적분하는 워커"""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers

    def run(
        self,
        states: Sequence[FlowState],
        t_end: float,
        overrides: Optional[Dict[str, float]] = None,
        **options,
    ) -> BatchResult:
        if not states:
            return BatchResult([], {})

        payloads = [
            {
                "index": i,
                "state": state.model_dump_json(),
                "t_end": t_end,
                "options": options,
                "overrides": overrides or {},
            }
            for i, state in enumerate(states)
        ]
        workers = self.max_workers or settings.MAX_WORKERS
        logger.info(f"배치 적분 시작: {len(states)}개 상태, max_workers={workers}")

        traces: List[Optional[FlowTrace]] = [None] * len(states)
        errors: Dict[int, str] = {}
        if len(states) == 1:
            outcomes = [_integrate_one(payloads[0])]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_integrate_one, payloads))

        for outcome in outcomes:
            index = outcome["index"]
            if "error" in outcome:
                errors[index] = f"{outcome['kind']}: {outcome['error']}"
                logger.error(f"배치 적분 실패: index={index}, {errors[index]}")
            else:
                traces[index] = FlowTrace.model_validate_json(outcome["trace"])

        logger.info(f"배치 적분 완료: 성공 {len(states) - len(errors)}/{len(states)}")
        return BatchResult(traces, errors)


# 싱글톤 인스턴스
batch_worker = FlowBatchWorker()
