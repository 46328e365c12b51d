# app/main.py
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()

from .core.config import settings
from .core.constants import DEFAULT_REFINEMENT_LEVELS
from .core.exceptions import ConfigError, SurfaceFlowException, handle_surface_flow_exception
from .schemas.config import Command, RunConfig
from .schemas.family import CgcFamily, FamilyKind
from .schemas.flow import BoundaryCondition, FlowState, FlowTrace, _as_bc
from .schemas.surface import RevolutionSurface
from .services.cgc_service import cgc_service
from .services.check_service import check_service
from .services.compare_service import compare_service
from .services.flow_service import flow_service
from .utils import export_utils
from .utils.fixtures import FIXTURE_NAMES, fixture_state
from .utils.validators import parse_grid, parse_levels, parse_tolerance_overrides
from .workers.batch_worker import batch_worker

# 로깅 설정
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL, logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)

logger = logging.getLogger(__name__)

FAMILY_ALIASES = {
    "sphere": FamilyKind.SPHERE_POSITIVE,
    "positive": FamilyKind.SPHERE_POSITIVE,
    "cosh": FamilyKind.COSH_NEGATIVE,
    "sinh": FamilyKind.SINH_NEGATIVE,
}


def _family_from_args(args) -> CgcFamily:
    key = args.family.strip().lower().replace("-", "_")
    kind = FAMILY_ALIASES.get(key, key)
    try:
        return CgcFamily(kind=kind, p=args.p, q=args.q, c=args.c, eps=args.eps)
    except ValidationError as e:
        raise ConfigError(f"계열 매개변수 오류: {e.errors()[0]['msg']}")


def _add_family_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--family",
        required=True,
        help="sphere_positive | pseudosphere | cosh_negative | sinh_negative | catenoid | delaunay",
    )
    parser.add_argument("--p", type=float, help="f(0) 크기 매개변수 (sphere_positive, cosh_negative, delaunay)")
    parser.add_argument("--q", type=float, help="sinh_negative 매개변수 0 < q < 1")
    parser.add_argument("--c", type=float, help="곡률 (양수 계열 c > 0, 음수 계열 c < 0)")
    parser.add_argument("--eps", type=int, choices=(1, -1), help="delaunay 평행곡면 방향")
    parser.add_argument("--grid", help="'[u0,u1,...]', 'linspace(a,b,M)' 또는 'expr(<n 의 식>, n_min, n_max)'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="설정 허용 오차 덮어쓰기 (예: CONVERGENCE_TOLERANCE=1e-9), 반복 가능",
    )

    parser = argparse.ArgumentParser(
        prog="surfaceflow",
        description="이산 회전면, 상수 가우스 곡률 매개화와 이산 리치 흐름",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parametrize", parents=[common], help="닫힌 형식 계열의 이산 프로파일 생성")
    _add_family_arguments(p)
    p.add_argument("--l", type=int, default=None, help="회전 분할 수 (기본값 설정 DEFAULT_ROTATIONAL_DIVISIONS)")
    p.add_argument("--out", default="surface.obj", help="OBJ 출력 경로")
    p.add_argument("--csv", default=None, help="프로파일 CSV (n, u_n, f, h, a, b)")
    p.add_argument("--json", default=None, help="프로파일 JSON (flow --init 입력으로 사용 가능)")

    f = sub.add_parser("flow", parents=[common], help="이산 리치 흐름 적분")
    f.add_argument("--bc", default=None, help="pos-cone | neg-cone | pos-cusp | neg-cusp (기본값 pos-cone, fixture 는 자기 조건)")
    f.add_argument("--unnormalized", action="store_true", help="r = 0 인 비정규화 흐름 (양의 조건만)")
    f.add_argument("--init", action="append", default=[], help="초기 프로파일 JSON, 반복하면 배치 적분")
    f.add_argument("--fixture", choices=FIXTURE_NAMES, default=None, help="--init 이 없을 때 쓰는 내장 초기 곡면")
    f.add_argument("--k", type=int, default=6, help="fixture 프로파일 점 수 - 1")
    f.add_argument("--l", type=int, default=None, help="회전 분할 수")
    f.add_argument("--dt", type=float, default=None, help="시간 간격 (기본값 설정 FLOW_DT)")
    f.add_argument("--t-end", type=float, required=True, help="종료 시간")
    f.add_argument("--stride", type=int, default=None, help="스냅샷 간격 (스텝 수)")
    f.add_argument("--geometric", action="store_true", help="스냅샷을 1, 2, 4, 8... 스텝에서 기록")
    f.add_argument("--adaptive", action="store_true", help="스텝 반감 적응형 RK4")
    f.add_argument("--no-early-stop", action="store_true", help="수렴해도 t_end 까지 적분")
    f.add_argument("--max-steps", type=int, default=None, help="최대 스텝 수")
    f.add_argument("--out", default="trace.csv", help="스냅샷 CSV (t, n, f, h, a, b, K, H, A, r)")
    f.add_argument(
        "--mesh-every",
        type=float,
        default=0.0,
        help="흐름 시간 T 마다 (T 의 배수에 처음 닿은 스냅샷) OBJ 저장, 0 이면 저장 안 함",
    )
    f.add_argument("--mesh-dir", default="meshes", help="OBJ 스냅샷 디렉토리")
    f.add_argument("--fit", action="store_true", help="최종 상태를 CGC 계열에 맞춰 JSON 을 표준 출력에 인쇄")

    c = sub.add_parser("compare", parents=[common], help="이산/매끄러운 프로파일 비교와 수렴 차수")
    _add_family_arguments(c)
    c.add_argument("--levels", default=",".join(str(m) for m in DEFAULT_REFINEMENT_LEVELS), help="세분 단계 M 목록")
    c.add_argument("--upper", type=float, default=None, help="비교 구간 끝 U (기본값은 계열 기본 격자의 끝)")
    c.add_argument("--out", default="compare.csv", help="비교 CSV 출력 경로")

    k = sub.add_parser("check", parents=[common], help="무작위 입력에 대한 불변량 검사")
    k.add_argument("--seed", type=int, default=42, help="난수 seed")
    k.add_argument("--trials", type=int, default=100, help="무작위 곡면/상태 수")
    k.add_argument("--report", default=None, help="검사 결과 JSON 경로")
    return parser


def run_parametrize(config: RunConfig) -> int:
    params = config.parameters
    family: CgcFamily = params["family"]
    grid = config.grid or cgc_service.default_grid(family)
    profile, normals = cgc_service.parametrize(family, grid)
    l = params.get("l") or settings.DEFAULT_ROTATIONAL_DIVISIONS
    surface = RevolutionSurface(profile=profile, l=l)
    label = f"{family.kind.value} p={family.p} q={family.q} c={family.c} eps={family.eps}"

    export_utils.write_obj(config.outputs["obj"], surface, normals, comment=label)
    if "csv" in config.outputs:
        export_utils.write_profile_csv(config.outputs["csv"], profile, normals, grid.u, grid.origin)
    if "json" in config.outputs:
        export_utils.write_profile_json(config.outputs["json"], profile, l, normals, grid.u, family.kind.value)
    logger.info(f"parametrize 완료: {label}, k={profile.k}, l={l}")
    return 0


def _initial_states(config: RunConfig) -> List[FlowState]:
    params = config.parameters
    bc: Optional[BoundaryCondition] = params.get("bc")
    l = params.get("l")
    states: List[FlowState] = []
    for path in config.inputs:
        document = export_utils.read_profile_json(path)
        try:
            states.append(FlowState.from_profile(document.profile(), bc or BoundaryCondition.POS_CONE, l or document.l))
        except ValidationError as e:
            raise ConfigError(f"초기 상태 오류 ({path}): {e.errors()[0]['msg']}")
    if not states:
        name = params.get("fixture") or "sphere"
        state = fixture_state(name, params.get("k", 6), l or settings.DEFAULT_ROTATIONAL_DIVISIONS, bc)
        if bc is not None and state.bc != bc:
            raise ConfigError(f"fixture {name} 는 {state.bc.value} 조건 전용입니다")
        states.append(state)
    return states


def _numbered(path: str, index: int, total: int) -> str:
    if total == 1:
        return path
    target = Path(path)
    return str(target.with_name(f"{target.stem}_{index}{target.suffix}"))


def _write_meshes(trace: FlowTrace, period: float, directory: str, prefix: str) -> None:
    """시작 시각과 period 의 배수에 처음 닿은 스냅샷을 OBJ 로 저장 (파일 번호는 스냅샷 번호)"""
    t0 = trace.times[0]
    slack = 1e-9 * period
    next_time = t0
    for i, (time, state) in enumerate(zip(trace.times, trace.states)):
        if time < next_time - slack:
            continue
        next_time = t0 + period * (math.floor((time - t0 + slack) / period) + 1)
        surface = RevolutionSurface(profile=state.profile(), l=state.l)
        export_utils.write_obj(
            str(Path(directory) / f"{prefix}{i:05d}.obj"),
            surface,
            flow_service.normals(state),
            comment=f"t={trace.times[i]:.17g}",
        )


def run_flow(config: RunConfig) -> int:
    params = config.parameters
    states = _initial_states(config)
    options = {
        "dt": params.get("dt"),
        "stride": params.get("stride"),
        "adaptive": params.get("adaptive", False),
        "geometric_stride": params.get("geometric", False),
        "stop_on_convergence": params.get("stop_on_convergence", True),
        "max_steps": params.get("max_steps"),
    }
    result = batch_worker.run(states, params["t_end"], overrides=config.tolerances, **options)
    if not result.ok:
        index, message = next(iter(result.errors.items()))
        logger.error(f"흐름 실패 (입력 {index}): {message}")
        return 2

    fits = []
    total = len(result.traces)
    for i, trace in enumerate(result.traces):
        export_utils.write_trace_csv(_numbered(config.outputs["trace"], i, total), trace)
        period = params.get("mesh_every", 0.0)
        if period > 0:
            _write_meshes(trace, period, config.outputs["mesh_dir"], f"run{i}_" if total > 1 else "")
        if params.get("fit"):
            fits.append(export_utils.fit_payload(flow_service.fit(trace.final)))
    if fits:
        sys.stdout.write(json.dumps(fits[0] if len(fits) == 1 else fits, indent=2) + "\n")
    return 0


def run_compare(config: RunConfig) -> int:
    params = config.parameters
    report = compare_service.run_compare(
        params["family"],
        upper=params.get("upper"),
        levels=params["levels"],
        grid=config.grid,
    )
    export_utils.write_compare_csv(config.outputs["compare"], report.rows())
    order = "n/a" if report.order is None else f"{report.order:.4f}"
    sys.stdout.write(f"convergence order: {order}\n")
    return 0


def run_check(config: RunConfig) -> int:
    params = config.parameters
    report = check_service.run_check(seed=params["seed"], trials=params["trials"])
    if "report" in config.outputs:
        export_utils.write_json(config.outputs["report"], report.model_dump(mode="json"))
    check_service.raise_on_failure(report)
    return 0


def config_from_args(args) -> RunConfig:
    """argparse 결과를 검증된 RunConfig 로 변환"""
    command = Command(args.command)
    tolerances = parse_tolerance_overrides(args.tol)
    data = {"command": command, "tolerances": tolerances}

    if command in (Command.PARAMETRIZE, Command.COMPARE):
        parameters = {"family": _family_from_args(args)}
        data["grid"] = parse_grid(args.grid) if args.grid else None
        if command == Command.PARAMETRIZE:
            if args.l is not None:
                parameters["l"] = args.l
            outputs = {"obj": args.out}
            if args.csv:
                outputs["csv"] = args.csv
            if args.json:
                outputs["json"] = args.json
        else:
            parameters["levels"] = parse_levels(args.levels)
            parameters["upper"] = args.upper
            outputs = {"compare": args.out}
        data.update(parameters=parameters, outputs=outputs)
    elif command == Command.FLOW:
        try:
            bc = _as_bc(args.bc) if args.bc else None
            if args.unnormalized:
                bc = (bc or BoundaryCondition.POS_CONE).unnormalized()
        except ValueError as e:
            raise ConfigError(str(e))
        if args.mesh_every < 0:
            raise ConfigError("--mesh-every 는 0 이상이어야 합니다")
        data.update(
            parameters={
                "bc": bc,
                "fixture": args.fixture,
                "k": args.k,
                "l": args.l,
                "dt": args.dt,
                "t_end": args.t_end,
                "stride": args.stride,
                "geometric": args.geometric,
                "adaptive": args.adaptive,
                "stop_on_convergence": not args.no_early_stop,
                "max_steps": args.max_steps,
                "mesh_every": args.mesh_every,
                "fit": args.fit,
            },
            inputs=list(args.init),
            outputs={"trace": args.out, "mesh_dir": args.mesh_dir},
        )
    else:
        if args.trials < 0:
            raise ConfigError("--trials 는 0 이상이어야 합니다")
        outputs = {"report": args.report} if args.report else {}
        data.update(parameters={"seed": args.seed, "trials": args.trials}, outputs=outputs)
    return RunConfig.build(**data)


HANDLERS = {
    Command.PARAMETRIZE: run_parametrize,
    Command.FLOW: run_flow,
    Command.COMPARE: run_compare,
    Command.CHECK: run_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    """종료 코드: 0 성공, 1 불변량 위반, 2 오류/설정 오류"""
    args = build_parser().parse_args(argv)
    previous = {}
    try:
        config = config_from_args(args)
        previous = {name: getattr(settings, name) for name in config.tolerances}
        config.apply()
        logger.info(f"{settings.APP_NAME} {settings.APP_VERSION}: {config.command.value}")
        return HANDLERS[config.command](config)
    except SurfaceFlowException as e:
        return handle_surface_flow_exception(e)
    except ValidationError as e:
        logger.error(f"입력 검증 실패: {e.errors()[0]['msg']}")
        return 2
    finally:
        # 덮어쓴 설정 복원
        for name, value in previous.items():
            setattr(settings, name, value)


if __name__ == "__main__":
    sys.exit(main())
