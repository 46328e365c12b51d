import csv
import json
import logging
import os
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ..core.config import settings
from ..core.constants import COMPARE_COLUMNS, CSV_PRECISION, PROFILE_COLUMNS, TRACE_COLUMNS
from ..core.exceptions import ConfigError
from ..schemas.flow import FitReport, FlowTrace
from ..schemas.surface import NormalProfile, ProfileCurve, ProfileDocument, RevolutionSurface
from ..services.flow_service import flow_service
from ..services.surface_service import surface_service

logger = logging.getLogger(__name__)


def resolve_output_path(path: str) -> Path:
    """상대 경로는 OUTPUT_DIR 기준으로 해석하고 상위 디렉토리를 만듭니다"""
    target = Path(path)
    if not target.is_absolute() and settings.OUTPUT_DIR:
        target = Path(settings.OUTPUT_DIR) / target
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"출력 디렉토리를 만들 수 없습니다: {target.parent} ({e})")
    if target.exists() and not os.access(target, os.W_OK):
        raise ConfigError(f"쓸 수 없는 경로: {target}")
    return target


def format_number(value) -> str:
    """CSV 용 17 자리 유효숫자"""
    if value is None or value == "":
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.{CSV_PRECISION}g}"


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    target = resolve_output_path(path)
    with open(target, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        count = 0
        for row in rows:
            writer.writerow([format_number(v) for v in row])
            count += 1
    logger.info(f"CSV 저장: {target} ({count} rows)")
    return target


def profile_rows(profile: ProfileCurve, normals: NormalProfile, u: Optional[Sequence[float]] = None, origin: int = 0):
    """n, u_n, f, h, a, b"""
    for j in range(profile.k + 1):
        yield (
            j - origin,
            u[j] if u is not None else "",
            profile.f[j],
            profile.h[j],
            normals.a[j],
            normals.b[j],
        )


def write_profile_csv(path: str, profile: ProfileCurve, normals: NormalProfile, u=None, origin: int = 0) -> Path:
    return write_csv(path, PROFILE_COLUMNS, profile_rows(profile, normals, u, origin))


def trace_rows(trace: FlowTrace):
    """t, n, f, h, a, b, K, H, A, r (꼭대기 꼭짓점 n = k 에는 층 값이 없음)"""
    for time, state, r in zip(trace.times, trace.states, trace.r_history):
        geo = flow_service.geometry(state)
        h = state.heights()
        for n in range(state.k + 1):
            layer = n < state.k
            yield (
                time,
                n,
                state.f[n],
                h[n],
                geo["a"][n],
                geo["b"][n],
                geo["K"][n] if layer else "",
                geo["H"][n] if layer else "",
                geo["area"][n] if layer else "",
                r,
            )


def write_trace_csv(path: str, trace: FlowTrace) -> Path:
    return write_csv(path, TRACE_COLUMNS, trace_rows(trace))


def write_compare_csv(path: str, rows) -> Path:
    return write_csv(path, COMPARE_COLUMNS, rows)


def export_obj(surface: RevolutionSurface, normals: Optional[NormalProfile] = None, comment: str = "") -> str:
    """
    OBJ 텍스트 (꼭짓점은 m 우선 순서)
    원뿔 꼭짓점은 하나의 정점으로 합치고 맨 위 층은 삼각형으로 씁니다.
    법선이 주어지면 정점마다 vn 을 쓰고, 원뿔 꼭짓점에서는 m 별 법선 ν(m,k) 를 씁니다.
    """
    grid = surface_service.build_vertices(surface)
    l, rows = grid.shape[0], grid.shape[1]
    k = rows - 1
    tip = surface.has_cone_tip
    ring = k if tip else k + 1

    lines: List[str] = ["# obj export"]
    if comment:
        lines.append(f"# {comment}")
    lines.append("o surface")

    def vid(m: int, n: int) -> int:
        if tip and n == k:
            return l * k + 1
        return (m % l) * ring + n + 1

    for m in range(l):
        for n in range(ring):
            lines.append("v %.17g %.17g %.17g" % tuple(grid[m, n]))
    if tip:
        lines.append("v %.17g %.17g %.17g" % tuple(grid[0, k]))

    normal_grid = None
    if normals is not None:
        normal_grid = surface_service.build_normals(surface, normals)
        for m in range(l):
            for n in range(ring):
                lines.append("vn %.17g %.17g %.17g" % tuple(normal_grid[m, n]))
        if tip:
            for m in range(l):
                lines.append("vn %.17g %.17g %.17g" % tuple(normal_grid[m, k]))

    def nid(m: int, n: int) -> int:
        if tip and n == k:
            return l * ring + (m % l) + 1
        return (m % l) * ring + n + 1

    def corner(m: int, n: int) -> str:
        if normal_grid is None:
            return str(vid(m, n))
        return f"{vid(m, n)}//{nid(m, n)}"

    for m in range(l):
        for n in range(k):
            if tip and n == k - 1:
                lines.append(f"f {corner(m, n)} {corner(m + 1, n)} {corner(m, k)}")
            else:
                lines.append(
                    f"f {corner(m, n)} {corner(m + 1, n)} {corner(m + 1, n + 1)} {corner(m, n + 1)}"
                )
    return "\n".join(lines) + "\n"


def write_obj(path: str, surface: RevolutionSurface, normals: Optional[NormalProfile] = None, comment: str = "") -> Path:
    target = resolve_output_path(path)
    target.write_text(export_obj(surface, normals, comment), encoding="utf-8")
    logger.info(f"OBJ 저장: {target}")
    return target


def write_profile_json(
    path: str,
    profile: ProfileCurve,
    l: int,
    normals: Optional[NormalProfile] = None,
    u=None,
    family: Optional[str] = None,
) -> Path:
    document = ProfileDocument.from_models(profile, l, normals, u, family)
    target = resolve_output_path(path)
    target.write_text(document.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"JSON 저장: {target}")
    return target


def read_profile_json(path: str) -> ProfileDocument:
    target = Path(path)
    if not target.is_absolute() and settings.OUTPUT_DIR and not target.exists():
        target = Path(settings.OUTPUT_DIR) / target
    try:
        raw = target.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"프로파일 파일을 읽을 수 없습니다: {path} ({e})")
    try:
        return ProfileDocument.model_validate_json(raw)
    except ValueError as e:
        raise ConfigError(f"프로파일 JSON 이 올바르지 않습니다: {path} ({e})")


def fit_payload(report: FitReport) -> dict:
    """{c, p 또는 q, u, h_err}"""
    payload = {"family": report.family, "c": report.c}
    if report.p is not None:
        payload["p"] = report.p
    if report.q is not None:
        payload["q"] = report.q
    payload["u"] = list(report.u)
    payload["h_err"] = report.h_err
    payload["K_spread"] = report.K_spread
    return payload


def write_json(path: str, payload: dict) -> Path:
    target = resolve_output_path(path)
    target.write_text(json.dumps(payload, indent=2, sort_keys=False), encoding="utf-8")
    logger.info(f"JSON 저장: {target}")
    return target
