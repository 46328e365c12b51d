import ast
import math
import re
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..core.exceptions import ConfigError
from ..schemas.family import SampleGrid

# 격자 식에서 허용하는 함수와 상수
_FUNCTIONS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "asin": math.asin,
    "acos": math.acos,
    "atan": math.atan,
    "arcsin": math.asin,
    "arccos": math.acos,
    "arctan": math.atan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "asinh": math.asinh,
    "acosh": math.acosh,
    "atanh": math.atanh,
    "arcsinh": math.asinh,
    "arccosh": math.acosh,
    "arctanh": math.atanh,
    "sqrt": math.sqrt,
    "log": math.log,
    "exp": math.exp,
    "abs": abs,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}

_BINARY = {
    ast.Add: lambda x, y: x + y,
    ast.Sub: lambda x, y: x - y,
    ast.Mult: lambda x, y: x * y,
    ast.Div: lambda x, y: x / y,
    ast.Pow: lambda x, y: x ** y,
}
_UNARY = {
    ast.USub: lambda x: -x,
    ast.UAdd: lambda x: x,
}

_CALL_PATTERN = re.compile(r"^\s*(linspace|expr)\s*\((.*)\)\s*$", re.DOTALL)
_TOLERANCE_PATTERN = re.compile(r"^\s*([A-Z_][A-Z0-9_]*)\s*=\s*(\S+)\s*$")


def _evaluate(node: ast.AST, variables: Dict[str, float]) -> float:
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, variables)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in variables:
            return variables[node.id]
        if node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        raise ConfigError(f"알 수 없는 이름: {node.id}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        return _BINARY[type(node.op)](_evaluate(node.left, variables), _evaluate(node.right, variables))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
        return _UNARY[type(node.op)](_evaluate(node.operand, variables))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS:
        if node.keywords:
            raise ConfigError(f"키워드 인자는 지원하지 않습니다: {node.func.id}")
        args = [_evaluate(arg, variables) for arg in node.args]
        return float(_FUNCTIONS[node.func.id](*args))
    raise ConfigError(f"허용되지 않는 식 요소: {ast.dump(node)[:60]}")


def evaluate_expression(text: str, n: Optional[float] = None) -> float:
    """산술 식 계산 (n 은 선택적 변수)"""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as e:
        raise ConfigError(f"식을 해석할 수 없습니다: {text!r} ({e.msg})")
    variables = {} if n is None else {"n": float(n)}
    try:
        return _evaluate(tree, variables)
    except (ValueError, ZeroDivisionError, OverflowError, TypeError) as e:
        raise ConfigError(f"식 계산 실패: {text!r} ({e})")


def _split_arguments(body: str) -> List[str]:
    """최상위 쉼표로 인자를 나눔 (괄호 안의 쉼표는 유지)"""
    parts, depth, current = [], 0, []
    for ch in body:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return [p.strip() for p in parts if p.strip()]


def _as_int(text: str, what: str) -> int:
    value = evaluate_expression(text)
    if value != int(value):
        raise ConfigError(f"{what} 는 정수여야 합니다: {text}")
    return int(value)


def parse_grid(text: str) -> SampleGrid:
    """
    격자 문자열을 SampleGrid 로 변환
      [u0, u1, ...]              명시적 목록, n = 0 은 첫 원소
      linspace(a, b, M)          M 구간 (M+1 개 점)
      expr(<n 의 식>, n_min, n_max)  n = n_min..n_max, n = 0 이 원점
    """
    if text is None or not text.strip():
        raise ConfigError("격자 식이 비어 있습니다")
    text = text.strip()

    if text.startswith("[") and text.endswith("]"):
        values = [evaluate_expression(item) for item in _split_arguments(text[1:-1])]
        origin = 0
    else:
        match = _CALL_PATTERN.match(text)
        if not match:
            raise ConfigError(f"지원하지 않는 격자 형식: {text!r}")
        kind, body = match.group(1), match.group(2)
        args = _split_arguments(body)
        if kind == "linspace":
            if len(args) != 3:
                raise ConfigError("linspace(a, b, M) 형식이어야 합니다")
            start, stop = evaluate_expression(args[0]), evaluate_expression(args[1])
            steps = _as_int(args[2], "M")
            if steps < 1:
                raise ConfigError(f"M >= 1 이어야 합니다: {steps}")
            values = list(np.linspace(start, stop, steps + 1))
            origin = 0
        else:
            if len(args) == 2:
                args = [args[0], "0", args[1]]
            if len(args) != 3:
                raise ConfigError("expr(<식>, n_min, n_max) 형식이어야 합니다")
            n_min = _as_int(args[1], "n_min")
            n_max = _as_int(args[2], "n_max")
            if not n_min <= 0 <= n_max:
                raise ConfigError(f"n_min <= 0 <= n_max 이어야 합니다: {n_min}, {n_max}")
            values = [evaluate_expression(args[0], n) for n in range(n_min, n_max + 1)]
            origin = -n_min

    ok, message = validate_grid_values(values)
    if not ok:
        raise ConfigError(message)
    return SampleGrid(u=tuple(float(v) for v in values), origin=origin)


def validate_grid_values(values: List[float]) -> Tuple[bool, Optional[str]]:
    """격자 값 검증 (유한, 순단조)"""
    if not values:
        return False, "격자가 비어 있습니다"
    if not all(math.isfinite(v) for v in values):
        return False, "격자에 유한하지 않은 값이 있습니다"
    steps = np.diff(np.asarray(values, dtype=float))
    if len(steps) and not (np.all(steps > 0) or np.all(steps < 0)):
        return False, "격자는 순단조여야 합니다"
    return True, None


def parse_tolerance_overrides(items: Optional[List[str]]) -> Dict[str, float]:
    """'NAME=VALUE' 목록을 설정 덮어쓰기 딕셔너리로 변환"""
    overrides: Dict[str, float] = {}
    for item in items or []:
        match = _TOLERANCE_PATTERN.match(item)
        if not match:
            raise ConfigError(f"허용 오차 형식은 NAME=VALUE 이어야 합니다: {item!r}")
        name, raw = match.group(1), match.group(2)
        try:
            overrides[name] = float(raw)
        except ValueError:
            raise ConfigError(f"허용 오차 값이 숫자가 아닙니다: {item!r}")
    return overrides


def parse_levels(text: str) -> Tuple[int, ...]:
    """'8,16,32,64' 형식의 세분 단계"""
    try:
        levels = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"세분 단계는 정수 목록이어야 합니다: {text!r}")
    if len(levels) < 2 or any(m < 1 for m in levels):
        raise ConfigError(f"두 개 이상의 양의 세분 단계가 필요합니다: {text!r}")
    return levels
