import math
import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from ..core.config import settings
from ..core.exceptions import (
    DegenerateBandException,
    DivisionByZeroException,
    DomainViolationException,
    DegenerateStepException,
    FitDomainException,
    SingularJacobianException,
    StepFailureException,
    ZeroEdgeException,
)
from ..schemas.family import CgcFamily, FamilyKind
from ..schemas.flow import BoundaryCondition, FitReport, FlowState, FlowTrace
from ..schemas.surface import NormalProfile
from .cgc_service import cgc_service
from .surface_service import layer_geometry, reflect_normals

logger = logging.getLogger(__name__)

# 맞춤 전에 경고할 종단 곡률 폭
_FIT_SPREAD_WARNING = 1e-6
# 적응형 스텝이 이보다 작아지면 중단
_MIN_ADAPTIVE_DT = 1e-14
# 음의 실축 위 RK4 안정 구간 |λh| <= 2.785
_RK4_STABILITY_LIMIT = 2.785
# 부호 비교에서 0 으로 보는 법선 성분
_ORIENTATION_FLOOR = 1e-9


def _geometry(x: np.ndarray, k: int, l: int, a0: float, b0: float) -> Dict[str, np.ndarray]:
    f = x[: k + 1]
    dh = x[k + 1:]
    a, b = reflect_normals(f, dh, a0, b0)
    geo = layer_geometry(f, dh, a, b, l)
    geo["a"] = a
    geo["b"] = b
    return geo


def _mean_curvature_weight(geo: Dict[str, np.ndarray]) -> float:
    """r = Σ 2K A / Σ A"""
    area = geo["area"]
    return float(2.0 * np.sum(geo["K"] * area) / np.sum(area))


def _normal_gradient(x: np.ndarray, k: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    반사 점화식의 연쇄 법칙으로 dν(k)/dX (2 x (2k+1))
    dν(n+1) = R dν(n) + M de,  R = I - 2ee^T/q,  M = -2(eν^T + sI)/q + 4s ee^T/q^2
    """
    dim = 2 * k + 1
    f = x[: k + 1]
    dh = x[k + 1:]
    D = np.zeros((2, dim))
    eye = np.eye(2)
    for n in range(k):
        e = np.array([f[n + 1] - f[n], dh[n]])
        nu = np.array([a[n], b[n]])
        q = float(e @ e)
        s = float(nu @ e)
        R = eye - 2.0 * np.outer(e, e) / q
        M = -2.0 * (np.outer(e, nu) + s * eye) / q + 4.0 * s * np.outer(e, e) / (q * q)
        De = np.zeros((2, dim))
        De[0, n + 1] = 1.0
        De[0, n] = -1.0
        De[1, k + 1 + n] = 1.0
        D = R @ D + M @ De
    return D


def _constraint_map(x: np.ndarray, k: int, l: int, a0: float, b0: float, bc: BoundaryCondition) -> np.ndarray:
    """X -> (g11(0..k-1), g22(0..k-1), 고정 조건)"""
    f = x[: k + 1]
    dh = x[k + 1:]
    cos2 = math.cos(math.pi / l) ** 2
    sin2 = math.sin(math.pi / l) ** 2
    g11 = np.diff(f) ** 2 * cos2 + dh ** 2
    g22 = (f[1:] + f[:-1]) ** 2 * sin2
    if bc.is_cone:
        pinned = f[k]
    else:
        a, _ = reflect_normals(f, dh, a0, b0)
        pinned = a[k]
    return np.concatenate([g11, g22, [pinned]])


def _jacobian(x: np.ndarray, k: int, l: int, bc: BoundaryCondition, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dim = 2 * k + 1
    f = x[: k + 1]
    dh = x[k + 1:]
    cos2 = math.cos(math.pi / l) ** 2
    sin2 = math.sin(math.pi / l) ** 2
    df = np.diff(f)
    sf = f[1:] + f[:-1]

    J = np.zeros((dim, dim))
    rows = np.arange(k)
    J[rows, rows] = -2.0 * df * cos2
    J[rows, rows + 1] = 2.0 * df * cos2
    J[rows, k + 1 + rows] = 2.0 * dh
    J[k + rows, rows] = 2.0 * sf * sin2
    J[k + rows, rows + 1] = 2.0 * sf * sin2
    if bc.is_cone:
        J[2 * k, k] = 1.0
    else:
        # b(k) = ±1 은 b(k) 의 임계점이므로 같은 조건 a(k) = 0 의 기울기를 사용
        J[2 * k] = _normal_gradient(x, k, a, b)[0]
    return J


def _rk4(F: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float) -> np.ndarray:
    k1 = F(x)
    k2 = F(x + 0.5 * h * k1)
    k3 = F(x + 0.5 * h * k2)
    k4 = F(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _spectral_radius(F: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> float:
    """전진 차분으로 만든 dF/dX 의 고윳값 절댓값 최대"""
    fx = F(x)
    eps = 1e-7 * max(float(np.linalg.norm(x)), 1e-300)
    J = np.empty((len(x), len(x)))
    for j in range(len(x)):
        xp = x.copy()
        xp[j] += eps
        J[:, j] = (F(xp) - fx) / eps
    return float(np.max(np.abs(np.linalg.eigvals(J))))


def _stable_step(F: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> float:
    """안정 구간에 배율을 곱한 RK4 스텝 상한"""
    rho = _spectral_radius(F, x)
    return settings.STABILITY_SAFETY * _RK4_STABILITY_LIMIT / rho if rho > 0 else math.inf


def _orientation(x: np.ndarray, k: int, a0: float, b0: float) -> Tuple[np.ndarray, np.ndarray]:
    """Δh(n) 와 a(n) 의 부호 (0 근처 성분은 0)"""
    dh = x[k + 1:]
    a, _ = reflect_normals(x[: k + 1], dh, a0, b0)
    a_sign = np.where(np.abs(a) > _ORIENTATION_FLOOR, np.sign(a), 0.0)
    return np.sign(dh), a_sign


class RicciFlowService:
    """이산 회전면 위의 (정규화) 리치 흐름 초기값 문제"""

    # ---- 상태에서 유도되는 양 ----

    @staticmethod
    def normals(state: FlowState) -> NormalProfile:
        a, b = reflect_normals(np.asarray(state.f), np.asarray(state.dh), *state.a0b0)
        return NormalProfile(a=tuple(a), b=tuple(b))

    @staticmethod
    def heights(state: FlowState) -> np.ndarray:
        return state.heights()

    @staticmethod
    def geometry(state: FlowState) -> Dict[str, np.ndarray]:
        """층별 g11, g22, K, H, A 와 법선 a, b"""
        return _geometry(state.vector(), state.k, state.l, *state.a0b0)

    def r_of_t(self, state: FlowState) -> float:
        """r(t) = Σ 2K(i) A(x)(i) / Σ A(x)(i)"""
        return _mean_curvature_weight(self.geometry(state))

    @staticmethod
    def scaled(state: FlowState, factor: float) -> FlowState:
        """(f, Δh) 를 λ 배, 시간을 λ^2 배"""
        if factor <= 0:
            raise DomainViolationException(f"배율은 양수여야 합니다: {factor}")
        return state.with_vector(factor * state.vector(), t=state.t * factor * factor)

    # ---- 야코비안과 우변 ----

    def constraint_map(self, state: FlowState) -> np.ndarray:
        return _constraint_map(state.vector(), state.k, state.l, *state.a0b0, state.bc)

    def jacobian(self, state: FlowState) -> np.ndarray:
        """해석적 야코비안 ∂(g11, g22, 고정 조건)/∂X"""
        geo = self.geometry(state)
        return _jacobian(state.vector(), state.k, state.l, state.bc, geo["a"], geo["b"])

    def finite_difference_jacobian(self, state: FlowState, step: Optional[float] = None) -> np.ndarray:
        """중앙 차분 야코비안 (검증용)"""
        x = state.vector()
        k = state.k
        scale = max(1.0, float(np.max(np.abs(x))))
        h = (step if step is not None else settings.FD_JACOBIAN_STEP) * scale
        J = np.empty((len(x), len(x)))
        for j in range(len(x)):
            xp = x.copy()
            xm = x.copy()
            xp[j] += h
            xm[j] -= h
            gp = _constraint_map(xp, k, state.l, *state.a0b0, state.bc)
            gm = _constraint_map(xm, k, state.l, *state.a0b0, state.bc)
            J[:, j] = (gp - gm) / (2.0 * h)
        return J

    @staticmethod
    def _rhs_vector(x: np.ndarray, k: int, l: int, a0: float, b0: float, bc: BoundaryCondition) -> np.ndarray:
        geo = _geometry(x, k, l, a0, b0)
        r = _mean_curvature_weight(geo) if bc.normalized else 0.0
        factor = r - 2.0 * geo["K"]
        rhs = np.concatenate([factor * geo["g11"], factor * geo["g22"], [0.0]])

        J = _jacobian(x, k, l, bc, geo["a"], geo["b"])
        condition = float(np.linalg.cond(J))
        if not np.isfinite(condition) or condition > settings.JACOBIAN_CONDITION_LIMIT:
            raise SingularJacobianException(
                f"흐름 방향이 결정되지 않는 배치입니다 (bc={bc.value})",
                condition=condition,
                code="singular_jacobian",
            )
        return np.linalg.solve(J, rhs)

    def rhs_generic(self, state: FlowState) -> np.ndarray:
        """J dX/dt = ((r - 2K) g11, (r - 2K) g22, 0) 의 해; 비정규화 흐름은 r = 0"""
        return self._rhs_vector(state.vector(), state.k, state.l, *state.a0b0, state.bc)

    def rhs_explicit(self, state: FlowState, as_printed: bool = False) -> np.ndarray:
        """
        원뿔 조건 흐름의 명시적 우변
        df(n)/dt = φ(n) f(n) + Σ_{i=1}^{k-n-1} (-1)^{i-1} f(n+i)(K(n+i) - K(n+i-1)),  φ = (r - 2K)/2
        dΔh(n)/dt = φ(n) Δh(n) + Σ 2(-1)^{i-1} f(n+i) (Δf(n)/Δh(n)) (K(n+i) - K(n+i-1)) cos²(π/l)

        as_printed=True 이면 Δh 합의 부호로 (-1)^i 를 사용합니다.
        """
        if not state.bc.is_cone:
            raise ValueError(f"원뿔 조건에서만 정의됩니다: {state.bc.value}")
        k = state.k
        f = np.asarray(state.f, dtype=float)
        dh = np.asarray(state.dh, dtype=float)
        if np.any(dh == 0.0):
            n = int(np.flatnonzero(dh == 0.0)[0])
            raise DivisionByZeroException(f"Δh(n) = 0 인 층: n={n}", code="division_by_zero")

        geo = self.geometry(state)
        K = geo["K"]
        r = _mean_curvature_weight(geo) if state.bc.normalized else 0.0
        phi = 0.5 * (r - 2.0 * K)
        cos2 = math.cos(math.pi / state.l) ** 2
        df = np.diff(f)

        f_dot = np.zeros(k + 1)
        dh_dot = np.zeros(k)
        sign_shift = 0 if as_printed else 1
        for n in range(k):
            tail = 0.0
            tail_h = 0.0
            for i in range(1, k - n):
                jump = f[n + i] * (K[n + i] - K[n + i - 1])
                tail += (-1) ** (i - 1) * jump
                tail_h += (-1) ** (i - sign_shift) * jump
            f_dot[n] = phi[n] * f[n] + tail
            dh_dot[n] = phi[n] * dh[n] + 2.0 * tail_h * df[n] / dh[n] * cos2
        return np.concatenate([f_dot, dh_dot])

    # ---- 고정 조건 재투영 ----

    @staticmethod
    def _project(
        x: np.ndarray,
        k: int,
        a0: float,
        b0: float,
        bc: BoundaryCondition,
    ) -> Tuple[np.ndarray, float]:
        """(보정된 상태, 보정 전 잔차); 첨점 조건은 Δh(k-1) 에 대한 뉴턴 1회"""
        x = np.array(x, dtype=float)
        if bc.is_cone:
            residual = abs(float(x[k]))
            x[k] = 0.0
            return x, residual

        f = x[: k + 1]
        dh = x[k + 1:]
        a, b = reflect_normals(f, dh, a0, b0)
        residual = abs(float(a[k]))
        if residual > settings.CONSTRAINT_TOLERANCE:
            df = f[k] - f[k - 1]
            d = dh[k - 1]
            q = df * df + d * d
            s = a[k - 1] * df + b[k - 1] * d
            slope = -2.0 * df * (b[k - 1] * q - 2.0 * s * d) / (q * q)
            if slope != 0.0:
                x[2 * k] = d - a[k] / slope
                a, b = reflect_normals(x[: k + 1], x[k + 1:], a0, b0)
            else:
                logger.warning(f"a(k) 보정 불가 (기울기 0), residual={residual:.3e}")
        if b[k] * bc.pinned_b <= 0:
            raise DomainViolationException(
                f"b(k) 의 부호가 고정값 {bc.pinned_b:+.0f} 과 다릅니다: b(k)={b[k]:.6g}",
                code="pinned_sign",
            )
        return x, residual

    @staticmethod
    def _restore_area(
        x: np.ndarray,
        k: int,
        l: int,
        a0: float,
        b0: float,
        target: float,
    ) -> Tuple[np.ndarray, float]:
        """
        균일 배율로 ΣA 를 target 에 맞춤 (보정된 상태, 보정 전 상대 면적 오차)
        배율은 f(k) = 0 과 a(k) = 0 을 그대로 둡니다.
        """
        area = float(np.sum(_geometry(x, k, l, a0, b0)["area"]))
        defect = (area - target) / target
        return x * math.sqrt(target / area), defect

    def project(self, state: FlowState) -> Tuple[FlowState, float]:
        x, residual = self._project(state.vector(), state.k, *state.a0b0, state.bc)
        return state.with_vector(x), residual

    def pinned_residual(self, state: FlowState) -> float:
        """|f(k)| 또는 |b(k) - (±1)|"""
        if state.bc.is_cone:
            return abs(state.f[-1])
        normals = self.normals(state)
        return abs(normals.b[-1] - state.bc.pinned_b)

    # ---- 적분 ----

    @staticmethod
    def _check_breakdown(x: np.ndarray, k: int, t: float) -> None:
        f = x[: k + 1]
        if np.any(f < 0.0):
            n = int(np.flatnonzero(f < 0.0)[0])
            logger.error(f"f(n) < 0 로 면이 퇴화: n={n}, t={t:.6g}")
            raise StepFailureException(f"f({n}) = {f[n]:.3e} < 0", time=t, code="negative_radius")
        q = np.diff(f) ** 2 + x[k + 1:] ** 2
        if np.any(q == 0.0):
            n = int(np.flatnonzero(q == 0.0)[0])
            logger.error(f"길이 0 인 변: n={n}, t={t:.6g}")
            raise StepFailureException(f"길이 0 인 변: n={n}", time=t, code="zero_edge")

    def integrate(
        self,
        initial: FlowState,
        t_end: float,
        dt: Optional[float] = None,
        stride: Optional[int] = None,
        adaptive: bool = False,
        geometric_stride: bool = False,
        stop_on_convergence: bool = True,
        max_steps: Optional[int] = None,
    ) -> FlowTrace:
        """
        RK4 (선택적으로 스텝 반감 적응형) 로 X(t) 를 적분합니다.
        한 스텝 dt 는 선형화 우변의 스펙트럼 반지름으로 정한 안정 한계 안에서
        같은 크기의 부분 스텝으로 나누므로 스냅샷 시각은 dt 격자 위에 남습니다.
        매 스텝 고정 조건을 재투영하고, 정규화 흐름은 ΣA 를 초기값으로 되돌립니다.
        Δh(n) 나 a(n) 의 부호가 초기 상태와 달라진 상태는 수렴으로 세지 않습니다.
        """
        dt = settings.FLOW_DT if dt is None else dt
        stride = settings.FLOW_STRIDE if stride is None else stride
        if dt <= 0:
            raise DomainViolationException(f"dt > 0 이어야 합니다: {dt}")
        if stride < 1:
            raise DomainViolationException(f"stride >= 1 이어야 합니다: {stride}")

        k, l, bc = initial.k, initial.l, initial.bc
        a0, b0 = initial.a0b0

        def F(y: np.ndarray) -> np.ndarray:
            return self._rhs_vector(y, k, l, a0, b0, bc)

        x, residual = self._project(initial.vector(), k, a0, b0, bc)
        if residual > settings.CONSTRAINT_TOLERANCE:
            logger.warning(f"초기 상태의 고정 조건 잔차 {residual:.3e} 를 보정했습니다")
        t = initial.t
        restore_area = bc.normalized and settings.RESTORE_AREA
        area_target = float(np.sum(_geometry(x, k, l, a0, b0)["area"]))
        dh_sign0, a_sign0 = _orientation(x, k, a0, b0)

        times: List[float] = []
        states: List[FlowState] = []
        curvatures: List[Tuple[float, ...]] = []
        areas: List[float] = []
        r_values: List[float] = []
        residuals: List[float] = []
        defects: List[float] = []
        streak = 0
        converged = False
        fold_logged = False

        def record(y: np.ndarray, time: float, res: float, defect: float) -> float:
            geo = _geometry(y, k, l, a0, b0)
            r = _mean_curvature_weight(geo)
            times.append(time)
            states.append(initial.with_vector(y, t=time))
            curvatures.append(tuple(float(v) for v in geo["K"]))
            areas.append(float(np.sum(geo["area"])))
            r_values.append(r)
            residuals.append(res)
            defects.append(defect)
            return float(np.max(np.abs(geo["K"] - 0.5 * r)))

        def folded(y: np.ndarray) -> bool:
            dh_sign, a_sign = _orientation(y, k, a0, b0)
            return bool(np.any(dh_sign * dh_sign0 < 0) or np.any(a_sign * a_sign0 < 0))

        record(x, t, residual, 0.0)
        logger.info(f"Flow start: bc={bc.value}, k={k}, l={l}, t_end={t_end}, dt={dt}, adaptive={adaptive}")

        step = 0
        next_geometric = 1
        h_next = dt
        h_stable = math.inf
        defect = 0.0
        stop_reason = "t_end"
        end_guard = 1e-12 * max(1.0, abs(t_end))
        last_recorded = 0

        while t < t_end - end_guard:
            h = min(h_next, t_end - t)
            try:
                if step % settings.STABILITY_INTERVAL == 0:
                    h_stable = _stable_step(F, x)
                if adaptive:
                    x_new, h_used, h_next = self._adaptive_step(F, x, min(h, h_stable), dt, t)
                else:
                    x_new, h_stable = self._split_step(F, x, h, h_stable)
                    h_used = h
            except (ZeroEdgeException, DegenerateBandException) as e:
                logger.error(f"적분 중 면 퇴화: {e.message} (t={t:.6g})")
                raise StepFailureException(e.message, time=t, code=e.code)

            t += h_used
            step += 1
            try:
                x, residual = self._project(x_new, k, a0, b0, bc)
            except (DomainViolationException, ZeroEdgeException) as e:
                raise StepFailureException(e.message, time=t, code=e.code)
            if restore_area:
                x, defect = self._restore_area(x, k, l, a0, b0, area_target)
            self._check_breakdown(x, k, t)

            if geometric_stride:
                due = step >= next_geometric
                if due:
                    next_geometric *= 2
            else:
                due = step % stride == 0
            at_end = t >= t_end - end_guard
            out_of_steps = max_steps is not None and step >= max_steps

            if due or at_end or out_of_steps:
                deviation = record(x, t, residual, defect)
                last_recorded = step
                unfolded = not folded(x)
                if not unfolded and not fold_logged:
                    logger.warning(f"Δh(n) 또는 a(n) 의 부호가 초기 상태와 달라졌습니다: t={t:.6g}")
                    fold_logged = True
                if bc.normalized and unfolded and deviation < settings.CONVERGENCE_TOLERANCE:
                    streak += 1
                else:
                    streak = 0
                if bc.normalized and streak >= settings.CONVERGENCE_WINDOW:
                    converged = True
                    if stop_on_convergence:
                        stop_reason = "converged"
                        logger.info(f"수렴 조건 충족으로 조기 종료: t={t:.6g}, step={step}")
                        break
            if out_of_steps:
                stop_reason = "max_steps"
                logger.warning(f"max_steps={max_steps} 에 도달해 중단: t={t:.6g}")
                break

        if last_recorded != step:
            record(x, t, residual, defect)

        trace = FlowTrace(
            times=tuple(times),
            states=tuple(states),
            K_history=tuple(curvatures),
            area_history=tuple(areas),
            r_history=tuple(r_values),
            constraint_residuals=tuple(residuals),
            area_defects=tuple(defects),
            converged=converged,
            steps=step,
            stop_reason=stop_reason,
        )
        logger.info(
            f"Flow end: t={t:.6g}, steps={step}, snapshots={len(times)}, "
            f"reason={stop_reason}, area drift={trace.relative_area_drift():.3e}"
        )
        return trace

    @staticmethod
    def _split_step(
        F: Callable[[np.ndarray], np.ndarray],
        x: np.ndarray,
        h: float,
        h_stable: float,
    ) -> Tuple[np.ndarray, float]:
        """
        h 를 h_stable 이하의 같은 부분 스텝으로 나눠 RK4 진행 (진행 후 x, 갱신된 상한)
        부분 스텝이 STABILITY_INTERVAL 개를 넘으면 상한을 다시 추정하고 남은 구간을 다시 나눕니다.
        """
        interval = settings.STABILITY_INTERVAL
        remaining = h
        while True:
            substeps = max(1, math.ceil(remaining / h_stable))
            sub = remaining / substeps
            for _ in range(min(substeps, interval)):
                x = _rk4(F, x, sub)
            if substeps <= interval:
                return x, h_stable
            remaining = sub * (substeps - interval)
            h_stable = _stable_step(F, x)

    @staticmethod
    def _adaptive_step(
        F: Callable[[np.ndarray], np.ndarray],
        x: np.ndarray,
        h: float,
        h_max: float,
        t: float,
    ) -> Tuple[np.ndarray, float, float]:
        """스텝 반감: 한 번의 h 스텝과 두 번의 h/2 스텝 차이로 국소 오차 추정"""
        tol = settings.ADAPTIVE_TOLERANCE
        while True:
            full = _rk4(F, x, h)
            half = _rk4(F, _rk4(F, x, 0.5 * h), 0.5 * h)
            scale = max(1.0, float(np.max(np.abs(x))))
            error = float(np.max(np.abs(half - full))) / 15.0 / scale
            if error <= tol:
                grow = 2.0 * h if error < tol / 32.0 else h
                return half, h, min(grow, h_max)
            h *= 0.5
            if h < _MIN_ADAPTIVE_DT:
                raise StepFailureException(f"적응형 스텝이 {h:.3e} 까지 줄었습니다", time=t, code="step_underflow")

    # ---- CGC 맞춤 ----

    def _terminal_curvature(self, state: FlowState) -> Tuple[float, float]:
        geo = self.geometry(state)
        K = geo["K"]
        area = geo["area"]
        c = float(np.sum(K * area) / np.sum(area))
        spread = float(np.max(K) - np.min(K))
        if spread > _FIT_SPREAD_WARNING:
            logger.warning(f"종단 곡률 폭이 큽니다: {spread:.3e}")
        return c, spread

    @staticmethod
    def _ratio(values: np.ndarray, lower: float, upper: float, what: str) -> np.ndarray:
        tol = settings.SQRT_CLAMP_TOLERANCE
        if np.any(values < lower - tol) or np.any(values > upper + tol):
            raise FitDomainException(f"{what} 이 [{lower}, {upper}] 를 벗어났습니다", code="fit_domain")
        return np.clip(values, lower, upper)

    def fit_cgc(self, state: FlowState) -> FitReport:
        """p cos(√c u_n) = f(n) 이 되도록 u_n 을 정하고 닫힌 형식 높이와 비교"""
        bc = state.bc
        if bc not in (
            BoundaryCondition.POS_CONE,
            BoundaryCondition.POS_CUSP,
            BoundaryCondition.UNNORMALIZED_POS_CONE,
            BoundaryCondition.UNNORMALIZED_POS_CUSP,
        ):
            raise FitDomainException(f"양의 곡률 맞춤은 양의 조건에서만 가능합니다: {bc.value}")
        c, spread = self._terminal_curvature(state)
        if c <= 0:
            raise FitDomainException(f"평균 곡률이 양수가 아닙니다: c={c:.6g}", code="fit_domain")

        f = np.asarray(state.f, dtype=float)
        p = float(f[0])
        if p <= 0:
            raise FitDomainException("f(0) > 0 이어야 합니다", code="fit_domain")
        u = np.arccos(self._ratio(f / p, -1.0, 1.0, "f(n)/p")) / math.sqrt(c)
        try:
            _, h_pred, _, _ = cgc_service.positive_arrays(p, c, u)
        except (DomainViolationException, DegenerateStepException) as e:
            raise FitDomainException(e.message, code="fit_domain")
        h = state.heights()
        h_err = float(np.max(np.abs(h_pred - h)))
        logger.info(f"fit_cgc: c={c:.13g}, p={p:.13g}, h_err={h_err:.3e}")
        return FitReport(
            family=FamilyKind.SPHERE_POSITIVE.value,
            c=c,
            p=p,
            u=tuple(u),
            h_pred=tuple(h_pred),
            h_err=h_err,
            K_spread=spread,
        )

    def negative_fit(self, state: FlowState) -> FitReport:
        """NegCusp 는 cosh 형, NegCone 은 sinh 형 계열과 비교"""
        c, spread = self._terminal_curvature(state)
        if c >= 0:
            raise FitDomainException(f"평균 곡률이 음수가 아닙니다: c={c:.6g}", code="fit_domain")
        kappa = -c
        rk = math.sqrt(kappa)
        f = np.asarray(state.f, dtype=float)

        if state.bc == BoundaryCondition.NEG_CUSP:
            p = float(f[0])
            if p <= 0:
                raise FitDomainException("f(0) > 0 이어야 합니다", code="fit_domain")
            ratio = self._ratio(f / p, 1.0, np.inf, "f(n)/p")
            u = np.arccosh(ratio) / rk
            family = CgcFamily(kind=FamilyKind.COSH_NEGATIVE, p=p, c=c)
        elif state.bc == BoundaryCondition.NEG_CONE:
            rest = 1.0 - kappa * f[0] ** 2
            if rest <= 0 or rest >= 1:
                raise FitDomainException(f"q = √(1 - κ f(0)²) 가 (0, 1) 밖입니다: {rest:.6g}", code="fit_domain")
            q = math.sqrt(rest)
            p = None
            u = np.arcsinh(rk * f / q) / rk
            family = CgcFamily(kind=FamilyKind.SINH_NEGATIVE, q=q, c=c)
        else:
            raise FitDomainException(f"음의 곡률 맞춤은 음의 조건에서만 가능합니다: {state.bc.value}")

        try:
            _, h_pred, _, _ = cgc_service.negative_arrays(family, u)
        except (DomainViolationException, DegenerateStepException) as e:
            raise FitDomainException(e.message, code="fit_domain")
        h = state.heights()
        h_err = float(np.max(np.abs(h_pred - h)))
        logger.info(f"negative_fit: family={family.kind.value}, c={c:.13g}, h_err={h_err:.3e}")
        return FitReport(
            family=family.kind.value,
            c=c,
            p=p,
            q=family.q,
            u=tuple(u),
            h_pred=tuple(h_pred),
            h_err=h_err,
            K_spread=spread,
        )

    def fit(self, state: FlowState) -> FitReport:
        if state.bc in (BoundaryCondition.NEG_CONE, BoundaryCondition.NEG_CUSP):
            return self.negative_fit(state)
        return self.fit_cgc(state)

    def synthetic_cgc_state(self, c: float, h_target, l: int = 24) -> FlowState:
        """
        닫힌 형식 높이가 h_target 과 같은 원뿔 CGC 상태를 최소제곱으로 구성
        미지수는 p 와 u_1..u_{k-1} 이고 u_0 = 0, u_k = π/(2√c) 로 고정합니다.
        """
        h_target = np.asarray(h_target, dtype=float)
        k = len(h_target) - 1
        if k < 2:
            raise DomainViolationException("h_target 은 3개 이상이어야 합니다")
        rc = math.sqrt(c)
        u_top = math.pi / (2.0 * rc)

        def unpack(z):
            return z[0], np.concatenate([[0.0], z[1:], [u_top]])

        def residual(z):
            p, u = unpack(z)
            _, h, _, _ = cgc_service.positive_arrays(p, c, u)
            return h[1:] - h_target[1:]

        ratio = np.clip(h_target[1:-1] / h_target[-1], -1.0, 1.0)
        guess = np.concatenate([[0.98 / rc], u_top * (2.0 / math.pi) * np.arcsin(ratio)])
        lower = np.full(k, 1e-9)
        upper = np.concatenate([[1.0 / rc], np.full(k - 1, u_top - 1e-9)])
        solution = optimize.least_squares(
            residual,
            np.clip(guess, lower, upper),
            bounds=(lower, upper),
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=5000,
        )
        p, u = unpack(solution.x)
        logger.info(f"synthetic_cgc_state: p={p:.12g}, cost={solution.cost:.3e}")
        f, h, _, _ = cgc_service.positive_arrays(p, c, u)
        f[-1] = 0.0
        return FlowState(
            f=tuple(float(v) for v in f),
            dh=tuple(float(v) for v in np.diff(h)),
            a0b0=(1.0, 0.0),
            bc=BoundaryCondition.POS_CONE,
            l=l,
        )


# 싱글톤 인스턴스
flow_service = RicciFlowService()
