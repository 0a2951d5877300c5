"""
Runtime filters.

AssuranceFilter is the look-ahead filter: the single robust barrier
constraint grad Psi . (f + g1 u + g2 w) >= -alpha(Psi) for all disturbance
vertices w is reduced to one halfspace in u and the QP
min ||u - u_d||^2 is solved by closed-form projection. vanilla_cbf_step uses
the same machinery on h itself (no look-ahead) as a baseline.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from quadprog import solve_qp

from assurance.barrier import BarrierFunction, PsiEvaluation, PsiEvaluator
from assurance.dynamics import ControlAffineSystem, DecompositionFunction, VectorMap, matvec
from assurance.intervals import IntervalVector, corner_points
from core.defs import DEFAULT_DT, DEFAULT_P, TOL_C, FilterStatus, GradientMethod
from core.exceptions import InfeasibleFilterExc, NonFiniteGradientExc, StateOutsideStatespaceExc
from core.logger import logger

RateFunction = Callable[[np.ndarray], np.ndarray]


def cubic_alpha(gain: float = 1000.0) -> RateFunction:
    def alpha(psi):
        return gain * np.asarray(psi, dtype=float) ** 3

    return alpha


@dataclass(frozen=True, eq=False)
class BackupPolicy:
    u_b: VectorMap
    h: BarrierFunction
    alpha: RateFunction
    T_b: float
    # bounding box of S_b = {h >= 0}
    sb_box: IntervalVector

    def __post_init__(self):
        if self.T_b < 0:
            raise ValueError(f"Backup horizon must be non-negative, got {self.T_b}")
        if not self.sb_box.is_finite():
            raise ValueError("S_b must be compact: its bounding box needs finite endpoints")

    def in_sb(self, x: np.ndarray) -> np.ndarray:
        return self.h(x) >= 0

    def check_alpha(self, grid: Optional[np.ndarray] = None) -> bool:
        """alpha(0) = 0 and alpha strictly increasing on the grid."""
        grid = np.linspace(-2.0, 2.0, 401) if grid is None else np.sort(np.asarray(grid, dtype=float))
        values = np.asarray(self.alpha(grid), dtype=float)
        return bool(float(self.alpha(np.float64(0.0))) == 0.0 and np.all(np.diff(values) > 0))


@dataclass(frozen=True, eq=False)
class HalfspaceConstraint:
    """c . u >= b_star, the tightest of the per-vertex constraints c . u >= b_w."""
    c: np.ndarray
    b_star: float
    vertices: np.ndarray
    vertex_bounds: np.ndarray

    def slack(self, u: np.ndarray) -> float:
        return float(self.c @ u - self.b_star)

    def to_dict(self) -> dict:
        return {"c": self.c.tolist(), "b_star": self.b_star}


@dataclass(frozen=True, eq=False)
class FilterDecision:
    u: np.ndarray
    status: FilterStatus
    psi: float
    constraint: Optional[HalfspaceConstraint] = None
    slack: float = np.nan
    diagnostic: Optional[str] = None
    tie: bool = False
    evaluation: Optional[PsiEvaluation] = field(default=None, repr=False)


def _constraint(
        x: np.ndarray,
        a: np.ndarray,
        level: float,
        sys: ControlAffineSystem,
        alpha: RateFunction,
) -> HalfspaceConstraint:
    a = np.asarray(a, dtype=float)
    if a.shape != (sys.n,) or not np.isfinite(a).all():
        raise NonFiniteGradientExc(f"Barrier gradient must be a finite vector of size {sys.n}, got {a}")
    rate = float(alpha(np.float64(level)))
    a_f = float(a @ sys.f(x))
    c = a @ sys.g1(x)
    a_g2 = a @ sys.g2(x)
    vertices = corner_points(sys.W.lower, sys.W.upper)
    vertex_bounds = -rate - a_f - vertices @ a_g2
    # b_w is affine in w: its max is attained coordinate-wise
    b_star = -rate - a_f - float(np.minimum(a_g2 * sys.W.lower, a_g2 * sys.W.upper).sum())
    return HalfspaceConstraint(c=c, b_star=b_star, vertices=vertices, vertex_bounds=vertex_bounds)


def assemble_constraint(
        x: np.ndarray,
        psi_eval: PsiEvaluation,
        sys: ControlAffineSystem,
        alpha: RateFunction,
) -> HalfspaceConstraint:
    if psi_eval.grad is None:
        raise NonFiniteGradientExc("Psi evaluation carries no gradient")
    return _constraint(np.asarray(x, dtype=float), psi_eval.grad, psi_eval.psi, sys, alpha)


def solve_projection(u_d: np.ndarray, c: np.ndarray, b_star: float, tol_c: float = TOL_C) -> Optional[np.ndarray]:
    """Closed-form argmin ||u - u_d||^2 s.t. c . u >= b_star; None when infeasible."""
    u_d = np.asarray(u_d, dtype=float)
    c = np.asarray(c, dtype=float)
    value = float(c @ u_d)
    if value >= b_star:
        return u_d.copy()
    norm2 = float(c @ c)
    if np.sqrt(norm2) <= tol_c:
        return None
    return u_d + c * (b_star - value) / norm2


def solve_vertex_family(
        u_d: np.ndarray,
        C: np.ndarray,
        b: np.ndarray,
        tol_c: float = TOL_C,
) -> Optional[np.ndarray]:
    """
    argmin ||u - u_d||^2 s.t. C[i] . u >= b[i] for every row, solved with the
    Goldfarb-Idnani dual method. Rows with ||C[i]|| <= tol_c are feasibility
    tests. Returns None when the rows have no common point.
    """
    u_d = np.asarray(u_d, dtype=float).reshape(-1)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if C.shape != (b.size, u_d.size):
        raise ValueError(f"Constraint rows have shape {C.shape}, expected ({b.size}, {u_d.size})")
    rows = np.unique(np.column_stack([C, b]), axis=0)
    C, b = rows[:, :-1], rows[:, -1]
    degenerate = np.sqrt((C * C).sum(axis=1)) <= tol_c
    if np.any(b[degenerate] > 0):
        return None
    C, b = C[~degenerate], b[~degenerate]
    if not b.size:
        return u_d.copy()
    try:
        u = solve_qp(np.eye(u_d.size), u_d, np.ascontiguousarray(C.T), b, 0)[0]
    except ValueError as e:
        logger.debug(f"Vertex family infeasible: {e}")
        return None
    return np.asarray(u, dtype=float)


class AssuranceFilter:
    """
    Look-ahead filter for one system and backup policy.

    Holds no state between steps; step() may be called for any state in any order.
    """

    def __init__(
            self,
            system: ControlAffineSystem,
            policy: BackupPolicy,
            d: DecompositionFunction,
            p: float = DEFAULT_P,
            dt_embed: float = DEFAULT_DT,
            alpha: Optional[RateFunction] = None,
            gradient_method: GradientMethod = GradientMethod.DIRECT,
            tol_c: float = TOL_C,
    ):
        self.system = system
        self.policy = policy
        self.alpha = alpha or policy.alpha
        self.tol_c = tol_c
        self.evaluator = PsiEvaluator(
            policy, d, system.W, p=p, dt_embed=dt_embed,
            statespace=system.statespace, gradient_method=gradient_method,
        )

    def _fallback(self, x: np.ndarray, psi: float, diagnostic: str, **kwargs) -> FilterDecision:
        return FilterDecision(
            u=np.asarray(self.policy.u_b(x), dtype=float),
            status=FilterStatus.BACKUP_FALLBACK,
            psi=psi,
            diagnostic=diagnostic,
            **kwargs,
        )

    def step(self, x: np.ndarray, u_d: np.ndarray) -> FilterDecision:
        x = np.asarray(x, dtype=float)
        u_d = np.asarray(u_d, dtype=float)
        try:
            evaluation = self.evaluator.evaluate(x, with_gradient=True)
        except StateOutsideStatespaceExc as e:
            logger.warning(f"Filter fallback: {e}")
            return self._fallback(x, -np.inf, "state outside statespace")
        except NonFiniteGradientExc as e:
            logger.warning(f"Filter fallback: {e}")
            return self._fallback(x, np.nan, "non-finite gradient")

        if not evaluation.certified:
            logger.warning(f"Filter fallback at x={x}: no valid embedding box")
            return self._fallback(x, -np.inf, "no valid embedding", evaluation=evaluation)
        if evaluation.psi < 0:
            logger.debug(f"Filter fallback: Psi={evaluation.psi:.6g} < 0")
            return self._fallback(x, evaluation.psi, "psi negative", tie=evaluation.tie, evaluation=evaluation)

        constraint = assemble_constraint(x, evaluation, self.system, self.alpha)
        u = solve_projection(u_d, constraint.c, constraint.b_star, self.tol_c)
        if u is None:
            logger.debug(f"Filter fallback: infeasible projection at Psi={evaluation.psi:.6g}")
            return self._fallback(
                x, evaluation.psi, "infeasible",
                constraint=constraint, slack=constraint.slack(u_d), tie=evaluation.tie, evaluation=evaluation,
            )
        slack = constraint.slack(u_d)
        status = FilterStatus.PASSED_DESIRED if slack >= 0 else FilterStatus.PROJECTED
        logger.debug(f"Filter {status.value}: Psi={evaluation.psi:.6g}, tau*={evaluation.tau_star:.3f}")
        return FilterDecision(
            u=u,
            status=status,
            psi=evaluation.psi,
            constraint=constraint,
            slack=slack,
            tie=evaluation.tie,
            evaluation=evaluation,
        )


def asif_step(
        x: np.ndarray,
        u_d_value: np.ndarray,
        policy: BackupPolicy,
        sys: ControlAffineSystem,
        d: DecompositionFunction,
        p: float = DEFAULT_P,
        dt_embed: float = DEFAULT_DT,
        alpha: Optional[RateFunction] = None,
) -> FilterDecision:
    return AssuranceFilter(sys, policy, d, p=p, dt_embed=dt_embed, alpha=alpha).step(x, u_d_value)


def vanilla_cbf_step(
        x: np.ndarray,
        u_d_value: np.ndarray,
        h: BarrierFunction,
        alpha: RateFunction,
        sys: ControlAffineSystem,
        u_b: Optional[VectorMap] = None,
        tol_c: float = TOL_C,
) -> FilterDecision:
    """
    Baseline robust CBF-QP on h. Renders S_b invariant without look-ahead.

    An infeasible program falls back to u_b when given and raises
    InfeasibleFilterExc otherwise.
    """
    x = np.asarray(x, dtype=float)
    u_d = np.asarray(u_d_value, dtype=float)
    level = float(h(x))
    try:
        constraint = _constraint(x, h.grad_h(x), level, sys, alpha)
    except NonFiniteGradientExc:
        if u_b is None:
            raise
        return FilterDecision(np.asarray(u_b(x), dtype=float), FilterStatus.BACKUP_FALLBACK, level,
                              diagnostic="non-finite gradient")
    u = solve_projection(u_d, constraint.c, constraint.b_star, tol_c)
    slack = constraint.slack(u_d)
    if u is None:
        if u_b is None:
            raise InfeasibleFilterExc(f"CBF program infeasible at x={x.tolist()}")
        return FilterDecision(np.asarray(u_b(x), dtype=float), FilterStatus.BACKUP_FALLBACK, level,
                              constraint=constraint, slack=slack, diagnostic="infeasible")
    status = FilterStatus.PASSED_DESIRED if slack >= 0 else FilterStatus.PROJECTED
    return FilterDecision(u=u, status=status, psi=level, constraint=constraint, slack=slack)


def closed_loop_rate(
        x: np.ndarray,
        u: np.ndarray,
        a: np.ndarray,
        sys: ControlAffineSystem,
) -> np.ndarray:
    """a . (f + g1 u + g2 w) at every disturbance vertex w."""
    vertices = corner_points(sys.W.lower, sys.W.upper)
    drift = sys.f(x) + matvec(sys.g1(x), u)
    return (drift[None, :] + matvec(sys.g2(x)[None], vertices)) @ a
