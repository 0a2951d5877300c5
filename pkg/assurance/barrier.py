"""
Soft-min barrier over embedding boxes.

gamma(t; x) is the log-sum-exp soft minimum of h over the 2^n corner multiset
of the embedding box reached at time t from the degenerate box [x, x];
Psi(x) is its maximum over the backup-horizon grid.
"""
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Optional, Sequence, Tuple

import numpy as np

from assurance.dynamics import DecompositionFunction
from assurance.intervals import IntervalVector, corner_mask, corner_points
from assurance.reachability import ReachTube, embedding_batch
from core.defs import DEFAULT_DT, DEFAULT_P, FD_RELATIVE_STEP, TOL_TIE, GradientMethod
from core.exceptions import NonFiniteGradientExc, StateOutsideStatespaceExc

if TYPE_CHECKING:
    from assurance.asif import BackupPolicy

ScalarMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BarrierValidation:
    samples: int
    worst_gradient_error: float
    worst_concavity_gap: float
    gradient_ok: bool
    concavity_ok: bool

    @property
    def passed(self) -> bool:
        return self.gradient_ok and self.concavity_ok


@dataclass(frozen=True, eq=False)
class BarrierFunction:
    h: ScalarMap
    grad_h: ScalarMap
    concavity_domain: IntervalVector

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.h(x)

    def validate(
            self,
            samples: int = 1000,
            seed: int = 0,
            gradient_tol: float = 1e-5,
            concavity_tol: float = 1e-9,
    ) -> BarrierValidation:
        """Finite-difference gradient agreement and midpoint concavity on sampled points."""
        rng = np.random.default_rng(seed)
        x = self.concavity_domain.sample(rng, samples)
        y = self.concavity_domain.sample(rng, samples)
        n = x.shape[-1]

        eps = FD_RELATIVE_STEP * (1.0 + np.abs(x))
        fd = np.empty_like(x)
        for i in range(n):
            step = np.zeros_like(x)
            step[:, i] = eps[:, i]
            fd[:, i] = (self.h(x + step) - self.h(x - step)) / (2.0 * eps[:, i])
        grad = self.grad_h(x)
        rel = np.linalg.norm(grad - fd, axis=-1) / np.maximum(1.0, np.linalg.norm(grad, axis=-1))
        gap = 0.5 * (self.h(x) + self.h(y)) - self.h(0.5 * (x + y))

        worst_rel = float(rel.max())
        worst_gap = float(gap.max())
        return BarrierValidation(
            samples=samples,
            worst_gradient_error=worst_rel,
            worst_concavity_gap=worst_gap,
            gradient_ok=worst_rel <= gradient_tol,
            concavity_ok=worst_gap <= concavity_tol,
        )


def lse_rows(values: np.ndarray, p: float) -> np.ndarray:
    """Log-sum-exponential soft minimum along the last axis, shifted by the row minimum."""
    if p <= 0:
        raise ValueError(f"LSE sharpness must be positive, got {p}")
    values = np.asarray(values, dtype=float)
    if values.shape[-1] == 0:
        raise ValueError("LSE of an empty list")
    low = values.min(axis=-1, keepdims=True)
    total = np.exp(-p * (values - low)).sum(axis=-1)
    return low[..., 0] - np.log(total) / p


def lse(values: Sequence[float], p: float) -> float:
    return float(lse_rows(np.asarray(values, dtype=float).reshape(-1), p))


def softmin_weights(values: np.ndarray, p: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    e = np.exp(-p * (values - values.min(axis=-1, keepdims=True)))
    return e / e.sum(axis=-1, keepdims=True)


def corner_values(lower: np.ndarray, upper: np.ndarray, h: BarrierFunction) -> np.ndarray:
    """h at every corner, shape (..., 2^n)."""
    return h(corner_points(lower, upper))


def gamma_traces(tube: ReachTube, h: BarrierFunction, p: float) -> Tuple[np.ndarray, np.ndarray]:
    """(gamma_ideal, gamma) at every tube step; invalid steps carry -inf."""
    with np.errstate(invalid="ignore", over="ignore"):
        values = corner_values(np.where(tube.valid[..., None], tube.lower, 0.0),
                               np.where(tube.valid[..., None], tube.upper, 0.0), h)
        ideal = values.min(axis=-1)
        soft = lse_rows(values, p)
    ideal = np.where(tube.valid, ideal, -np.inf)
    soft = np.where(tube.valid, soft, -np.inf)
    return ideal, soft


def gamma_ideal(tube: ReachTube, h: BarrierFunction, k: int) -> float:
    if not tube.valid[k]:
        return -np.inf
    return float(corner_values(tube.lower[k], tube.upper[k], h).min())


def gamma(tube: ReachTube, h: BarrierFunction, p: float, k: int) -> float:
    if not tube.valid[k]:
        return -np.inf
    return float(lse_rows(corner_values(tube.lower[k], tube.upper[k], h), p))


@dataclass(frozen=True, eq=False)
class PsiEvaluation:
    psi: float
    tau_star: float
    k_star: int
    gamma_trace: np.ndarray
    gamma_ideal_trace: np.ndarray
    psi_ideal: float
    valid_horizon: float
    tie: bool = False
    grad: Optional[np.ndarray] = field(default=None)

    @property
    def certified(self) -> bool:
        return bool(np.isfinite(self.psi))


class PsiEvaluator:
    """
    Evaluates Psi and its gradient for one backup policy.

    The gradient uses 2n extra embedding simulations from the perturbed
    degenerate boxes [x +- eps_i e_i], eps_i = 1e-5 (1 + |x_i|). They run in the
    same batch as the nominal one.
    """

    def __init__(
            self,
            policy: "BackupPolicy",
            d: DecompositionFunction,
            W: IntervalVector,
            p: float = DEFAULT_P,
            dt_embed: float = DEFAULT_DT,
            statespace: Optional[IntervalVector] = None,
            fd_step: float = FD_RELATIVE_STEP,
            gradient_method: GradientMethod = GradientMethod.DIRECT,
    ):
        if p <= 0:
            raise ValueError(f"LSE sharpness must be positive, got {p}")
        if dt_embed <= 0:
            raise ValueError(f"Embedding time step must be positive, got {dt_embed}")
        self.policy = policy
        self.d = d
        self.W = W
        self.p = p
        self.dt_embed = dt_embed
        self.statespace = statespace
        self.fd_step = fd_step
        self.gradient_method = GradientMethod(gradient_method)

    @property
    def h(self) -> BarrierFunction:
        return self.policy.h

    def _check_state(self, x: np.ndarray):
        if not np.isfinite(x).all():
            raise StateOutsideStatespaceExc(f"Non-finite state {x}")
        if self.statespace is not None and not self.statespace.contains(x):
            raise StateOutsideStatespaceExc(f"State {x} is outside the statespace")

    def _perturbed(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        eps = self.fd_step * (1.0 + np.abs(x))
        shifts = np.diag(eps)
        return np.concatenate([x + shifts, x - shifts]), eps

    def _tube(self, starts: np.ndarray, horizon: float) -> ReachTube:
        return embedding_batch(self.d, self.W, starts, starts, horizon, self.dt_embed, statespace=self.statespace)

    def _summarize(self, tube: ReachTube) -> PsiEvaluation:
        ideal, soft = gamma_traces(tube, self.h, self.p)
        times = tube.times
        valid_idx = np.flatnonzero(tube.valid)
        valid_horizon = float(times[valid_idx[-1]]) if valid_idx.size and tube.valid[0] else -np.inf
        trace = np.column_stack([times, soft])
        ideal_trace = np.column_stack([times, ideal])
        if not np.isfinite(soft).any():
            return PsiEvaluation(-np.inf, np.nan, -1, trace, ideal_trace, -np.inf, valid_horizon)
        k_star = int(np.argmax(soft))
        psi = float(soft[k_star])
        tie = bool(np.count_nonzero(soft >= psi - TOL_TIE) > 1)
        return PsiEvaluation(
            psi=psi,
            tau_star=float(times[k_star]),
            k_star=k_star,
            gamma_trace=trace,
            gamma_ideal_trace=ideal_trace,
            psi_ideal=float(ideal.max()),
            valid_horizon=valid_horizon,
            tie=tie,
        )

    def _gradient_from(
            self,
            lower: np.ndarray,
            upper: np.ndarray,
            valid: np.ndarray,
            eps: np.ndarray,
            method: GradientMethod,
    ) -> np.ndarray:
        """
        lower, upper: (2n + 1, n) boxes at the maximizing step, row 0 nominal,
        rows 1..n shifted by +eps_i, rows n+1..2n by -eps_i.
        """
        n = eps.size
        if not valid.all():
            raise NonFiniteGradientExc("Perturbed embedding left the valid region")
        if method == GradientMethod.DIRECT:
            soft = lse_rows(corner_values(lower[1:], upper[1:], self.h), self.p)
            grad = (soft[:n] - soft[n:]) / (2.0 * eps)
        else:
            stacked = np.concatenate([lower[1:], upper[1:]], axis=-1)
            jac = ((stacked[:n] - stacked[n:]) / (2.0 * eps[:, None])).T
            z = corner_points(lower[0], upper[0])
            weights = softmin_weights(self.h(z), self.p)
            rows = jac[np.arange(n)[None, :] + n * corner_mask(n)]
            grad = np.einsum("c,cj,cjk->k", weights, self.h.grad_h(z), rows)
        if not np.isfinite(grad).all():
            raise NonFiniteGradientExc(f"Non-finite gradient {grad}")
        return grad

    def evaluate(self, x: np.ndarray, with_gradient: bool = True) -> PsiEvaluation:
        x = np.asarray(x, dtype=float).reshape(-1)
        self._check_state(x)
        if not with_gradient:
            tube = self._tube(x[None, :], self.policy.T_b)
            return self._summarize(_row(tube, 0))
        perturbed, eps = self._perturbed(x)
        starts = np.concatenate([x[None, :], perturbed])
        tube = self._tube(starts, self.policy.T_b)
        evaluation = self._summarize(_row(tube, 0))
        if not evaluation.certified:
            return evaluation
        k = evaluation.k_star
        grad = self._gradient_from(tube.lower[k], tube.upper[k], tube.valid[k], eps, self.gradient_method)
        return replace(evaluation, grad=grad)

    def gradient(
            self,
            x: np.ndarray,
            evaluation: PsiEvaluation,
            method: Optional[GradientMethod] = None,
    ) -> np.ndarray:
        """Re-simulates the perturbed boxes up to tau_star and differentiates gamma there."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if not evaluation.certified:
            raise NonFiniteGradientExc("Psi is -inf; no maximizing time to differentiate at")
        perturbed, eps = self._perturbed(x)
        starts = np.concatenate([x[None, :], perturbed])
        tube = self._tube(starts, evaluation.tau_star)
        return self._gradient_from(
            tube.lower[-1], tube.upper[-1], tube.valid[-1], eps,
            GradientMethod(method or self.gradient_method),
        )


def _row(tube: ReachTube, b: int) -> ReachTube:
    return ReachTube(tube.times, tube.lower[:, b], tube.upper[:, b], tube.valid[:, b])


def psi(
        x: np.ndarray,
        policy: "BackupPolicy",
        d: DecompositionFunction,
        W: IntervalVector,
        p: float = DEFAULT_P,
        dt_embed: float = DEFAULT_DT,
        statespace: Optional[IntervalVector] = None,
) -> PsiEvaluation:
    return PsiEvaluator(policy, d, W, p, dt_embed, statespace).evaluate(x, with_gradient=False)


def grad_psi(
        x: np.ndarray,
        evaluation: PsiEvaluation,
        policy: "BackupPolicy",
        d: DecompositionFunction,
        W: IntervalVector,
        p: float = DEFAULT_P,
        dt_embed: float = DEFAULT_DT,
        statespace: Optional[IntervalVector] = None,
        method: GradientMethod = GradientMethod.DIRECT,
) -> np.ndarray:
    return PsiEvaluator(policy, d, W, p, dt_embed, statespace).gradient(x, evaluation, method)
