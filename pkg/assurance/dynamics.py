"""
Control-affine systems, decomposition functions and the embedding system.

Every map acts on the last axis and broadcasts over leading axes, so a batch
of states of shape (B, n) can be pushed through f, g1, g2, feedbacks and
decomposition functions in one call.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from assurance.intervals import EmbeddingState, IntervalVector
from core.defs import DEFAULT_DT, FD_RELATIVE_STEP, TOL_DIAG, TOL_SIGN, IntegrationMethod
from core.exceptions import DimensionMismatchExc, IntegrationBlowUpExc, UnboundedBoxExc
from core.logger import logger

VectorMap = Callable[[np.ndarray], np.ndarray]
DisturbedField = Callable[[np.ndarray, np.ndarray], np.ndarray]

_REGISTRATION_SAMPLES = 8


def matvec(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", mat, vec)


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    n: int
    m: int
    n_w: int
    f: VectorMap
    g1: VectorMap
    g2: VectorMap
    statespace: IntervalVector
    W: IntervalVector

    def __post_init__(self):
        if self.statespace.n != self.n:
            raise DimensionMismatchExc(f"Statespace has dimension {self.statespace.n}, expected {self.n}")
        if self.W.n != self.n_w:
            raise DimensionMismatchExc(f"Disturbance box has dimension {self.W.n}, expected {self.n_w}")
        if not self.W.is_finite():
            raise UnboundedBoxExc("Disturbance box W must have finite endpoints")
        rng = np.random.default_rng(0)
        low = np.where(np.isfinite(self.statespace.lower), self.statespace.lower, -1.0)
        high = np.where(np.isfinite(self.statespace.upper), self.statespace.upper, 1.0)
        low = np.minimum(low, high)
        for x in rng.uniform(low, high, size=(_REGISTRATION_SAMPLES, self.n)):
            self._check_shapes(x)

    def _check_shapes(self, x: np.ndarray):
        fx, g1x, g2x = np.shape(self.f(x)), np.shape(self.g1(x)), np.shape(self.g2(x))
        if fx != (self.n,):
            raise DimensionMismatchExc(f"f returned shape {fx}, expected {(self.n,)}")
        if g1x != (self.n, self.m):
            raise DimensionMismatchExc(f"g1 returned shape {g1x}, expected {(self.n, self.m)}")
        if g2x != (self.n, self.n_w):
            raise DimensionMismatchExc(f"g2 returned shape {g2x}, expected {(self.n, self.n_w)}")

    def __call__(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        return eval_system(self, x, u, w)


def eval_system(sys: ControlAffineSystem, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    for name, arr, size in (("x", x, sys.n), ("u", u, sys.m), ("w", w, sys.n_w)):
        if arr.shape[-1:] != (size,):
            raise DimensionMismatchExc(f"{name} has trailing shape {arr.shape[-1:]}, expected ({size},)")
    return sys.f(x) + matvec(sys.g1(x), u) + matvec(sys.g2(x), w)


@dataclass(frozen=True, eq=False)
class ClosedLoopField:
    system: ControlAffineSystem
    u_b: VectorMap

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def n_w(self) -> int:
        return self.system.n_w

    def __call__(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        return eval_system(self.system, x, self.u_b(x), w)


def close_loop(sys: ControlAffineSystem, u_b: VectorMap) -> ClosedLoopField:
    return ClosedLoopField(system=sys, u_b=u_b)


@dataclass(frozen=True, eq=False)
class DecompositionFunction:
    d: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    n: int
    n_w: int

    def __call__(self, x, w, x_hat, w_hat) -> np.ndarray:
        return self.d(x, w, x_hat, w_hat)


def embedding_rhs(d: DecompositionFunction, W: IntervalVector) -> VectorMap:
    """Right-hand side of the 2n-dimensional embedding system on stacked (under, over) vectors."""
    if not W.is_finite():
        raise UnboundedBoxExc("Embedding requires a finite disturbance box")
    n = d.n
    w_low, w_high = W.lower, W.upper

    def rhs(a: np.ndarray) -> np.ndarray:
        under, over = a[..., :n], a[..., n:]
        return np.concatenate(
            [d(under, w_low, over, w_high), d(over, w_high, under, w_low)],
            axis=-1,
        )

    return rhs


def embedding_field(d: DecompositionFunction, W: IntervalVector, a: EmbeddingState) -> np.ndarray:
    return embedding_rhs(d, W)(a.as_vector())


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    step: float

    def __len__(self) -> int:
        return self.times.size

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def time_grid(horizon: float, dt: float) -> np.ndarray:
    """Grid 0, dt, 2dt, ... ending exactly at the horizon."""
    if horizon < 0:
        raise ValueError(f"Horizon must be non-negative, got {horizon}")
    if dt <= 0:
        raise ValueError(f"Time step must be positive, got {dt}")
    full = int(np.floor(horizon / dt + 1e-9))
    times = dt * np.arange(full + 1)
    if horizon - times[-1] > 1e-12 * max(1.0, horizon):
        times = np.append(times, horizon)
    else:
        times[-1] = horizon
    return times


def _euler_step(field, t, x, h):
    return x + h * field(t, x)


def _rk4_step(field, t, x, h):
    k1 = field(t, x)
    k2 = field(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = field(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = field(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


STEPPERS = {
    IntegrationMethod.EULER: _euler_step,
    IntegrationMethod.RK4: _rk4_step,
}


def integrate(
        field: Callable,
        x0: np.ndarray,
        horizon: float,
        dt: float = DEFAULT_DT,
        method: IntegrationMethod = IntegrationMethod.RK4,
        time_varying: bool = False,
        allow_nonfinite: bool = False,
) -> Trajectory:
    """
    Fixed-step integration of x' = field(x), or field(t, x) when time_varying.

    x0 may carry leading batch axes. With allow_nonfinite the loop keeps going
    through non-finite entries (callers mask them); otherwise the first
    non-finite state raises IntegrationBlowUpExc with the finite prefix.
    """
    stepper = STEPPERS[IntegrationMethod(method)]
    rhs = field if time_varying else (lambda t, x: field(x))
    times = time_grid(horizon, dt)
    x = np.array(x0, dtype=float)
    states = np.empty((times.size,) + x.shape)
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(times.size - 1):
            x = stepper(rhs, times[k], x, times[k + 1] - times[k])
            if not allow_nonfinite and not np.isfinite(x).all():
                prefix = Trajectory(times[:k + 1].copy(), states[:k + 1].copy(), dt)
                logger.debug(f"Integration stopped at t={times[k + 1]:.4f}: non-finite state")
                raise IntegrationBlowUpExc(f"Non-finite state at t={times[k + 1]}", prefix=prefix)
            states[k + 1] = x
    return Trajectory(times, states, dt)


@dataclass
class DecompositionViolation:
    kind: str
    sample: int
    row: int
    column: int
    magnitude: float
    point: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sample": self.sample,
            "row": self.row,
            "column": self.column,
            "magnitude": self.magnitude,
            "point": self.point,
        }


@dataclass
class DecompositionReport:
    samples: int
    violations: List[DecompositionViolation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def count(self, kind: Optional[str] = None) -> int:
        if kind is None:
            return len(self.violations)
        return sum(1 for v in self.violations if v.kind == kind)

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
        }


def check_decomposition(
        d: DecompositionFunction,
        F: DisturbedField,
        box: IntervalVector,
        W: IntervalVector,
        samples: int,
        seed: int,
        tol_diag: float = TOL_DIAG,
        tol_sign: float = TOL_SIGN,
        fd_step: float = FD_RELATIVE_STEP,
) -> DecompositionReport:
    """Sampled check of diagonal consistency and the sign pattern of a decomposition function."""
    if samples < 1:
        raise ValueError("At least one sample is required")
    rng = np.random.default_rng(seed)
    args = [box.sample(rng, samples), W.sample(rng, samples), box.sample(rng, samples), W.sample(rng, samples)]
    report = DecompositionReport(samples=samples)

    def point(s: int) -> dict:
        x, w, x_hat, w_hat = (a[s].tolist() for a in args)
        return {"x": x, "w": w, "x_hat": x_hat, "w_hat": w_hat}

    diag_err = np.abs(d(args[0], args[1], args[0], args[1]) - F(args[0], args[1]))
    for s, i in zip(*np.nonzero(diag_err > tol_diag)):
        report.violations.append(
            DecompositionViolation("diagonal", int(s), int(i), -1, float(diag_err[s, i]), point(int(s)))
        )

    # (position in args, violation kind, +1 for "must not decrease", skip the own row)
    checks = ((0, "x", 1, True), (2, "x_hat", -1, False), (1, "w", 1, False), (3, "w_hat", -1, False))
    for pos, kind, sign, skip_diagonal in checks:
        for j in range(args[pos].shape[-1]):
            eps = fd_step * (1.0 + np.abs(args[pos][:, j]))
            plus = [a.copy() for a in args]
            minus = [a.copy() for a in args]
            plus[pos][:, j] += eps
            minus[pos][:, j] -= eps
            deriv = (d(*plus) - d(*minus)) / (2.0 * eps[:, None])
            excess = -sign * deriv - tol_sign
            if skip_diagonal:
                excess[:, j] = -np.inf
            for s, i in zip(*np.nonzero(excess > 0)):
                report.violations.append(
                    DecompositionViolation(kind, int(s), int(i), j, float(abs(deriv[s, i])), point(int(s)))
                )

    if report.passed:
        logger.info(f"Decomposition check passed on {samples} samples")
    else:
        logger.warning(f"Decomposition check found {report.count()} violations on {samples} samples")
    return report
