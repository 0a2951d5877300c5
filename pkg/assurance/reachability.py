"""
Reachable-set over-approximation with the embedding system, Monte Carlo
oracles and the backup-horizon check.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from assurance.dynamics import DecompositionFunction, DisturbedField, embedding_rhs, integrate
from assurance.intervals import EmbeddingState, IntervalVector, corner_points
from core.defs import DEFAULT_SEGMENT, TOL_CONTAIN, TOL_ORDER, AssumptionVerdict, IntegrationMethod
from core.exceptions import EmptyTraceExc
from core.logger import logger
from core.signals import disturbance_batch

StatePredicate = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ReachTube:
    times: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    valid: np.ndarray

    @property
    def n(self) -> int:
        return self.lower.shape[-1]

    @property
    def valid_horizon(self) -> float:
        """Largest grid time up to which every box is valid."""
        if not self.valid[0]:
            return -np.inf
        return float(self.times[np.flatnonzero(self.valid)[-1]])

    @property
    def all_valid(self) -> bool:
        return bool(self.valid.all())

    def box(self, k: int) -> IntervalVector:
        if not self.valid[k]:
            raise ValueError(f"Tube step {k} is invalid")
        # ordered up to tol_order; the representation is tightened to an exact box
        return IntervalVector(np.minimum(self.lower[k], self.upper[k]), np.maximum(self.lower[k], self.upper[k]))

    @property
    def boxes(self) -> Tuple[Optional[IntervalVector], ...]:
        return tuple(self.box(k) if self.valid[k] else None for k in range(self.times.size))

    @property
    def terminal(self) -> IntervalVector:
        return self.box(self.times.size - 1)

    def to_rows(self) -> List[list]:
        return [
            [float(t), bool(v)] + lo.tolist() + up.tolist()
            for t, v, lo, up in zip(self.times, self.valid, self.lower, self.upper)
        ]


def _validity(
        lower: np.ndarray,
        upper: np.ndarray,
        statespace: Optional[IntervalVector],
        tol_order: float,
) -> np.ndarray:
    """Per-step validity along the first axis, sticky once lost."""
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(lower).all(axis=-1) & np.isfinite(upper).all(axis=-1)
        ok &= (lower <= upper + tol_order).all(axis=-1)
        if statespace is not None:
            ok &= (lower >= statespace.lower).all(axis=-1) & (upper <= statespace.upper).all(axis=-1)
    return np.logical_and.accumulate(ok, axis=0)


def embedding_batch(
        d: DecompositionFunction,
        W: IntervalVector,
        lowers: np.ndarray,
        uppers: np.ndarray,
        horizon: float,
        dt: float,
        statespace: Optional[IntervalVector] = None,
        method: IntegrationMethod = IntegrationMethod.RK4,
        tol_order: float = TOL_ORDER,
) -> ReachTube:
    """
    Embedding trajectories for a batch of initial boxes.

    lowers, uppers: (B, n). The returned tube carries arrays of shape
    (K + 1, B, n) and validity (K + 1, B).
    """
    n = d.n
    a0 = np.concatenate([lowers, uppers], axis=-1)
    traj = integrate(embedding_rhs(d, W), a0, horizon, dt, method=method, allow_nonfinite=True)
    lower, upper = traj.states[..., :n], traj.states[..., n:]
    valid = _validity(lower, upper, statespace, tol_order)
    return ReachTube(traj.times, lower, upper, valid)


def forward_overapprox(
        d: DecompositionFunction,
        W: IntervalVector,
        x0_box: IntervalVector,
        horizon: float,
        dt: float,
        statespace: Optional[IntervalVector] = None,
        method: IntegrationMethod = IntegrationMethod.RK4,
        tol_order: float = TOL_ORDER,
) -> ReachTube:
    if not x0_box.is_finite():
        raise ValueError("Initial box must be finite")
    a0 = EmbeddingState.of_box(x0_box)
    batch = embedding_batch(
        d, W, a0.under[None, :], a0.over[None, :], horizon, dt,
        statespace=statespace, method=method, tol_order=tol_order,
    )
    tube = ReachTube(batch.times, batch.lower[:, 0], batch.upper[:, 0], batch.valid[:, 0])
    if not tube.all_valid:
        logger.debug(f"Embedding tube invalid after t={tube.valid_horizon:.4f}")
    return tube


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    times: np.ndarray
    states: np.ndarray
    failed: np.ndarray

    @property
    def endpoints(self) -> np.ndarray:
        return self.states[~self.failed, -1]

    @property
    def failures(self) -> int:
        return int(self.failed.sum())


def monte_carlo_endpoints(
        F: DisturbedField,
        x0: np.ndarray,
        W: IntervalVector,
        horizon: float,
        dt: float,
        n_samples: int,
        seed: int,
        method: IntegrationMethod = IntegrationMethod.RK4,
        segment: float = DEFAULT_SEGMENT,
) -> MonteCarloResult:
    """
    Rollouts of F under sampled disturbance signals, one stream per (seed, sample).

    x0 is a single state (n,) or one state per sample (n_samples, n). The full
    sampled trajectories are kept on the integration grid.
    """
    if n_samples < 1:
        raise ValueError("At least one sample is required")
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (n_samples, x0.size))
    signals = disturbance_batch(seed, W, horizon, n_samples, segment)
    traj = integrate(
        lambda t, x: F(x, signals(t)), x0, horizon, dt,
        method=method, time_varying=True, allow_nonfinite=True,
    )
    states = np.moveaxis(traj.states, 0, 1)
    failed = ~np.isfinite(states).all(axis=(1, 2))
    if failed.any():
        logger.warning(f"{int(failed.sum())} of {n_samples} Monte Carlo samples diverged")
    return MonteCarloResult(traj.times, states, failed)


@dataclass(frozen=True)
class BasinVerdict:
    demonstrated: bool
    time: Optional[float]


def basin_member(gamma_ideal_trace: Union[Sequence[Tuple[float, float]], np.ndarray]) -> BasinVerdict:
    """
    Earliest grid time with a non-negative corner minimum of h.

    "Not demonstrated" says nothing about non-membership.
    """
    trace = np.asarray(gamma_ideal_trace, dtype=float).reshape(-1, 2)
    if trace.shape[0] == 0:
        raise EmptyTraceExc("Basin membership needs a non-empty trace")
    hits = np.flatnonzero(trace[:, 1] >= 0)
    if not hits.size:
        return BasinVerdict(False, None)
    return BasinVerdict(True, float(trace[hits[0], 0]))


class CoordinateThresholdSet:
    """Unsafe set {x : |x_i| >= limit for some i in indices}; box disjointness is exact."""

    exact = True

    def __init__(self, indices: Sequence[int], limit: float):
        self.indices = np.asarray(indices, dtype=int)
        self.limit = float(limit)

    def contains(self, x: np.ndarray) -> np.ndarray:
        return (np.abs(np.asarray(x)[..., self.indices]) >= self.limit).any(axis=-1)

    def box_margin(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        """limit minus the largest |coordinate| reachable in the box; positive means disjoint."""
        reach = np.maximum(np.abs(lower[..., self.indices]), np.abs(upper[..., self.indices]))
        return self.limit - reach.max(axis=-1)

    def describe(self) -> str:
        return f"|x_i| >= {self.limit} for i in {self.indices.tolist()}"


class PredicateUnsafeSet:
    """General unsafe predicate; boxes are only checked at corners and center."""

    exact = False

    def __init__(self, predicate: StatePredicate, description: str = "predicate"):
        self.predicate = predicate
        self.description = description

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.predicate(np.asarray(x)), dtype=bool)

    def box_margin(self, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
        points = np.concatenate([corner_points(lower, upper), (0.5 * (lower + upper))[..., None, :]], axis=-2)
        hit = self.contains(points).any(axis=-1)
        return np.where(hit, -1.0, np.inf)

    def describe(self) -> str:
        return f"{self.description} (sampled, not sound)"


def sample_in_set(
        box: IntervalVector,
        predicate: StatePredicate,
        count: int,
        rng: np.random.Generator,
        max_rounds: int = 1000,
) -> np.ndarray:
    """Rejection sampling of `count` points of {predicate} from its bounding box."""
    accepted = []
    total = 0
    for _ in range(max_rounds):
        candidates = box.sample(rng, max(count, 64))
        keep = candidates[np.asarray(predicate(candidates), dtype=bool)]
        accepted.append(keep)
        total += keep.shape[0]
        if total >= count:
            break
    points = np.concatenate(accepted)[:count] if accepted else np.empty((0, box.n))
    if points.shape[0] < count:
        logger.warning(f"Rejection sampling produced {points.shape[0]} of {count} points")
    return points


@dataclass
class Counterexample:
    start: list
    unsafe_state: list
    time: float

    def to_dict(self) -> dict:
        return {"start": self.start, "unsafe_state": self.unsafe_state, "time": self.time}


@dataclass
class AssumptionReport:
    T_b: float
    verdict: AssumptionVerdict
    unsafe_description: str
    tube_checked: bool
    tube_valid: bool
    tube_disjoint: bool
    min_margin: float
    exact: bool
    falsification_samples: int
    counterexamples: List[Counterexample] = field(default_factory=list)
    tube: Optional[ReachTube] = None

    @property
    def passed(self) -> bool:
        return self.verdict != AssumptionVerdict.FALSIFIED

    @property
    def proved(self) -> bool:
        return self.verdict == AssumptionVerdict.PROVED

    @property
    def methods(self) -> List[str]:
        methods = []
        if self.tube_checked:
            methods.append("embedding over-approximation of the time-reversed backup field")
        if self.falsification_samples:
            methods.append("Monte Carlo falsification")
        return methods

    def to_dict(self) -> dict:
        return {
            "T_b": self.T_b,
            "verdict": self.verdict.value,
            "passed": self.passed,
            "methods": self.methods,
            "unsafe_set": self.unsafe_description,
            "tube_checked": self.tube_checked,
            "tube_valid": self.tube_valid,
            "tube_disjoint": self.tube_disjoint,
            "min_margin": self.min_margin,
            "exact": self.exact,
            "falsification_samples": self.falsification_samples,
            "counterexamples": [c.to_dict() for c in self.counterexamples],
        }


def check_assumption1(
        F: DisturbedField,
        d_reverse: Optional[DecompositionFunction],
        sb_box: IntervalVector,
        in_sb: StatePredicate,
        unsafe: Union[CoordinateThresholdSet, PredicateUnsafeSet],
        W: IntervalVector,
        T_b: float,
        dt: float,
        falsification_samples: int = 10_000,
        seed: int = 0,
        segment: float = DEFAULT_SEGMENT,
) -> AssumptionReport:
    """
    Checks that no unsafe state reaches S_b within T_b under the backup closed loop.

    The backward reachable set of S_b is over-approximated by running the
    embedding of the time-reversed field -F from the bounding box of S_b; every
    box of the tube must miss the unsafe set. Independently, reversed rollouts
    from sampled points of S_b look for unsafe states (any hit disproves the
    certificate). Without d_reverse only the falsification pass runs.
    """
    tube = None
    tube_valid = tube_disjoint = False
    min_margin = -np.inf
    if d_reverse is not None:
        tube = forward_overapprox(d_reverse, W, sb_box, T_b, dt)
        tube_valid = tube.all_valid
        margins = unsafe.box_margin(tube.lower, tube.upper)
        if tube_valid:
            min_margin = float(np.min(margins))
        else:
            valid_margins = margins[tube.valid]
            min_margin = float(np.min(valid_margins)) if valid_margins.size else -np.inf
        tube_disjoint = tube_valid and min_margin > 0
        logger.info(
            f"Backward tube over T_b={T_b}: valid={tube_valid}, min margin={min_margin:.6g}"
        )
    else:
        logger.warning("No decomposition function for the reversed field: falsification only, not a proof")

    counterexamples: List[Counterexample] = []
    if falsification_samples:
        rng = np.random.default_rng([seed, falsification_samples])
        starts = sample_in_set(sb_box, in_sb, falsification_samples, rng)
        result = monte_carlo_endpoints(
            lambda x, w: -F(x, w), starts, W, T_b, dt, starts.shape[0], seed,
            method=IntegrationMethod.RK4, segment=segment,
        )
        with np.errstate(invalid="ignore"):
            hits = unsafe.contains(result.states)
        for s in np.flatnonzero(hits.any(axis=1)):
            k = int(np.argmax(hits[s]))
            counterexamples.append(Counterexample(
                start=starts[s].tolist(),
                unsafe_state=result.states[s, k].tolist(),
                time=float(result.times[k]),
            ))

    if counterexamples:
        verdict = AssumptionVerdict.FALSIFIED
    elif tube_disjoint and unsafe.exact:
        verdict = AssumptionVerdict.PROVED
    else:
        verdict = AssumptionVerdict.NOT_FALSIFIED
    logger.info(f"Backup horizon check at T_b={T_b}: {verdict.value} ({len(counterexamples)} counterexamples)")
    return AssumptionReport(
        T_b=T_b,
        verdict=verdict,
        unsafe_description=unsafe.describe(),
        tube_checked=tube is not None,
        tube_valid=tube_valid,
        tube_disjoint=tube_disjoint,
        min_margin=min_margin,
        exact=unsafe.exact,
        falsification_samples=falsification_samples,
        counterexamples=counterexamples,
        tube=tube,
    )


@dataclass
class ContainmentReport:
    horizon: float
    samples: int
    checked_steps: int
    violations: int
    worst_excess: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "samples": self.samples,
            "checked_steps": self.checked_steps,
            "violations": self.violations,
            "worst_excess": self.worst_excess,
            "passed": self.passed,
        }


def check_containment(tube: ReachTube, rollouts: MonteCarloResult, tol: float = TOL_CONTAIN) -> ContainmentReport:
    """Every sampled state must lie in the tube box of its grid step, inflated by tol."""
    if tube.times.shape != rollouts.times.shape or not np.allclose(tube.times, rollouts.times):
        raise ValueError("Tube and rollouts must share one time grid")
    states = rollouts.states[~rollouts.failed][:, tube.valid]
    lower, upper = tube.lower[tube.valid], tube.upper[tube.valid]
    excess = np.maximum(lower - states, states - upper).max(axis=-1) if states.size else np.zeros((0, 0))
    report = ContainmentReport(
        horizon=float(tube.times[-1]),
        samples=int(states.shape[0]),
        checked_steps=int(tube.valid.sum()),
        violations=int(np.count_nonzero(excess > tol)),
        worst_excess=float(excess.max()) if excess.size else -np.inf,
    )
    if not report.passed:
        logger.warning(f"{report.violations} sampled states escaped the embedding tube over {report.horizon}s")
    return report
