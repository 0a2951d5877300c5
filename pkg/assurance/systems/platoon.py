"""
Vehicle platoon on an incidence graph.

State s = (x, z): x in R^N are vehicle velocities, z = A^T p in R^K the
inter-vehicle displacements along the K edges of A. Each edge carries a
saturated spring u_b(z) = kappa tanh(sigma z) that serves as the backup
controller; the safe set S_b is a level set of the quadratic Lyapunov
function of the linearized closed loop.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from assurance.asif import BackupPolicy, cubic_alpha
from assurance.barrier import BarrierFunction
from assurance.dynamics import (
    ClosedLoopField,
    ControlAffineSystem,
    DecompositionFunction,
    close_loop,
)
from assurance.intervals import IntervalVector, corner_points
from assurance.reachability import CoordinateThresholdSet, sample_in_set
from core.defs import DEFAULT_P, BoundingBoxMode
from core.exceptions import InvalidIncidenceExc
from core.logger import logger

# three carts in a line, edges (1, 2) and (2, 3)
DEFAULT_INCIDENCE = ((-1.0, 0.0), (1.0, -1.0), (0.0, 1.0))
DEFAULT_X0 = (-0.25, 0.0, 0.5, 0.25, 0.5)


def validate_incidence(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 2 or A.shape[1] < 1:
        raise InvalidIncidenceExc(f"Incidence matrix must be N x K with N >= 2, K >= 1, got shape {A.shape}")
    for k, column in enumerate(A.T):
        plus = np.count_nonzero(column == 1.0)
        minus = np.count_nonzero(column == -1.0)
        if plus != 1 or minus != 1 or np.count_nonzero(column) != 2:
            raise InvalidIncidenceExc(f"Column {k} of the incidence matrix must hold one +1 and one -1: {column}")
    return A


def incidence_parts(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=float)
    return np.where(A >= 0, A, 0.0), np.where(A < 0, A, 0.0)


@dataclass(eq=False)
class PlatoonConfig:
    N: int = 3
    A: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_INCIDENCE))
    beta: float = -1.0
    kappa: float = 2.0
    sigma: float = 0.5
    delta: float = 2.25
    W: IntervalVector = field(default_factory=lambda: IntervalVector.symmetric([0.1, 0.1, 0.1]))
    p: float = DEFAULT_P
    T_b: float = 1.0
    z_limit: float = 8.0
    alpha_gain: float = 1000.0
    sb_bound: BoundingBoxMode = BoundingBoxMode.EIGEN

    def __post_init__(self):
        self.A = validate_incidence(self.A)
        self.sb_bound = BoundingBoxMode(self.sb_bound)
        if self.A.shape[0] != self.N:
            raise InvalidIncidenceExc(f"Incidence matrix has {self.A.shape[0]} rows for N={self.N} vehicles")
        if self.W.n != self.N:
            raise ValueError(f"Disturbance box has dimension {self.W.n}, expected N={self.N}")
        for name in ("kappa", "sigma", "delta", "p", "z_limit", "alpha_gain"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.beta > 0:
            raise ValueError(f"Friction coefficient beta must be <= 0, got {self.beta}")
        if self.T_b < 0:
            raise ValueError(f"Backup horizon must be non-negative, got {self.T_b}")

    @property
    def K(self) -> int:
        return self.A.shape[1]

    @property
    def n(self) -> int:
        return self.N + self.K


def lyapunov_matrix(cfg: PlatoonConfig) -> np.ndarray:
    A, beta, ks = cfg.A, cfg.beta, cfg.kappa * cfg.sigma
    top = np.hstack([ks * np.eye(cfg.N) + A @ A.T, -beta * A])
    bottom = np.hstack([-beta * A.T, (ks ** 2 + beta ** 2) * np.eye(cfg.K) + ks * A.T @ A])
    return np.vstack([top, bottom])


def linearization(cfg: PlatoonConfig) -> np.ndarray:
    """Jacobian of the backup closed loop at the origin."""
    A = cfg.A
    top = np.hstack([cfg.beta * np.eye(cfg.N), -cfg.kappa * cfg.sigma * A])
    bottom = np.hstack([A.T, np.zeros((cfg.K, cfg.K))])
    return np.vstack([top, bottom])


def sb_bounding_box(P: np.ndarray, delta: float, mode: BoundingBoxMode = BoundingBoxMode.EIGEN) -> IntervalVector:
    """Symmetric box around {s : s^T P s <= delta}."""
    if BoundingBoxMode(mode) == BoundingBoxMode.EIGEN:
        radius = np.full(P.shape[0], np.sqrt(delta / np.linalg.eigvalsh(P).min()))
    else:
        radius = np.sqrt(delta * np.diag(np.linalg.inv(P)))
    return IntervalVector.symmetric(radius)


@dataclass(frozen=True, eq=False)
class Platoon:
    cfg: PlatoonConfig
    system: ControlAffineSystem
    policy: BackupPolicy
    decomposition: DecompositionFunction
    reverse_decomposition: DecompositionFunction
    closed_loop: ClosedLoopField
    P: np.ndarray
    eigenvalues: np.ndarray
    unsafe_set: CoordinateThresholdSet

    @property
    def positive_definite(self) -> bool:
        return bool(self.eigenvalues.min() > 0)

    @property
    def sb_box(self) -> IntervalVector:
        return self.policy.sb_box

    @property
    def z_extent(self) -> float:
        """Largest |z_i| reachable inside the S_b bounding box."""
        return float(self.sb_box.upper[self.cfg.N:].max())

    @property
    def sb_disjoint_from_unsafe(self) -> bool:
        return self.z_extent < self.cfg.z_limit

    def V(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.einsum("...i,ij,...j->...", s, self.P, s)


def build_platoon(cfg: Optional[PlatoonConfig] = None) -> Platoon:
    cfg = cfg or PlatoonConfig()
    N, K, n = cfg.N, cfg.K, cfg.n
    A = cfg.A
    A_plus, A_minus = incidence_parts(A)
    beta, kappa, sigma, delta = cfg.beta, cfg.kappa, cfg.sigma, cfg.delta

    G1 = -np.vstack([A, np.zeros((K, K))])
    G2 = np.vstack([np.eye(N), np.zeros((K, N))])

    def f(s):
        s = np.asarray(s, dtype=float)
        x = s[..., :N]
        return np.concatenate([beta * x, x @ A], axis=-1)

    def g1(s):
        return np.broadcast_to(G1, np.shape(s)[:-1] + G1.shape)

    def g2(s):
        return np.broadcast_to(G2, np.shape(s)[:-1] + G2.shape)

    def u_b(s):
        return kappa * np.tanh(sigma * np.asarray(s, dtype=float)[..., N:])

    P = lyapunov_matrix(cfg)
    eigenvalues = np.linalg.eigvalsh(P)
    if eigenvalues.min() <= 0:
        logger.warning(f"Lyapunov matrix is not positive definite: min eigenvalue {eigenvalues.min():.6g}")

    def h(s):
        s = np.asarray(s, dtype=float)
        return delta - np.einsum("...i,ij,...j->...", s, P, s)

    def grad_h(s):
        return -2.0 * np.asarray(s, dtype=float) @ P

    def d(s, w, s_hat, w_hat):
        x, z = s[..., :N], s[..., N:]
        x_hat, z_hat = s_hat[..., :N], s_hat[..., N:]
        dx = (beta * x + w
              - kappa * np.tanh(sigma * z) @ A_minus.T
              - kappa * np.tanh(sigma * z_hat) @ A_plus.T)
        dz = x @ A_plus + x_hat @ A_minus
        return np.concatenate([dx, dz], axis=-1)

    # decomposition of the time-reversed closed loop -F(s, w)
    def d_reverse(s, w, s_hat, w_hat):
        x, z = s[..., :N], s[..., N:]
        x_hat, z_hat = s_hat[..., :N], s_hat[..., N:]
        dx = (-beta * x - w_hat
              + kappa * np.tanh(sigma * z) @ A_plus.T
              + kappa * np.tanh(sigma * z_hat) @ A_minus.T)
        dz = -(x @ A_minus) - (x_hat @ A_plus)
        return np.concatenate([dx, dz], axis=-1)

    system = ControlAffineSystem(
        n=n, m=K, n_w=N, f=f, g1=g1, g2=g2,
        statespace=IntervalVector.unbounded(n), W=cfg.W,
    )
    sb_box = sb_bounding_box(P, delta, cfg.sb_bound)
    policy = BackupPolicy(
        u_b=u_b,
        h=BarrierFunction(h=h, grad_h=grad_h, concavity_domain=sb_box.inflate(1.0)),
        alpha=cubic_alpha(cfg.alpha_gain),
        T_b=cfg.T_b,
        sb_box=sb_box,
    )
    platoon = Platoon(
        cfg=cfg,
        system=system,
        policy=policy,
        decomposition=DecompositionFunction(d, n, N),
        reverse_decomposition=DecompositionFunction(d_reverse, n, N),
        closed_loop=close_loop(system, u_b),
        P=P,
        eigenvalues=eigenvalues,
        unsafe_set=CoordinateThresholdSet(np.arange(N, n), cfg.z_limit),
    )
    logger.debug(
        f"Platoon built: N={N}, K={K}, lambda_min(P)={eigenvalues.min():.6g}, "
        f"S_b z extent={platoon.z_extent:.4f} (limit {cfg.z_limit})"
    )
    return platoon


@dataclass
class InvarianceViolation:
    state: list
    disturbance: list
    margin: float

    def to_dict(self) -> dict:
        return {"state": self.state, "disturbance": self.disturbance, "margin": self.margin}


@dataclass
class InvarianceReport:
    samples: int
    boundary_samples: int
    worst_margin: float
    worst_margin_zero_disturbance: float
    min_boundary_gradient: float
    violation_count: int = 0
    violations: List[InvarianceViolation] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and self.min_boundary_gradient > 0

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "boundary_samples": self.boundary_samples,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "worst_margin_zero_disturbance": self.worst_margin_zero_disturbance,
            "min_boundary_gradient": self.min_boundary_gradient,
            "violation_count": self.violation_count,
            "violations": [v.to_dict() for v in self.violations],
        }


def _boundary_points(policy: BackupPolicy, rng: np.random.Generator, count: int, depth: float) -> np.ndarray:
    """Points just inside {h = 0} found by bisection along random rays from the box center."""
    box = policy.sb_box
    center = box.center
    if count == 0 or policy.h(center) <= 0:
        return np.empty((0, box.n))
    directions = rng.normal(size=(count, box.n))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    low = np.zeros(count)
    high = np.full(count, 2.0 * float(np.linalg.norm(box.width)) + 1.0)
    for _ in range(60):
        mid = 0.5 * (low + high)
        inside = policy.h(center + mid[:, None] * directions) >= 0
        low = np.where(inside, mid, low)
        high = np.where(inside, high, mid)
    radius = low * (1.0 - depth * rng.uniform(size=count))
    return center + radius[:, None] * directions


def verify_backup_invariance(
        policy: BackupPolicy,
        F_b: ClosedLoopField,
        n_samples: int,
        seed: int,
        boundary_fraction: float = 0.2,
        boundary_depth: float = 1e-3,
        report_limit: int = 100,
) -> InvarianceReport:
    """
    Sampled check of grad_h(x) . F_b(x, w) >= -alpha(h(x)) on S_b at every
    disturbance vertex w. A share of the samples sits just inside {h = 0}.
    """
    rng = np.random.default_rng(seed)
    n_boundary = int(round(boundary_fraction * n_samples))
    interior = sample_in_set(policy.sb_box, policy.in_sb, n_samples - n_boundary, rng)
    boundary = _boundary_points(policy, rng, n_boundary, boundary_depth)
    states = np.concatenate([interior, boundary])

    W = F_b.system.W
    vertices = corner_points(W.lower, W.upper)
    grad = policy.h.grad_h(states)
    rate = np.asarray(policy.alpha(policy.h(states)), dtype=float)
    # (samples, vertices)
    flows = F_b(states[:, None, :], np.broadcast_to(vertices, (states.shape[0],) + vertices.shape))
    margins = np.einsum("svi,si->sv", flows, grad) + rate[:, None]
    zero_margins = np.einsum("si,si->s", F_b(states, np.zeros((states.shape[0], W.n))), grad) + rate

    violations = [
        InvarianceViolation(states[s].tolist(), vertices[v].tolist(), float(margins[s, v]))
        for s, v in zip(*np.nonzero(margins < 0))
    ]
    boundary_grad = np.linalg.norm(policy.h.grad_h(boundary), axis=-1) if boundary.size else np.array([np.inf])
    report = InvarianceReport(
        samples=states.shape[0],
        boundary_samples=boundary.shape[0],
        worst_margin=float(margins.min()) if margins.size else np.inf,
        worst_margin_zero_disturbance=float(zero_margins.min()) if zero_margins.size else np.inf,
        min_boundary_gradient=float(boundary_grad.min()),
        violation_count=len(violations),
        violations=violations[:report_limit],
    )
    if violations:
        logger.warning(f"Backup invariance: {len(violations)} violations, worst margin {report.worst_margin:.6g}")
    else:
        logger.info(f"Backup invariance holds on {report.samples} samples, worst margin {report.worst_margin:.6g}")
    return report
