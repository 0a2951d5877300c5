"""
Closed-loop simulation of the platoon under one controller mode.
"""
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from assurance.asif import AssuranceFilter, FilterDecision, vanilla_cbf_step
from assurance.dynamics import eval_system
from assurance.systems.platoon import Platoon, build_platoon
from core.config import SimulationConfig
from core.defs import ControllerMode, FilterStatus
from core.exceptions import SimulationCancelledExc
from core.logger import logger
from core.signals import desired_input_signal, disturbance_signal
from core.stat_tracker import FilterStatTracker

try:
    from tqdm import tqdm
except Exception:
    tqdm = None


@dataclass(eq=False)
class TrajectoryRecord:
    """One row per simulation step; state columns are (x, z)."""
    N: int
    times: np.ndarray
    states: np.ndarray
    u_applied: np.ndarray
    u_desired: np.ndarray
    disturbances: np.ndarray
    psi: np.ndarray
    h: np.ndarray
    status: List[FilterStatus]
    mode: Optional[ControllerMode] = None
    unsafe: bool = False
    error: Optional[str] = None
    diagnostics: List[Optional[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return self.times.size

    @property
    def x(self) -> np.ndarray:
        return self.states[:, :self.N]

    @property
    def z(self) -> np.ndarray:
        return self.states[:, self.N:]

    @property
    def exited_sb(self) -> bool:
        return bool(np.min(self.h) < 0)

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

    def status_share(self, status: FilterStatus) -> float:
        return sum(1 for s in self.status if s == status) / max(len(self.status), 1)


class Simulator:

    def __init__(
            self,
            cfg: SimulationConfig,
            platoon: Optional[Platoon] = None,
            tracker: Optional[FilterStatTracker] = None,
            progress_bar: bool = False,
    ):
        self.cfg = cfg
        self.platoon = platoon or build_platoon(cfg.platoon)
        self.tracker = tracker
        self.progress_bar = progress_bar
        self.desired = desired_input_signal(cfg.desired_input, self.platoon.system.m)
        self.disturbance = disturbance_signal(cfg.seed, self.platoon.system.W, cfg.horizon, cfg.disturbance_segment)
        self.filter = AssuranceFilter(
            self.platoon.system,
            self.platoon.policy,
            self.platoon.decomposition,
            p=cfg.platoon.p,
            dt_embed=cfg.dt_embed,
            gradient_method=cfg.gradient_method,
        )

    def _decide(self, mode: ControllerMode, x: np.ndarray, u_d: np.ndarray) -> FilterDecision:
        policy = self.platoon.policy
        if mode == ControllerMode.ASIF:
            return self.filter.step(x, u_d)
        if mode == ControllerMode.VANILLA_CBF:
            return vanilla_cbf_step(x, u_d, policy.h, policy.alpha, self.platoon.system, u_b=policy.u_b)
        if mode == ControllerMode.BACKUP_ONLY:
            return FilterDecision(np.asarray(policy.u_b(x), dtype=float), FilterStatus.BACKUP_FALLBACK, np.nan)
        return FilterDecision(u_d.copy(), FilterStatus.RAW, np.nan)

    def run(self, mode: Optional[ControllerMode] = None) -> TrajectoryRecord:
        cfg = self.cfg
        mode = ControllerMode(mode or cfg.controller_mode)
        system = self.platoon.system
        rows = cfg.rows
        n, m, n_w = system.n, system.m, system.n_w

        times = cfg.dt * np.arange(rows)
        states = np.full((rows, n), np.nan)
        u_applied = np.full((rows, m), np.nan)
        u_desired = np.full((rows, m), np.nan)
        disturbances = np.full((rows, n_w), np.nan)
        psi = np.full(rows, np.nan)
        h = np.full(rows, np.nan)
        status: List[FilterStatus] = []
        diagnostics: List[Optional[str]] = []
        unsafe = False
        error = None

        logger.info(f"Simulating {cfg.horizon}s at dt={cfg.dt} in {mode.value} mode (seed {cfg.seed})")
        bar = None
        if self.progress_bar and tqdm is not None:
            bar = tqdm(total=rows, desc=mode.value, leave=False, dynamic_ncols=True)

        x = np.array(cfg.x0, dtype=float)
        filled = 0
        try:
            for k in range(rows):
                t = times[k]
                u_d = np.asarray(self.desired(t), dtype=float)
                w = self.disturbance(t)
                started = time.perf_counter()
                decision = self._decide(mode, x, u_d)
                elapsed = time.perf_counter() - started

                states[k], u_applied[k], u_desired[k], disturbances[k] = x, decision.u, u_d, w
                psi[k] = decision.psi if mode == ControllerMode.ASIF else np.nan
                h[k] = float(self.platoon.policy.h(x))
                status.append(decision.status)
                diagnostics.append(decision.diagnostic)
                filled = k + 1
                if bar:
                    bar.update(1)

                if self.platoon.unsafe_set.contains(x):
                    if not unsafe:
                        logger.warning(f"Unsafe state entered at t={t:.2f}: {x.tolist()}")
                    unsafe = True
                    if self.tracker:
                        self.tracker.add_unsafe_step()
                if self.tracker:
                    self.tracker.add_decision(decision.status, decision.diagnostic)
                    self.tracker.add_controller_time(elapsed)
                    self.tracker.add_psi(psi[k])
                    self.tracker.add_h(h[k])

                if k == rows - 1:
                    break
                with np.errstate(over="ignore", invalid="ignore"):
                    x = x + cfg.dt * eval_system(system, x, decision.u, w)
                if not np.isfinite(x).all():
                    error = f"non-finite state at t={times[k + 1]:.4f}"
                    logger.warning(f"Simulation stopped: {error}")
                    if self.tracker:
                        self.tracker.add_error(error)
                    break
        except KeyboardInterrupt as e:
            raise SimulationCancelledExc(f"Simulation cancelled after {filled} of {rows} steps") from e
        finally:
            if bar:
                bar.close()

        record = TrajectoryRecord(
            N=self.platoon.cfg.N,
            times=times[:filled],
            states=states[:filled],
            u_applied=u_applied[:filled],
            u_desired=u_desired[:filled],
            disturbances=disturbances[:filled],
            psi=psi[:filled],
            h=h[:filled],
            status=status,
            mode=mode,
            unsafe=unsafe,
            error=error,
            diagnostics=diagnostics,
        )
        logger.info(
            f"Simulation finished: {filled} rows, max |z|={record.max_abs_z:.4f}, "
            f"min h={np.min(record.h):.4f}, unsafe={unsafe}"
        )
        return record


def run_simulation(
        cfg: SimulationConfig,
        platoon: Optional[Platoon] = None,
        mode: Optional[ControllerMode] = None,
        tracker: Optional[FilterStatTracker] = None,
        progress_bar: bool = False,
) -> TrajectoryRecord:
    return Simulator(cfg, platoon, tracker, progress_bar).run(mode)
