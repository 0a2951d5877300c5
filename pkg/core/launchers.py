import asyncio
from pathlib import Path
from typing import Optional

import numpy as np

from assurance.dynamics import check_decomposition
from assurance.intervals import IntervalVector
from assurance.reachability import (
    ReachTube,
    check_assumption1,
    check_containment,
    forward_overapprox,
    monte_carlo_endpoints,
)
from assurance.systems.platoon import Platoon, build_platoon, verify_backup_invariance
from core.config import Config
from core.defs import EXIT_OK, EXIT_VERIFICATION_FAILED, ControllerMode
from core.export import export_csv, export_json, export_plot
from core.logger import logger
from core.simulator import TrajectoryRecord, run_simulation
from core.stat_tracker import stat_tracker
from core.utils import (
    assumption_table,
    containment_table,
    create_dir_if_not_exists,
    decomposition_table,
    invariance_table,
    print_colorized,
    print_summary,
    tube_csv,
)


def _backup_bounds(platoon: Platoon, record: TrajectoryRecord, dt_embed: float) -> Optional[ReachTube]:
    """Backup-policy embedding tube from the terminal state over [T, T + T_b]."""
    final = record.states[-1]
    if not np.isfinite(final).all():
        return None
    tube = forward_overapprox(
        platoon.decomposition, platoon.system.W, IntervalVector.degenerate(final),
        platoon.policy.T_b, dt_embed,
    )
    return ReachTube(tube.times + record.times[-1], tube.lower, tube.upper, tube.valid)


async def simulate(conf: Config) -> int:
    sim = conf.simulation
    platoon = build_platoon(sim.platoon)
    print_summary(sim, platoon)

    stat_tracker.reset()
    record = run_simulation(sim, platoon, tracker=stat_tracker, progress_bar=conf.progress_bar)
    nominal = None
    if sim.nominal_overlay and sim.controller_mode != ControllerMode.DESIRED_ONLY:
        nominal = run_simulation(sim, platoon, mode=ControllerMode.DESIRED_ONLY)

    output = sim.output_path
    create_dir_if_not_exists(output.parent)
    await asyncio.gather(
        export_csv(record, output.with_suffix(".csv")),
        export_plot(
            record,
            output.with_suffix(".svg"),
            z_limit=sim.platoon.z_limit,
            sb_extent=platoon.z_extent,
            nominal=nominal,
            backup_tube=_backup_bounds(platoon, record, sim.dt_embed),
        ),
    )

    if conf.final_statistics_table:
        stat_tracker.show_summary()
    if record.unsafe or record.error:
        print_colorized("Result", f"unsafe={record.unsafe}, error={record.error}", warn=True)
        return EXIT_VERIFICATION_FAILED
    print_colorized("Result", f"safe, max |z| = {record.max_abs_z:.4f}, exited S_b: {record.exited_sb}")
    return EXIT_OK


async def verify(conf: Config, json_path: Optional[Path] = None) -> int:
    sim = conf.simulation
    vc = conf.verification
    platoon = build_platoon(sim.platoon)
    system, policy, F_b = platoon.system, platoon.policy, platoon.closed_loop
    state_box = IntervalVector.symmetric(np.full(system.n, vc.decomposition_box))

    decomposition = check_decomposition(
        platoon.decomposition, F_b, state_box, system.W, vc.decomposition_samples, vc.seed,
    )
    reverse = check_decomposition(
        platoon.reverse_decomposition, lambda x, w: -F_b(x, w), state_box, system.W,
        vc.decomposition_samples, vc.seed,
    )
    if not reverse.passed:
        logger.warning("Reversed decomposition failed its check; the backup horizon check runs falsification only")
    invariance = verify_backup_invariance(policy, F_b, vc.shell_samples, vc.seed)
    assumption = check_assumption1(
        F_b,
        platoon.reverse_decomposition if reverse.passed else None,
        policy.sb_box,
        policy.in_sb,
        platoon.unsafe_set,
        system.W,
        policy.T_b,
        sim.dt_embed,
        falsification_samples=vc.falsification_samples,
        seed=vc.seed,
        segment=sim.disturbance_segment,
    )
    x0 = np.array(sim.x0)
    tube = forward_overapprox(platoon.decomposition, system.W, IntervalVector.degenerate(x0), policy.T_b, sim.dt_embed)
    rollouts = monte_carlo_endpoints(
        F_b, x0, system.W, policy.T_b, sim.dt_embed, vc.monte_carlo_samples, vc.seed,
        segment=sim.disturbance_segment,
    )
    containment = check_containment(tube, rollouts)

    for table in (
            decomposition_table(decomposition),
            invariance_table(invariance),
            assumption_table(assumption),
            containment_table(containment),
    ):
        print(table, end="\n\n")
    print_colorized("Lyapunov matrix eigenvalues", np.array2string(platoon.eigenvalues, precision=6),
                    warn=not platoon.positive_definite)

    passed = all((
        decomposition.passed,
        reverse.passed,
        invariance.passed,
        assumption.passed,
        containment.passed,
        platoon.positive_definite,
        platoon.sb_disjoint_from_unsafe,
    ))
    if json_path is not None:
        await export_json({
            "passed": passed,
            "positive_definite": platoon.positive_definite,
            "eigenvalues": platoon.eigenvalues,
            "sb_box": policy.sb_box.to_dict(),
            "sb_disjoint_from_unsafe": platoon.sb_disjoint_from_unsafe,
            "decomposition": decomposition.to_dict(),
            "reverse_decomposition": reverse.to_dict(),
            "backup_invariance": invariance.to_dict(),
            "backup_horizon": assumption.to_dict(),
            "containment": containment.to_dict(),
        }, json_path)
    print_colorized("Verification", "passed" if passed else "FAILED", warn=not passed)
    return EXIT_OK if passed else EXIT_VERIFICATION_FAILED


async def reach(conf: Config, horizon: float) -> int:
    sim = conf.simulation
    platoon = build_platoon(sim.platoon)
    tube = forward_overapprox(
        platoon.decomposition, platoon.system.W, IntervalVector.degenerate(np.array(sim.x0)),
        horizon, sim.dt_embed,
    )
    print(tube_csv(tube), end="")
    return EXIT_OK
