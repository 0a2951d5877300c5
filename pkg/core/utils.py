import os
from pathlib import Path

from terminaltables import AsciiTable

from assurance.dynamics import DecompositionReport
from assurance.reachability import AssumptionReport, ContainmentReport, ReachTube
from assurance.systems.platoon import InvarianceReport, Platoon
from core.config import SimulationConfig
from core.defs import AsciiCommands
from core.logger import logger


def create_dir_if_not_exists(path: Path):
    if not os.path.isdir(path):
        logger.info(f"Create directory: {path}")
        os.makedirs(path, exist_ok=True)


def print_colorized(prefix: str, data: str, warn: bool = False, end="\n"):
    if prefix:
        print(prefix, end=": ")
    print(AsciiCommands.COLORIZE_WARN.value if warn else AsciiCommands.COLORIZE_HIGHLIGHT.value, end="")
    print(data, end=(AsciiCommands.COLORIZE_DEFAULT.value + end))


def print_summary(cfg: SimulationConfig, platoon: Platoon):
    print("Ok, controller mode:", end=" ")
    print_colorized("", cfg.controller_mode.value, end=" ")
    print("seed:", end=" ")
    print_colorized("", str(cfg.seed))
    print("horizon:", end=" ")
    print_colorized("", f"{cfg.horizon}s", end=" | ")
    print("dt:", end=" ")
    print_colorized("", str(cfg.dt), end=" | ")
    print("T_b:", end=" ")
    print_colorized("", f"{cfg.platoon.T_b}s", end=" | ")
    print("p:", end=" ")
    print_colorized("", str(cfg.platoon.p))
    print_colorized(
        "Lyapunov matrix",
        "positive definite" if platoon.positive_definite else "NOT positive definite",
        warn=not platoon.positive_definite,
    )
    print_colorized(
        "S_b vs unsafe set",
        f"|z| <= {platoon.z_extent:.4f} < {cfg.platoon.z_limit}" if platoon.sb_disjoint_from_unsafe
        else f"S_b box reaches |z| = {platoon.z_extent:.4f} >= {cfg.platoon.z_limit}",
        warn=not platoon.sb_disjoint_from_unsafe,
    )


def _verdict(passed: bool) -> str:
    return "PASSED" if passed else "FAILED"


def decomposition_table(report: DecompositionReport) -> str:
    rows = [
        ['Decomposition Check', 'Value'],
        ['SAMPLES', report.samples],
        ['DIAGONAL VIOLATIONS', report.count("diagonal")],
        ['SIGN VIOLATIONS', report.count() - report.count("diagonal")],
        ['RESULT', _verdict(report.passed)],
    ]
    return AsciiTable(rows).table


def invariance_table(report: InvarianceReport) -> str:
    rows = [
        ['Backup Invariance', 'Value'],
        ['SAMPLES', report.samples],
        ['NEAR BOUNDARY', report.boundary_samples],
        ['WORST MARGIN', f"{report.worst_margin:.6g}"],
        ['WORST MARGIN (w = 0)', f"{report.worst_margin_zero_disturbance:.6g}"],
        ['MIN BOUNDARY |grad h|', f"{report.min_boundary_gradient:.6g}"],
        ['VIOLATIONS', report.violation_count],
        ['RESULT', _verdict(report.passed)],
    ]
    return AsciiTable(rows).table


def assumption_table(report: AssumptionReport) -> str:
    rows = [
        ['Backup Horizon Check', 'Value'],
        ['T_b', report.T_b],
        ['UNSAFE SET', report.unsafe_description],
        ['TUBE VALID', report.tube_valid],
        ['TUBE DISJOINT', report.tube_disjoint],
        ['MIN MARGIN', f"{report.min_margin:.6g}"],
        ['FALSIFICATION SAMPLES', report.falsification_samples],
        ['COUNTEREXAMPLES', len(report.counterexamples)],
        ['VERDICT', report.verdict.value],
    ]
    return AsciiTable(rows).table


def containment_table(report: ContainmentReport) -> str:
    rows = [
        ['Tube Containment', 'Value'],
        ['HORIZON', report.horizon],
        ['SAMPLES', report.samples],
        ['CHECKED STEPS', report.checked_steps],
        ['ESCAPED STATES', report.violations],
        ['RESULT', _verdict(report.passed)],
    ]
    return AsciiTable(rows).table


def tube_csv(tube: ReachTube) -> str:
    n = tube.n
    header = ["time", "valid"] + [f"lower_{i}" for i in range(n)] + [f"upper_{i}" for i in range(n)]
    lines = [",".join(header)]
    for row in tube.to_rows():
        time, valid, *bounds = row
        lines.append(",".join([f"{time:.9g}", str(int(valid))] + [f"{b:.9g}" for b in bounds]))
    return "\n".join(lines) + "\n"
