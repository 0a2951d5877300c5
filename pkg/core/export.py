import io
import json
from pathlib import Path
from typing import List, Optional

import aiofiles
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from assurance.reachability import ReachTube  # noqa: E402
from core.defs import FilterStatus  # noqa: E402
from core.logger import logger  # noqa: E402
from core.simulator import TrajectoryRecord  # noqa: E402

SIGNIFICANT_DIGITS = 9


def csv_header(record: TrajectoryRecord) -> List[str]:
    K = record.states.shape[1] - record.N
    m = record.u_applied.shape[1]
    n_w = record.disturbances.shape[1]
    return (
        ["time"]
        + [f"x{i + 1}" for i in range(record.N)]
        + [f"z{i + 1}" for i in range(K)]
        + [f"u_applied{i + 1}" for i in range(m)]
        + [f"u_desired{i + 1}" for i in range(m)]
        + [f"w{i + 1}" for i in range(n_w)]
        + ["psi", "h", "status"]
    )


def _fmt(value: float) -> str:
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def render_csv(record: TrajectoryRecord) -> str:
    lines = [",".join(csv_header(record))]
    for k in range(len(record)):
        numbers = np.concatenate([
            [record.times[k]], record.states[k], record.u_applied[k], record.u_desired[k],
            record.disturbances[k], [record.psi[k], record.h[k]],
        ])
        lines.append(",".join([_fmt(v) for v in numbers] + [FilterStatus(record.status[k]).value]))
    return "\n".join(lines) + "\n"


async def export_csv(record: TrajectoryRecord, path: Path) -> Path:
    if not len(record):
        raise ValueError("Refusing to export an empty trajectory record")
    path = Path(path)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as file:
        await file.write(render_csv(record))
    logger.info(f"Trajectory written to {path}")
    return path


def load_csv(path: Path) -> TrajectoryRecord:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    N = sum(1 for name in header if name.startswith("x"))
    K = sum(1 for name in header if name.startswith("z"))
    m = sum(1 for name in header if name.startswith("u_applied"))
    n_w = sum(1 for name in header if name.startswith("w"))
    rows = [line.split(",") for line in lines[1:]]
    numbers = np.array([[float(v) for v in row[:-1]] for row in rows]).reshape(len(rows), len(header) - 1)
    bounds = np.cumsum([1, N + K, m, m, n_w, 1])
    times, states, u_applied, u_desired, disturbances, psi, h = np.split(numbers, bounds, axis=1)
    return TrajectoryRecord(
        N=N,
        times=times[:, 0],
        states=states,
        u_applied=u_applied,
        u_desired=u_desired,
        disturbances=disturbances,
        psi=psi[:, 0],
        h=h[:, 0],
        status=[FilterStatus(row[-1]) for row in rows],
    )


def render_plot(
        record: TrajectoryRecord,
        z_limit: float,
        sb_extent: Optional[float] = None,
        nominal: Optional[TrajectoryRecord] = None,
        backup_tube: Optional[ReachTube] = None,
) -> bytes:
    """Two-panel SVG: displacements with the unsafe limits, applied vs desired inputs."""
    fig, (ax_z, ax_u) = plt.subplots(nrows=2, ncols=1, sharex=True, figsize=(8, 6))
    try:
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for i in range(record.z.shape[1]):
            color = colors[i % len(colors)]
            ax_z.plot(record.times, record.z[:, i], color=color, label=f"z{i + 1}")
            if nominal is not None:
                ax_z.plot(nominal.times, nominal.z[:, i], color=color, linestyle=":", label=f"z{i + 1} nominal")
            if backup_tube is not None:
                valid = backup_tube.valid
                ax_z.fill_between(
                    backup_tube.times[valid],
                    backup_tube.lower[valid, record.N + i],
                    backup_tube.upper[valid, record.N + i],
                    color=color, alpha=0.2, linewidth=0,
                )
        for sign in (1, -1):
            ax_z.axhline(sign * z_limit, color="red", linestyle="--", linewidth=1)
        if sb_extent is not None and len(record):
            ax_z.errorbar(
                [record.times[-1]], [0.0], yerr=[[sb_extent], [sb_extent]],
                fmt="none", ecolor="black", capsize=4, label="S_b extent",
            )
        ax_z.set_ylabel("displacement")
        ax_z.legend(loc="upper left", fontsize=7, ncol=2)

        for i in range(record.u_applied.shape[1]):
            color = colors[i % len(colors)]
            ax_u.plot(record.times, record.u_applied[:, i], color=color, label=f"u{i + 1} applied")
            ax_u.plot(record.times, record.u_desired[:, i], color=color, linestyle="--", label=f"u{i + 1} desired")
        ax_u.set_xlabel("time (s)")
        ax_u.set_ylabel("input")
        ax_u.legend(loc="upper left", fontsize=7, ncol=2)

        buffer = io.BytesIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
        return buffer.getvalue()
    finally:
        plt.close(fig)


async def export_plot(
        record: TrajectoryRecord,
        path: Path,
        z_limit: float,
        sb_extent: Optional[float] = None,
        nominal: Optional[TrajectoryRecord] = None,
        backup_tube: Optional[ReachTube] = None,
) -> Path:
    if not len(record):
        raise ValueError("Refusing to plot an empty trajectory record")
    path = Path(path)
    content = render_plot(record, z_limit, sb_extent, nominal, backup_tube)
    async with aiofiles.open(path, "wb") as file:
        await file.write(content)
    logger.info(f"Figure written to {path}")
    return path


def _to_builtin(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


async def export_json(data: dict, path: Path) -> Path:
    path = Path(path)
    async with aiofiles.open(path, "w", encoding="utf-8") as file:
        await file.write(json.dumps(data, indent=2, default=_to_builtin))
    logger.info(f"Report written to {path}")
    return path
