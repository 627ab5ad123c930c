"""evolve: (xi, eps) 궤적 CSV와 거시 극한 보고서."""

import logging

from ..services.asymptotics import limit_modes
from ..services.macro_evolution import TRAJECTORY_COLUMNS, check_macroscopic_limit
from ..services.reporting import write_csv, write_json
from .common import build_macro_operator, progress_logger, run_directory

log = logging.getLogger(__name__)


def run(config, out=None):
    directory = run_directory(config, out)
    operator = build_macro_operator(config)
    m = config.macro
    tolerances = config.merged_tolerances
    report = check_macroscopic_limit(
        operator,
        m.xi,
        m.epsilon,
        seed=m.seed,
        n_times=m.n_times,
        eta_bar=config.eta_bar,
        limit=limit_modes(operator),
        rotation_angle=m.direction_angle,
        progress_callback=progress_logger(f"{config.name} evolve"),
    )
    for (i, j), trajectory in sorted(report.trajectories.items()):
        write_csv(
            directory / f"trajectory_xi{i}_eps{j}.csv", TRAJECTORY_COLUMNS, trajectory.rows()
        )
    data = report.as_dict(tolerances)
    data["name"] = config.name
    data["seed"] = m.seed
    write_json(directory / "limit_report.json", data)
    failed = sorted(key for key, ok in data["checks"].items() if not ok)
    if failed:
        log.warning("evolve %s: failed checks %s", config.name, failed)
    return data["passed"], data
