"""scaling: 분기 피팅과 극한 상수를 scaling_report.json 으로 쓴다."""

import logging

from ..services.asymptotics import scaling_report
from ..services.reporting import write_json
from ..services.spectral import track_branches
from .common import build_operator, eta_grid, progress_logger, run_directory

log = logging.getLogger(__name__)


def run(config, out=None, operator=None, branches=None):
    directory = run_directory(config, out)
    if operator is None:
        operator = build_operator(config)
    if branches is None:
        s = config.spectral
        branches = track_branches(
            operator, eta_grid(s), s.trust_factor, s.r_bar,
            progress_logger(f"{config.name} scaling"),
        )
    report = scaling_report(operator, branches, config.merged_tolerances)
    report["name"] = config.name
    write_json(directory / "scaling_report.json", report)
    failed = sorted(key for key, ok in report["checks"].items() if not ok)
    if failed:
        log.warning("scaling %s: failed checks %s", config.name, failed)
    return report["passed"], report
