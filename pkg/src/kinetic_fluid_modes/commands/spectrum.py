"""spectrum: 네 분기를 추적하고 branch CSV와 요약 JSON을 쓴다."""

import logging

from ..services.reporting import write_branch_csv, write_json
from ..services.spectral import radial_sensitivity, track_branches
from .common import build_operator, eta_grid, progress_logger, run_directory

log = logging.getLogger(__name__)

# 꼬리 민감도 비교에 쓰는 대체 반경 맵
_ALTERNATE_MAP = {"algebraic": "logarithmic", "tangent": "algebraic", "logarithmic": "algebraic"}


def spectrum_summary(config, operator, branches):
    tolerances = config.merged_tolerances
    cross = max(s.cross_validation for b in branches.branches.values() for s in b.samples)
    orthogonality = max(d["orthogonality_defect"] for d in branches.diagnostics)
    g = config.grid
    sensitivity = radial_sensitivity(
        operator, config.spectral.eta_max, _ALTERNATE_MAP[g.radial_map], g.n_radial, g.n_angular
    )
    checks = {
        "census": True,
        "cross_validation": cross <= tolerances["cross_validation"],
    }
    return {
        "name": config.name,
        "equilibrium": branches.spec_label,
        "acoustic_speed": branches.acoustic_speed,
        "n_eta": len(branches.etas),
        "eta_range": [float(branches.etas.min()), float(branches.etas.max())],
        "endpoints": {
            label: branch.endpoint().mu for label, branch in branches.branches.items()
        },
        "max_cross_validation": cross,
        "max_orthogonality_defect": orthogonality,
        "radial_sensitivity": {
            "map": _ALTERNATE_MAP[g.radial_map],
            "eta": config.spectral.eta_max,
            "relative_change": sensitivity,
        },
        "checks": checks,
        "passed": all(checks.values()),
    }


def track(config, out=None, operator=None):
    """분기를 추적하고 파일을 쓴 뒤 (요약, BranchSet)을 돌려준다. CountMismatch는 전파된다."""
    directory = run_directory(config, out)
    if operator is None:
        operator = build_operator(config)
    s = config.spectral
    branches = track_branches(
        operator, eta_grid(s), s.trust_factor, s.r_bar, progress_logger(f"{config.name} spectrum")
    )
    for branch in branches.branches.values():
        write_branch_csv(directory, branch)
    summary = spectrum_summary(config, operator, branches)
    write_json(directory / "spectrum_summary.json", summary)
    log.info("spectrum %s: passed=%s", config.name, summary["passed"])
    return summary, branches


def run(config, out=None):
    summary, _ = track(config, out)
    return summary["passed"], summary
