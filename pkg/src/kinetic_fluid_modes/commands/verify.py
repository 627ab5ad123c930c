"""verify: 파라미터 세트마다 전체 검증을 돌리고 통과/실패 표를 만든다."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor

from ..config import PARAMETER_SET_NAMES, apply_fast, parameter_set
from ..errors import KineticModesError
from ..services.collision import verify_amplitude_estimates
from ..services.reporting import write_csv, write_json
from . import evolve, scaling, spectrum
from .common import build_operator, build_spec, progress_logger, run_directory

log = logging.getLogger(__name__)

TABLE_COLUMNS = ["set", "stage", "check", "passed"]


def _stage_rows(name, stage, checks):
    return [[name, stage, key, bool(ok)] for key, ok in sorted(checks.items())]


def _amplitude_checks(report):
    return {
        family.name: family.passed
        for family in report.families
        if family.passed is not None
    }


def verify_config(config, out=None):
    """한 세트의 모든 단계. 수치 실패는 표의 error 행으로 남기고 다음 세트로 넘어간다."""
    directory = run_directory(config, out)
    tolerances = config.merged_tolerances
    started = time.perf_counter()
    rows, stages = [], {}
    try:
        amplitude = verify_amplitude_estimates(
            build_spec(config),
            config.amplitude.r_values,
            n_radial=config.amplitude.n_radial,
            tolerance=tolerances["amplitude_slope"],
            progress_callback=progress_logger(f"{config.name} amplitude"),
        )
        write_json(directory / "amplitude_report.json", amplitude.as_dict())
        stages["amplitude"] = _amplitude_checks(amplitude)

        operator = build_operator(config)
        summary, branches = spectrum.track(config, out, operator)
        stages["spectrum"] = summary["checks"]
        _, report = scaling.run(config, out, operator, branches)
        stages["scaling"] = report["checks"]
        _, limit = evolve.run(config, out)
        stages["evolve"] = limit["checks"]
        error = None
    except KineticModesError as e:
        log.error("verify %s stopped: %s: %s", config.name, type(e).__name__, e)
        error = f"{type(e).__name__}: {e}"

    for stage, checks in stages.items():
        rows.extend(_stage_rows(config.name, stage, checks))
    if error is not None:
        rows.append([config.name, "error", error, False])
    passed = error is None and all(row[3] for row in rows)

    write_csv(directory / "verify_table.csv", TABLE_COLUMNS, rows)
    write_json(
        directory / "verify_report.json",
        {"name": config.name, "stages": stages, "error": error, "passed": passed},
    )
    log.info("verify %s: passed=%s (%.1f s)", config.name, passed, time.perf_counter() - started)
    return passed, rows


def _verify_named(name, fast, out):
    config = parameter_set(name)
    if fast:
        config = apply_fast(config)
    return verify_config(config, out)


def run(config=None, out=None, set_names=None, fast=False, workers=1):
    """config가 있으면 그 하나만, 없으면 set_names (기본: 기본 제공 세트 전부)."""
    if config is not None:
        passed, _ = verify_config(config, out)
        return passed

    names = list(set_names or PARAMETER_SET_NAMES)
    for name in names:
        parameter_set(name)
    if workers > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                _verify_named, names, [fast] * len(names), [out] * len(names)
            ))
    else:
        results = [_verify_named(name, fast, out) for name in names]

    for name, (passed, _) in zip(names, results):
        log.info("%-12s %s", name, "PASS" if passed else "FAIL")
    return all(passed for passed, _ in results)
