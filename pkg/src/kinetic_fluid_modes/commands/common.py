"""서브커맨드 공용 헬퍼: 연산자 생성, eta 격자, 진행 로그, 출력 디렉터리."""

import logging
from pathlib import Path

import numpy as np

from ..services.collision import build_collision_operator
from ..services.velocity_space import build_equilibrium

log = logging.getLogger(__name__)


def build_spec(config):
    eq = config.equilibrium
    return build_equilibrium(eq.kind, config.alpha, eq.beta)


def build_operator(config):
    """스펙트럼/스케일링용 연산자 (grid 섹션 해상도)."""
    g = config.grid
    return build_collision_operator(
        build_spec(config), g.n_radial, g.n_angular, g.radial_map, g.radial_scale
    )


def build_macro_operator(config):
    """거시 극한용 연산자. 반경 맵은 grid 섹션, 해상도는 macro 섹션을 따른다."""
    g, m = config.grid, config.macro
    return build_collision_operator(
        build_spec(config), m.n_radial, m.n_angular, g.radial_map, g.radial_scale
    )


def eta_grid(spectral):
    return np.geomspace(spectral.eta_max, spectral.eta_min, spectral.n_eta)


def progress_logger(name):
    def report(percent, message):
        log.info("[%s] %3d%% %s", name, percent, message)

    return report


def run_directory(config, out=None):
    return Path(out or config.output_dir) / config.name
