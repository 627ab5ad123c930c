"""가중 BGK 충돌 연산자 서비스.

L f = <v>^(-beta) (P f - f). P는 <·,·>_{-beta} 직교 사영이고
psi-gauge에서 L~ = K - 1, K = <v>^(-beta/2) P <v>^(beta/2), S = 0 이다.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..errors import GridMismatch, InsufficientRange
from .fitting import fit_power_law, loglog_slope
from .velocity_space import (
    GridFunction,
    build_grid,
    velocity_profile,
    weighted_norm,
)

log = logging.getLogger(__name__)

# (1, v1, (|v|^2-3)/2) 와 (v_perp)
BASIS_PROFILES = {0: ("one", "v1", "energy"), 1: ("v_perp",)}

AMPLITUDE_RADIAL_NODES = 256
AMPLITUDE_ANGULAR_NODES = 16
AMPLITUDE_MIN_SAMPLES = 4
AMPLITUDE_MIN_DECADES = 1.0
AMPLITUDE_SLOPE_TOL = 0.1


class ProjectionBasis:
    """한 sector의 null space를 <·,·>_{-beta}로 정규직교화한 기저."""

    def __init__(self, grid):
        self.grid = grid
        self.names = BASIS_PROFILES[grid.sector]
        beta = grid.spec.beta

        raw = np.column_stack([velocity_profile(grid, name).values.real for name in self.names])
        self.measure = grid.weights * grid.bracket(-beta)
        self.sqrt_weights = np.sqrt(self.measure)
        scaled = self.sqrt_weights[:, None] * raw
        _, triangular = np.linalg.qr(scaled)
        signs = np.where(np.diag(triangular) < 0.0, -1.0, 1.0)
        self.triangular = signs[:, None] * triangular
        self.gram = scaled.T @ scaled
        self.raw = raw
        # e = raw · R^{-1}
        self.matrix = linalg.solve_triangular(self.triangular, raw.T, trans="T").T
        self.scaled_matrix = self.sqrt_weights[:, None] * self.matrix
        self.functions = [GridFunction(grid, column) for column in self.matrix.T]

    @property
    def rank(self):
        return self.matrix.shape[1]

    def _check(self, f):
        if not self.grid.compatible(f.grid):
            raise GridMismatch("Function does not live on this projection basis' grid.")
        if f.gauge != 0.0:
            raise GridMismatch("Projection expects the phi-representation (gauge 0).")

    def coefficients(self, f):
        """c_k = <f, e_k>_{-beta}."""
        self._check(f)
        return (self.measure * f.values) @ self.matrix

    def combine(self, c):
        return GridFunction(self.grid, self.matrix @ np.asarray(c, dtype=complex))

    def project(self, f):
        return self.combine(self.coefficients(f))

    def to_moment_coordinates(self, c):
        """정규직교 계수 -> E 기저 (1, v1, (|v|^2-3)/2) 계수."""
        return linalg.solve_triangular(self.triangular, np.asarray(c, dtype=complex))

    def from_moment_coordinates(self, C):
        return self.triangular @ np.asarray(C, dtype=complex)


class CollisionOperator:
    """BGK 인스턴스: 스펙트럴 갭 1, 충돌 주파수 1, S = 0."""

    gap = 1.0
    collision_frequency = 1.0
    scattering = None

    def __init__(self, spec, grids):
        self.spec = spec
        self.grids = {}
        self.bases = {}
        for grid in grids:
            if grid.spec != spec:
                raise GridMismatch("All grids must share the operator's equilibrium.")
            self.grids[grid.sector] = grid
            self.bases[grid.sector] = ProjectionBasis(grid)

    @property
    def beta(self):
        return self.spec.beta

    def grid(self, sector):
        try:
            return self.grids[sector]
        except KeyError as e:
            raise GridMismatch(f"Operator has no grid for sector {sector}.") from e

    def basis(self, sector):
        self.grid(sector)
        return self.bases[sector]

    def _basis_for(self, f):
        basis = self.basis(f.sector)
        if not basis.grid.compatible(f.grid):
            raise GridMismatch("Function grid differs from the operator grid.")
        return basis

    def apply_projection(self, f):
        return self._basis_for(f).project(f)

    def apply_L(self, f):
        basis = self._basis_for(f)
        return (basis.project(f) - f) * f.grid.bracket(-self.beta)

    def compact_part(self, g):
        """K g = <v>^(-beta/2) P(<v>^(beta/2) g), g는 psi-gauge."""
        if g.gauge != -self.beta:
            raise GridMismatch(f"Expected psi-gauge {-self.beta}, got {g.gauge}.")
        basis = self._basis_for(g)
        return basis.project(g.with_gauge(0.0)).with_gauge(-self.beta)

    def apply_L_tilde(self, g):
        return self.compact_part(g) - g


def build_collision_operator(spec, n_radial, n_angular, radial_map="algebraic", radial_scale=1.0,
                             sectors=(0, 1)):
    grids = [build_grid(spec, n_radial, n_angular, s, radial_map, radial_scale) for s in sectors]
    log.info(
        "collision operator %s: map=%s sizes=%s",
        spec.label, radial_map, [g.size for g in grids],
    )
    return CollisionOperator(spec, grids)


def smoothstep(x):
    """C2 quintic smoothstep, [0, 1] 밖에서는 0/1."""
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)


def inner_cutoff(r, radius):
    """chi^1_R: |v| <= R에서 1, |v| >= 2R에서 0."""
    return 1.0 - smoothstep(r / radius - 1.0)


def annulus_cutoff(r, radius):
    """chi^2_R: |v| <= R, |v| >= 4R에서 0, 2R..3R에서 1."""
    x = r / radius
    return smoothstep(x - 1.0) * (1.0 - smoothstep(x - 3.0))


@dataclass
class AmplitudeFamily:
    name: str
    target_slope: float | None
    values: list
    fitted_slope: float | None = None
    r_squared: float | None = None
    resonant: bool = False
    sqrt_log_slope: float | None = None
    status: str = "ok"
    passed: bool | None = None

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class AmplitudeReport:
    spec_label: str
    r_values: list
    radii: list
    families: list = field(default_factory=list)

    @property
    def passed(self):
        return all(f.passed is not False for f in self.families)

    def as_dict(self):
        return {
            "equilibrium": self.spec_label,
            "r_values": list(self.r_values),
            "radii": list(self.radii),
            "families": [f.as_dict() for f in self.families],
            "passed": self.passed,
        }


def _amplitude_profiles(spec):
    """(이름, 프로파일 생성 함수, 목표 기울기, 공명 여부)."""
    a, b = spec.alpha, spec.beta
    gaussian = spec.is_gaussian
    head = 0.5 * (a + b) if not gaussian else None

    def target(offset):
        return None if gaussian else offset - head

    families = [
        ("chi1", lambda r, u, R: inner_cutoff(r, R), target(0.0), False),
        ("v1_chi1", lambda r, u, R: r * u * inner_cutoff(r, R), target(1.0), False),
        ("energy_chi1", lambda r, u, R: (r * r - 3.0) * inner_cutoff(r, R), target(2.0), False),
    ]
    resonant_k = None if gaussian else 0.5 * (a - b)
    ks = sorted({0.0, 1.0, 2.0} | ({resonant_k} if resonant_k is not None else set()))
    for k in ks:
        is_resonant = resonant_k is not None and math.isclose(k, resonant_k)
        slope = None if gaussian else k - 0.5 * (a - b)

        def profile(r, u, R, k=k):
            return r ** k * (1.0 + r * r) ** (0.5 * b) * annulus_cutoff(r, R)

        families.append((f"chi2_k{k:g}", profile, slope, is_resonant))
    return families


def verify_amplitude_estimates(spec, r_values, n_radial=AMPLITUDE_RADIAL_NODES,
                               n_angular=AMPLITUDE_ANGULAR_NODES, tolerance=AMPLITUDE_SLOPE_TOL,
                               progress_callback=None):
    """큰 속도에서의 충돌 진폭 ‖L(·)‖_{L²(<v>^beta M)}를 R마다 계산하고 기울기를 피팅한다.

    r_values는 평형 dilation 단위. 차단 함수 바깥 끝(4R)이 격자를 넘는 R은 NaN으로 남긴다.
    """
    r_values = sorted(float(R) for R in r_values)
    if len(r_values) < AMPLITUDE_MIN_SAMPLES:
        raise InsufficientRange(
            f"Amplitude check needs at least {AMPLITUDE_MIN_SAMPLES} radii, got {len(r_values)}."
        )
    if r_values[0] < 1.0:
        raise InsufficientRange("Cutoff radii must be >= 1.")
    if math.log10(r_values[-1] / r_values[0]) < AMPLITUDE_MIN_DECADES - 1e-9:
        raise InsufficientRange(f"Cutoff radii must span {AMPLITUDE_MIN_DECADES} decades.")

    operator = build_collision_operator(spec, n_radial, n_angular, "logarithmic", sectors=(0,))
    grid = operator.grid(0)
    radii = [spec.dilation * R for R in r_values]
    r_max = float(grid.r.max())
    report = AmplitudeReport(spec.label, r_values, radii)

    specs = _amplitude_profiles(spec)
    for idx, (name, builder, target, resonant) in enumerate(specs):
        values = []
        for R in radii:
            if 4.0 * R > r_max:
                values.append(math.nan)
                continue
            f = GridFunction(grid, builder(grid.r, grid.u, R))
            values.append(weighted_norm(operator.apply_L(f), spec.beta))
        family = AmplitudeFamily(name, target, values, resonant=resonant)
        _fit_family(family, radii, tolerance)
        report.families.append(family)
        if progress_callback:
            progress_callback(int(100 * (idx + 1) / len(specs)), name)
        log.debug("amplitude %s: slope=%s target=%s", name, family.fitted_slope, target)
    return report


def _fit_family(family, r_values, tolerance):
    floor = 1e-280
    pts = [(R, v) for R, v in zip(r_values, family.values) if v > floor]
    if family.target_slope is None:
        family.status = "super_polynomial"
        if len(pts) >= 2:
            family.fitted_slope, _, family.r_squared = loglog_slope(*zip(*pts))
        return
    fit = fit_power_law(pts, min_samples=AMPLITUDE_MIN_SAMPLES, min_decades=AMPLITUDE_MIN_DECADES)
    family.fitted_slope = fit.exponent
    family.r_squared = fit.r_squared
    if family.resonant:
        # 공명 k: (ln R)^{1/2} 상한과 비교
        logs = [(math.sqrt(math.log(R)), v) for R, v in pts if R > 1.0]
        family.sqrt_log_slope, _, _ = loglog_slope(*zip(*logs))
        family.status = "resonant"
        family.passed = family.sqrt_log_slope <= 1.0 + tolerance
    else:
        family.passed = abs(fit.exponent - family.target_slope) <= tolerance
