"""평형 분포, 축대칭 속도 격자, 가중 내적 서비스.

모든 적분은 (r, u = cos θ) 2D 격자 위의 가중합으로 계산한다.
가중치 W에는 표면 요소, 평형 밀도 M(r), 반경 변수변환 Jacobian,
방위각 적분(m=0: 2π, m=1: π)이 모두 들어 있다.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from ..errors import GridMismatch, NormalizationFailure, ParameterDomain

log = logging.getLogger(__name__)

EQUILIBRIUM_KINDS = ("polynomial", "gaussian")
RADIAL_MAPS = ("algebraic", "tangent", "logarithmic")
SECTORS = (0, 1)

MIN_NODES = 8
LOG_PANEL_NODES = 8
LOG_RADIUS_MIN = 1e-4
LOG_RADIUS_MAX_POLYNOMIAL = 1e7
LOG_RADIUS_MAX_GAUSSIAN = 40.0

DILATION_BRACKET = (1e-3, 1e3)
DILATION_XTOL = 1e-12
NORMALIZATION_TOL = 1e-10

_QUAD_BREAKPOINTS = (0.0, 1.0, 4.0, 16.0, 64.0, 256.0)
_AZIMUTHAL_FACTOR = {0: 2.0 * math.pi, 1: math.pi}


def bracket(r, k):
    """<v>^k = (1 + |v|^2)^(k/2)."""
    return (1.0 + np.square(r)) ** (0.5 * k)


def _shape(kind, alpha, x):
    if kind == "gaussian":
        return np.exp(-0.5 * np.square(x))
    return (1.0 + np.square(x)) ** (-0.5 * (3.0 + alpha))


@dataclass(frozen=True)
class EquilibriumSpec:
    """정규화된 heavy-tail(또는 Gaussian) 평형 분포."""

    kind: str
    alpha: float
    beta: float
    dilation: float
    norm_const: float
    m0: float
    m2: float
    m4: float

    @property
    def is_gaussian(self):
        return self.kind == "gaussian"

    @property
    def label(self):
        if self.is_gaussian:
            return f"gaussian(beta={self.beta:g})"
        return f"polynomial(alpha={self.alpha:g}, beta={self.beta:g})"

    def density(self, r):
        return self.norm_const * _shape(self.kind, self.alpha, np.asarray(r) / self.dilation)


def _radial_integral(kind, alpha, beta, dilation, power):
    """∫_0^∞ r^(2+power) <r>^(-beta) shape(r/a) dr, r = a·x 치환."""

    def integrand(x):
        r = dilation * x
        weight = (1.0 + r * r) ** (-0.5 * beta)
        return r ** (2.0 + power) * weight * _shape(kind, alpha, x) * dilation

    edges = list(_QUAD_BREAKPOINTS) + [math.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-12, limit=200)
        total += value
    return total


def check_equilibrium_parameters(kind, alpha, beta):
    if kind not in EQUILIBRIUM_KINDS:
        raise ParameterDomain(f"Unknown equilibrium kind '{kind}'.")
    if not beta > -1.0:
        raise ParameterDomain(f"beta must exceed -1, got {beta}.")
    if kind == "gaussian":
        if alpha is not None and not math.isinf(alpha):
            raise ParameterDomain("Gaussian equilibria take alpha = inf.")
        return
    if alpha is None or not alpha > 5.0:
        raise ParameterDomain(f"Polynomial tails need alpha > 5, got {alpha}.")
    if not alpha + beta > 4.0:
        raise ParameterDomain(f"alpha + beta must exceed 4, got {alpha + beta}.")


def build_equilibrium(kind, alpha, beta):
    """m0 = m2 = 1이 되도록 상수 c와 dilation a를 정한다. m4는 계산값을 그대로 둔다."""
    check_equilibrium_parameters(kind, alpha, beta)
    alpha = math.inf if kind == "gaussian" else float(alpha)
    beta = float(beta)

    def second_moment_ratio(a):
        i0 = _radial_integral(kind, alpha, beta, a, 0.0)
        i2 = _radial_integral(kind, alpha, beta, a, 2.0)
        return i2 / (3.0 * i0) - 1.0

    if kind == "gaussian" and beta == 0.0:
        dilation = 1.0
    else:
        lo, hi = DILATION_BRACKET
        try:
            dilation = optimize.bisect(second_moment_ratio, lo, hi, xtol=DILATION_XTOL)
        except ValueError as e:
            raise NormalizationFailure(
                f"Dilation root-find does not bracket a solution on [{lo}, {hi}] "
                f"for {kind} alpha={alpha} beta={beta}."
            ) from e

    i0 = _radial_integral(kind, alpha, beta, dilation, 0.0)
    if kind == "gaussian" and beta == 0.0:
        norm_const = (2.0 * math.pi) ** -1.5
    else:
        norm_const = 1.0 / (4.0 * math.pi * i0)

    m0 = 4.0 * math.pi * norm_const * i0
    m2 = 4.0 * math.pi / 3.0 * norm_const * _radial_integral(kind, alpha, beta, dilation, 2.0)
    m4 = 4.0 * math.pi / 3.0 * norm_const * _radial_integral(kind, alpha, beta, dilation, 4.0)

    if abs(m0 - 1.0) > NORMALIZATION_TOL or abs(m2 - 1.0) > NORMALIZATION_TOL:
        raise NormalizationFailure(f"Normalization drifted: m0={m0!r}, m2={m2!r}.")
    if not math.isfinite(m4):
        raise NormalizationFailure(f"Fourth moment is not finite for alpha={alpha}, beta={beta}.")

    spec = EquilibriumSpec(
        kind=kind,
        alpha=alpha,
        beta=beta,
        dilation=float(dilation),
        norm_const=float(norm_const),
        m0=float(m0),
        m2=float(m2),
        m4=float(m4),
    )
    log.info("equilibrium %s: dilation=%.12g m4=%.12g", spec.label, spec.dilation, spec.m4)
    return spec


def _legendre_unit(n):
    """(0, 1) 위의 Gauss-Legendre 노드와 가중치."""
    x, w = special.roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _logarithmic_rule(spec, n, scale):
    r_min = LOG_RADIUS_MIN * scale
    if spec.is_gaussian:
        r_max = LOG_RADIUS_MAX_GAUSSIAN * spec.dilation * scale
    else:
        r_max = LOG_RADIUS_MAX_POLYNOMIAL * scale
    n_panels = max(1, n // LOG_PANEL_NODES)
    sizes = [n // n_panels] * n_panels
    for i in range(n - sum(sizes)):
        sizes[i] += 1
    edges = np.linspace(math.log(r_min), math.log(r_max), n_panels + 1)

    nodes, weights = [], []
    for size, lo, hi in zip(sizes, edges[:-1], edges[1:]):
        s, ws = _legendre_unit(size)
        t = lo + (hi - lo) * s
        r = np.exp(t)
        nodes.append(r)
        weights.append(ws * (hi - lo) * r)
    return np.concatenate(nodes), np.concatenate(weights)


def _radial_rule(spec, n, radial_map, scale):
    if radial_map == "logarithmic":
        return _logarithmic_rule(spec, n, scale)
    s, ws = _legendre_unit(n)
    if radial_map == "algebraic":
        return scale * s / (1.0 - s), ws * scale / np.square(1.0 - s)
    t = 0.5 * math.pi * s
    return scale * np.tan(t), ws * scale * 0.5 * math.pi / np.square(np.cos(t))


def _angular_rule(n):
    x, w = special.roots_legendre(n)
    # ±u 대칭을 정확히 맞춘다 (실수 근 보존에 필요)
    return 0.5 * (x - x[::-1]), 0.5 * (w + w[::-1])


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """축대칭 (r, u) 격자. values는 radial-major로 펼쳐진 1D 배열에 대응한다."""

    spec: EquilibriumSpec
    sector: int
    radial_map: str
    radial_scale: float
    requested_radial: int
    radial_nodes: np.ndarray
    radial_weights: np.ndarray
    angular_nodes: np.ndarray
    angular_weights: np.ndarray
    r: np.ndarray
    u: np.ndarray
    weights: np.ndarray

    @property
    def n_radial(self):
        return self.radial_nodes.size

    @property
    def n_angular(self):
        return self.angular_nodes.size

    @property
    def size(self):
        return self.weights.size

    @property
    def key(self):
        return (
            self.spec, self.sector, self.radial_map, self.radial_scale,
            self.n_radial, self.n_angular,
        )

    def compatible(self, other):
        return self is other or self.key == other.key

    def bracket(self, k):
        return bracket(self.r, k)

    def function(self, values, gauge=0.0):
        return GridFunction(self, values, gauge)

    def profile(self, name):
        return velocity_profile(self, name)

    def with_sector(self, sector):
        """같은 해상도와 반경 맵으로 다른 sector 격자를 만든다."""
        return build_grid(
            self.spec,
            self.requested_radial,
            self.n_angular,
            sector,
            self.radial_map,
            self.radial_scale,
        )


def build_grid(spec, n_radial, n_angular, sector=0, radial_map="algebraic", radial_scale=1.0):
    """평형 측도를 흡수한 가중치를 가진 불변 격자를 만든다."""
    if n_radial < MIN_NODES or n_angular < MIN_NODES:
        raise ParameterDomain(
            f"Grids need at least {MIN_NODES} nodes per direction, got ({n_radial}, {n_angular})."
        )
    if sector not in SECTORS:
        raise ParameterDomain(f"Azimuthal sector must be 0 or 1, got {sector}.")
    if radial_map not in RADIAL_MAPS:
        raise ParameterDomain(f"Unknown radial map '{radial_map}'.")
    if not radial_scale > 0.0:
        raise ParameterDomain(f"radial_scale must be positive, got {radial_scale}.")

    r_nodes, r_weights = _radial_rule(spec, int(n_radial), radial_map, float(radial_scale))
    density = spec.density(r_nodes)
    # 밀도가 underflow 되는 노드는 질량이 없으므로 뺀다
    keep = density > np.finfo(float).tiny
    if not np.all(keep):
        dropped = int(np.count_nonzero(~keep))
        log.debug("dropping %d radial nodes with underflowing density", dropped)
    r_nodes, r_weights, density = r_nodes[keep], r_weights[keep], density[keep]

    u_nodes, u_weights = _angular_rule(int(n_angular))
    radial_mass = r_weights * np.square(r_nodes) * density * _AZIMUTHAL_FACTOR[sector]

    grid = VelocityGrid(
        spec=spec,
        sector=sector,
        radial_map=radial_map,
        radial_scale=float(radial_scale),
        requested_radial=int(n_radial),
        radial_nodes=_frozen(r_nodes),
        radial_weights=_frozen(r_weights),
        angular_nodes=_frozen(u_nodes),
        angular_weights=_frozen(u_weights),
        r=_frozen(np.repeat(r_nodes, u_nodes.size)),
        u=_frozen(np.tile(u_nodes, r_nodes.size)),
        weights=_frozen(np.outer(radial_mass, u_weights).ravel()),
    )
    log.debug(
        "grid %s sector=%d map=%s size=%d", spec.label, sector, radial_map, grid.size
    )
    return grid


@dataclass(frozen=True, eq=False)
class GridFunction:
    """격자 위의 복소 프로파일. values = <v>^(gauge/2) · φ."""

    grid: VelocityGrid
    values: np.ndarray
    gauge: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.size,):
            raise GridMismatch(
                f"Expected {self.grid.size} values for this grid, got shape {values.shape}."
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gauge", float(self.gauge))

    @property
    def sector(self):
        return self.grid.sector

    def _check(self, other):
        if not self.grid.compatible(other.grid):
            raise GridMismatch(
                f"Grid functions live on different grids "
                f"(sectors {self.sector} and {other.sector})."
            )
        if self.gauge != other.gauge:
            raise GridMismatch(f"Weight gauges differ: {self.gauge} vs {other.gauge}.")

    def _new(self, values):
        return GridFunction(self.grid, values, self.gauge)

    def __add__(self, other):
        self._check(other)
        return self._new(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self._new(self.values - other.values)

    def __neg__(self):
        return self._new(-self.values)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            self._check(other)
            return self._new(self.values * other.values)
        return self._new(self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._new(self.values / scalar)

    def conj(self):
        return self._new(np.conj(self.values))

    def with_gauge(self, gauge):
        if gauge == self.gauge:
            return self
        factor = self.grid.bracket(0.5 * (gauge - self.gauge))
        return GridFunction(self.grid, self.values * factor, gauge)


def inner_product(f, g, k=0.0):
    """∫ f conj(g) <v>^k M dv (quadrature)."""
    f._check(g)
    w = f.grid.weights * f.grid.bracket(k)
    return complex(np.dot(w * f.values, np.conj(g.values)))


def weighted_norm(f, k=0.0):
    return math.sqrt(max(inner_product(f, f, k).real, 0.0))


_PROFILES = {
    0: {
        "one": lambda r, u: np.ones_like(r),
        "v1": lambda r, u: r * u,
        "speed_sq": lambda r, u: r * r,
        "v1_sq": lambda r, u: np.square(r * u),
        "v1_cubed": lambda r, u: (r * u) ** 3,
        "energy": lambda r, u: 0.5 * (r * r - 3.0),
        "theta": lambda r, u: (r * r - 3.0) / 3.0,
    },
    1: {
        "v_perp": lambda r, u: r * np.sqrt(1.0 - u * u),
        "v1_v_perp": lambda r, u: r * r * u * np.sqrt(1.0 - u * u),
    },
}


def velocity_profile(grid, name):
    """이름으로 기본 속도 프로파일을 만든다 (φ-representation)."""
    table = _PROFILES[grid.sector]
    if name not in table:
        for sector, profiles in _PROFILES.items():
            if name in profiles:
                raise GridMismatch(f"Profile '{name}' lives in sector {sector}, not {grid.sector}.")
        raise ValueError(f"Unknown velocity profile '{name}'.")
    return GridFunction(grid, table[name](grid.r, grid.u))


def quadrature_moments(grid):
    """격자로 계산한 (m0, m2, m4). m=0 격자 기준."""
    if grid.sector != 0:
        raise GridMismatch("Moments are computed on the m = 0 sector.")
    w = grid.weights * grid.bracket(-grid.spec.beta)
    v1_sq = np.square(grid.r * grid.u)
    return (
        float(np.sum(w)),
        float(np.sum(w * v1_sq)),
        float(np.sum(w * v1_sq * np.square(grid.r))),
    )


@dataclass(frozen=True)
class MacroscopicMoments:
    rho: complex
    m_parallel: complex
    m_transverse: tuple
    theta: complex

    def as_dict(self):
        return {
            "rho": self.rho,
            "m_parallel": self.m_parallel,
            "m_transverse": list(self.m_transverse),
            "theta": self.theta,
        }


def extract_moments(longitudinal, transverse=()):
    """(rho, sigma·m, m_perp[2], theta)를 <·,·>_{-beta}로 추출한다.

    transverse에는 m=1 sector의 cos/sin 성분을 최대 두 개 넘긴다.
    """
    if longitudinal.sector != 0:
        raise GridMismatch("The longitudinal part must live in sector 0.")
    if len(transverse) > 2:
        raise ValueError("At most two transverse components (cos, sin) are supported.")
    beta = longitudinal.grid.spec.beta
    f = longitudinal.with_gauge(0.0)
    grid = f.grid

    rho = inner_product(f, velocity_profile(grid, "one"), -beta)
    m_parallel = inner_product(f, velocity_profile(grid, "v1"), -beta)
    theta = inner_product(f, velocity_profile(grid, "theta"), -beta)

    m_transverse = [0j, 0j]
    for idx, component in enumerate(transverse):
        if component.sector != 1:
            raise GridMismatch("Transverse components must live in sector 1.")
        c = component.with_gauge(0.0)
        m_transverse[idx] = inner_product(c, velocity_profile(c.grid, "v_perp"), -beta)

    return MacroscopicMoments(rho, m_parallel, tuple(m_transverse), theta)
