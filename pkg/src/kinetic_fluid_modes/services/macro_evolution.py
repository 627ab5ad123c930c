"""공간 주파수별 운동 방정식 시간 발전과 거시 극한 검증.

가중 시계 gamma ∂t h = <v>^beta L_eta h 를 psi-gauge y = sqrt(W) psi 좌표에서
y' = -conj(M) y / gamma 로 푼다. M은 spectral 모듈이 조립하는 행렬과 같다.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg

from ..errors import (
    EigendecompositionFailure,
    InsufficientRange,
    ParameterDomain,
    RootCollision,
    RootNotConverged,
)
from .asymptotics import theoretical_exponents
from .fitting import fit_fixed_exponent, fit_power_law
from .spectral import (
    ETA_BAR_DEFAULT,
    DispersionSystem,
    assemble_perturbed_operator,
    fluid_eigenvalues,
    solve_longitudinal,
    solve_transversal,
)
from .velocity_space import GridFunction, extract_moments, inner_product, velocity_profile

log = logging.getLogger(__name__)

DEFAULT_OUTPUT_TIMES = 64
CONDITION_LIMIT = 1e10
ENERGY_SLACK = 1e-10
CN_RTOL = 1e-9
CN_MAX_HALVINGS = 40
RATE_FIT_START = 0.1
DECAY_E_FOLDINGS = 3.0


def scaling_choice(alpha, beta):
    """gamma(eps) = eps^zeta 의 지수."""
    return theoretical_exponents(alpha, beta).zeta_long


def boussinesq_weight(operator):
    """rho + w·theta = 0 이 ∫ v1² P h M dv = 0 과 같아지는 w. beta = 0 이면 1."""
    grid = operator.grid(0)
    energy = velocity_profile(grid, "energy")
    pressure = grid.weights * np.square(grid.r * grid.u)
    shift = -np.sum(pressure * energy.values.real) / np.sum(pressure)
    moments = extract_moments(velocity_profile(grid, "one") * shift + energy)
    return float((-moments.rho / moments.theta).real)


@dataclass(frozen=True)
class KineticState:
    """m=0 성분과 횡방향 (cos, sin) m=1 성분 두 개."""

    longitudinal: GridFunction
    transverse: tuple
    xi: float = 1.0
    seed: int | None = None

    def __add__(self, other):
        return KineticState(
            self.longitudinal + other.longitudinal,
            tuple(a + b for a, b in zip(self.transverse, other.transverse)),
            self.xi,
        )

    def __mul__(self, scalar):
        transverse = tuple(c * scalar for c in self.transverse)
        return KineticState(self.longitudinal * scalar, transverse, self.xi, self.seed)

    __rmul__ = __mul__

    def moments(self):
        return extract_moments(self.longitudinal, self.transverse)

    def rotated(self, angle):
        """횡방향 데이터를 sigma 축 둘레로 angle만큼 회전한다."""
        c, s = math.cos(angle), math.sin(angle)
        cos_part, sin_part = self.transverse
        return KineticState(
            self.longitudinal,
            (cos_part * c - sin_part * s, cos_part * s + sin_part * c),
            self.xi,
            self.seed,
        )


def _xi_magnitude(xi):
    magnitude = float(np.linalg.norm(np.atleast_1d(np.asarray(xi, dtype=float))))
    if magnitude <= 0.0:
        raise ParameterDomain("Spatial frequency xi must be nonzero.")
    return magnitude


def zero_state(operator, xi=1.0):
    g0, g1 = operator.grid(0), operator.grid(1)
    zeros1 = GridFunction(g1, np.zeros(g1.size))
    return KineticState(GridFunction(g0, np.zeros(g0.size)), (zeros1, zeros1), xi)


def well_prepared_init(operator, xi, seed, weight=None):
    """sigma·m = 0, rho + w·theta = 0 을 만족하는 유체형 초기값."""
    xi = _xi_magnitude(xi)
    weight = boussinesq_weight(operator) if weight is None else weight
    rng = np.random.default_rng(seed)
    theta = complex(rng.normal(), rng.normal())
    m_perp = rng.normal(size=2) + 1j * rng.normal(size=2)
    rho = -weight * theta

    beta = operator.beta
    g0 = operator.grid(0)
    one, energy = velocity_profile(g0, "one"), velocity_profile(g0, "energy")
    theta_profile = velocity_profile(g0, "theta")
    gram = np.array([
        [inner_product(one, one, -beta), inner_product(energy, one, -beta)],
        [inner_product(one, theta_profile, -beta), inner_product(energy, theta_profile, -beta)],
    ])
    x, y = np.linalg.solve(gram, np.array([rho, theta]))
    longitudinal = one * x + energy * y

    g1 = operator.grid(1)
    v_perp = velocity_profile(g1, "v_perp")
    norm = inner_product(v_perp, v_perp, -beta).real
    transverse = tuple(v_perp * (m / norm) for m in m_perp)
    return KineticState(longitudinal, transverse, xi, seed)


def time_grid(t_final, gamma, n_times=DEFAULT_OUTPUT_TIMES):
    """균일 샘플과 t=0 근처 빠른 과도 구간의 기하 샘플을 합친다."""
    uniform = np.linspace(0.0, t_final, n_times)
    start = min(1e-3 * gamma, t_final / n_times)
    stop = min(20.0 * gamma, t_final)
    cluster = np.geomspace(start, stop, max(n_times // 2, 2)) if stop > start else np.array([])
    return np.unique(np.concatenate([uniform, cluster]))


class _SectorPropagator:
    """y' = -A y / gamma 의 정확한 반군 (고유분해) 또는 Crank-Nicolson 대체."""

    def __init__(self, A, gamma, method="eig"):
        self.A = A
        self.gamma = gamma
        self.method = method
        self.eigenvalues = None
        if method == "eig":
            try:
                self._decompose()
            except EigendecompositionFailure as e:
                log.warning("%s; falling back to Crank-Nicolson", e)
                self.method = "crank_nicolson"

    def _decompose(self):
        try:
            values, vectors = linalg.eig(self.A)
        except (linalg.LinAlgError, ValueError) as e:
            raise EigendecompositionFailure(f"Eigendecomposition failed: {e}") from e
        condition = np.linalg.cond(vectors)
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            raise EigendecompositionFailure(
                f"Eigenvector matrix condition {condition:.3g} too large"
            )
        self.eigenvalues = values
        self.vectors = vectors
        self.lu = linalg.lu_factor(vectors)

    def evolve(self, Y0, times):
        """Y0: (N, k). 반환 (len(times), N, k)."""
        if self.method == "eig":
            coeffs = linalg.lu_solve(self.lu, Y0)
            return np.stack([
                self.vectors @ (np.exp(-self.eigenvalues * t / self.gamma)[:, None] * coeffs)
                for t in times
            ])
        return crank_nicolson(self.A, Y0, times, self.gamma)

    def slowest_rate(self, Y0):
        """초기값이 실제로 가진 모드 중 가장 느린 감쇠율 (eig 경로에서만)."""
        if self.eigenvalues is None:
            return None
        weights = np.max(np.abs(linalg.lu_solve(self.lu, Y0)), axis=1)
        if not weights.max() > 0.0:
            return None
        active = weights > 1e-12 * weights.max()
        return float(np.min(self.eigenvalues[active].real)) / self.gamma


def crank_nicolson(A, Y0, times, gamma, rtol=CN_RTOL):
    """step-doubling 오차 제어와 step halving을 가진 Crank-Nicolson."""
    n = A.shape[0]
    identity = np.eye(n)
    factors = {}

    def step(y, h):
        if h not in factors:
            if len(factors) > 16:
                factors.clear()
            factors[h] = (linalg.lu_factor(identity + 0.5 * h / gamma * A),
                          identity - 0.5 * h / gamma * A)
        lu, explicit = factors[h]
        return linalg.lu_solve(lu, explicit @ y)

    y = np.array(Y0, dtype=complex)
    out = [y.copy()]
    t = float(times[0])
    h = float(times[1] - times[0]) if len(times) > 1 else 0.0
    halvings = 0
    for target in times[1:]:
        while target - t > 1e-14 * max(target, 1.0):
            h = min(h, target - t)
            full = step(y, h)
            half = step(step(y, 0.5 * h), 0.5 * h)
            err = np.linalg.norm(full - half) / max(np.linalg.norm(half), 1e-300)
            if err > rtol:
                h *= 0.5
                halvings += 1
                if halvings > CN_MAX_HALVINGS:
                    raise EigendecompositionFailure("Crank-Nicolson step control did not converge.")
                continue
            halvings = 0
            y = half
            t += h
            if err < 0.1 * rtol:
                h *= 2.0
        out.append(y.copy())
    return np.stack(out)


@dataclass
class MomentTrajectory:
    xi: float
    epsilon: float
    eta: float
    gamma: float
    times: np.ndarray
    rho: np.ndarray
    m: np.ndarray
    theta: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    method: str
    boussinesq_weight: float = 1.0
    slowest_rate: float | None = None

    @property
    def budget(self):
        """∫ ‖h - P h‖²_{-beta} dt (사다리꼴)."""
        return float(integrate.trapezoid(self.dissipation, self.times))

    @property
    def budget_bound(self):
        return 0.5 * self.gamma * self.energy[0]

    @property
    def budget_ok(self):
        return self.budget <= self.budget_bound * (1.0 + ENERGY_SLACK)

    @property
    def budget_identity_error(self):
        """|E(0) - E(T) - (2/gamma)∫ diss| / E(0)."""
        released = self.energy[0] - self.energy[-1]
        return abs(released - 2.0 / self.gamma * self.budget) / self.energy[0]

    @property
    def energy_monotone(self):
        return bool(np.all(np.diff(self.energy) <= ENERGY_SLACK * self.energy[0]))

    @property
    def boussinesq_residual(self):
        return float(np.max(np.abs(self.rho + self.boussinesq_weight * self.theta)))

    @property
    def incompressibility(self):
        """sup_t |sigma·m| · eps / gamma."""
        return float(np.max(np.abs(self.m[:, 0]))) * self.epsilon / self.gamma

    def transverse_decay(self):
        """[0, T] 동안 횡방향 운동량의 상대 감소량."""
        norms = np.linalg.norm(self.m[:, 1:], axis=1)
        return float(1.0 - norms[-1] / norms[0]) if norms[0] > 0.0 else 0.0

    def decay_rate(self, series, start=RATE_FIT_START):
        """t >= start·T 구간에서 log|series| 의 기울기로 감쇠율을 구한다."""
        mask = self.times >= start * self.times[-1]
        values = np.abs(series[mask])
        if np.any(values <= 0.0) or mask.sum() < 3:
            raise InsufficientRange("Not enough nonzero samples for a decay-rate fit.")
        slope = np.polyfit(self.times[mask], np.log(values), 1)[0]
        return float(-slope)

    def rows(self):
        for i, t in enumerate(self.times):
            yield [
                t,
                self.rho[i].real, self.rho[i].imag,
                self.m[i, 0].real, self.m[i, 0].imag,
                self.m[i, 1].real, self.m[i, 1].imag,
                self.m[i, 2].real, self.m[i, 2].imag,
                self.theta[i].real, self.theta[i].imag,
                self.energy[i],
                self.dissipation[i],
            ]


TRAJECTORY_COLUMNS = [
    "t", "rho_re", "rho_im", "m1_re", "m1_im", "m2_re", "m2_im", "m3_re", "m3_im",
    "theta_re", "theta_im", "energy", "dissipation",
]


def _to_y(f, basis):
    return basis.sqrt_weights * f.with_gauge(0.0).values


def _from_y(y, basis):
    sw = basis.sqrt_weights
    return GridFunction(basis.grid, np.divide(y, sw, out=np.zeros_like(y), where=sw > 0.0))


def evolve_mode(operator, xi, epsilon, t_final, init, n_times=DEFAULT_OUTPUT_TIMES,
                eta_bar=ETA_BAR_DEFAULT, method="eig"):
    """한 공간 주파수의 궤적. 고유분해가 나쁘면 Crank-Nicolson으로 대체한다."""
    xi = _xi_magnitude(xi)
    if epsilon <= 0.0:
        raise ParameterDomain(f"epsilon must be positive, got {epsilon}.")
    eta = epsilon * xi
    if eta > eta_bar:
        raise ParameterDomain(f"eta = eps·|xi| = {eta:g} exceeds eta_bar = {eta_bar:g}.")
    if t_final <= 0.0:
        raise ParameterDomain(f"t_final must be positive, got {t_final}.")

    spec = operator.spec
    gamma = epsilon ** scaling_choice(spec.alpha, spec.beta)
    times = time_grid(t_final, gamma, n_times)
    b0, b1 = operator.basis(0), operator.basis(1)

    prop0 = _SectorPropagator(assemble_perturbed_operator(operator, eta, 0).conj(), gamma, method)
    prop1 = _SectorPropagator(assemble_perturbed_operator(operator, eta, 1).conj(), gamma, method)
    Y0 = _to_y(init.longitudinal, b0)[:, None]
    Y1 = np.column_stack([_to_y(c, b1) for c in init.transverse])
    path0 = prop0.evolve(Y0, times)
    path1 = prop1.evolve(Y1, times)

    n = times.size
    rho = np.empty(n, dtype=complex)
    theta = np.empty(n, dtype=complex)
    m = np.empty((n, 3), dtype=complex)
    energy = np.empty(n)
    dissipation = np.empty(n)
    Q0, Q1 = b0.scaled_matrix, b1.scaled_matrix
    for i in range(n):
        y0, y1 = path0[i], path1[i]
        moments = extract_moments(_from_y(y0[:, 0], b0), [_from_y(y1[:, k], b1) for k in range(2)])
        rho[i], theta[i] = moments.rho, moments.theta
        m[i] = (moments.m_parallel, *moments.m_transverse)
        energy[i] = float(np.sum(np.abs(y0) ** 2) + np.sum(np.abs(y1) ** 2))
        dissipation[i] = float(
            np.sum(np.abs(y0 - Q0 @ (Q0.T @ y0)) ** 2) + np.sum(np.abs(y1 - Q1 @ (Q1.T @ y1)) ** 2)
        )

    rates = [r for r in (prop0.slowest_rate(Y0), prop1.slowest_rate(Y1)) if r is not None]
    trajectory = MomentTrajectory(
        xi=xi,
        epsilon=float(epsilon),
        eta=eta,
        gamma=gamma,
        times=times,
        rho=rho,
        m=m,
        theta=theta,
        energy=energy,
        dissipation=dissipation,
        method=prop0.method if prop0.method == prop1.method else "mixed",
        boussinesq_weight=boussinesq_weight(operator),
        slowest_rate=min(rates) if rates else None,
    )
    log.debug("trajectory xi=%g eps=%g method=%s", xi, epsilon, trajectory.method)
    return trajectory


def check_rotation_invariance(operator, xi, epsilon, t_final, init, angle, n_times=16):
    """횡방향 초기값 회전이 궤적을 같은 각만큼 회전시키는지. 상대 오차를 돌려준다."""
    base = evolve_mode(operator, xi, epsilon, t_final, init, n_times)
    turned = evolve_mode(operator, xi, epsilon, t_final, init.rotated(angle), n_times)
    c, s = math.cos(angle), math.sin(angle)
    expected = np.column_stack([
        c * base.m[:, 1] - s * base.m[:, 2],
        s * base.m[:, 1] + c * base.m[:, 2],
    ])
    scale = max(float(np.max(np.abs(base.m[:, 1:]))), 1e-300)
    return float(np.max(np.abs(turned.m[:, 1:] - expected))) / scale


@dataclass
class MomentSystem:
    matrix: np.ndarray
    inverse: np.ndarray
    c1: float
    pattern_ok: bool

    def as_dict(self):
        return {
            "matrix": self.matrix.tolist(),
            "inverse": self.inverse.tolist(),
            "c1": self.c1,
            "pattern_ok": self.pattern_ok,
        }


def moment_system_matrix(operator, limit, rtol=1e-8):
    """M1(0): 행은 극한 모드, 열은 (1, (|v|²-3)/2, sigma·v, v_perp cos, v_perp sin)."""
    b0, b1 = operator.basis(0), operator.basis(1)
    g0 = b0.grid
    profiles = [velocity_profile(g0, name) for name in ("one", "energy", "v1")]
    projections = np.array([b0.coefficients(p).real for p in profiles])
    transverse = float(b1.coefficients(velocity_profile(b1.grid, "v_perp")).real[0])

    matrix = np.zeros((5, 5))
    for row, label in enumerate(("boussinesq", "acoustic_plus", "acoustic_minus")):
        matrix[row, :3] = projections @ limit.orthonormal[label]
    matrix[3, 3] = matrix[4, 4] = transverse * limit.orthonormal["transversal"][0]
    inverse = np.linalg.inv(matrix)

    tol = rtol * np.max(np.abs(inverse))
    c1 = float(inverse[2, 1])
    pattern_ok = bool(
        abs(inverse[0, 1] - inverse[0, 2]) <= tol
        and abs(inverse[1, 1] - inverse[1, 2]) <= tol
        and abs(inverse[2, 0]) <= tol
        and abs(inverse[2, 1] + inverse[2, 2]) <= tol
        and np.all(np.abs(inverse[:3, 3:]) <= tol)
        and np.all(np.abs(inverse[3:, :3]) <= tol)
        and abs(inverse[3, 4]) <= tol
        and abs(inverse[4, 3]) <= tol
        and abs(inverse[3, 3] - inverse[4, 4]) <= tol
    )
    return MomentSystem(matrix, inverse, c1, pattern_ok)


@dataclass
class MacroLimitReport:
    zeta: float
    zeta_trans: float
    xis: list
    epsilons: list
    rates: np.ndarray
    transverse_rates: np.ndarray
    xi_exponent: object
    kappa_fit: float
    kappa_reference: float
    boussinesq_residuals: list
    incompressibility: list
    transverse_decays: list
    transverse_exponent: object | None
    rotation_error: float
    moment_system: MomentSystem | None
    energy_monotone: bool
    budget_ok: bool
    max_budget_identity_error: float
    spectral_rate_errors: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict, repr=False)

    @property
    def kappa_error(self):
        return abs(self.kappa_fit - self.kappa_reference) / self.kappa_reference

    @property
    def boussinesq_drop(self):
        return self.boussinesq_residuals[0] / max(self.boussinesq_residuals[-1], 1e-300)

    @property
    def boussinesq_drops(self):
        """연속한 eps 쌍마다의 잔차 감소율."""
        r = self.boussinesq_residuals
        return [a / max(b, 1e-300) for a, b in zip(r, r[1:])]

    def _expected_drop(self, eps_hi, eps_lo):
        """잔차 ~ gamma/eps = eps^(zeta-1): 고전 영역에서 decade당 10배."""
        return 10.0 ** (min(1.0, self.zeta - 1.0) * math.log10(eps_hi / eps_lo))

    @property
    def expected_boussinesq_drops(self):
        e = self.epsilons
        return [self._expected_drop(a, b) for a, b in zip(e, e[1:])]

    @property
    def expected_boussinesq_drop(self):
        return self._expected_drop(self.epsilons[0], self.epsilons[-1])

    @property
    def transverse_frozen(self):
        decays = self.transverse_decays
        return all(b <= a for a, b in zip(decays, decays[1:]))

    def checks(self, tolerances):
        result = {
            "xi_exponent": (
                abs(self.xi_exponent.exponent - self.zeta) <= tolerances["macro_exponent"]
            ),
            "kappa": self.kappa_error <= tolerances["kappa"],
            "boussinesq_drop": all(
                drop >= tolerances["boussinesq_drop_fraction"] * expected
                for drop, expected in zip(self.boussinesq_drops, self.expected_boussinesq_drops)
            ),
            "incompressibility_bounded": max(self.incompressibility)
            <= tolerances["incompressibility_growth"] * self.incompressibility[0],
            "energy_monotone": self.energy_monotone,
            "dissipation_budget": self.budget_ok,
            "rotation_invariance": self.rotation_error <= tolerances["rotation"],
        }
        if self.zeta_trans > self.zeta:
            result["transverse_frozen"] = self.transverse_frozen
        elif self.transverse_exponent is not None:
            result["transverse_diffusive"] = (
                abs(self.transverse_exponent.exponent - 2.0) <= tolerances["macro_exponent"]
            )
        if self.moment_system is not None:
            result["moment_system_pattern"] = self.moment_system.pattern_ok
        if self.spectral_rate_errors:
            result["spectral_consistency"] = (
                max(self.spectral_rate_errors) <= tolerances["spectral_rate"]
            )
        return result

    def as_dict(self, tolerances=None):
        data = {
            "zeta": self.zeta,
            "zeta_trans": self.zeta_trans,
            "xi": list(self.xis),
            "epsilon": list(self.epsilons),
            "theta_rates": self.rates.tolist(),
            "transverse_rates": self.transverse_rates.tolist(),
            "xi_exponent": self.xi_exponent.as_dict(),
            "kappa_fit": self.kappa_fit,
            "kappa_reference": self.kappa_reference,
            "kappa_error": self.kappa_error,
            "boussinesq_residuals": list(self.boussinesq_residuals),
            "boussinesq_drop": self.boussinesq_drop,
            "expected_boussinesq_drop": self.expected_boussinesq_drop,
            "boussinesq_drops": self.boussinesq_drops,
            "expected_boussinesq_drops": self.expected_boussinesq_drops,
            "incompressibility": list(self.incompressibility),
            "transverse_decays": list(self.transverse_decays),
            "transverse_exponent": self.transverse_exponent.as_dict()
            if self.transverse_exponent else None,
            "rotation_error": self.rotation_error,
            "moment_system": self.moment_system.as_dict() if self.moment_system else None,
            "energy_monotone": self.energy_monotone,
            "budget_ok": self.budget_ok,
            "max_budget_identity_error": self.max_budget_identity_error,
            "slowest_rates": [
                [self.trajectories[(i, j)].slowest_rate for j in range(len(self.epsilons))]
                for i in range(len(self.xis))
            ] if self.trajectories else None,
            "spectral_rate_errors": list(self.spectral_rate_errors),
        }
        if tolerances is not None:
            data["checks"] = self.checks(tolerances)
            data["passed"] = all(data["checks"].values())
        return data


def reference_kappa(operator, eta, zeta):
    """eta에서 Re mu_0 / eta^zeta."""
    roots = solve_longitudinal(DispersionSystem(operator, eta))
    return roots["boussinesq"].mu.real / eta ** zeta


def slowest_fluid_rate(operator, eta):
    """유체 근 다섯 개 중 가장 작은 Re mu. 기본 seed가 실패하면 행렬 고유값에서 다시 푼다."""
    system = DispersionSystem(operator, eta)
    try:
        roots = solve_longitudinal(system)
        roots["transversal"] = solve_transversal(system)
    except (RootNotConverged, RootCollision):
        seeds = fluid_eigenvalues(operator, eta).values
        roots = solve_longitudinal(system, seeds)
        roots["transversal"] = solve_transversal(system, seeds["transversal"])
    return min(root.mu.real for root in roots.values())


def spectral_rate_error(operator, trajectory):
    """궤적의 가장 느린 감쇠율과 min Re mu / gamma 의 상대 차. eig 경로가 아니면 None."""
    if trajectory.slowest_rate is None:
        return None
    expected = slowest_fluid_rate(operator, trajectory.eta) / trajectory.gamma
    return abs(trajectory.slowest_rate - expected) / abs(expected)


def _validate_sweep(xis, epsilons, eta_bar):
    if len(xis) < 4:
        raise InsufficientRange(f"Need at least 4 spatial frequencies, got {len(xis)}.")
    if len(epsilons) < 2 or epsilons[0] / epsilons[-1] < 10.0 * (1.0 - 1e-9):
        raise InsufficientRange("The epsilon sequence must decrease over at least one decade.")
    worst = max(xis) * max(epsilons)
    if worst > eta_bar:
        raise ParameterDomain(f"eps·|xi| reaches {worst:g}, above eta_bar = {eta_bar:g}.")


def check_macroscopic_limit(operator, xis, epsilons, seed=0, n_times=DEFAULT_OUTPUT_TIMES,
                            eta_bar=ETA_BAR_DEFAULT, kappa=None, limit=None, rotation_angle=0.7,
                            progress_callback=None):
    """(xi, eps) 격자 전체에서 궤적을 계산하고 거시 극한 지표를 모은다."""
    xis = sorted(_xi_magnitude(x) for x in xis)
    epsilons = sorted((float(e) for e in epsilons), reverse=True)
    _validate_sweep(xis, epsilons, eta_bar)

    spec = operator.spec
    prediction = theoretical_exponents(spec.alpha, spec.beta)
    zeta = prediction.zeta_long
    if kappa is None:
        kappa = reference_kappa(operator, epsilons[-1] * xis[0], zeta)
    weight = boussinesq_weight(operator)

    rates = np.empty((len(xis), len(epsilons)))
    transverse_rates = np.empty_like(rates)
    trajectories = {}
    total = len(xis) * len(epsilons)
    for i, xi in enumerate(xis):
        init = well_prepared_init(operator, xi, seed + i, weight)
        t_final = DECAY_E_FOLDINGS / (kappa * xi ** zeta)
        for j, eps in enumerate(epsilons):
            trajectory = evolve_mode(operator, xi, eps, t_final, init, n_times, eta_bar)
            trajectories[(i, j)] = trajectory
            rates[i, j] = trajectory.decay_rate(trajectory.theta)
            transverse = np.linalg.norm(trajectory.m[:, 1:], axis=1)
            transverse_rates[i, j] = trajectory.decay_rate(transverse)
            if progress_callback:
                done = i * len(epsilons) + j + 1
                progress_callback(int(100 * done / total), f"xi={xi:.3g} eps={eps:.3g}")

    finest = len(epsilons) - 1
    xi_samples = [(xi, rates[i, finest]) for i, xi in enumerate(xis)]
    xi_exponent = fit_power_law(xi_samples, min_samples=4, min_decades=1.0)
    kappa_fit, _ = fit_fixed_exponent(xi_samples, zeta)

    transverse_exponent = None
    if prediction.zeta_trans == zeta:
        transverse_exponent = fit_power_law(
            [(xi, transverse_rates[i, finest]) for i, xi in enumerate(xis)],
            min_samples=4, min_decades=1.0,
        )

    last_xi = len(xis) - 1
    boussinesq = [max(trajectories[(i, j)].boussinesq_residual for i in range(len(xis)))
                  for j in range(len(epsilons))]
    incompressibility = [max(trajectories[(i, j)].incompressibility for i in range(len(xis)))
                         for j in range(len(epsilons))]
    transverse_decays = [
        trajectories[(last_xi, j)].transverse_decay() for j in range(len(epsilons))
    ]

    first = trajectories[(0, finest)]
    rotation_error = check_rotation_invariance(
        operator, xis[0], epsilons[-1], first.times[-1],
        well_prepared_init(operator, xis[0], seed, weight), rotation_angle,
    )

    rate_errors = [spectral_rate_error(operator, trajectories[(i, 0)]) for i in range(len(xis))]
    everything = list(trajectories.values())
    report = MacroLimitReport(
        zeta=zeta,
        zeta_trans=prediction.zeta_trans,
        xis=xis,
        epsilons=epsilons,
        rates=rates,
        transverse_rates=transverse_rates,
        xi_exponent=xi_exponent,
        kappa_fit=kappa_fit,
        kappa_reference=kappa,
        boussinesq_residuals=boussinesq,
        incompressibility=incompressibility,
        transverse_decays=transverse_decays,
        transverse_exponent=transverse_exponent,
        rotation_error=rotation_error,
        moment_system=moment_system_matrix(operator, limit) if limit is not None else None,
        energy_monotone=all(t.energy_monotone for t in everything),
        budget_ok=all(t.budget_ok for t in everything),
        max_budget_identity_error=max(t.budget_identity_error for t in everything),
        spectral_rate_errors=[e for e in rate_errors if e is not None],
        trajectories=trajectories,
    )
    log.info(
        "macro limit %s: xi exponent %.4f (zeta %.4f), kappa %.6g vs %.6g",
        spec.label, xi_exponent.exponent, zeta, kappa_fit, kappa,
    )
    return report
