"""유체 고유값 분기 계산 서비스.

두 가지 독립 경로:
  * 격자 행렬 M = I - Q Q^T - i eta diag(<v>^beta v1) (y = sqrt(W) psi 좌표)
  * 축약 분산 관계 det A(eta, mu) = 0 (m=0), T(eta, mu) = 0 (m=1)

det(M - mu) = det(D - mu) · det(-A) 이므로 두 경로의 근은 이산적으로 같다.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.sparse import linalg as sparse_linalg

from ..errors import (
    BranchJump,
    CountMismatch,
    DegenerateNullspace,
    InsufficientRange,
    ParameterDomain,
    RootCollision,
    RootNotConverged,
)
from .collision import build_collision_operator
from .velocity_space import GridFunction, inner_product

log = logging.getLogger(__name__)

LONGITUDINAL_LABELS = ("boussinesq", "acoustic_plus", "acoustic_minus")
LABELS = LONGITUDINAL_LABELS + ("transversal",)
LABEL_SECTOR = {"boussinesq": 0, "acoustic_plus": 0, "acoustic_minus": 0, "transversal": 1}
SECTOR_MULTIPLICITY = {0: 3, 1: 1}

R_BAR_DEFAULT = 0.5
ETA_BAR_DEFAULT = 0.1
SHIFT_DEFAULT = -0.5
DENSE_LIMIT = 600
WINDING_SAMPLES = 256

NEWTON_MAX_ITER = 60
MULLER_MAX_ITER = 80
RESIDUAL_TOL = 1e-11
STEP_RTOL = 1e-12
STEP_ATOL_ETA2 = 1e-15
NULLSPACE_GAP = 1e-6


class DispersionSystem:
    """고정된 eta에서의 3x3 분산 행렬 A(mu)와 스칼라 T(mu)."""

    def __init__(self, operator, eta):
        if eta < 0.0:
            raise ParameterDomain(f"eta must be non-negative, got {eta}.")
        self.operator = operator
        self.eta = float(eta)
        beta = operator.beta

        self.longitudinal = operator.basis(0)
        grid0 = self.longitudinal.grid
        self.drift = grid0.bracket(beta) * grid0.r * grid0.u

        self.transverse = operator.basis(1)
        grid1 = self.transverse.grid
        self.drift_t = grid1.bracket(beta) * grid1.r * grid1.u
        self._e_t = self.transverse.matrix[:, 0]

    def multiplier(self, mu, sector=0):
        """G - 1 = (mu + i eta d) / (1 - mu - i eta d), 상쇄 없이 직접 계산."""
        drift = self.drift if sector == 0 else self.drift_t
        shift = mu + 1j * self.eta * drift
        return shift / (1.0 - shift)

    def matrix(self, mu):
        """A_jk = <(G - 1) e_k, e_j>_{-beta}."""
        basis = self.longitudinal
        weighted = (basis.measure * self.multiplier(mu, 0))[:, None] * basis.matrix
        return basis.matrix.T @ weighted

    def det(self, mu):
        return complex(np.linalg.det(self.matrix(mu)))

    def det_scale(self, mu):
        """Hadamard 상한: 행 노름의 곱."""
        rows = np.linalg.norm(self.matrix(mu), axis=1)
        return float(np.prod(rows)) or 1e-300

    def transversal(self, mu):
        """T = <(G - 1) e_t, e_t>_{-beta}."""
        return complex(np.sum(self.transverse.measure * self.multiplier(mu, 1) * self._e_t ** 2))

    def transversal_scale(self, mu):
        terms = np.abs(self.transverse.measure * self.multiplier(mu, 1)) * self._e_t ** 2
        return float(np.sum(terms)) or 1e-300

    def first_order_matrix(self):
        """B_jk = ∫ v1 e_j e_k M dv (측도 M, <v>^-beta 없음)."""
        basis = self.longitudinal
        grid = basis.grid
        weighted = (grid.weights * grid.r * grid.u)[:, None] * basis.matrix
        return basis.matrix.T @ weighted


def dispersion_det(operator, eta, mu):
    return DispersionSystem(operator, eta).det(mu)


def acoustic_speed(operator):
    """D: eta=0 1차 행렬 B의 양의 고유값. D^2 = a^2 + b^2."""
    B = DispersionSystem(operator, 0.0).first_order_matrix()
    return float(np.max(np.linalg.eigvalsh(0.5 * (B + B.T))))


def _scaled_basis(operator, sector):
    return operator.basis(sector).scaled_matrix


def _drift(operator, sector):
    grid = operator.grid(sector)
    return grid.bracket(operator.beta) * grid.r * grid.u


def assemble_perturbed_operator(operator, eta, sector):
    """-(L~* + i eta <v>^beta v1)의 조밀 행렬 (y = sqrt(W) psi 좌표)."""
    Q = _scaled_basis(operator, sector)
    d = _drift(operator, sector)
    M = np.eye(Q.shape[0], dtype=complex) - Q @ Q.T
    M[np.diag_indices_from(M)] -= 1j * eta * d
    return M


def _shift_invert(operator, eta, sector, sigma):
    """(M - sigma)^{-1}을 Woodbury 항등식으로 O(N)에 적용하는 LinearOperator."""
    Q = _scaled_basis(operator, sector)
    diag = (1.0 - sigma) - 1j * eta * _drift(operator, sector)
    inv_diag = 1.0 / diag
    capacitance = np.eye(Q.shape[1]) - Q.T @ (inv_diag[:, None] * Q)
    lu = linalg.lu_factor(capacitance)

    def matvec(x):
        x = np.asarray(x, dtype=complex).ravel()
        z = inv_diag * x
        return z + inv_diag * (Q @ linalg.lu_solve(lu, Q.T @ z))

    n = Q.shape[0]
    return sparse_linalg.LinearOperator((n, n), matvec=matvec, dtype=complex)


def sector_eigenvalues(operator, eta, sector, count=None, sigma=SHIFT_DEFAULT):
    """sector의 가장 작은 |mu| 고유값 count개 (|mu| 오름차순)."""
    count = count or SECTOR_MULTIPLICITY[sector]
    n = operator.grid(sector).size
    if n <= DENSE_LIMIT:
        values = linalg.eigvals(assemble_perturbed_operator(operator, eta, sector))
    else:
        op = _shift_invert(operator, eta, sector, sigma)
        v0 = np.full(n, 1.0 / math.sqrt(n), dtype=complex)
        nu = sparse_linalg.eigs(op, k=count, which="LM", v0=v0, return_eigenvectors=False)
        values = sigma + 1.0 / nu
    values = np.asarray(values, dtype=complex)
    return values[np.argsort(np.abs(values), kind="stable")][:count]


def winding_count(system, radius, sector=0, samples=WINDING_SAMPLES):
    """편각 원리: |mu| < radius 안의 분산 함수 영점 개수."""
    theta = np.linspace(0.0, 2.0 * math.pi, samples + 1)
    circle = radius * np.exp(1j * theta)
    fn = system.det if sector == 0 else system.transversal
    values = np.array([fn(mu) for mu in circle])
    phase = np.unwrap(np.angle(values))
    return int(round((phase[-1] - phase[0]) / (2.0 * math.pi)))


def label_longitudinal(values):
    """Im 순서로 (acoustic_minus, boussinesq, acoustic_plus) 라벨을 붙인다."""
    ordered = sorted(values, key=lambda z: (z.imag, z.real))
    return {"acoustic_minus": ordered[0], "boussinesq": ordered[1], "acoustic_plus": ordered[2]}


@dataclass
class FluidSpectrum:
    eta: float
    values: dict
    counts: dict

    @property
    def all_values(self):
        """중복도 포함 5개 (transversal 두 번)."""
        longitudinal = [self.values[label] for label in LONGITUDINAL_LABELS]
        return longitudinal + [self.values["transversal"]] * 2


def fluid_eigenvalues(operator, eta, r_bar=R_BAR_DEFAULT):
    """B(0, r_bar) 안의 유체 고유값 5개. 개수는 편각 원리로 센다."""
    if not 0.0 < r_bar < operator.gap:
        raise ParameterDomain(f"r_bar must lie in (0, {operator.gap}), got {r_bar}.")
    system = DispersionSystem(operator, eta)
    if eta == 0.0:
        counts = {0: 3, 1: 1}
    else:
        counts = {0: winding_count(system, r_bar, 0), 1: winding_count(system, r_bar, 1)}
    if counts != {0: 3, 1: 1}:
        raise CountMismatch(
            f"Expected 3 + 2x1 fluid eigenvalues in B(0, {r_bar}) at eta={eta:g}, "
            f"found {counts[0]} + 2x{counts[1]}.",
            counts=counts,
        )
    longitudinal = sector_eigenvalues(operator, eta, 0)
    transversal = sector_eigenvalues(operator, eta, 1)
    values = label_longitudinal(list(longitudinal))
    values["transversal"] = complex(transversal[0])
    outside = [label for label, mu in values.items() if abs(mu) >= r_bar]
    if outside:
        raise CountMismatch(
            f"Eigensolver returned values outside B(0, {r_bar}) for {outside} at eta={eta:g}.",
            counts=counts,
        )
    return FluidSpectrum(float(eta), values, counts)


@dataclass
class RootResult:
    mu: complex
    iterations: int
    residual: float
    method: str


def _contour_derivative(f, z, h):
    return (f(z + h) - f(z - h) - 1j * f(z + 1j * h) + 1j * f(z - 1j * h)) / (4.0 * h)


def _muller(f, z, h, max_iter=MULLER_MAX_ITER, tol=STEP_RTOL):
    x0, x1, x2 = z - h, z + h, z
    f0, f1, f2 = f(x0), f(x1), f(x2)
    for it in range(1, max_iter + 1):
        q = (x2 - x1) / (x1 - x0)
        a = q * f2 - q * (1 + q) * f1 + q * q * f0
        b = (2 * q + 1) * f2 - (1 + q) ** 2 * f1 + q * q * f0
        c = (1 + q) * f2
        disc = np.sqrt(b * b - 4 * a * c)
        den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
        if den == 0:
            break
        x3 = x2 - (x2 - x1) * 2 * c / den
        if abs(x3 - x2) <= tol * abs(x3):
            return complex(x3), it
        x0, x1, x2 = x1, x2, x3
        f0, f1, f2 = f1, f2, f(x3)
    return complex(x2), max_iter


def _newton(f, z0, eta, label):
    """scipy Newton (contour 도함수). 발산하면 None, 수렴 판정은 호출자가 잔차로 한다."""

    def fprime(z):
        return _contour_derivative(f, z, 1e-3 * max(abs(z), eta, 1e-300))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        z, info = optimize.newton(
            f, z0, fprime=fprime, tol=max(STEP_ATOL_ETA2 * eta * eta, 1e-300),
            rtol=STEP_RTOL, maxiter=NEWTON_MAX_ITER, full_output=True, disp=False,
        )
    if not info.converged:
        log.debug("%s: Newton stopped at eta=%g (%s)", label, eta, info.flag)
    if not np.isfinite(z):
        return None, info.iterations
    return complex(z), info.iterations


def find_root(f, scale, z0, eta, label="root"):
    """Newton, 실패하거나 잔차가 남으면 seed에서 Muller."""
    z0 = complex(z0)
    z, it = _newton(f, z0, eta, label)
    method = "newton"
    if z is None or abs(f(z)) > RESIDUAL_TOL * scale(z):
        z, it = _muller(f, z0, 1e-3 * max(abs(z0), eta, 1e-300))
        method = "muller"
    residual = abs(f(z)) / scale(z)
    if not np.isfinite(residual) or residual > RESIDUAL_TOL:
        raise RootNotConverged(
            f"{label} root did not converge at eta={eta:g} (residual {residual:.3g}).",
            diagnostics={"seed": z0, "last": z, "residual": residual, "iterations": it,
                         "method": method},
        )
    return RootResult(z, it, residual, method)


def _check_collisions(roots, eta):
    items = list(roots.items())
    for i, (la, ra) in enumerate(items):
        for lb, rb in items[i + 1:]:
            if abs(ra.mu - rb.mu) <= 1e-8 * (abs(ra.mu) + abs(rb.mu)) + 1e-14 * eta:
                raise RootCollision(f"{la} and {lb} converged to the same root at eta={eta:g}.")


def _check_labels(roots, eta):
    plus, minus, bouss = (roots[k].mu for k in ("acoustic_plus", "acoustic_minus", "boussinesq"))
    if not (plus.imag > abs(bouss.imag) and minus.imag < -abs(bouss.imag)):
        raise RootCollision(f"Longitudinal roots are mislabeled at eta={eta:g}.")


def solve_longitudinal(system, seeds=None):
    """det A(eta, ·) = 0의 세 근. 기본 seed는 {0, +iD eta, -iD eta}."""
    if seeds is None:
        d = acoustic_speed(system.operator)
        seeds = {
            "boussinesq": 0.0,
            "acoustic_plus": 1j * d * system.eta,
            "acoustic_minus": -1j * d * system.eta,
        }
    roots = {
        label: find_root(system.det, system.det_scale, seeds[label], system.eta, label)
        for label in LONGITUDINAL_LABELS
    }
    _check_collisions(roots, system.eta)
    _check_labels(roots, system.eta)
    return roots


def solve_transversal(system, seed=0.0):
    return find_root(system.transversal, system.transversal_scale, seed, system.eta, "transversal")


@dataclass
class EigenMode:
    label: str
    eta: float
    mu: complex
    coefficients: np.ndarray
    orthonormal: np.ndarray
    phi: GridFunction
    defect: float
    residual: float


def _phase_normalized(c, C):
    anchor = C[-1] if abs(C[-1]) > 1e-14 * np.linalg.norm(C) else C[np.argmax(np.abs(C))]
    phase = anchor / abs(anchor)
    return c / phase, C / phase


def eigenmode_coefficients(system, mu, label):
    """축약 시스템의 null vector와 phi = G(P phi) 재구성. ‖P phi‖_{-beta} = 1."""
    sector = LABEL_SECTOR[label]
    basis = system.longitudinal if sector == 0 else system.transverse
    if sector == 0:
        A = system.matrix(mu)
        _, s, vh = np.linalg.svd(A)
        if s[0] == 0 or s[-1] > NULLSPACE_GAP * s[0] or s[-2] <= NULLSPACE_GAP * s[0]:
            raise DegenerateNullspace(
                f"{label}: reduced matrix at eta={system.eta:g} has singular values {s}."
            )
        c = np.conj(vh[-1])
        c = c / np.linalg.norm(c)
        c, C3 = _phase_normalized(c, basis.to_moment_coordinates(c))
        residual = float(np.linalg.norm(A @ c))
        coefficients = np.array([C3[0], C3[1], 0.0, 0.0, C3[2]], dtype=complex)
    else:
        t = system.transversal(mu)
        if abs(t) > NULLSPACE_GAP * system.transversal_scale(mu):
            raise DegenerateNullspace(f"transversal: mu={mu} is not a root at eta={system.eta:g}.")
        c = np.array([1.0 + 0j])
        C1 = basis.to_moment_coordinates(c)
        residual = abs(t)
        coefficients = np.array([0.0, 0.0, C1[0], 0.0, 0.0], dtype=complex)

    projected = basis.combine(c)
    g_minus_one = system.multiplier(mu, sector)
    excess = GridFunction(basis.grid, g_minus_one * projected.values)
    phi = projected + excess
    non_fluid = excess - basis.project(excess)
    defect = math.sqrt(max(inner_product(non_fluid, non_fluid, -system.operator.beta).real, 0.0))
    return EigenMode(label, system.eta, complex(mu), coefficients, c, phi, defect, residual)


def bilinear_overlap(phi_a, phi_b, beta):
    """(phi_a, phi_b) = Σ W <v>^-beta phi_a phi_b (켤레 없음)."""
    grid = phi_a.grid
    return complex(np.sum(grid.weights * grid.bracket(-beta) * phi_a.values * phi_b.values))


def orthogonality_defect(modes, beta):
    """서로 다른 종방향 모드의 상대 bilinear overlap 최댓값."""
    worst = 0.0
    longitudinal = [m for m in modes if LABEL_SECTOR[m.label] == 0]
    for i, a in enumerate(longitudinal):
        for b in longitudinal[i + 1:]:
            norm = math.sqrt(abs(bilinear_overlap(a.phi, a.phi, beta))
                             * abs(bilinear_overlap(b.phi, b.phi, beta))) or 1.0
            worst = max(worst, abs(bilinear_overlap(a.phi, b.phi, beta)) / norm)
    return worst


@dataclass
class SpectralSample:
    eta: float
    mu: complex
    coefficients: np.ndarray
    defect: float
    residual: float
    matrix_mu: complex
    cross_validation: float


@dataclass
class SpectralBranch:
    label: str
    samples: list = field(default_factory=list)

    @property
    def etas(self):
        return np.array([s.eta for s in self.samples])

    @property
    def mus(self):
        return np.array([s.mu for s in self.samples])

    def endpoint(self):
        return min(self.samples, key=lambda s: s.eta)


@dataclass
class BranchSet:
    spec_label: str
    acoustic_speed: float
    branches: dict
    diagnostics: list = field(default_factory=list)

    def __getitem__(self, label):
        return self.branches[label]

    @property
    def etas(self):
        return self.branches["boussinesq"].etas


def _predict(history, eta):
    if len(history) >= 2:
        (e0, m0), (e1, m1) = history[-2], history[-1]
        return m1 + (m1 - m0) * (eta - e1) / (e1 - e0)
    e1, m1 = history[-1]
    return m1 * eta / e1


def _solve_at(system, seeds):
    roots = solve_longitudinal(system, seeds)
    roots["transversal"] = solve_transversal(
        system, seeds.get("transversal", 0.0) if seeds else 0.0
    )
    return roots


def track_branches(operator, etas, trust_factor=10.0, r_bar=R_BAR_DEFAULT,
                   progress_callback=None):
    """내림차순 eta 격자를 따라 네 분기를 연속 추적한다."""
    etas = np.sort(np.asarray(etas, dtype=float))[::-1]
    if etas.size < 2:
        raise InsufficientRange(f"Branch tracking needs at least two eta values, got {etas.size}.")
    if etas[-1] <= 0.0:
        raise ParameterDomain("Branch tracking needs strictly positive eta values.")

    speed = acoustic_speed(operator)
    branches = {label: SpectralBranch(label) for label in LABELS}
    history = {label: [] for label in LABELS}
    diagnostics = []

    for idx, eta in enumerate(etas):
        system = DispersionSystem(operator, eta)
        spectrum = fluid_eigenvalues(operator, eta, r_bar)

        if idx == 0:
            try:
                roots = _solve_at(system, None)
            except (RootNotConverged, RootCollision) as e:
                log.warning("re-seeding from matrix eigenvalues at eta=%g: %s", eta, e)
                roots = _solve_at(system, spectrum.values)
        else:
            seeds = {label: _predict(history[label], eta) for label in LABELS}
            try:
                roots = _solve_at(system, seeds)
            except (RootNotConverged, RootCollision) as e:
                log.warning("re-seeding from matrix eigenvalues at eta=%g: %s", eta, e)
                roots = _solve_at(system, spectrum.values)
            for label in LABELS:
                prev = history[label][-1][1]
                actual = abs(roots[label].mu - prev)
                predicted = abs(seeds[label] - prev)
                floor = 1e-9 * abs(prev) + 1e-15 * eta
                if actual > trust_factor * max(predicted, floor):
                    raise BranchJump(
                        f"{label} jumped from {prev} to {roots[label].mu} at eta={eta:g} "
                        f"(predicted step {predicted:.3g}).",
                        eta=float(eta),
                        label=label,
                    )

        modes = []
        for label in LABELS:
            mu = roots[label].mu
            mode = eigenmode_coefficients(system, mu, label)
            modes.append(mode)
            matrix_mu = spectrum.values[label]
            branches[label].samples.append(
                SpectralSample(
                    eta=float(eta),
                    mu=mu,
                    coefficients=mode.coefficients,
                    defect=mode.defect,
                    residual=mode.residual,
                    matrix_mu=matrix_mu,
                    cross_validation=abs(mu - matrix_mu) / (1.0 + abs(mu)),
                )
            )
            history[label].append((eta, mu))
        diagnostics.append(
            {"eta": float(eta), "orthogonality_defect": orthogonality_defect(modes, operator.beta)}
        )

        if progress_callback:
            progress_callback(int(100 * (idx + 1) / etas.size), f"eta={eta:.3e}")
    log.info("tracked %d samples per branch for %s", etas.size, operator.spec.label)
    return BranchSet(operator.spec.label, speed, branches, diagnostics)


def radial_sensitivity(operator, eta, radial_map, n_radial, n_angular):
    """다른 반경 맵에서 같은 eta의 근을 다시 풀어 상대 변화를 보고한다."""
    other = build_collision_operator(operator.spec, n_radial, n_angular, radial_map)
    reference = _solve_at(DispersionSystem(operator, eta), None)
    alternative = _solve_at(DispersionSystem(other, eta), None)
    changes = {}
    for label in LABELS:
        mu = reference[label].mu
        changes[label] = abs(mu - alternative[label].mu) / max(abs(mu), 1e-300)
    return changes
