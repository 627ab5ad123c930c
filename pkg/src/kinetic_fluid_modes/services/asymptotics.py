"""분기 데이터에서 스케일링 지수, 극한 상수, 극한 모드를 추출한다."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateNullspace, InsufficientRange, ParameterDomain
from .fitting import fit_fixed_exponent, fit_power_law
from .spectral import LABEL_SECTOR, LONGITUDINAL_LABELS, DispersionSystem, acoustic_speed
from .velocity_space import check_equilibrium_parameters

log = logging.getLogger(__name__)

HIGHEST_MOMENT_THRESHOLD = 1e-8
FIT_RESIDUAL_TOL = 1e-10
FIT_SKIP = 2

# E 기저 (1, v1, v2, v3, (|v|^2-3)/2)의 모멘트 차수
_MOMENT_ORDER = (0, 1, 1, 1, 2)


def _regime(alpha, threshold):
    if math.isinf(alpha) or alpha > threshold:
        return "classical"
    if alpha == threshold:
        return "critical"
    return "fractional"


@dataclass(frozen=True)
class ScalingPrediction:
    alpha: float
    beta: float
    zeta_long: float
    zeta_trans: float
    im_exponent: float
    regime_long: str
    regime_trans: str

    @property
    def fractional(self):
        return self.regime_long == "fractional"

    def as_dict(self):
        return dict(self.__dict__)


def theoretical_exponents(alpha, beta):
    """종방향/횡방향 고유값 스케일링 지수."""
    kind = "gaussian" if alpha is None or math.isinf(alpha) else "polynomial"
    check_equilibrium_parameters(kind, alpha if kind == "polynomial" else None, beta)
    alpha = math.inf if kind == "gaussian" else float(alpha)
    beta = float(beta)

    regime_long = _regime(alpha, 6.0 + beta)
    regime_trans = _regime(alpha, 4.0 + beta)
    zeta_long = 2.0 if regime_long == "classical" else (alpha + beta - 4.0) / (1.0 + beta)
    zeta_trans = 2.0 if regime_trans == "classical" else (alpha + beta - 2.0) / (1.0 + beta)
    if not (0.0 < zeta_long <= 2.0 and 0.0 < zeta_trans <= 2.0):
        raise ParameterDomain(f"Exponents out of range for alpha={alpha}, beta={beta}.")
    return ScalingPrediction(alpha, beta, zeta_long, zeta_trans, 1.0, regime_long, regime_trans)


@dataclass
class LimitModes:
    """eta -> 0 극한의 유체 모드. 계수는 E 기저, 정규직교 계수 c도 함께 둔다."""

    coefficients: dict
    orthonormal: dict
    first_order: np.ndarray
    acoustic_speed: float
    im_mu_bar: dict
    orthonormality_error: float

    def as_dict(self):
        return {
            "coefficients": {k: list(v) for k, v in self.coefficients.items()},
            "acoustic_speed": self.acoustic_speed,
            "im_mu_bar": dict(self.im_mu_bar),
            "orthonormality_error": self.orthonormality_error,
        }


def _positive_last(c, C):
    sign = -1.0 if C[-1] < 0.0 else 1.0
    return sign * c, sign * C


def limit_modes(operator):
    """1차 행렬 B의 고유벡터로 극한 모드를 구한다. B의 고유값 (-D, 0, D)."""
    system = DispersionSystem(operator, 0.0)
    B = system.first_order_matrix()
    B = 0.5 * (B + B.T)
    values, vectors = np.linalg.eigh(B)
    speed = float(values[-1])
    if speed <= 1e-12 or abs(values[1]) > 1e-8 * speed or abs(values[0] + speed) > 1e-8 * speed:
        raise DegenerateNullspace(f"First-order matrix has unexpected spectrum {values}.")

    basis = system.longitudinal
    coefficients, orthonormal, im_mu_bar = {}, {}, {}
    # Im mu = -eta·lambda_B 이므로 lambda_B = -D 가 acoustic_plus
    for label, idx in (("boussinesq", 1), ("acoustic_plus", 0), ("acoustic_minus", 2)):
        c = vectors[:, idx]
        C3 = basis.to_moment_coordinates(c).real
        c, C3 = _positive_last(c, C3)
        orthonormal[label] = c
        coefficients[label] = np.array([C3[0], C3[1], 0.0, 0.0, C3[2]])
        im_mu_bar[label] = -float(c @ B @ c)

    C_t = system.transverse.to_moment_coordinates(np.array([1.0])).real
    orthonormal["transversal"] = np.array([1.0])
    coefficients["transversal"] = np.array([0.0, 0.0, C_t[0], 0.0, 0.0])
    im_mu_bar["transversal"] = 0.0

    stacked = np.column_stack([orthonormal[k] for k in LONGITUDINAL_LABELS])
    error = float(np.max(np.abs(stacked.T @ stacked - np.eye(3))))
    log.debug("limit modes: D=%.12g orthonormality error=%.3g", speed, error)
    return LimitModes(coefficients, orthonormal, B, speed, im_mu_bar, error)


@dataclass
class AcousticConstants:
    acoustic_speed: float
    im_mu_bar_plus: float
    im_mu_bar_minus: float
    endpoint_ratio: float | None = None
    ratio_spread: float | None = None
    relative_gap: float | None = None

    def as_dict(self):
        return dict(self.__dict__)


def acoustic_constants(operator, branches=None, window=None):
    """D와 Im mu_bar. branches가 있으면 Im mu_+/eta와 비교한다."""
    modes = limit_modes(operator)
    result = AcousticConstants(
        acoustic_speed=acoustic_speed(operator),
        im_mu_bar_plus=modes.im_mu_bar["acoustic_plus"],
        im_mu_bar_minus=modes.im_mu_bar["acoustic_minus"],
    )
    if branches is None:
        return result
    branch = branches["acoustic_plus"]
    endpoint = branch.endpoint()
    result.endpoint_ratio = endpoint.mu.imag / endpoint.eta
    window = window or default_fit_window(branch)
    _, result.ratio_spread = fit_fixed_exponent(
        [(s.eta, s.mu.imag) for s in branch.samples], 1.0, window
    )
    gap = abs(result.endpoint_ratio - result.im_mu_bar_plus)
    result.relative_gap = gap / abs(result.im_mu_bar_plus)
    return result


def highest_moment(C, threshold=HIGHEST_MOMENT_THRESHOLD):
    """계수가 threshold를 넘는 최고 모멘트 차수 k."""
    C = np.asarray(C)
    orders = [order for order, value in zip(_MOMENT_ORDER, C) if abs(value) > threshold]
    if not orders:
        raise ValueError("Coefficient vector is zero to the threshold.")
    return max(orders)


def _decade_above(etas, lo):
    """10·lo 이상인 첫 eta, 없으면 None."""
    reach = [eta for eta in sorted(etas) if eta >= 10.0 * lo * (1.0 - 1e-9)]
    return reach[0] if reach else None


def default_fit_window(branch, residual_tol=FIT_RESIDUAL_TOL, skip=FIT_SKIP):
    """잔차가 작은 샘플 중 가장 작은 eta부터 한 decade. 추적 시작부 skip개는 제외한다."""
    ordered = sorted(branch.samples, key=lambda s: s.eta, reverse=True)[skip:]
    usable = [s.eta for s in ordered if s.residual <= residual_tol]
    if len(usable) < 2:
        raise InsufficientRange(f"{branch.label}: fewer than two samples pass the residual filter.")
    lo = min(usable)
    hi = _decade_above(usable, lo)
    return lo, max(usable) if hi is None else hi


@dataclass
class BranchFit:
    name: str
    label: str
    expected: float
    fit: object
    amplitude_shift: float | None = None

    @property
    def deviation(self):
        return abs(self.fit.exponent - self.expected)

    def as_dict(self):
        data = {"name": self.name, "label": self.label, "expected": self.expected,
                "deviation": self.deviation, "amplitude_shift": self.amplitude_shift}
        data.update(self.fit.as_dict())
        return data


_FIT_QUANTITIES = (
    ("boussinesq", "boussinesq", "real", "zeta_long"),
    ("acoustic_plus_re", "acoustic_plus", "real", "zeta_long"),
    ("acoustic_minus_re", "acoustic_minus", "real", "zeta_long"),
    ("transversal", "transversal", "real", "zeta_trans"),
    ("acoustic_plus_im", "acoustic_plus", "imag", "im_exponent"),
)


def _branch_samples(branch, part):
    return [(s.eta, getattr(s.mu, part)) for s in branch.samples]


def _amplitude_shift(samples, exponent, window):
    lo, hi = window
    base, _ = fit_fixed_exponent(samples, exponent, window)
    try:
        shifted, _ = fit_fixed_exponent(samples, exponent, (2.0 * lo, 2.0 * hi))
    except InsufficientRange:
        return None
    return abs(shifted - base) / base


def branch_fits(branches, prediction, window=None, min_samples=6):
    """Re mu 세 개, mu_t, Im mu_+ 의 log-log 피팅."""
    fits = {}
    for name, label, part, attr in _FIT_QUANTITIES:
        branch = branches[label]
        samples = _branch_samples(branch, part)
        span = window or default_fit_window(branch)
        fit = fit_power_law(samples, span, min_samples=min_samples)
        expected = getattr(prediction, attr)
        shift = _amplitude_shift(samples, expected, span)
        fits[name] = BranchFit(name, label, expected, fit, shift)
        log.info("fit %s: exponent=%.4f expected=%.4f r2=%.6f", name, fit.exponent, expected,
                 fit.r_squared)
    return fits


@dataclass
class DiffusionConstants:
    kappa_theta: float
    kappa_acoustic: float
    kappa_transversal: float
    spreads: dict = field(default_factory=dict)

    def as_dict(self):
        return dict(self.__dict__)


def diffusion_constants(branches, prediction, window=None):
    """kappa = lim mu(eta) / eta^zeta, 지수 고정 amplitude로 추정."""
    values, spreads = {}, {}
    for key, label, exponent in (
        ("kappa_theta", "boussinesq", prediction.zeta_long),
        ("kappa_acoustic", "acoustic_plus", prediction.zeta_long),
        ("kappa_transversal", "transversal", prediction.zeta_trans),
    ):
        branch = branches[label]
        span = window or default_fit_window(branch)
        samples = _branch_samples(branch, "real")
        values[key], spreads[key] = fit_fixed_exponent(samples, exponent, span)
    return DiffusionConstants(spreads=spreads, **values)


@dataclass
class TransversalOrdering:
    etas: list
    ratios: list
    monotone: bool
    drop_factor: float

    def as_dict(self):
        return dict(self.__dict__)


def transversal_ordering(branches):
    """마지막 eta decade에서 mu_t / Re mu_0 의 감소."""
    bouss = {s.eta: s.mu.real for s in branches["boussinesq"].samples}
    trans = {s.eta: s.mu.real for s in branches["transversal"].samples}
    etas = sorted(set(bouss) & set(trans), reverse=True)
    if not etas:
        raise InsufficientRange("Branches share no eta samples.")
    lo = etas[-1]
    hi = _decade_above(etas, lo)
    last = [eta for eta in etas if hi is not None and eta <= hi]
    if len(last) < 2:
        raise InsufficientRange("The tracked eta range does not cover a full decade.")
    ratios = [trans[eta] / bouss[eta] for eta in last]
    monotone = all(b <= a * (1.0 + 1e-9) for a, b in zip(ratios, ratios[1:]))
    return TransversalOrdering(last, ratios, monotone, ratios[0] / ratios[-1])


@dataclass
class ModeConvergence:
    label: str
    etas: list
    errors: list
    rates: list
    endpoint_error: float
    extrapolated: np.ndarray | None = None
    extrapolation_error: float | None = None
    correction_exponent: float | None = None

    @property
    def rate_band(self):
        rates = [r for r in self.rates if r > 0.0]
        return max(rates) / min(rates) if rates else math.nan

    @property
    def limit_error(self):
        """외삽이 있으면 외삽 오차, 없으면 끝점 오차."""
        if self.extrapolation_error is None:
            return self.endpoint_error
        return self.extrapolation_error

    def as_dict(self):
        data = dict(self.__dict__)
        if self.extrapolated is not None:
            data["extrapolated"] = list(self.extrapolated)
        data["rate_band"] = self.rate_band
        data["limit_error"] = self.limit_error
        return data


def extrapolate_coefficients(branch, exponent, window=None, min_samples=4):
    """창 안의 C(eta)를 a + b·s + c·s², s = eta^(zeta-1) 로 맞추고 eta -> 0 값 a를 돌려준다."""
    power = exponent - 1.0
    if power <= 0.0:
        raise ParameterDomain(f"Extrapolation needs zeta > 1, got {exponent}.")
    lo, hi = window or default_fit_window(branch)
    picked = [s for s in branch.samples if lo * (1 - 1e-12) <= s.eta <= hi * (1 + 1e-12)]
    if len(picked) < min_samples:
        raise InsufficientRange(
            f"{branch.label}: {len(picked)} samples in the window, need {min_samples}."
        )
    s = np.array([p.eta for p in picked]) ** power
    design = np.column_stack([np.ones_like(s), s, s * s])
    values = np.array([np.asarray(p.coefficients, dtype=complex) for p in picked])
    solution, *_ = np.linalg.lstsq(design.astype(complex), values, rcond=None)
    return solution[0]


def limit_mode_convergence(branch, limit, exponent=None, window=None):
    """‖C(eta) - C(0)‖, sqrt(Re mu) 대비 비율, exponent가 있으면 eta -> 0 외삽과 C(0)의 차."""
    target = np.asarray(limit.coefficients[branch.label])
    etas, errors, rates = [], [], []
    for s in sorted(branch.samples, key=lambda s: s.eta, reverse=True):
        err = float(np.linalg.norm(np.asarray(s.coefficients) - target))
        etas.append(s.eta)
        errors.append(err)
        rates.append(err / math.sqrt(s.mu.real) if s.mu.real > 0.0 else math.nan)
    result = ModeConvergence(branch.label, etas, errors, rates, errors[-1])
    if exponent is not None:
        extrapolated = extrapolate_coefficients(branch, exponent, window)
        result.extrapolated = extrapolated
        result.extrapolation_error = float(np.linalg.norm(extrapolated - target))
        result.correction_exponent = exponent - 1.0
    return result


def defect_band(branch, window=None):
    """창 안에서 defect / sqrt(Re mu) 의 max/min."""
    lo, hi = window or default_fit_window(branch)
    ratios = [
        s.defect / math.sqrt(s.mu.real)
        for s in branch.samples
        if lo * (1 - 1e-12) <= s.eta <= hi * (1 + 1e-12) and s.mu.real > 0.0 and s.defect > 0.0
    ]
    if len(ratios) < 2:
        raise InsufficientRange(f"{branch.label}: not enough samples for the defect band.")
    return max(ratios) / min(ratios)


@dataclass
class RescaledModeReport:
    label: str
    k: int
    etas: list
    sup_ratios: list

    @property
    def growth(self):
        return max(self.sup_ratios) / min(self.sup_ratios)

    def as_dict(self):
        data = dict(self.__dict__)
        data["growth"] = self.growth
        return data


def rescaled_mode_diagnostic(operator, branch, k=None, u_values=None, n_directions=9):
    """Phi_eta(u) = eta^{k/(1+beta)} phi_eta(eta^{-1/(1+beta)} u) 의 sup 을 점별 상한과 비교."""
    beta = operator.beta
    u_abs = np.geomspace(1e-2, 1e2, 41) if u_values is None else np.asarray(u_values, dtype=float)
    cos = np.linspace(-1.0, 1.0, n_directions)
    U, Cs = np.meshgrid(u_abs, cos, indexing="ij")
    sin = np.sqrt(1.0 - Cs ** 2)
    if k is None:
        k = highest_moment(branch.endpoint().coefficients)

    etas, ratios = [], []
    for s in branch.samples:
        scale = s.eta ** (-1.0 / (1.0 + beta))
        v = U * scale
        v1, v2 = v * Cs, v * sin
        basis = (np.ones_like(v), v1, v2, np.zeros_like(v), 0.5 * (v * v - 3.0))
        numerator = sum(c * e for c, e in zip(s.coefficients, basis))
        phi = numerator / ((1.0 - s.mu) - 1j * s.eta * (1.0 + v * v) ** (0.5 * beta) * v1)
        Phi = s.eta ** (k / (1.0 + beta)) * np.abs(phi)
        bound = (s.eta ** (2.0 / (1.0 + beta)) + U ** 2) ** (0.5 * k)
        etas.append(s.eta)
        ratios.append(float(np.max(Phi / bound)))
    return RescaledModeReport(branch.label, int(k), etas, ratios)


def scaling_report(operator, branches, tolerances):
    """예측, 피팅, 상수, 통과 여부를 담은 JSON 호환 dict."""
    spec = operator.spec
    prediction = theoretical_exponents(spec.alpha, spec.beta)
    fits = branch_fits(branches, prediction)
    acoustic = acoustic_constants(operator, branches)
    modes = limit_modes(operator)
    diffusion = diffusion_constants(branches, prediction)

    exponent_tol = tolerances["gaussian_exponent"] if spec.is_gaussian else tolerances["exponent"]
    checks = {}
    for name, record in fits.items():
        tol = tolerances["im_exponent"] if name.endswith("_im") else exponent_tol
        checks[f"exponent_{name}"] = record.deviation <= tol
        checks[f"r_squared_{name}"] = record.fit.r_squared >= tolerances["r_squared"]
        if record.amplitude_shift is not None:
            shift_ok = record.amplitude_shift <= tolerances["amplitude_shift"]
            checks[f"amplitude_shift_{name}"] = shift_ok

    checks["im_ratio_spread"] = acoustic.ratio_spread <= tolerances["im_ratio"]
    if not prediction.fractional:
        checks["im_mu_bar"] = acoustic.relative_gap <= tolerances["im_ratio"]
    if spec.is_gaussian and spec.beta == 0.0:
        checks["acoustic_speed"] = (
            abs(acoustic.acoustic_speed - math.sqrt(5.0 / 3.0)) / math.sqrt(5.0 / 3.0)
            <= tolerances["acoustic_speed"]
        )

    convergence, bands, rescaled = {}, {}, {}
    for label, branch in branches.branches.items():
        exponent = prediction.zeta_long if LABEL_SECTOR[label] == 0 else prediction.zeta_trans
        convergence[label] = limit_mode_convergence(branch, modes, exponent)
        error = convergence[label].limit_error
        checks[f"limit_mode_{label}"] = error <= tolerances["limit_mode"]
        bands[label] = defect_band(branch)
        checks[f"defect_band_{label}"] = bands[label] <= tolerances["defect_band"]
        rescaled[label] = rescaled_mode_diagnostic(operator, branch)

    checks["kappa_positive"] = min(
        diffusion.kappa_theta, diffusion.kappa_acoustic, diffusion.kappa_transversal
    ) > 0.0

    ordering = None
    if prediction.fractional:
        ordering = transversal_ordering(branches)
        checks["transversal_ordering"] = (
            ordering.monotone and ordering.drop_factor >= tolerances["transversal_drop"]
        )

    cross = max(s.cross_validation for b in branches.branches.values() for s in b.samples)
    checks["cross_validation"] = cross <= tolerances["cross_validation"]

    return {
        "equilibrium": spec.label,
        "prediction": prediction.as_dict(),
        "fits": {name: record.as_dict() for name, record in fits.items()},
        "acoustic": acoustic.as_dict(),
        "limit_modes": modes.as_dict(),
        "diffusion": diffusion.as_dict(),
        "limit_mode_convergence": {k: v.as_dict() for k, v in convergence.items()},
        "defect_band": bands,
        "rescaled_modes": {k: v.as_dict() for k, v in rescaled.items()},
        "transversal_ordering": ordering.as_dict() if ordering else None,
        "max_cross_validation": cross,
        "checks": checks,
        "passed": all(checks.values()),
    }
