"""log-log 거듭제곱 피팅."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import InsufficientRange, NonPositiveValue

R_SQUARED_MIN = 0.995


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    amplitude: float
    r_squared: float
    window: tuple
    n_samples: int

    @property
    def accepted(self):
        return self.r_squared >= R_SQUARED_MIN

    def as_dict(self):
        return {
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "n_samples": self.n_samples,
            "accepted": self.accepted,
        }


def loglog_slope(x, y):
    """범위 검사 없이 log y = slope·log x + c 회귀. (slope, c, r²)."""
    res = stats.linregress(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))
    return float(res.slope), float(res.intercept), float(res.rvalue) ** 2


def _select(samples, window):
    pts = [(float(x), float(y)) for x, y in samples]
    if window is None:
        return pts
    lo, hi = window
    slack = 1e-12
    return [(x, y) for x, y in pts if lo * (1.0 - slack) <= x <= hi * (1.0 + slack)]


def _validated(samples, window, min_samples, min_decades):
    pts = _select(samples, window)
    if len(pts) < min_samples:
        raise InsufficientRange(f"Need at least {min_samples} samples, got {len(pts)}.")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(xs <= 0.0):
        raise InsufficientRange("Abscissae must be positive for a log-log fit.")
    if np.any(~np.isfinite(ys)) or np.any(ys <= 0.0):
        raise NonPositiveValue("Power-law fits need strictly positive finite values.")
    decades = math.log10(xs.max() / xs.min())
    if decades < min_decades - 1e-9:
        raise InsufficientRange(f"Samples span {decades:.3g} decades, need {min_decades}.")
    return xs, ys


def fit_power_law(samples, window=None, min_samples=6, min_decades=1.0):
    """value ≈ amplitude · x^exponent 최소제곱 피팅."""
    xs, ys = _validated(samples, window, min_samples, min_decades)
    slope, intercept, r_squared = loglog_slope(xs, ys)
    return ScalingFit(
        exponent=slope,
        amplitude=math.exp(intercept),
        r_squared=r_squared,
        window=(float(xs.min()), float(xs.max())),
        n_samples=int(xs.size),
    )


def fit_fixed_exponent(samples, exponent, window=None, min_samples=2):
    """지수를 고정하고 amplitude만 추정. (amplitude, 상대 산포)."""
    xs, ys = _validated(samples, window, min_samples, 0.0)
    logs = np.log(ys) - exponent * np.log(xs)
    amplitude = math.exp(float(np.mean(logs)))
    spread = float(np.exp(np.ptp(logs)) - 1.0)
    return amplitude, spread
