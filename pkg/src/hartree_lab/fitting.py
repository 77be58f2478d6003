"""Log-log power-law fits."""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError


@dataclass(frozen=True)
class PowerFit:
    slope: float
    intercept: float
    r_squared: float
    stderr: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.r_squared))

    def interval(self, level: float = 0.95):
        """Two-sided t interval of the slope."""
        return self.slope - self.half_width(level), self.slope + self.half_width(level)

    def half_width(self, level: float = 0.95, dof: int = None) -> float:
        if dof is None:
            dof = getattr(self, "_dof", 2)
        return float(stats.t.ppf(0.5 + level / 2, max(dof, 1)) * self.stderr)

    def within(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol


def fit_power_law(x, y, min_points: int = 4) -> PowerFit:
    """Least squares of ``log y`` on ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be 1-d arrays of equal length")
    if x.size < min_points:
        raise DomainError(f"need at least {min_points} points, got {x.size}")
    if np.any(y <= 0) or np.any(x <= 0):
        raise DomainError("power-law fit needs positive x and y")
    res = stats.linregress(np.log(x), np.log(y))
    fit = PowerFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2), float(res.stderr))
    object.__setattr__(fit, "_dof", x.size - 2)
    return fit
