"""
Lyapunov-exponent estimation: OLS slope of ln V against t over a tail window.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.stats import linregress

from src.models.operators import SmeModel, SubspaceSplit, hermitize, validate_density_matrix
from src.models.superop import lindblad_superop, unvec, vec
from src.utils.errors import InsufficientDataError
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class ExponentFit:
    slope: float
    intercept: float
    window: Tuple[float, float]
    r_squared: float
    n_points: int
    stderr: float = 0.0

    def to_dict(self) -> Dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "window": list(self.window),
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "stderr": self.stderr,
        }


def default_window(times: np.ndarray, usable: np.ndarray, skip_fraction: float) -> Tuple[float, float]:
    """Last (1 - skip_fraction) of the span before the first unusable (absorbed) point."""
    bad = np.flatnonzero(~usable)
    last = (bad[0] - 1) if bad.size else len(times) - 1
    if last < 1:
        return float(times[0]), float(times[0])
    t0, t1 = float(times[0]), float(times[last])
    return t0 + skip_fraction * (t1 - t0), t1


def fit_exponent(
    times,
    ln_v,
    window: Optional[Tuple[float, float]] = None,
    v_floor: float = 1e-12,
    skip_fraction: float = 1.0 / 3.0,
    min_points: int = 10,
) -> ExponentFit:
    """
    Fit ln V = slope * t + intercept.

    Points with V <= v_floor (or non-finite ln V) are never used.

    Raises:
        InsufficientDataError: fewer than min_points usable points in the window
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(ln_v, dtype=float)
    usable = np.isfinite(y) & (y > np.log(v_floor))

    lo, hi = window if window is not None else default_window(t, usable, skip_fraction)
    mask = usable & (t >= lo) & (t <= hi)
    n_points = int(mask.sum())
    if n_points < min_points or hi <= lo:
        raise InsufficientDataError(f"{n_points} usable points in window [{lo:.4g}, {hi:.4g}], need {min_points}")

    x, yy = t[mask], y[mask]
    res = linregress(x, yy)
    ss_res = float(np.sum((yy - (res.slope * x + res.intercept)) ** 2))
    ss_tot = float(np.sum((yy - yy.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0

    return ExponentFit(
        slope=float(res.slope),
        intercept=float(res.intercept),
        window=(float(lo), float(hi)),
        r_squared=float(np.clip(r_squared, 0.0, 1.0)),
        n_points=n_points,
        stderr=float(res.stderr),
    )


def fit_mean_flow(
    model: SmeModel,
    split: SubspaceSplit,
    rho0,
    t_final: float,
    n_points: int = 200,
    v_floor: float = 1e-12,
    skip_fraction: float = 1.0 / 3.0,
) -> ExponentFit:
    """Mean exponent from ln V(rho_hat(t)) of the exact mean flow on a uniform grid."""
    rho0 = validate_density_matrix(rho0, model.d)
    times = np.linspace(0.0, t_final, n_points)
    prop = expm((times[1] - times[0]) * lindblad_superop(model).mat)

    v = vec(rho0)
    V = np.empty(n_points)
    for k in range(n_points):
        V[k] = split.V(hermitize(unvec(v, model.d)))
        v = prop @ v

    with np.errstate(divide="ignore"):
        ln_v = np.log(np.maximum(V, 0.0))
    return fit_exponent(times, ln_v, v_floor=v_floor, skip_fraction=skip_fraction)
