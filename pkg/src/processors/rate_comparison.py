"""
Rate comparison: fitted exponents against the theoretical bounds, plus the
closed-form two-level reference.

Bounds checked:
    mean exponent  <= -alpha_0 + slack
    a.s. exponents <= -beta_0  + slack,    slack = slack_fraction * beta_0 + 2 * stderr
Outside the two-level case only the direction of the inequality is meaningful, so the
record says "bound respected", never "rate confirmed".
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.models.operators import ChannelKind, SmeModel, SubspaceSplit
from src.processors.exponent_fit import ExponentFit
from src.processors.stability import SCHEMA_VERSION, StabilityReport
from src.utils.errors import StabilityPreconditionError
from src.utils.logger import get_logger

logger = get_logger(__name__)


# =============================================================================
# TWO-LEVEL REFERENCE
# =============================================================================

@dataclass(frozen=True)
class QubitReference:
    alpha0: float
    alpha0_prime: float
    alpha1: float
    as_exponent: float

    @property
    def beta0(self) -> float:
        return max(self.alpha0, self.alpha0_prime + self.alpha1)

    def to_dict(self) -> Dict:
        return {
            "alpha0": self.alpha0,
            "alpha0_prime": self.alpha0_prime,
            "alpha1": self.alpha1,
            "as_exponent": self.as_exponent,
        }


def qubit_reference(l_P: complex, l_S: complex, l_R: complex) -> QubitReference:
    """alpha_0 = alpha_0' = |l_P|^2, alpha_1 = 2 Re^2(l_S - l_R), exponent -(alpha_0 + alpha_1)."""
    a0 = abs(l_P) ** 2
    a1 = 2.0 * np.real(l_S - l_R) ** 2
    return QubitReference(alpha0=a0, alpha0_prime=a0, alpha1=float(a1), as_exponent=-(a0 + float(a1)))


def qubit_model(l_P: complex, l_S: complex, l_R: complex) -> Tuple[SmeModel, SubspaceSplit]:
    """H = 0, C_0 = l_P |S><R| and C_1 = diag(l_S, l_R), both diffusive."""
    C0 = np.array([[0, l_P], [0, 0]], dtype=complex)
    C1 = np.diag([l_S, l_R]).astype(complex)
    model = SmeModel.create(
        np.zeros((2, 2), dtype=complex),
        [(C0, ChannelKind.DIFFUSIVE), (C1, ChannelKind.DIFFUSIVE)],
    )
    return model, SubspaceSplit.standard(2, 1)


def qubit_drift(l_P: complex, l_S: complex, l_R: complex, p: float, c: complex) -> float:
    """
    Ito drift of ln(1 - p) at rho = [[p, c], [conj(c), 1 - p]].

    From dp: -|l_P|^2 - 2 Re^2(l_P conj(c)) - 2 p^2 Re^2(l_S - l_R), i.e.
    -alpha_0 - alpha_1 p^2 - 2 Re^2(l_P conj(c)); tends to -(alpha_0 + alpha_1) as p -> 1, c -> 0.
    """
    ref = qubit_reference(l_P, l_S, l_R)
    return float(-ref.alpha0 - ref.alpha1 * p**2 - 2.0 * np.real(l_P * np.conj(c)) ** 2)


# =============================================================================
# COMPARISON
# =============================================================================

@dataclass
class RateComparison:
    alpha0: float
    beta0: float
    n_fits: int
    n_excluded: int
    median_slope: Optional[float] = None
    iqr: Optional[Tuple[float, float]] = None
    mean_slope: Optional[float] = None
    as_slack: Optional[float] = None
    mean_slack: Optional[float] = None
    as_bound_respected: Optional[bool] = None
    mean_bound_respected: Optional[bool] = None
    qubit_exponent: Optional[float] = None
    qubit_match: Optional[bool] = None
    seeds: List[dict] = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.n_fits == 0 and self.mean_slope is None:
            return "no data"
        checks = [c for c in (self.as_bound_respected, self.mean_bound_respected) if c is not None]
        return "bound respected" if all(checks) else "bound violated"

    def to_dict(self) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "status": self.status,
            "theory": {"alpha0": self.alpha0, "beta0": self.beta0, "mean_bound": -self.alpha0, "as_bound": -self.beta0},
            "as": {
                "n_fits": self.n_fits,
                "n_excluded": self.n_excluded,
                "median_slope": self.median_slope,
                "iqr": list(self.iqr) if self.iqr else None,
                "slack": self.as_slack,
                "pass": self.as_bound_respected,
            },
            "mean": {"slope": self.mean_slope, "slack": self.mean_slack, "pass": self.mean_bound_respected},
            "qubit": {"exponent": self.qubit_exponent, "match": self.qubit_match},
            "seeds": self.seeds,
        }


def compare_rates(
    report: StabilityReport,
    fits: Sequence[Optional[ExponentFit]],
    mean_fit: Optional[ExponentFit] = None,
    slack_fraction: float = 0.2,
    qubit: Optional[QubitReference] = None,
    band: float = 0.15,
    seeds: Optional[List[dict]] = None,
) -> RateComparison:
    """
    Compare fitted slopes against -alpha_0 (mean) and -beta_0 (a.s.).

    `fits` holds one entry per trajectory; None marks a trajectory without a usable fit
    (e.g. V identically 0) and is excluded. With a two-level reference the median slope is
    additionally checked against -(alpha_0 + alpha_1) within +-band.
    """
    if not report.gas:
        raise StabilityPreconditionError("rate comparison requires a GAS target")

    usable = [f for f in fits if f is not None]
    out = RateComparison(
        alpha0=report.alpha0,
        beta0=report.beta0,
        n_fits=len(usable),
        n_excluded=len(fits) - len(usable),
        seeds=list(seeds or []),
    )

    if usable:
        slopes = np.array([f.slope for f in usable])
        q1, med, q3 = np.percentile(slopes, [25, 50, 75])
        stderr = float(np.std(slopes, ddof=1) / np.sqrt(len(slopes))) if len(slopes) > 1 else 0.0
        out.median_slope = float(med)
        out.iqr = (float(q1), float(q3))
        out.as_slack = slack_fraction * report.beta0 + 2.0 * stderr
        out.as_bound_respected = bool(med <= -report.beta0 + out.as_slack)

        if qubit is not None:
            out.qubit_exponent = qubit.as_exponent
            out.qubit_match = bool(abs(med - qubit.as_exponent) <= band * abs(qubit.as_exponent))

    if mean_fit is not None:
        out.mean_slope = mean_fit.slope
        out.mean_slack = slack_fraction * report.beta0 + 2.0 * mean_fit.stderr
        out.mean_bound_respected = bool(mean_fit.slope <= -report.alpha0 + out.mean_slack)

    logger.info(
        f"Rate comparison: {out.status} (median a.s. slope={out.median_slope}, mean slope={out.mean_slope}, "
        f"-alpha0={-report.alpha0:.4g}, -beta0={-report.beta0:.4g})"
    )
    return out
