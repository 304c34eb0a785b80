"""
Stability analysis of a target subspace H_S.

Structural checks (invariance, SP, ND), the rates alpha_0, alpha_0', alpha_1, beta_0,
the Lyapunov certificate K_R and the non-demolition channel augmentation.
Every boolean check keeps its numeric residual next to it in the report.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from src.models.operators import (
    ChannelKind,
    SmeModel,
    SubspaceSplit,
    adapted_blocks,
    dagger,
)
from src.models.run_config import Settings, Tolerances
from src.models.superop import Generator, generator_superop, mean_evolve
from src.processors.alpha_optimizer import Alpha1Result, alpha1
from src.processors.lyapunov import LyapunovCertificate, lyapunov_K
from src.utils.errors import CertificateNotFoundError, StabilityPreconditionError
from src.utils.logger import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = 1


@dataclass
class InvarianceCheck:
    invariant: bool
    q_residual: float
    p_residual: float

    def __iter__(self):
        # unpacks as (invariant, residuals)
        yield self.invariant
        yield self.residuals

    @property
    def residuals(self) -> Dict[str, float]:
        return {"max_C_Q": self.q_residual, "H_P_condition": self.p_residual}


def check_invariance(model: SmeModel, split: SubspaceSplit, tol: float = 1e-9) -> InvarianceCheck:
    """H_S invariant iff every C_Q = 0 and i H_P - 1/2 sum_j C_S* C_P = 0 (Frobenius norms)."""
    blocks = adapted_blocks(model, split)
    q_residual = max(float(np.linalg.norm(b.Q)) for b in blocks.channels)
    cond = 1j * blocks.H.P
    for b in blocks.channels:
        cond = cond - 0.5 * dagger(b.S) @ b.P
    p_residual = float(np.linalg.norm(cond))
    invariant = q_residual <= tol and p_residual <= tol
    return InvarianceCheck(invariant=invariant, q_residual=q_residual, p_residual=p_residual)


def sp_margin(model: SmeModel, split: SubspaceSplit) -> float:
    """Smallest eigenvalue of C_R* C_R over jump channels; +inf without jump channels."""
    blocks = adapted_blocks(model, split)
    margins = [np.linalg.eigvalsh(dagger(b.R) @ b.R)[0] for b in blocks.of_kind(ChannelKind.JUMP)]
    return float(min(margins)) if margins else float("inf")


def check_sp(model: SmeModel, split: SubspaceSplit, tol: float = 1e-9) -> bool:
    return sp_margin(model, split) > tol


def alpha0(model: SmeModel, split: SubspaceSplit) -> float:
    """Spectral abscissa rate min{-Re lambda : lambda in sp(L_R)}."""
    L_R = generator_superop(model, split, Generator.L_R)
    eigs = L_R.eigenvalues()
    return max(float(np.min(-eigs.real)), 0.0)


def check_gas(model: SmeModel, split: SubspaceSplit, tolerances: Optional[Tolerances] = None) -> bool:
    tolerances = tolerances or Tolerances()
    inv = check_invariance(model, split, tolerances.invariance)
    if not inv.invariant:
        raise StabilityPreconditionError(
            f"GAS is undefined: target subspace not invariant "
            f"(max |C_Q| = {inv.q_residual:.3g}, H_P condition = {inv.p_residual:.3g})"
        )
    return alpha0(model, split) > tolerances.gas


def alpha0_prime(model: SmeModel, split: SubspaceSplit) -> float:
    leak = adapted_blocks(model, split).leak
    return max(float(np.linalg.eigvalsh(leak)[0]), 0.0)


def check_nd(
    model: SmeModel,
    split: SubspaceSplit,
    settings: Optional[Settings] = None,
    result: Optional[Alpha1Result] = None,
) -> bool:
    settings = settings or Settings()
    if not check_sp(model, split, settings.tolerances.sp):
        raise StabilityPreconditionError("ND is only defined under SP")
    if result is None:
        result = alpha1(model, split, settings.optimizer, settings.tolerances, settings.threads)
    return result.value > settings.tolerances.nd


def beta0(alpha0_value: float, alpha0_prime_value: float, alpha1_value: float) -> float:
    return max(alpha0_value, alpha0_prime_value + alpha1_value)


def add_nd_channel(model: SmeModel, split: SubspaceSplit, l_S: complex, l_R: complex) -> SmeModel:
    """Append the diffusive channel l_S P_S + l_R P_R; L_S and L_R are unchanged."""
    C = l_S * split.P_S + l_R * split.P_R
    return model.with_channel(C, ChannelKind.DIFFUSIVE)


def mean_invariance_probe(
    model: SmeModel, split: SubspaceSplit, times: Sequence[float] = (0.1, 1.0, 10.0)
) -> float:
    """max V(rho_hat(t)) over the H_S basis projectors and the maximally mixed state on H_S."""
    starts = []
    for k in range(split.d_S):
        e = np.zeros(split.d_S, dtype=complex)
        e[k] = 1.0
        starts.append(split.embed_S(np.outer(e, e.conj())))
    starts.append(split.embed_S(np.eye(split.d_S, dtype=complex) / split.d_S))

    worst = 0.0
    for rho0 in starts:
        for t in times:
            worst = max(worst, split.V(mean_evolve(model, rho0, t)))
    return worst


# =============================================================================
# REPORT
# =============================================================================

@dataclass
class StabilityReport:
    invariance: InvarianceCheck
    gas: bool
    sp: bool
    nd: bool
    alpha0: float
    alpha0_prime: float
    alpha1: float
    beta0: float
    sp_margin: float
    mean_invariance_residual: float
    optimizer: Optional[Alpha1Result] = field(default=None, repr=False)
    certificate: Optional[LyapunovCertificate] = field(default=None, repr=False)
    certificate_error: Optional[str] = None

    @property
    def invariant(self) -> bool:
        return self.invariance.invariant

    @property
    def alpha0_prime_consistent(self) -> bool:
        """alpha_0' <= alpha_0 (guaranteed on GAS models)."""
        return self.alpha0_prime <= self.alpha0 + 1e-9

    def check_summary(self) -> Dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "invariant": self.invariant,
            "gas": self.gas,
            "sp": self.sp,
            "nd": self.nd,
            "residuals": {
                **self.invariance.residuals,
                "mean_invariance": self.mean_invariance_residual,
                "sp_margin": _finite(self.sp_margin),
            },
        }

    def to_dict(self) -> Dict:
        out = self.check_summary()
        out.update(
            {
                "alpha0": self.alpha0,
                "alpha0_prime": self.alpha0_prime,
                "alpha1": self.alpha1,
                "beta0": self.beta0,
                "alpha0_prime_consistent": self.alpha0_prime_consistent,
                "optimizer": self.optimizer.to_dict() if self.optimizer else None,
                "certificate": self.certificate.to_dict() if self.certificate else None,
                "certificate_error": self.certificate_error,
            }
        )
        return out


def _finite(x: float) -> Optional[float]:
    return float(x) if np.isfinite(x) else None


def analyze(
    model: SmeModel,
    split: SubspaceSplit,
    settings: Optional[Settings] = None,
    epsilon: Optional[float] = None,
    certificate: bool = True,
) -> StabilityReport:
    """Run every check and rate; K_R is attempted only for GAS targets."""
    settings = settings or Settings()
    tol = settings.tolerances

    inv = check_invariance(model, split, tol.invariance)
    a0 = alpha0(model, split)
    a0p = alpha0_prime(model, split)
    gas = inv.invariant and a0 > tol.gas
    margin = sp_margin(model, split)
    sp = margin > tol.sp

    a1_result = alpha1(model, split, settings.optimizer, tol, settings.threads)
    nd = sp and a1_result.value > tol.nd
    b0 = beta0(a0, a0p, a1_result.value)

    logger.info(
        f"invariant={inv.invariant} gas={gas} sp={sp} nd={nd} "
        f"alpha0={a0:.6g} alpha0'={a0p:.6g} alpha1={a1_result.value:.6g} beta0={b0:.6g}"
    )
    if gas and a0p > a0 + 1e-9:
        logger.warning(f"alpha0'={a0p:.6g} exceeds alpha0={a0:.6g} on a GAS model")

    report = StabilityReport(
        invariance=inv,
        gas=gas,
        sp=sp,
        nd=nd,
        alpha0=a0,
        alpha0_prime=a0p,
        alpha1=a1_result.value,
        beta0=b0,
        sp_margin=margin,
        mean_invariance_residual=mean_invariance_probe(model, split),
        optimizer=a1_result,
    )

    if certificate and gas:
        try:
            report.certificate = lyapunov_K(model, split, epsilon, settings.certificate, alpha0_value=a0)
        except CertificateNotFoundError as e:
            logger.error(f"Lyapunov certificate failed: {e}")
            report.certificate_error = str(e)
    return report
