"""
Lyapunov certificate K_R for the reduced dynamics.

L_R*(K_R) <= -(alpha_0 - eps) K_R with K_R >= I, built from the Perron eigenoperator of
the irreducible perturbation L_R* + eta * Psi, Psi(X) = tr(X) I. The extension
K = diag(0, K_R) gives the linear Lyapunov function V_K(rho) = tr(K rho).
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.linalg import eigh

from src.models.model_schema import matrix_to_json
from src.models.operators import SmeModel, SubspaceSplit, hermitize
from src.models.run_config import CertificateConfig
from src.models.superop import Generator, generator_superop, unvec, vec
from src.utils.errors import CertificateNotFoundError, StabilityPreconditionError
from src.utils.logger import get_logger

logger = get_logger(__name__)

GAS_TOL = 1e-9


@dataclass
class LyapunovCertificate:
    K_R: np.ndarray = field(repr=False)
    certified_rate: float
    alpha0: float
    epsilon: float
    eta: float
    residual: float

    def to_dict(self) -> Dict:
        return {
            "K_R": matrix_to_json(self.K_R),
            "certified_rate": self.certified_rate,
            "alpha0": self.alpha0,
            "epsilon": self.epsilon,
            "eta": self.eta,
            "residual": self.residual,
            "min_eig_K_R": float(np.linalg.eigvalsh(self.K_R)[0]),
        }


def _perron_operator(mat: np.ndarray, d_R: int) -> Optional[np.ndarray]:
    """Hermitian eigenoperator for the eigenvalue of maximal real part, scaled to min eig 1."""
    w, vecs = np.linalg.eig(mat)
    K = unvec(vecs[:, int(np.argmax(w.real))], d_R)
    tr = np.trace(K)
    if abs(tr) < 1e-300:
        return None
    K = hermitize(K / (tr / abs(tr)))
    low = np.linalg.eigvalsh(K)[0]
    if low <= 0:
        return None
    return K / low


def lyapunov_K(
    model: SmeModel,
    split: SubspaceSplit,
    epsilon: Optional[float] = None,
    cfg: Optional[CertificateConfig] = None,
    alpha0_value: Optional[float] = None,
) -> LyapunovCertificate:
    """
    Build K_R with L_R*(K_R) <= -(alpha_0 - epsilon) K_R.

    epsilon defaults to alpha_0 / 2. eta starts at eta_start_fraction * alpha_0 and
    shrinks geometrically until the certificate verifies or eta < eta_min.

    Raises:
        StabilityPreconditionError: alpha_0 = 0 or epsilon outside (0, alpha_0)
        CertificateNotFoundError: eta underflow without a verified certificate
    """
    cfg = cfg or CertificateConfig()
    d_R = split.d_R
    adj = generator_superop(model, split, Generator.L_R_ADJOINT).mat

    # sp(L_R*) is the conjugate of sp(L_R)
    a0 = alpha0_value if alpha0_value is not None else max(float(np.min(-np.linalg.eigvals(adj).real)), 0.0)
    if a0 <= GAS_TOL:
        raise StabilityPreconditionError(f"no certificate for alpha0={a0:.3g}: target is not GAS")
    if epsilon is None:
        epsilon = a0 / 2.0
    if not 0.0 < epsilon < a0:
        raise StabilityPreconditionError(f"epsilon={epsilon} must lie in (0, alpha0={a0:.6g})")

    target = a0 - epsilon
    psi = np.outer(vec(np.eye(d_R)), vec(np.eye(d_R))).astype(complex)

    eta = cfg.eta_start_fraction * a0
    while eta >= cfg.eta_min:
        K = _perron_operator(adj + eta * psi, d_R)
        if K is not None:
            LK = hermitize(unvec(adj @ vec(K), d_R))
            rate = -float(eigh(LK, K, eigvals_only=True)[-1])
            residual = float(np.linalg.eigvalsh(LK + target * K)[-1])
            if residual <= cfg.tolerance:
                logger.info(f"K_R certified: rate={rate:.6g} >= {target:.6g} (eta={eta:.3g}, residual={residual:.3g})")
                return LyapunovCertificate(
                    K_R=K, certified_rate=rate, alpha0=a0, epsilon=epsilon, eta=eta, residual=residual
                )
            logger.debug(f"eta={eta:.3g}: rate {rate:.6g} < {target:.6g}, shrinking")
        eta *= cfg.eta_shrink

    raise CertificateNotFoundError(f"no certificate found for epsilon={epsilon:.6g} (eta underflow below {cfg.eta_min})")


def extend_certificate(K_R: np.ndarray, split: SubspaceSplit) -> np.ndarray:
    """K = diag(0, K_R) in the adapted basis, returned in the original basis."""
    K = np.zeros((split.d, split.d), dtype=complex)
    K[split.d_S:, split.d_S:] = K_R
    return split.from_adapted(K)


def lyapunov_value(K: np.ndarray, rho: np.ndarray) -> float:
    """V_K(rho) = tr(K rho)."""
    return float(np.real(np.trace(K @ rho)))
