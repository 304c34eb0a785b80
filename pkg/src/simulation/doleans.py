"""
Scalar replay of ln V along a recorded trajectory (Doleans-Dade form).

Between jumps
    d ln V = [tr L_R(rho_red) - 1/2 |r_R(rho_red) - r(rho)|^2 - sum_jump (v_R(rho_red) - v(rho))] dt
             + sum_diffusive (r_R(rho_red) - r(rho)) dW
and a jump of channel j adds ln(v_R,j(rho_red) / v_j(rho)), where rho_red = rho_R / tr(rho_R).
The replay uses the recorded pre-step states and the same Wiener increments.
"""

import numpy as np

from src.models.operators import SmeModel, SubspaceSplit
from src.simulation.trajectory import SmeKernel, Trajectory, _ReducedObservables
from src.utils.errors import InsufficientDataError, NumericalFailure


def doleans_track(model: SmeModel, split: SubspaceSplit, trajectory: Trajectory) -> np.ndarray:
    """ln V on every grid point, integrated from ln V(rho0) with the trajectory's own noise."""
    if trajectory.states is None or trajectory.noise is None or trajectory.jumped is None:
        raise InsufficientDataError("replay needs a trajectory recorded with full_state=True")
    states = trajectory.states
    n = trajectory.noise.shape[0]
    if states.shape[0] != n + 1 or len(trajectory.record_steps) != n + 1:
        raise InsufficientDataError("replay needs record_stride=1")

    dt = trajectory.dt
    kernel = SmeKernel(model, dt)
    obs = _ReducedObservables(model, split)

    pre = states[:-1]
    V = obs.V(states)
    bad = np.flatnonzero(V <= 0)
    if bad.size:
        raise NumericalFailure("V <= 0 on the trajectory; replay requires V > 0", time=float(bad[0] * dt))

    r_R, v_R, tr_LR = obs.evaluate(pre, V[:-1])
    r = kernel.r_values(pre)
    v = kernel.intensities(pre)

    drift = tr_LR - 0.5 * np.sum((r_R - r) ** 2, axis=1) - np.sum(v_R - v, axis=1)
    increments = drift * dt + np.sum((r_R - r) * trajectory.noise, axis=1)

    jumped = trajectory.jumped
    hits = np.flatnonzero(jumped >= 0)
    if hits.size:
        ch = jumped[hits]
        increments[hits] = np.log(v_R[hits, ch] / v[hits, ch])

    out = np.empty(n + 1)
    out[0] = np.log(V[0])
    out[1:] = out[0] + np.cumsum(increments)
    return out
