"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

import numpy as np

from .ansatz import BackflowNet
from .determinants import OccupationConfig

REL_FLOOR = 1e-3


def finite_difference_log_grad(
    net: BackflowNet, config: OccupationConfig, h: float = 1e-5
) -> np.ndarray:
    """Central differences of log|psi| over every parameter."""
    theta = net.get_flat()
    fd = np.empty_like(theta)
    for k in range(theta.size):
        probe = theta.copy()
        probe[k] = theta[k] + h
        net.set_flat(probe)
        _, up = net.amplitude_batch([config])
        probe[k] = theta[k] - h
        net.set_flat(probe)
        _, dn = net.amplitude_batch([config])
        fd[k] = (up[0] - dn[0]) / (2 * h)
    net.set_flat(theta)
    return fd


def max_relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """Componentwise |a - r| / max(|a|, |r|, REL_FLOOR).

    The floor turns the check into a 1e-8-level absolute bound for
    components smaller than 1e-3, where a pure relative error would only
    amplify finite-difference noise.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(reference)), REL_FLOOR)
    return float(np.max(np.abs(analytic - reference) / denom))


def check_gradients(
    net: BackflowNet, configs, h: float = 1e-5
) -> float:
    """Worst-case relative error of log_grad against central differences."""
    worst = 0.0
    for config in configs:
        _, _, jac = net.log_grad_batch([config])
        fd = finite_difference_log_grad(net, config, h)
        worst = max(worst, max_relative_error(jac[0], fd))
    return worst
