"""Parameter updates: plain stochastic gradient, Adam, MinSR, and MARCH.

The stochastic-reconfiguration updates work in sample space: with the
centered Jacobian O (rows = samples) and chi = 2 (E_loc - mean), MinSR
solves (O O^T + lambda I) zeta = chi and steps along O^T zeta.  MARCH
adds a gradient-difference velocity that rescales parameters, a momentum
term, clipping on the velocity, and a norm cap on the step.

The distributed variant partitions parameters column-wise over P workers;
here that dataflow is reproduced in process with deterministic pairwise
reductions and ordered gathers, so results match a serial run to float
reassociation error for any worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SolverFailure

EIG_RELATIVE_CUTOFF = 1e-12


@dataclass
class JacobianBatch:
    """Centered per-sample log-derivatives and energy fluctuations."""

    o: np.ndarray
    chi: np.ndarray

    def __post_init__(self):
        if self.o.ndim != 2 or self.chi.shape != (self.o.shape[0],):
            raise ValueError(
                f"shape mismatch: O {self.o.shape}, chi {self.chi.shape}"
            )

    @property
    def n_samples(self) -> int:
        return self.o.shape[0]

    @property
    def n_params(self) -> int:
        return self.o.shape[1]

    @classmethod
    def from_raw(cls, o_raw: np.ndarray, e_loc: np.ndarray) -> "JacobianBatch":
        """Center the raw Jacobian and fold the factor 2 into chi."""
        o_raw = np.asarray(o_raw, dtype=np.float64)
        e_loc = np.asarray(e_loc, dtype=np.float64)
        o = o_raw - o_raw.mean(axis=0)
        chi = 2.0 * (e_loc - e_loc.mean())
        return cls(o, chi)


def sgd_gradient(jb: JacobianBatch) -> np.ndarray:
    """g = O^T chi / B, the covariance form of the energy gradient."""
    return jb.o.T @ jb.chi / jb.n_samples


@dataclass
class AdamState:
    """Textbook Adam with bias correction."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n: int, lr: float = 1e-3) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), lr=lr)


def adam_step(theta: np.ndarray, state: AdamState, g: np.ndarray) -> np.ndarray:
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * g
    state.v = state.beta2 * state.v + (1 - state.beta2) * g * g
    mhat = state.m / (1 - state.beta1**state.t)
    vhat = state.v / (1 - state.beta2**state.t)
    return theta - state.lr * mhat / (np.sqrt(vhat) + state.eps)


@dataclass(frozen=True)
class MarchHyper:
    """Hyperparameters with their standard defaults."""

    eta: float = 0.1
    beta1: float = 0.95
    beta2: float = 0.995
    lam: float = 0.001
    epsilon_clip: float = 1e8
    norm_constraint: float = 0.1
    batch_size: int = 4096


@dataclass
class MarchState:
    """Velocity, previous gradients, and the last momentum vector."""

    m: np.ndarray
    v: np.ndarray
    g_prev: np.ndarray
    g_prev2: np.ndarray
    hyper: MarchHyper = field(default_factory=MarchHyper)

    @classmethod
    def fresh(cls, n: int, hyper: MarchHyper = MarchHyper()) -> "MarchState":
        return cls(
            m=np.zeros(n),
            v=np.ones(n),
            g_prev=np.zeros(n),
            g_prev2=np.zeros(n),
            hyper=hyper,
        )


@dataclass(frozen=True)
class WorkerPartition:
    """Column partition of the parameter axis over P workers.

    Sizes are padded up to a multiple of P; rows are also split B/P-wise
    in the real distributed layout, but since every worker ends up
    holding all rows of its column slice after the all-to-all exchange,
    only the column split enters the arithmetic here.
    """

    n_workers: int = 1

    def __post_init__(self):
        if self.n_workers < 1:
            raise ValueError("worker count must be positive")

    def padded(self, n: int) -> int:
        p = self.n_workers
        return ((n + p - 1) // p) * p

    def blocks(self, n: int) -> list[slice]:
        width = self.padded(n) // self.n_workers
        return [slice(r * width, (r + 1) * width) for r in range(self.n_workers)]

    def row_blocks(self, b: int) -> list[slice]:
        return self.blocks(b)


def _tree_sum(parts: list[np.ndarray]) -> np.ndarray:
    """Pairwise reduction in fixed order (a deterministic AllReduce)."""
    parts = list(parts)
    while len(parts) > 1:
        merged = []
        for i in range(0, len(parts) - 1, 2):
            merged.append(parts[i] + parts[i + 1])
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def solve_least_squares(s: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solve of a symmetric system by
    eigendecomposition, dropping eigenvalues below 1e-12 of the largest."""
    try:
        w, u = scipy.linalg.eigh(s, driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverFailure(f"eigendecomposition failed: {exc}") from None
    if not np.all(np.isfinite(w)):
        raise SolverFailure("non-finite eigenvalues in least-squares solve")
    cutoff = np.abs(w).max() * EIG_RELATIVE_CUTOFF if w.size else 0.0
    wsafe = np.where(np.abs(w) > cutoff, w, np.inf)
    coef = (u.T @ rhs) / wsafe
    coef[~np.isfinite(coef)] = 0.0
    return u @ coef


def minsr_step(jb: JacobianBatch, lam: float) -> np.ndarray:
    """Reference MinSR gradient O^T (O O^T + lambda I)^{-1} chi."""
    s = jb.o @ jb.o.T + lam * np.eye(jb.n_samples)
    zeta = solve_least_squares(s, jb.chi)
    return jb.o.T @ zeta


@dataclass(frozen=True)
class MarchInfo:
    grad_norm: float
    eta_eff: float


def march_step(
    theta: np.ndarray,
    state: MarchState,
    jb: JacobianBatch,
    partition: WorkerPartition = WorkerPartition(1),
) -> tuple[np.ndarray, MarchState, MarchInfo]:
    """One MARCH update; returns (new theta, updated state, step info).

    The dataflow follows the distributed layout: per-worker column slices
    build partial Fisher matrices that are tree-summed, the regularized
    system is solved once, per-worker gradient slices are gathered in
    rank order, and the velocity update happens slice-locally.
    """
    hyper = state.hyper
    n = jb.n_params
    n_pad = partition.padded(n)
    o = jb.o
    if n_pad != n:
        o = np.concatenate([o, np.zeros((o.shape[0], n_pad - n))], axis=1)
    v = np.concatenate([state.v, np.ones(n_pad - n)])
    g_prev = np.concatenate([state.g_prev, np.zeros(n_pad - n)])
    m = hyper.beta1 * g_prev
    blocks = partition.blocks(n)

    vinv = 1.0 / np.sqrt(v)
    s_parts = [(o[:, blk] * vinv[blk]) @ o[:, blk].T for blk in blocks]
    s = _tree_sum(s_parts) + hyper.lam * np.eye(jb.n_samples)
    om_parts = [o[:, blk] @ m[blk] for blk in blocks]
    xi = jb.chi - _tree_sum(om_parts)
    zeta = solve_least_squares(s, xi)

    g_parts = [vinv[blk] * (o[:, blk].T @ zeta) + m[blk] for blk in blocks]
    g = np.concatenate(g_parts)[:n]
    v_parts = [
        np.clip(
            hyper.beta2 * v[blk] + (g_parts[r] - g_prev[blk]) ** 2,
            1.0 / hyper.epsilon_clip,
            hyper.epsilon_clip,
        )
        for r, blk in enumerate(blocks)
    ]
    v_new = np.concatenate(v_parts)[:n]

    grad_norm = float(np.linalg.norm(g))
    eta_eff = hyper.eta
    if grad_norm > 0:
        eta_eff = min(hyper.eta, hyper.norm_constraint / grad_norm)
    new_state = MarchState(
        m=m[:n],
        v=v_new,
        g_prev=g.copy(),
        g_prev2=state.g_prev.copy(),
        hyper=hyper,
    )
    return theta - eta_eff * g, new_state, MarchInfo(grad_norm, eta_eff)
