"""Local energies E_loc(x) = sum_x' H_xx' psi(x')/psi(x) over a batch.

Exact mode enumerates every connected configuration; semistochastic mode
keeps connections with |H| above a threshold in a deterministic set and
importance-samples the rest with probability proportional to |H|, which
leaves the estimator unbiased while cutting amplitude evaluations.

Amplitude evaluation dominates the cost, so targets are deduplicated
across the whole batch and evaluated once.  Connection generation can be
partitioned over worker threads; chunks merge in a fixed order and each
per-source sum runs in generation order, so results are identical for
any thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ZeroAmplitude
from .hamiltonian import IntegralTable, connect
from .sampler import SampleBatch


@dataclass(frozen=True)
class SemistochasticConfig:
    """Split threshold and sampling budget for the candidate set.

    ``n_candidate_samples = 0`` means automatic: one tenth of the
    candidate-set size, floor 1.
    """

    epsilon_det: float = 1e-8
    n_candidate_samples: int = 0
    mode: str = "exact"

    def __post_init__(self):
        if self.epsilon_det < 0 or self.n_candidate_samples < 0:
            raise ValueError(f"invalid semistochastic config: {self}")
        if self.mode not in ("exact", "semistochastic"):
            raise ValueError(f"unknown local-energy mode {self.mode!r}")


@dataclass
class LocalEnergyReport:
    """Per-unique-config local energies plus batch statistics."""

    values: np.ndarray
    counts: np.ndarray
    mean: float
    variance: float
    n_psi_evaluations: int

    @property
    def batch_size(self) -> int:
        return int(self.counts.sum())


def weighted_moments(values, counts):
    values = np.asarray(values, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    mean = float(np.dot(counts, values) / total)
    var = float(np.dot(counts, (values - mean) ** 2) / total)
    return mean, var


def _require_nonzero(batch: SampleBatch):
    if np.any(batch.signs == 0):
        raise ZeroAmplitude("sample batch contains a zero-amplitude config")


def pooled_ratio_sums(batch: SampleBatch, net, partner_lists):
    """Per-unique-source sums  sum_j w_j psi(x_j)/psi(x_i).

    ``partner_lists[i]`` holds (config, weight) pairs for unique source i.
    All partner configs are pooled, deduplicated in first-appearance
    order, and evaluated through the wavefunction once.  Returns the
    sums array and the pool size (the number of amplitude evaluations).
    """
    pool_index: dict[int, int] = {}
    pool_configs = []
    for partners in partner_lists:
        for config, _ in partners:
            if config.bits not in pool_index:
                pool_index[config.bits] = len(pool_configs)
                pool_configs.append(config)
    psigns, plogs = net.amplitude_batch(pool_configs)
    sums = np.zeros(batch.n_unique)
    for i, partners in enumerate(partner_lists):
        s_src, l_src = batch.signs[i], batch.log_abs[i]
        acc = 0.0
        for config, weight in partners:
            j = pool_index[config.bits]
            if psigns[j] == 0:
                continue
            acc += weight * psigns[j] * s_src * np.exp(plogs[j] - l_src)
        sums[i] = acc
    return sums, len(pool_configs)


def _connection_lists(batch: SampleBatch, ints: IntegralTable, n_threads: int):
    sources = batch.unique
    if n_threads <= 1 or len(sources) < 2:
        return [connect(c, ints) for c in sources]
    chunks = np.array_split(np.arange(len(sources)), n_threads)

    def work(idx):
        return [connect(sources[i], ints) for i in idx]

    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        parts = list(pool.map(work, chunks))
    out = []
    for part in parts:
        out.extend(part)
    return out


def local_energy_exact(
    batch: SampleBatch, ints: IntegralTable, net, n_threads: int = 1
) -> LocalEnergyReport:
    """Exact local energies; deterministic for any thread count."""
    _require_nonzero(batch)
    conn_lists = _connection_lists(batch, ints, n_threads)
    partner_lists = [
        [(conn.target, conn.element) for conn in conns] for conns in conn_lists
    ]
    values, n_evals = pooled_ratio_sums(batch, net, partner_lists)
    mean, var = weighted_moments(values, batch.counts)
    return LocalEnergyReport(values, batch.counts.copy(), mean, var, n_evals)


def local_energy_semistochastic(
    batch: SampleBatch,
    ints: IntegralTable,
    net,
    cfg: SemistochasticConfig,
    rng: np.random.Generator,
    n_threads: int = 1,
) -> LocalEnergyReport:
    """Split-and-sample local energies.

    Per source, connections with |H| > epsilon_det are summed exactly;
    the rest form the candidate set, sampled with replacement under
    P(x') = |H| / sum|H| and reweighted by H / (P * n_samples), which
    makes the estimator's expectation equal the exact sum.  Sampling is
    done serially in source order from the caller's rng, so thread count
    does not affect the draws.
    """
    _require_nonzero(batch)
    conn_lists = _connection_lists(batch, ints, n_threads)
    partner_lists = []
    for conns in conn_lists:
        deterministic = []
        candidates = []
        for conn in conns:
            if abs(conn.element) > cfg.epsilon_det:
                deterministic.append((conn.target, conn.element))
            else:
                candidates.append(conn)
        partners = deterministic
        if candidates:
            n_draws = cfg.n_candidate_samples
            if n_draws == 0:
                n_draws = max(1, len(candidates) // 10)
            weights = np.array([abs(c.element) for c in candidates])
            probs = weights / weights.sum()
            picks = rng.choice(len(candidates), size=n_draws, replace=True, p=probs)
            for k in picks:
                conn = candidates[int(k)]
                partners.append(
                    (conn.target, conn.element / (probs[int(k)] * n_draws))
                )
        partner_lists.append(partners)
    values, n_evals = pooled_ratio_sums(batch, net, partner_lists)
    mean, var = weighted_moments(values, batch.counts)
    return LocalEnergyReport(values, batch.counts.copy(), mean, var, n_evals)


def local_energy(
    batch, ints, net, cfg: SemistochasticConfig, rng=None, n_threads: int = 1
) -> LocalEnergyReport:
    """Dispatch on the configured mode."""
    if cfg.mode == "exact":
        return local_energy_exact(batch, ints, net, n_threads)
    if rng is None:
        raise ValueError("semistochastic mode needs an rng")
    return local_energy_semistochastic(batch, ints, net, cfg, rng, n_threads)


def energy_estimate(report: LocalEnergyReport) -> tuple[float, float]:
    """Batch mean and its standard error (no autocorrelation correction)."""
    if len(report.values) == 0:
        raise ValueError("empty report")
    stderr = float(np.sqrt(report.variance / report.batch_size))
    return report.mean, stderr
