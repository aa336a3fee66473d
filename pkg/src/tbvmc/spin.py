"""Spin expectation values over sampled batches and exchange-constant fits.

All estimators reduce to the generic local-estimator form: for an
operator written as elementary second-quantized strings, each sampled
configuration x contributes sum_x' <x|O|x'> psi(x')/psi(x).  Partner
configurations and signs come from :mod:`tbvmc.operators`, the pooled
ratio evaluation is shared with the local-energy machinery.

On-site spin is purely diagonal; inter-orbital correlations add the two
spin-flip strings.  The exchange constant J is the least-squares slope of
energy against <S^2> across optimized spin states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAbscissa
from .local_energy import pooled_ratio_sums, weighted_moments
from .operators import (
    bra_connections,
    spin_dot_terms,
    spin_squared_set_terms,
    spin_squared_site_terms,
)
from .sampler import SampleBatch

HARTREE_TO_INVCM = 219474.6313632


@dataclass(frozen=True)
class OrbitalSet:
    """Named set of spatial orbitals (e.g. those localized on one center)."""

    name: str
    orbitals: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.orbitals)) != len(self.orbitals):
            raise ValueError(f"duplicate orbitals in set {self.name!r}")
        if any(i < 0 for i in self.orbitals):
            raise ValueError(f"negative orbital index in set {self.name!r}")


@dataclass(frozen=True)
class SpinStatePoint:
    """One optimized spin state: its energy and measured <S^2>."""

    energy: float
    s2: float


def estimate_operator(terms, batch: SampleBatch, net) -> tuple[float, float]:
    """Batch mean and standard error of a term-sum local estimator."""
    partner_lists = [bra_connections(terms, c) for c in batch.unique]
    values, _ = pooled_ratio_sums(batch, net, partner_lists)
    mean, var = weighted_moments(values, batch.counts)
    return mean, float(np.sqrt(var / batch.size))


def measure_si2(i: int, batch: SampleBatch, net) -> tuple[float, float]:
    """<S_i^2> of one spatial orbital (diagonal estimator)."""
    return estimate_operator(spin_squared_site_terms(i), batch, net)


def measure_sisj(i: int, j: int, batch: SampleBatch, net) -> tuple[float, float]:
    """<S_i . S_j> for distinct orbitals, flips included."""
    return estimate_operator(spin_dot_terms(i, j), batch, net)


def measure_s2_set(p: OrbitalSet, batch: SampleBatch, net) -> tuple[float, float]:
    """<S^2> of an orbital set."""
    if len(p.orbitals) == 1:
        return measure_si2(p.orbitals[0], batch, net)
    return estimate_operator(spin_squared_set_terms(p.orbitals), batch, net)


def measure_set_correlation(
    p: OrbitalSet, q: OrbitalSet, batch: SampleBatch, net
) -> tuple[float, float]:
    """<S_P . S_Q> between disjoint orbital sets."""
    if set(p.orbitals) & set(q.orbitals):
        raise ValueError(f"orbital sets {p.name!r} and {q.name!r} overlap")
    terms = []
    for i in p.orbitals:
        for j in q.orbitals:
            terms.extend(spin_dot_terms(i, j))
    return estimate_operator(terms, batch, net)


def yamaguchi_j(points) -> tuple[float, float]:
    """Least-squares slope of energy vs <S^2> and its r-squared.

    The slope is the exchange constant in energy units per unit of spin
    squared; multiply by HARTREE_TO_INVCM for wavenumbers.
    """
    points = list(points)
    if len(points) < 2:
        raise ValueError("at least two spin states required")
    x = np.array([p.s2 for p in points])
    y = np.array([p.energy for p in points])
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise DegenerateAbscissa("all <S^2> values coincide")
    slope = float(xc @ yc) / sxx
    ss_res = float(((yc - slope * xc) ** 2).sum())
    ss_tot = float(yc @ yc)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, r2
