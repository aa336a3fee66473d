"""Exact diagonalization of small active-space sectors.

This is the ground truth the rest of the package is tested against: a
dense Hamiltonian over an enumerated sector, its lowest eigenpair, and a
wavefunction object exposing the exact amplitudes through the same
interface as the neural ansatz.  A second, completely independent matrix
builder based on raw operator application exists for cross-checking the
Slater-Condon path.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .ansatz import Amplitude
from .determinants import (
    OccupationConfig,
    SpinSector,
    enumerate_sector,
    sector_dimension,
)
from .errors import CapacityExceeded, ConvergenceFailure
from .hamiltonian import IntegralTable, connect
from .operators import hamiltonian_terms, matrix_in_basis

DEFAULT_DIMENSION_CAP = 20_000


@dataclass
class DenseSpectrum:
    """Sector basis, dense Hamiltonian, and (once solved) its eigenpairs."""

    basis: list[OccupationConfig]
    matrix: np.ndarray
    sector: SpinSector
    eigenvalues: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None
    index: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.basis)


def build_dense(
    ints: IntegralTable, sector: SpinSector, cap: int = DEFAULT_DIMENSION_CAP
) -> DenseSpectrum:
    """Dense sector Hamiltonian filled column by column via ``connect``."""
    dim = sector_dimension(sector, ints.n_orb)
    if dim > cap:
        raise CapacityExceeded(f"sector dimension {dim} exceeds cap {cap}")
    basis = list(enumerate_sector(sector, ints.n_orb, cap=None))
    index = {c.bits: i for i, c in enumerate(basis)}
    mat = np.zeros((dim, dim))
    for col, config in enumerate(basis):
        for conn in connect(config, ints):
            mat[index[conn.target.bits], col] = conn.element
    return DenseSpectrum(basis=basis, matrix=mat, sector=sector, index=index)


def build_dense_by_operator_application(
    ints: IntegralTable, sector: SpinSector, cap: int = DEFAULT_DIMENSION_CAP
) -> DenseSpectrum:
    """Same matrix from elementary operator strings; the cross-check path."""
    dim = sector_dimension(sector, ints.n_orb)
    if dim > cap:
        raise CapacityExceeded(f"sector dimension {dim} exceeds cap {cap}")
    basis = list(enumerate_sector(sector, ints.n_orb, cap=None))
    mat = matrix_in_basis(hamiltonian_terms(ints), basis)
    mat += ints.core_energy * np.eye(dim)
    return DenseSpectrum(
        basis=basis,
        matrix=mat,
        sector=sector,
        index={c.bits: i for i, c in enumerate(basis)},
    )


def solve(spectrum: DenseSpectrum) -> DenseSpectrum:
    """Full symmetric eigendecomposition, eigenvalues ascending."""
    try:
        vals, vecs = scipy.linalg.eigh(spectrum.matrix)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"dense eigensolver failed: {exc}") from None
    spectrum.eigenvalues = vals
    spectrum.eigenvectors = vecs
    return spectrum


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(vec)))
    return -vec if vec[pivot] < 0 else vec.copy()


def ground_state(spectrum: DenseSpectrum):
    """Lowest eigenpair; the coefficient vector is normalized with its
    largest-magnitude component made positive."""
    if spectrum.eigenvalues is None:
        solve(spectrum)
    vec = spectrum.eigenvectors[:, 0]
    vec = _fix_sign(vec / np.linalg.norm(vec))
    return float(spectrum.eigenvalues[0]), vec


def eigenstate(spectrum: DenseSpectrum, which: int):
    """The ``which``-th eigenpair with the same sign convention."""
    if spectrum.eigenvalues is None:
        solve(spectrum)
    vec = spectrum.eigenvectors[:, which]
    return float(spectrum.eigenvalues[which]), _fix_sign(vec / np.linalg.norm(vec))


class OracleWavefunction:
    """Exact sector wavefunction behind the standard amplitude interface.

    Coefficients below 1e-12 of the largest are truncated to exact zeros:
    eigensolvers leave ~1e-16 junk on components that vanish by symmetry,
    and amplitude ratios against such configs would be garbage.
    """

    TRUNCATION = 1e-12

    def __init__(self, basis, coefficients, n_so: int):
        self.n_so = n_so
        coefficients = np.asarray(coefficients, dtype=np.float64)
        floor = np.abs(coefficients).max() * self.TRUNCATION
        self._table = {
            c.bits: float(v)
            for c, v in zip(basis, coefficients)
            if abs(v) > floor
        }

    def amplitude(self, config: OccupationConfig) -> Amplitude:
        val = self._table.get(config.bits, 0.0)
        if val == 0.0:
            return Amplitude(0, -np.inf)
        return Amplitude(1 if val > 0 else -1, math.log(abs(val)))

    def amplitude_batch(self, configs):
        signs = np.zeros(len(configs))
        logs = np.full(len(configs), -np.inf)
        for i, c in enumerate(configs):
            amp = self.amplitude(c)
            signs[i] = amp.sign
            if amp.sign != 0:
                logs[i] = amp.log_abs
        return signs, logs


def inject_oracle_wavefunction(
    spectrum: DenseSpectrum, which: int = 0
) -> OracleWavefunction:
    """Wrap an exact eigenvector as an amplitude provider."""
    _, vec = eigenstate(spectrum, which)
    n_so = spectrum.basis[0].n_so if spectrum.basis else 0
    return OracleWavefunction(spectrum.basis, vec, n_so)


def fixture_record(
    fcidump_text: str, spectrum: DenseSpectrum, top_k: int = 8
) -> dict:
    """JSON-safe summary of a solved spectrum for frozen test fixtures."""
    e0, vec = ground_state(spectrum)
    order = np.argsort(-np.abs(vec))[:top_k]
    return {
        "fcidump_hash": hashlib.sha256(fcidump_text.encode()).hexdigest(),
        "sector": {
            "n_electrons": spectrum.sector.n_electrons,
            "two_sz": spectrum.sector.two_sz,
        },
        "dimension": spectrum.dimension,
        "e0": e0,
        "coefficients": [
            [spectrum.basis[i].to_string(), float(vec[i])] for i in order
        ],
    }


def dump_fixture(fcidump_text: str, spectrum: DenseSpectrum, path, top_k: int = 8):
    payload = fixture_record(fcidump_text, spectrum, top_k)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return payload
