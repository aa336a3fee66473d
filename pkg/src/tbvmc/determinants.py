"""Second-quantized occupation configurations and fermionic bookkeeping.

A configuration is a bitstring over ``n_so`` spin-orbitals.  The layout is
interleaved: spatial orbital ``i`` owns spin-orbital ``2*i`` (up) and
``2*i + 1`` (down), so the up/down pair of one spatial orbital is adjacent.
Determinants are defined with creation operators applied in ascending
spin-orbital index; every sign in the package refers to that ordering.

Configs serialize as ASCII 0/1 strings with the leftmost character being
spin-orbital 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Iterator

from .errors import CapacityExceeded, OccupancyViolation

ALPHA = 0
BETA = 1


def spin_orbital_index(spatial: int, spin: int) -> int:
    """Map (spatial orbital, spin channel) to a spin-orbital index."""
    return 2 * spatial + spin


def spatial_and_spin(index: int) -> tuple[int, int]:
    """Inverse of :func:`spin_orbital_index`."""
    return index >> 1, index & 1


@lru_cache(maxsize=None)
def _alpha_mask(n_so: int) -> int:
    mask = 0
    for j in range(0, n_so, 2):
        mask |= 1 << j
    return mask


@dataclass(frozen=True)
class SpinSector:
    """Fixed electron number and total spin projection (as 2*Sz)."""

    n_electrons: int
    two_sz: int

    def __post_init__(self):
        if (self.n_electrons + self.two_sz) % 2 != 0:
            raise ValueError(
                f"n_electrons={self.n_electrons} and two_sz={self.two_sz} "
                "have mismatched parity"
            )
        if self.n_alpha < 0 or self.n_beta < 0:
            raise ValueError(f"negative channel count in sector {self}")

    @property
    def n_alpha(self) -> int:
        return (self.n_electrons + self.two_sz) // 2

    @property
    def n_beta(self) -> int:
        return (self.n_electrons - self.two_sz) // 2


@dataclass(frozen=True)
class OccupationConfig:
    """Immutable occupation bitstring with per-channel electron counts.

    ``bits`` packs the occupancy with bit j = spin-orbital j, so arbitrary
    widths (128+ spin-orbitals) cost nothing extra.  Channel counts are
    derived once at construction and reused everywhere.
    """

    bits: int
    n_so: int
    n_alpha: int = field(init=False)
    n_beta: int = field(init=False)

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.n_so:
            raise ValueError(f"bits 0x{self.bits:x} exceed n_so={self.n_so}")
        na = (self.bits & _alpha_mask(self.n_so)).bit_count()
        object.__setattr__(self, "n_alpha", na)
        object.__setattr__(self, "n_beta", self.bits.bit_count() - na)

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta

    def occupied(self, bit) -> bool:
        return bool((self.bits >> bit) & 1)

    def occupied_indices(self) -> tuple[int, ...]:
        """Strictly increasing positions of set bits (cached)."""
        cached = self.__dict__.get("_occ")
        if cached is None:
            b, out = self.bits, []
            while b:
                low = b & -b
                out.append(low.bit_length() - 1)
                b ^= low
            cached = tuple(out)
            object.__setattr__(self, "_occ", cached)
        return cached

    def channel_spatial(self, spin: int) -> tuple[int, ...]:
        """Occupied spatial orbitals of one spin channel, ascending (cached)."""
        key = "_chan_a" if spin == ALPHA else "_chan_b"
        cached = self.__dict__.get(key)
        if cached is None:
            cached = tuple(
                j >> 1 for j in self.occupied_indices() if (j & 1) == spin
            )
            object.__setattr__(self, key, cached)
        return cached

    def move(self, source: int, target: int) -> "OccupationConfig":
        """Config with the electron at ``source`` moved to ``target``."""
        if not self.occupied(source) or self.occupied(target):
            raise OccupancyViolation(
                f"move {source}->{target} invalid on {self.to_string()}"
            )
        return OccupationConfig(self.bits ^ (1 << source) ^ (1 << target), self.n_so)

    def to_string(self) -> str:
        """ASCII serialization, leftmost character = spin-orbital 0."""
        return "".join("1" if self.occupied(j) else "0" for j in range(self.n_so))

    @classmethod
    def from_string(cls, s: str) -> "OccupationConfig":
        bits = 0
        for j, ch in enumerate(s):
            if ch == "1":
                bits |= 1 << j
            elif ch != "0":
                raise ValueError(f"invalid config string {s!r}")
        return cls(bits, len(s))

    @classmethod
    def from_occupied(cls, indices, n_so: int) -> "OccupationConfig":
        bits = 0
        for j in indices:
            if (bits >> j) & 1:
                raise OccupancyViolation(f"index {j} listed twice")
            bits |= 1 << j
        return cls(bits, n_so)

    def __repr__(self):
        return f"OccupationConfig({self.to_string()!r})"


def excitation_parity(config: OccupationConfig, source: int, target: int) -> int:
    """Fermionic sign of moving one electron from ``source`` to ``target``.

    Equals (-1)**k where k counts occupied spin-orbitals strictly between
    the two indices, matching the ascending creation-operator convention.
    """
    if not config.occupied(source):
        raise OccupancyViolation(f"source {source} empty in {config.to_string()}")
    if config.occupied(target):
        raise OccupancyViolation(f"target {target} occupied in {config.to_string()}")
    lo, hi = (source, target) if source < target else (target, source)
    between = config.bits & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    return -1 if between.bit_count() & 1 else 1


def sector_dimension(sector: SpinSector, n_spatial: int) -> int:
    return comb(n_spatial, sector.n_alpha) * comb(n_spatial, sector.n_beta)


def enumerate_sector(
    sector: SpinSector, n_spatial: int, cap: int | None = 20_000_000
) -> Iterator[OccupationConfig]:
    """Yield every config of the sector exactly once.

    Order is lexicographic on the (alpha occupation, beta occupation)
    spatial index tuples, with the beta index running fastest.
    """
    dim = sector_dimension(sector, n_spatial)
    if cap is not None and dim > cap:
        raise CapacityExceeded(f"sector dimension {dim} exceeds cap {cap}")
    n_so = 2 * n_spatial
    orbitals = range(n_spatial)
    for alpha in itertools.combinations(orbitals, sector.n_alpha):
        abits = 0
        for i in alpha:
            abits |= 1 << (2 * i)
        for beta in itertools.combinations(orbitals, sector.n_beta):
            bits = abits
            for i in beta:
                bits |= 1 << (2 * i + 1)
            yield OccupationConfig(bits, n_so)
