"""FCIDUMP ingestion and Slater-Condon matrix elements.

Integrals live in chemists' notation: ``h[p, q]`` one-electron terms and
``g[p, q, r, s] = (pq|rs)`` two-electron terms with the full 8-fold
permutational symmetry expanded into a dense array at parse time (desk
scale tops out around 36 orbitals, 13 MB, so dense wins over canonical
compression).  The canonical entries actually read from the file are kept
separately so duplicates can be detected and serialization reproduces the
file content exactly.

``connect`` enumerates every configuration reachable by spin-conserving
single and double excitations together with its matrix element; it is the
production path for local energies.  The independent cross-check lives in
:mod:`tbvmc.operators`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .determinants import (
    OccupationConfig,
    excitation_parity,
    spatial_and_spin,
)
from .errors import (
    DuplicateInconsistentEntry,
    IndexOutOfRange,
    MalformedHeader,
)

DUPLICATE_TOL = 1e-12


def _canonical_two_electron(p, q, r, s):
    """Canonical representative of the 8 equivalent (pq|rs) index tuples."""
    pq = (p, q) if p >= q else (q, p)
    rs = (r, s) if r >= s else (s, r)
    return max(pq + rs, rs + pq)


@dataclass
class IntegralTable:
    """Active-space integrals plus header metadata from an FCIDUMP file."""

    n_orb: int
    n_elec: int
    ms2: int
    core_energy: float
    h: np.ndarray
    g: np.ndarray
    header_extras: dict = field(default_factory=dict)
    one_electron_entries: dict = field(default_factory=dict)
    two_electron_entries: dict = field(default_factory=dict)

    @property
    def n_so(self) -> int:
        return 2 * self.n_orb

    def validate(self):
        if not np.allclose(self.h, self.h.T, atol=1e-12):
            raise ValueError("one-electron integrals are not symmetric")


@dataclass(frozen=True)
class Connection:
    """One nonzero Hamiltonian matrix element from a source config."""

    target: OccupationConfig
    element: float


def _parse_header(text: str):
    m = re.search(r"&END|/", text, flags=re.IGNORECASE)
    if m is None:
        raise MalformedHeader("no &END or / terminator found")
    head, body = text[: m.start()], text[m.end():]
    head = re.sub(r"^\s*&FCI", "", head.strip(), flags=re.IGNORECASE)
    fields: dict[str, str] = {}
    for key, val in re.findall(r"([A-Za-z][A-Za-z0-9_]*)\s*=\s*([^=]*?)(?=[,\s]+[A-Za-z][A-Za-z0-9_]*\s*=|$)", head):
        fields[key.upper()] = val.strip().rstrip(",")
    if "NORB" not in fields or "NELEC" not in fields:
        raise MalformedHeader("header must define NORB and NELEC")
    try:
        n_orb = int(fields.pop("NORB"))
        n_elec = int(fields.pop("NELEC"))
        ms2 = int(fields.pop("MS2", "0"))
    except ValueError as exc:
        raise MalformedHeader(f"non-integer header field: {exc}") from None
    return n_orb, n_elec, ms2, fields, body


def parse_fcidump(text: str) -> IntegralTable:
    """Parse Molpro-convention FCIDUMP text into an :class:`IntegralTable`.

    Records are whitespace-separated ``value i j k l`` with 1-based
    indices.  ``k = l = 0`` fills the one-electron matrix, all-zero
    indices set the core energy, anything else is a two-electron entry
    expanded under 8-fold symmetry.  Duplicate canonical entries must
    agree to 1e-12 (last writer wins), otherwise the parse fails.
    """
    n_orb, n_elec, ms2, extras, body = _parse_header(text)
    h = np.zeros((n_orb, n_orb))
    g = np.zeros((n_orb, n_orb, n_orb, n_orb))
    one_seen: dict[tuple, float] = {}
    two_seen: dict[tuple, float] = {}
    core = 0.0
    tokens = body.split()
    if len(tokens) % 5 != 0:
        raise MalformedHeader(f"body token count {len(tokens)} not a multiple of 5")
    for off in range(0, len(tokens), 5):
        try:
            val = float(tokens[off].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(t) for t in tokens[off + 1 : off + 5])
        except ValueError as exc:
            raise MalformedHeader(f"bad record near token {off}: {exc}") from None
        for idx in (i, j, k, l):
            if idx < 0 or idx > n_orb:
                raise IndexOutOfRange(f"orbital index {idx} outside 1..{n_orb}")
        if i == j == k == l == 0:
            core = val
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                raise IndexOutOfRange(f"one-electron record with zero index: {tokens[off:off+5]}")
            key = (max(i, j) - 1, min(i, j) - 1)
            prev = one_seen.get(key)
            if prev is not None and abs(prev - val) > DUPLICATE_TOL:
                raise DuplicateInconsistentEntry(
                    f"h{key} given twice: {prev!r} vs {val!r}"
                )
            one_seen[key] = val
            h[i - 1, j - 1] = val
            h[j - 1, i - 1] = val
        else:
            if i == 0 or j == 0 or k == 0 or l == 0:
                raise IndexOutOfRange(f"two-electron record with zero index: {tokens[off:off+5]}")
            p, q, r, s = i - 1, j - 1, k - 1, l - 1
            key = _canonical_two_electron(p, q, r, s)
            prev = two_seen.get(key)
            if prev is not None and abs(prev - val) > DUPLICATE_TOL:
                raise DuplicateInconsistentEntry(
                    f"g{key} given twice: {prev!r} vs {val!r}"
                )
            two_seen[key] = val
            for a, b in ((p, q), (q, p)):
                for c, d in ((r, s), (s, r)):
                    g[a, b, c, d] = val
                    g[c, d, a, b] = val
    table = IntegralTable(
        n_orb=n_orb,
        n_elec=n_elec,
        ms2=ms2,
        core_energy=core,
        h=h,
        g=g,
        header_extras=extras,
        one_electron_entries=one_seen,
        two_electron_entries=two_seen,
    )
    table.validate()
    return table


def write_fcidump(table: IntegralTable) -> str:
    """Serialize an integral table back to FCIDUMP text.

    Values print with 17 significant digits so a parse -> write -> parse
    round trip reproduces every float bit-exactly.  Entries read from a
    file are written back verbatim; tables built in memory fall back to
    enumerating nonzero canonical integrals.
    """
    n = table.n_orb
    lines = [f"&FCI NORB={n},NELEC={table.n_elec},MS2={table.ms2},"]
    for key, val in table.header_extras.items():
        lines.append(f" {key}={val},")
    lines.append("&END")

    def record(val, i, j, k, l):
        lines.append(f"{val:23.16E} {i:4d} {j:4d} {k:4d} {l:4d}")

    if table.two_electron_entries:
        for (p, q, r, s), val in table.two_electron_entries.items():
            record(val, p + 1, q + 1, r + 1, s + 1)
    else:
        for p in range(n):
            for q in range(p + 1):
                for r in range(p + 1):
                    smax = q if r == p else r
                    for s in range(smax + 1):
                        val = table.g[p, q, r, s]
                        if val != 0.0:
                            record(val, p + 1, q + 1, r + 1, s + 1)
    if table.one_electron_entries:
        for (p, q), val in table.one_electron_entries.items():
            record(val, p + 1, q + 1, 0, 0)
    else:
        for p in range(n):
            for q in range(p + 1):
                if table.h[p, q] != 0.0:
                    record(table.h[p, q], p + 1, q + 1, 0, 0)
    record(table.core_energy, 0, 0, 0, 0)
    return "\n".join(lines) + "\n"


def diagonal_element(config: OccupationConfig, ints: IntegralTable) -> float:
    """<x|H|x> by the zero-difference Slater-Condon rule."""
    occ = config.occupied_indices()
    h, g = ints.h, ints.g
    val = ints.core_energy
    for a in occ:
        val += h[a >> 1, a >> 1]
    for ia, a in enumerate(occ):
        pa, sa = a >> 1, a & 1
        for b in occ[ia + 1 :]:
            pb, sb = b >> 1, b & 1
            val += g[pa, pa, pb, pb]
            if sa == sb:
                val -= g[pa, pb, pb, pa]
    return val


def single_excitation_element(
    config: OccupationConfig, source: int, target: int, ints: IntegralTable
) -> float:
    """<x'|H|x> for x' = x with one electron moved source -> target."""
    p, sp = spatial_and_spin(source)
    q, _ = spatial_and_spin(target)
    h, g = ints.h, ints.g
    val = h[p, q]
    for k in config.occupied_indices():
        if k == source:
            continue
        pk, sk = spatial_and_spin(k)
        val += g[p, q, pk, pk]
        if sk == sp:
            val -= g[p, pk, pk, q]
    return excitation_parity(config, source, target) * val


def double_excitation_element(
    config: OccupationConfig,
    sources: tuple[int, int],
    targets: tuple[int, int],
    ints: IntegralTable,
) -> float:
    """<x'|H|x> for a double excitation (i, j) -> (a, b), i < j, a < b.

    The antisymmetrized element <ij||ab> pairs i with a and j with b; the
    phase is accumulated by performing the two single moves sequentially.
    """
    i, j = sources
    a, b = targets
    pi, si = spatial_and_spin(i)
    pj, sj = spatial_and_spin(j)
    pa, sa = spatial_and_spin(a)
    pb, sb = spatial_and_spin(b)
    g = ints.g
    direct = g[pi, pa, pj, pb] if (si == sa and sj == sb) else 0.0
    exchange = g[pi, pb, pj, pa] if (si == sb and sj == sa) else 0.0
    val = direct - exchange
    if val == 0.0:
        return 0.0
    sign = excitation_parity(config, i, a)
    intermediate = config.move(i, a)
    sign *= excitation_parity(intermediate, j, b)
    return sign * val


def connect(
    config: OccupationConfig, ints: IntegralTable, cutoff: float = 0.0
) -> list[Connection]:
    """All configurations coupled to ``config`` with their matrix elements.

    Returns the diagonal first (never filtered), then spin-conserving
    singles, then doubles, each in ascending index order.  Off-diagonal
    entries with ``|element| <= cutoff`` are dropped.  The ordering is
    deterministic so downstream sums reproduce bit-for-bit.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    out = [Connection(config, diagonal_element(config, ints))]
    occ = config.occupied_indices()
    occ_set = set(occ)
    n_so = ints.n_so
    virt = [v for v in range(n_so) if v not in occ_set]

    for i in occ:
        for a in virt:
            if (i ^ a) & 1:
                continue
            val = single_excitation_element(config, i, a, ints)
            if abs(val) > cutoff and val != 0.0:
                out.append(Connection(config.move(i, a), val))

    n_occ, n_virt = len(occ), len(virt)
    for ii in range(n_occ):
        for jj in range(ii + 1, n_occ):
            i, j = occ[ii], occ[jj]
            pair_spin = (i & 1) + (j & 1)
            for aa in range(n_virt):
                for bb in range(aa + 1, n_virt):
                    a, b = virt[aa], virt[bb]
                    if (a & 1) + (b & 1) != pair_spin:
                        continue
                    val = double_excitation_element(config, (i, j), (a, b), ints)
                    if abs(val) > cutoff and val != 0.0:
                        target = config.move(i, a).move(j, b)
                        out.append(Connection(target, val))
    return out
