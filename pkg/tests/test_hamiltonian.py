import math

import numpy as np
import pytest

import tbvmc as tv
from tbvmc.errors import (
    DuplicateInconsistentEntry,
    IndexOutOfRange,
    MalformedHeader,
)
from tbvmc.hamiltonian import write_fcidump
from tbvmc.oracle import build_dense, build_dense_by_operator_application

from conftest import load_table, fixture_text, random_integral_table

MINIMAL = """&FCI NORB=2,NELEC=2,MS2=0,
&END
0.675 1 1 2 2
-1.25 1 1 0 0
0.5 0 0 0 0
"""


def test_parse_header_and_core():
    table = tv.parse_fcidump(MINIMAL)
    assert table.n_orb == 2
    assert table.n_elec == 2
    assert table.ms2 == 0
    assert table.core_energy == 0.5


def test_parse_one_electron_slot():
    table = tv.parse_fcidump("&FCI NORB=2,NELEC=2,MS2=0\n/\n-1.25 1 1 0 0\n")
    assert table.h[0, 0] == -1.25
    assert table.h[1, 1] == 0.0


def test_parse_two_electron_symmetry_expansion():
    table = tv.parse_fcidump(MINIMAL)
    val = 0.675
    # (11|22) fills all 8 chemists'-notation permutations
    for p, q, r, s in [
        (0, 0, 1, 1),
        (1, 1, 0, 0),
    ]:
        assert table.g[p, q, r, s] == val
    assert table.g[0, 1, 0, 1] == 0.0


def test_parse_retains_unknown_header_keys():
    text = "&FCI NORB=2,NELEC=2,MS2=0,ORBSYM=1,1,ISYM=1\n&END\n0.5 0 0 0 0\n"
    table = tv.parse_fcidump(text)
    assert table.header_extras["ORBSYM"] == "1,1"
    assert table.header_extras["ISYM"] == "1"


def test_parse_errors():
    with pytest.raises(MalformedHeader):
        tv.parse_fcidump("NORB=2\n0.5 0 0 0 0\n")
    with pytest.raises(MalformedHeader):
        tv.parse_fcidump("&FCI NELEC=2\n&END\n")
    with pytest.raises(IndexOutOfRange):
        tv.parse_fcidump("&FCI NORB=2,NELEC=2\n&END\n1.0 3 1 0 0\n")
    with pytest.raises(MalformedHeader):
        tv.parse_fcidump("&FCI NORB=2,NELEC=2\n&END\n1.0 1 1 0\n")


def test_duplicate_entries():
    base = "&FCI NORB=2,NELEC=2\n&END\n"
    # consistent duplicate is fine (last writer wins)
    table = tv.parse_fcidump(base + "1.0 1 2 0 0\n1.0 2 1 0 0\n")
    assert table.h[0, 1] == 1.0
    with pytest.raises(DuplicateInconsistentEntry):
        tv.parse_fcidump(base + "1.0 1 2 0 0\n1.5 2 1 0 0\n")
    with pytest.raises(DuplicateInconsistentEntry):
        tv.parse_fcidump(base + "1.0 1 1 2 2\n1.1 2 2 1 1\n")


def test_round_trip_preserves_all_values():
    for name in ("h2_sto3g.fcidump", "h4_chain_sto3g.fcidump", "hubbard_2x2_u4.fcidump"):
        text = fixture_text(name)
        first = tv.parse_fcidump(text)
        second = tv.parse_fcidump(write_fcidump(first))
        assert second.n_orb == first.n_orb
        assert second.core_energy == first.core_energy
        assert np.array_equal(second.h, first.h)
        assert np.array_equal(second.g, first.g)


def test_diagonal_trivial_core_only():
    table = random_integral_table(2, 2, seed=1)
    table.h[...] = 0.0
    table.g[...] = 0.0
    table.core_energy = 0.7
    c = tv.OccupationConfig.from_string("1100")
    assert tv.diagonal_element(c, table) == 0.7


def test_diagonal_matches_dense_oracle(h2_table, h2_spectrum):
    c = tv.OccupationConfig.from_string("1100")
    idx = h2_spectrum.index[c.bits]
    assert tv.diagonal_element(c, h2_table) == pytest.approx(
        h2_spectrum.matrix[idx, idx], abs=1e-12
    )


def test_diagonal_equals_connect_self_term(h4_table):
    for c in tv.enumerate_sector(tv.SpinSector(4, 0), 4):
        conns = tv.connect(c, h4_table)
        assert conns[0].target.bits == c.bits
        assert conns[0].element == tv.diagonal_element(c, h4_table)


def test_connect_matches_dense_row(h2_table, h2_spectrum):
    for col, c in enumerate(h2_spectrum.basis):
        row = np.zeros(h2_spectrum.dimension)
        for conn in tv.connect(c, h2_table):
            row[h2_spectrum.index[conn.target.bits]] = conn.element
        assert np.allclose(row, h2_spectrum.matrix[:, col], atol=1e-12)


def test_connect_infinite_cutoff_keeps_only_diagonal(h2_table):
    c = tv.OccupationConfig.from_string("1100")
    conns = tv.connect(c, h2_table, cutoff=math.inf)
    assert len(conns) == 1
    assert conns[0].target.bits == c.bits


def test_connect_stays_in_sector(h4_table):
    sector = tv.SpinSector(4, 0)
    allowed = {c.bits for c in tv.enumerate_sector(sector, 4)}
    for c in tv.enumerate_sector(sector, 4):
        for conn in tv.connect(c, h4_table):
            assert conn.target.bits in allowed
            assert conn.target.n_alpha == sector.n_alpha
            assert conn.target.n_beta == sector.n_beta


def test_no_triple_excitations(h4_table):
    src = tv.OccupationConfig.from_string("11110000")
    for conn in tv.connect(src, h4_table):
        moved = (src.bits ^ conn.target.bits).bit_count()
        assert moved <= 4  # at most two electrons move


def test_hermiticity_exhaustive_4e4o():
    table = random_integral_table(4, 4, seed=5)
    dense = build_dense(table, tv.SpinSector(4, 0))
    assert np.array_equal(dense.matrix, dense.matrix.T) or np.allclose(
        dense.matrix, dense.matrix.T, atol=1e-12
    )


def test_dense_matches_operator_application():
    """Two fully independent Hamiltonian builders agree entrywise."""
    for n_orb, ne, two_sz in [(2, 2, 0), (3, 2, 0), (4, 4, 0), (4, 3, 1)]:
        table = random_integral_table(n_orb, ne, seed=n_orb + ne)
        sector = tv.SpinSector(ne, two_sz)
        a = build_dense(table, sector)
        b = build_dense_by_operator_application(table, sector)
        assert np.allclose(a.matrix, b.matrix, atol=1e-12)


def test_single_excitation_sign_consistency():
    """Slater-Condon sign of a pure single excitation equals the
    excitation parity when only one-electron integrals are present."""
    table = random_integral_table(3, 2, seed=9)
    table.g[...] = 0.0
    c = tv.OccupationConfig.from_string("110100")
    for conn in tv.connect(c, table):
        diff = c.bits ^ conn.target.bits
        if diff.bit_count() != 2:
            continue
        source = (diff & c.bits).bit_length() - 1
        target = (diff & conn.target.bits).bit_length() - 1
        parity = tv.excitation_parity(c, source, target)
        expected = parity * table.h[source >> 1, target >> 1]
        assert conn.element == pytest.approx(expected, rel=1e-12)


def test_connection_count_closed_shell():
    """Closed-shell source: count singles and spin-conserving doubles
    by brute-force difference enumeration."""
    table = random_integral_table(4, 4, seed=3)
    sector = tv.SpinSector(4, 0)
    src = next(tv.enumerate_sector(sector, 4))
    got = {conn.target.bits for conn in tv.connect(src, table)}
    brute = set()
    for other in tv.enumerate_sector(sector, 4):
        moved = (src.bits ^ other.bits).bit_count()
        if moved in (0, 2, 4):
            brute.add(other.bits)
    # random integrals: every allowed connection is nonzero
    assert got == brute
