import itertools

import numpy as np
import pytest

import tbvmc as tv
from tbvmc.determinants import spatial_and_spin, spin_orbital_index
from tbvmc.errors import CapacityExceeded, OccupancyViolation
from tbvmc.operators import apply_term


def cfg(s):
    return tv.OccupationConfig.from_string(s)


def test_occupied_indices_basic():
    assert cfg("1100").occupied_indices() == (0, 1)
    assert cfg("0000").occupied_indices() == ()
    assert cfg("10101010").occupied_indices() == (0, 2, 4, 6)


def test_channel_counts_interleaved_layout():
    c = cfg("1100")
    assert (c.n_alpha, c.n_beta) == (1, 1)
    c = cfg("1010")
    assert (c.n_alpha, c.n_beta) == (2, 0)


def test_layout_round_trip():
    for spatial in range(6):
        for spin in (0, 1):
            idx = spin_orbital_index(spatial, spin)
            assert spatial_and_spin(idx) == (spatial, spin)


def test_string_round_trip():
    for s in ("1100", "0011", "101001", "0" * 8, "1" * 8):
        assert cfg(s).to_string() == s


def test_parity_no_orbitals_between():
    assert tv.excitation_parity(cfg("1100"), 1, 2) == 1


def brute_force_parity(config, source, target):
    """Sign from literal application of a+_target a_source in the
    ascending creation-operator convention."""
    res = apply_term((1.0, ((target, True), (source, False))), config.bits)
    assert res is not None
    _, amp = res
    return int(np.sign(amp))


def test_parity_matches_operator_application_exhaustively():
    n_so = 4
    for bits in range(1 << n_so):
        config = tv.OccupationConfig(bits, n_so)
        for source in range(n_so):
            for target in range(n_so):
                if source == target:
                    continue
                if not config.occupied(source) or config.occupied(target):
                    continue
                assert tv.excitation_parity(config, source, target) == (
                    brute_force_parity(config, source, target)
                )


def test_parity_preconditions():
    with pytest.raises(OccupancyViolation):
        tv.excitation_parity(cfg("1100"), 2, 3)
    with pytest.raises(OccupancyViolation):
        tv.excitation_parity(cfg("1100"), 0, 1)


def test_parity_round_trip_is_positive():
    n_so = 6
    for bits in range(1, 1 << n_so):
        config = tv.OccupationConfig(bits, n_so)
        occ = config.occupied_indices()
        empty = [j for j in range(n_so) if not config.occupied(j)]
        for i in occ:
            for a in empty:
                s1 = tv.excitation_parity(config, i, a)
                moved = config.move(i, a)
                s2 = tv.excitation_parity(moved, a, i)
                assert s1 * s2 == 1


def test_enumerate_sector_counts():
    assert len(list(tv.enumerate_sector(tv.SpinSector(2, 0), 2))) == 4
    assert len(list(tv.enumerate_sector(tv.SpinSector(2, 2), 2))) == 1
    assert len(list(tv.enumerate_sector(tv.SpinSector(4, 0), 4))) == 36


def test_enumerate_sector_size_formula():
    for n in (2, 3, 4):
        for ne in range(1, 2 * n + 1):
            for two_sz in range(-ne, ne + 1):
                if (ne + two_sz) % 2 or abs(two_sz) > ne:
                    continue
                sector = tv.SpinSector(ne, two_sz)
                if sector.n_alpha > n or sector.n_beta > n:
                    continue
                configs = list(tv.enumerate_sector(sector, n))
                assert len(configs) == tv.sector_dimension(sector, n)
                assert len({c.bits for c in configs}) == len(configs)
                for c in configs:
                    assert c.n_alpha == sector.n_alpha
                    assert c.n_beta == sector.n_beta


def test_enumerate_sector_capacity():
    with pytest.raises(CapacityExceeded):
        list(tv.enumerate_sector(tv.SpinSector(8, 0), 16, cap=100))


def test_sector_parity_validation():
    with pytest.raises(ValueError):
        tv.SpinSector(2, 1)
    with pytest.raises(ValueError):
        tv.SpinSector(2, -4)


def test_enumeration_order_is_deterministic():
    a = [c.bits for c in tv.enumerate_sector(tv.SpinSector(4, 0), 4)]
    b = [c.bits for c in tv.enumerate_sector(tv.SpinSector(4, 0), 4)]
    assert a == b


def test_move_and_immutability():
    c = cfg("1100")
    moved = c.move(0, 2)
    assert moved.to_string() == "0110"
    assert c.to_string() == "1100"
    with pytest.raises(OccupancyViolation):
        c.move(2, 3)


def test_from_occupied():
    c = tv.OccupationConfig.from_occupied([0, 3], 4)
    assert c.to_string() == "1001"
    with pytest.raises(OccupancyViolation):
        tv.OccupationConfig.from_occupied([1, 1], 4)
