import json
import pathlib

import numpy as np
import pytest

import tbvmc as tv

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


def load_table(name: str) -> tv.IntegralTable:
    return tv.parse_fcidump(fixture_text(name))


def load_oracle_json(name: str) -> dict:
    return json.loads(fixture_text(name))


def random_integral_table(n_orb, n_elec, seed, core=0.37):
    """Random symmetric integrals with full 8-fold two-electron symmetry."""
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((n_orb, n_orb))
    h = 0.5 * (h + h.T)
    g = rng.standard_normal((n_orb,) * 4)
    g = g + g.transpose(1, 0, 2, 3)
    g = g + g.transpose(0, 1, 3, 2)
    g = g + g.transpose(2, 3, 0, 1)
    g = g / 8.0
    return tv.IntegralTable(
        n_orb=n_orb, n_elec=n_elec, ms2=0, core_energy=core, h=h, g=g
    )


def small_net(n_so=4, n_elec=2, seed=0, **overrides):
    kwargs = dict(t=2, d_f=8, l_e=2, n_h=2, d_atten=8, l_m=2, d_mlp=8, n_det=2)
    kwargs.update(overrides)
    return tv.BackflowNet(n_so, n_elec, tv.AnsatzConfig(**kwargs), seed=seed)


@pytest.fixture(scope="session")
def h2_table():
    return load_table("h2_sto3g.fcidump")


@pytest.fixture(scope="session")
def h4_table():
    return load_table("h4_chain_sto3g.fcidump")


@pytest.fixture(scope="session")
def hubbard_table():
    return load_table("hubbard_2x2_u4.fcidump")


@pytest.fixture(scope="session")
def h2_spectrum(h2_table):
    from tbvmc.oracle import build_dense, solve

    return solve(build_dense(h2_table, tv.SpinSector(2, 0)))


@pytest.fixture(scope="session")
def h4_spectrum(h4_table):
    from tbvmc.oracle import build_dense, solve

    return solve(build_dense(h4_table, tv.SpinSector(4, 0)))
