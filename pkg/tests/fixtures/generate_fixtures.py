"""Regenerate the committed FCIDUMP and oracle fixtures.

Hydrogen-only systems need nothing beyond s-type Gaussians, so the
integrals are evaluated here from closed-form formulas (overlap, kinetic,
nuclear attraction, and electron repulsion over contracted s functions,
all via the Boys function F0).  Molecular dumps are produced in the RHF
molecular-orbital basis; the stretched dimer uses Lowdin-orthogonalized
site orbitals so the two orbitals stay localized on their atoms.  The
Hubbard plaquette is written directly from its hopping/interaction
definition.

Run from the repository root:

    python3 tests/fixtures/generate_fixtures.py

Outputs are deterministic; regeneration must be byte-identical.
"""

import pathlib
import sys

import numpy as np
import scipy.linalg
from scipy.special import erf

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[2] / "src"))

from tbvmc import IntegralTable, SpinSector, write_fcidump
from tbvmc.oracle import build_dense, dump_fixture

HERE = pathlib.Path(__file__).resolve().parent

# STO-3G hydrogen 1s: exponents pre-scaled by zeta^2 = 1.24^2.
H_EXPONENTS = np.array([3.42525091, 0.62391373, 0.16885540])
H_COEFFS = np.array([0.15432897, 0.53532814, 0.44463454])


def boys_f0(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-12
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x / 3.0, 0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe)))


def _norm(alpha):
    return (2.0 * alpha / np.pi) ** 0.75


class SBasis:
    """Contracted s functions centered on a list of nuclei."""

    def __init__(self, centers):
        self.centers = [np.asarray(c, dtype=float) for c in centers]
        self.n = len(centers)

    def _pairs(self, a, b):
        ra, rb = self.centers[a], self.centers[b]
        out = []
        for aa, da in zip(H_EXPONENTS, H_COEFFS):
            for ab, db in zip(H_EXPONENTS, H_COEFFS):
                p = aa + ab
                mu = aa * ab / p
                k = np.exp(-mu * np.dot(ra - rb, ra - rb))
                center = (aa * ra + ab * rb) / p
                coeff = da * db * _norm(aa) * _norm(ab)
                out.append((p, mu, k, center, coeff, np.dot(ra - rb, ra - rb)))
        return out

    def overlap_kinetic(self):
        s = np.zeros((self.n, self.n))
        t = np.zeros((self.n, self.n))
        for a in range(self.n):
            for b in range(self.n):
                for p, mu, k, _, coeff, r2 in self._pairs(a, b):
                    base = (np.pi / p) ** 1.5 * k
                    s[a, b] += coeff * base
                    t[a, b] += coeff * mu * (3.0 - 2.0 * mu * r2) * base
        return s, t

    def nuclear(self, charges):
        v = np.zeros((self.n, self.n))
        for a in range(self.n):
            for b in range(self.n):
                for p, _, k, center, coeff, _ in self._pairs(a, b):
                    for z, rc in charges:
                        d2 = np.dot(center - rc, center - rc)
                        v[a, b] -= coeff * z * (2.0 * np.pi / p) * k * boys_f0(p * d2)
        return v

    def eri(self):
        g = np.zeros((self.n,) * 4)
        for a in range(self.n):
            for b in range(self.n):
                pab = self._pairs(a, b)
                for c in range(self.n):
                    for d in range(self.n):
                        pcd = self._pairs(c, d)
                        val = 0.0
                        for p, _, kab, rp, ca, _ in pab:
                            for q, _, kcd, rq, cc, _ in pcd:
                                d2 = np.dot(rp - rq, rp - rq)
                                val += (
                                    ca
                                    * cc
                                    * 2.0
                                    * np.pi**2.5
                                    / (p * q * np.sqrt(p + q))
                                    * kab
                                    * kcd
                                    * boys_f0(p * q / (p + q) * d2)
                                )
                        g[a, b, c, d] = val
        return g


def hydrogen_system(centers):
    basis = SBasis(centers)
    s, t = basis.overlap_kinetic()
    charges = [(1.0, np.asarray(c, dtype=float)) for c in centers]
    v = basis.nuclear(charges)
    g = basis.eri()
    e_nn = 0.0
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            e_nn += 1.0 / np.linalg.norm(np.asarray(centers[i]) - np.asarray(centers[j]))
    return s, t + v, g, e_nn


def rhf(s, hcore, g, n_elec, max_iter=200, tol=1e-12):
    n = s.shape[0]
    nocc = n_elec // 2
    fock = hcore.copy()
    energy = 0.0
    dens = np.zeros((n, n))
    for _ in range(max_iter):
        _, c = scipy.linalg.eigh(fock, s)
        dens_new = 2.0 * c[:, :nocc] @ c[:, :nocc].T
        dens = 0.5 * (dens + dens_new) if energy else dens_new
        j = np.einsum("ls,ijls->ij", dens, g)
        k = np.einsum("ls,ilsj->ij", dens, g)
        fock = hcore + j - 0.5 * k
        e_new = 0.5 * np.sum(dens * (hcore + fock))
        if abs(e_new - energy) < tol:
            energy = e_new
            break
        energy = e_new
    _, c = scipy.linalg.eigh(fock, s)
    return energy, c


def transform(c, hcore, g):
    h_mo = c.T @ hcore @ c
    g_mo = np.einsum("ap,abcd->pbcd", c, g)
    g_mo = np.einsum("bq,pbcd->pqcd", c, g_mo)
    g_mo = np.einsum("cr,pqcd->pqrd", c, g_mo)
    g_mo = np.einsum("ds,pqrd->pqrs", c, g_mo)
    return h_mo, g_mo


def clean(arr, tol=1e-14):
    out = np.asarray(arr).copy()
    out[np.abs(out) < tol] = 0.0
    return out


def molecular_table(centers, n_elec, basis="rhf"):
    s, hcore, g, e_nn = hydrogen_system(centers)
    if basis == "rhf":
        _, c = rhf(s, hcore, g, n_elec)
    elif basis == "lowdin":
        c = scipy.linalg.fractional_matrix_power(s, -0.5).real
    else:
        raise ValueError(basis)
    h_mo, g_mo = transform(c, hcore, g)
    return IntegralTable(
        n_orb=len(centers),
        n_elec=n_elec,
        ms2=0,
        core_energy=e_nn,
        h=clean(h_mo),
        g=clean(g_mo),
    )


def hubbard_2x2_table(t=1.0, u=4.0):
    # Plaquette sites 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1); each nearest-
    # neighbor pair bonded once.
    bonds = [(0, 1), (0, 2), (1, 3), (2, 3)]
    h = np.zeros((4, 4))
    for a, b in bonds:
        h[a, b] = h[b, a] = -t
    g = np.zeros((4, 4, 4, 4))
    for a in range(4):
        g[a, a, a, a] = u
    return IntegralTable(n_orb=4, n_elec=4, ms2=0, core_energy=0.0, h=h, g=g)


def emit(name, table, sector):
    text = write_fcidump(table)
    path = HERE / f"{name}.fcidump"
    path.write_text(text)
    spectrum = build_dense(table, sector)
    record = dump_fixture(text, spectrum, HERE / f"{name}_oracle.json")
    print(f"{name}: dim={record['dimension']} E0={record['e0']:.10f}")
    return record


def main():
    emit(
        "h2_sto3g",
        molecular_table([(0, 0, 0), (0, 0, 1.4)], n_elec=2),
        SpinSector(2, 0),
    )
    emit(
        "h4_chain_sto3g",
        molecular_table(
            [(0, 0, 1.8 * i) for i in range(4)], n_elec=4
        ),
        SpinSector(4, 0),
    )
    emit("hubbard_2x2_u4", hubbard_2x2_table(), SpinSector(4, 0))
    emit(
        "h2_stretched_lowdin",
        molecular_table([(0, 0, 0), (0, 0, 10.0)], n_elec=2, basis="lowdin"),
        SpinSector(2, 0),
    )


if __name__ == "__main__":
    main()
