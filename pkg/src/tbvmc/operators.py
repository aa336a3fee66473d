"""Elementary second-quantized operator strings over occupation bitstrings.

This is deliberately naive machinery: products of creation/annihilation
operators applied literally, with Jordan-Wigner parities counted bit by
bit.  It backs two things that must stay independent of the optimized
Slater-Condon path: the brute-force Hamiltonian cross-check used by the
exact-diagonalization oracle, and the spin-operator local estimators.

A term is ``(coefficient, ops)`` where ``ops`` is a tuple of
``(spin_orbital, is_creation)`` pairs written left to right, i.e. the
rightmost pair acts first on a ket.
"""

from __future__ import annotations

import numpy as np

from .determinants import OccupationConfig, spin_orbital_index

Term = tuple[float, tuple[tuple[int, bool], ...]]


def _apply_elementary(bits: int, orbital: int, create: bool):
    """Apply one a or a-dagger; returns (new_bits, sign) or None."""
    occ = (bits >> orbital) & 1
    if create == bool(occ):
        return None
    sign = -1 if (bits & ((1 << orbital) - 1)).bit_count() & 1 else 1
    return bits ^ (1 << orbital), sign


def apply_term(term: Term, bits: int):
    """Apply a term to a ket bitstring; returns (bits', amplitude) or None."""
    coeff, ops = term
    amp = coeff
    for orbital, create in reversed(ops):
        step = _apply_elementary(bits, orbital, create)
        if step is None:
            return None
        bits, sign = step
        amp *= sign
    return bits, amp


def adjoint(term: Term) -> Term:
    """Hermitian adjoint of a real-coefficient operator string."""
    coeff, ops = term
    return coeff, tuple((orb, not create) for orb, create in reversed(ops))


def bra_connections(terms, config: OccupationConfig):
    """All (partner_config, value) with value = <config| sum of terms |partner>.

    Partners are found by applying each term's adjoint to |config>;
    contributions to the same partner are accumulated.  The source config
    itself appears whenever a term has a diagonal piece.
    """
    acc: dict[int, float] = {}
    for term in terms:
        res = apply_term(adjoint(term), config.bits)
        if res is None:
            continue
        bits, amp = res
        acc[bits] = acc.get(bits, 0.0) + amp
    return [
        (OccupationConfig(bits, config.n_so), val)
        for bits, val in acc.items()
        if val != 0.0
    ]


def matrix_in_basis(terms, basis):
    """Dense matrix of a term sum over an ordered config basis.

    Matrix element convention: M[a, b] = <basis[a]| O |basis[b]>.
    Target states outside the basis are an error (the operator must
    preserve the sector spanned by ``basis``).
    """
    index = {c.bits: i for i, c in enumerate(basis)}
    n = len(basis)
    mat = np.zeros((n, n))
    for b, ket in enumerate(basis):
        for term in terms:
            res = apply_term(term, ket.bits)
            if res is None:
                continue
            bits, amp = res
            try:
                mat[index[bits], b] += amp
            except KeyError:
                raise ValueError(
                    "operator maps a basis state outside the given basis"
                ) from None
    return mat


def hamiltonian_terms(ints) -> list[Term]:
    """Full electronic Hamiltonian as elementary operator strings.

    One-body: sum_pq,s  h[p,q] a+_{ps} a_{qs}.
    Two-body: 1/2 sum_pqrs,st  (pq|rs) a+_{ps} a+_{rt} a_{st} a_{qs'},
    chemists' notation.  Cost is O(n_orb^4) terms; only the oracle uses it.
    """
    terms: list[Term] = []
    n = ints.n_orb
    for p in range(n):
        for q in range(n):
            if ints.h[p, q] == 0.0:
                continue
            for s in (0, 1):
                terms.append(
                    (
                        ints.h[p, q],
                        (
                            (spin_orbital_index(p, s), True),
                            (spin_orbital_index(q, s), False),
                        ),
                    )
                )
    g = ints.g
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s in range(n):
                    val = g[p, q, r, s]
                    if val == 0.0:
                        continue
                    for sig in (0, 1):
                        for tau in (0, 1):
                            terms.append(
                                (
                                    0.5 * val,
                                    (
                                        (spin_orbital_index(p, sig), True),
                                        (spin_orbital_index(r, tau), True),
                                        (spin_orbital_index(s, tau), False),
                                        (spin_orbital_index(q, sig), False),
                                    ),
                                )
                            )
    return terms


def number_term(spatial: int, spin: int, coeff: float = 1.0) -> Term:
    j = spin_orbital_index(spatial, spin)
    return coeff, ((j, True), (j, False))


def spin_squared_site_terms(i: int) -> list[Term]:
    """S_i^2 for one spatial orbital: 3/4 (n_up + n_dn - 2 n_up n_dn)."""
    up = spin_orbital_index(i, 0)
    dn = spin_orbital_index(i, 1)
    return [
        (0.75, ((up, True), (up, False))),
        (0.75, ((dn, True), (dn, False))),
        (-1.5, ((up, True), (up, False), (dn, True), (dn, False))),
    ]


def spin_dot_terms(i: int, j: int) -> list[Term]:
    """S_i . S_j for distinct spatial orbitals i and j.

    Transverse part 1/2 (S_i+ S_j- + S_i- S_j+) plus the density-density
    z part 1/4 (n_iu - n_id)(n_ju - n_jd), written out in elementary ops.
    """
    if i == j:
        raise ValueError("spin_dot_terms requires distinct orbitals")
    iu, idn = spin_orbital_index(i, 0), spin_orbital_index(i, 1)
    ju, jdn = spin_orbital_index(j, 0), spin_orbital_index(j, 1)
    terms: list[Term] = [
        (0.5, ((iu, True), (idn, False), (jdn, True), (ju, False))),
        (0.5, ((idn, True), (iu, False), (ju, True), (jdn, False))),
    ]
    for a, sa in ((iu, 1.0), (idn, -1.0)):
        for b, sb in ((ju, 1.0), (jdn, -1.0)):
            terms.append(
                (0.25 * sa * sb, ((a, True), (a, False), (b, True), (b, False)))
            )
    return terms


def spin_squared_set_terms(orbitals) -> list[Term]:
    """S^2 of an orbital set: sum_i S_i^2 + 2 sum_{i<j} S_i . S_j."""
    orbitals = sorted(set(orbitals))
    terms: list[Term] = []
    for i in orbitals:
        terms.extend(spin_squared_site_terms(i))
    for a in range(len(orbitals)):
        for b in range(a + 1, len(orbitals)):
            for coeff, ops in spin_dot_terms(orbitals[a], orbitals[b]):
                terms.append((2.0 * coeff, ops))
    return terms
