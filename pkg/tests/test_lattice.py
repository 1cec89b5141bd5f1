"""Lattice algebra, wrapping, supercells, coordinate conversions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defect_forge import CrystalCell, ValidationError, cart_to_frac, frac_to_cart, reciprocal, supercell
from defect_forge.lattice import minimum_image, wrap_frac, ws_inscribed_radius

TWO_PI = 2.0 * np.pi


def lattice_strategy():
    # diagonally dominant rows keep det well away from zero
    offdiag = st.floats(-1.5, 1.5)
    diag = st.floats(3.0, 9.0)
    return st.tuples(*(st.tuples(diag, offdiag, offdiag) for _ in range(3))).map(
        lambda rows: np.array([
            [rows[0][0], rows[0][1], rows[0][2]],
            [rows[1][1], rows[1][0], rows[1][2]],
            [rows[2][1], rows[2][2], rows[2][0]],
        ])
    )


def test_reciprocal_cubic_identity():
    cell = CrystalCell(np.eye(3) * 4.0)
    np.testing.assert_allclose(reciprocal(cell), TWO_PI / 4.0 * np.eye(3), atol=1e-14)


def test_reciprocal_defining_property(skewed_cell):
    b = reciprocal(skewed_cell)
    np.testing.assert_allclose(skewed_cell.lattice @ b.T, TWO_PI * np.eye(3), atol=1e-12)


def test_reciprocal_matches_cofactor_oracle(rng):
    """Oracle: rows of 2*pi*(L^T)^-1 built from explicit cofactors."""
    lat = np.eye(3) * 5 + rng.uniform(-1, 1, (3, 3))
    if np.linalg.det(lat) < 0:
        lat[2] = -lat[2]
    cell = CrystalCell(lat)
    a1, a2, a3 = lat
    vol = np.dot(a1, np.cross(a2, a3))
    oracle = TWO_PI * np.array([np.cross(a2, a3), np.cross(a3, a1), np.cross(a1, a2)]) / vol
    np.testing.assert_allclose(reciprocal(cell), oracle, rtol=1e-12)


def test_reciprocal_of_reciprocal_recovers_lattice(skewed_cell):
    np.testing.assert_allclose(reciprocal(CrystalCell(reciprocal(skewed_cell))),
                               skewed_cell.lattice, atol=1e-10)


def test_singular_lattice_rejected():
    bad = np.array([[1.0, 0, 0], [2.0, 0, 0], [0, 0, 1.0]])
    with pytest.raises(ValidationError):
        CrystalCell(bad)


def test_left_handed_lattice_rejected():
    with pytest.raises(ValidationError):
        CrystalCell(-np.eye(3))


def test_dielectric_validation():
    with pytest.raises(ValidationError):
        CrystalCell(np.eye(3), dielectric=[[1, 2, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValidationError):
        CrystalCell(np.eye(3), dielectric=-np.eye(3))
    cell = CrystalCell(np.eye(3), dielectric=11.7)
    np.testing.assert_allclose(cell.dielectric, 11.7 * np.eye(3))


def test_wrap_canonicalization():
    np.testing.assert_allclose(wrap_frac([1.0, -0.25, 2.5]), [0.0, 0.75, 0.5], atol=1e-15)
    assert wrap_frac([1.0])[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6))
def test_wrap_range_and_idempotence(x):
    w = float(wrap_frac([x])[0])
    assert 0.0 <= w < 1.0
    assert float(wrap_frac([w])[0]) == w


def test_supercell_si_333_counts(si_motif):
    sc = supercell(si_motif, 3, 3, 3)
    assert len(sc.sites) == 54
    np.testing.assert_allclose(sc.volume, 27 * si_motif.volume, rtol=1e-12)


def test_supercell_identity(si_motif):
    sc = supercell(si_motif, 1, 1, 1)
    assert sc == si_motif


def test_supercell_211_enumeration(skewed_cell):
    """Direct enumeration: every original coordinate appears at x/2 and x/2 + 1/2."""
    sc = supercell(skewed_cell, 2, 1, 1)
    np.testing.assert_allclose(sc.volume, 2 * skewed_cell.volume, rtol=1e-12)
    fracs = sorted(tuple(s.frac) for s in sc.sites)
    x, y, z = skewed_cell.sites[0].frac
    expected = sorted([(x / 2, y, z), (x / 2 + 0.5, y, z)])
    np.testing.assert_allclose(fracs, expected, atol=1e-15)


def test_supercell_rejects_bad_counts(si_motif):
    with pytest.raises(ValidationError):
        supercell(si_motif, 0, 1, 1)
    with pytest.raises(ValidationError):
        supercell(si_motif, 2, -1, 1)


def test_frac_to_cart_basics(cubic_cell):
    np.testing.assert_allclose(frac_to_cart(cubic_cell, [0, 0, 0]), [0, 0, 0])
    a = 5.43
    cell = CrystalCell(np.eye(3) * a)
    np.testing.assert_allclose(frac_to_cart(cell, [0.5, 0.5, 0.5]), [2.715, 2.715, 2.715])


@settings(max_examples=50, deadline=None)
@given(lattice_strategy(), st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)))
def test_frac_cart_round_trip(lat, point):
    cell = CrystalCell(lat if np.linalg.det(lat) > 0 else lat[::-1])
    frac = np.array(point)
    np.testing.assert_allclose(cart_to_frac(cell, frac_to_cart(cell, frac)), frac, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    lattice_strategy(),
    st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)),
    st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)),
    st.floats(-3, 3), st.floats(-3, 3),
)
def test_frac_to_cart_linear(lat, x, y, alpha, beta):
    cell = CrystalCell(lat if np.linalg.det(lat) > 0 else lat[::-1])
    x, y = np.array(x), np.array(y)
    lhs = frac_to_cart(cell, alpha * x + beta * y)
    rhs = alpha * frac_to_cart(cell, x) + beta * frac_to_cart(cell, y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_minimum_image_cubic(cubic_cell):
    d = minimum_image(cubic_cell, [0.9, 0.0, 0.0])
    np.testing.assert_allclose(d, [-0.5, 0, 0])


def test_ws_inscribed_radius_cubic(cubic_cell):
    assert ws_inscribed_radius(cubic_cell) == pytest.approx(2.5)
