"""Crystal-cell geometry: lattice algebra, coordinate conversions, supercells.

Lattice matrices are 3x3 with *rows* as lattice vectors in Angstrom (this
matches the structure file layout, see docs/formats.md).  Fractional
coordinates are canonically wrapped to [0, 1) with x - floor(x), so a tie
at exactly 1.0 wraps to 0.0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "CrystalCell",
    "Site",
    "wrap_frac",
    "reciprocal",
    "supercell",
    "frac_to_cart",
    "cart_to_frac",
    "minimum_image",
    "ws_inscribed_radius",
]


def wrap_frac(frac):
    """Canonical fractional wrap to [0, 1): x - floor(x)."""
    frac = np.asarray(frac, dtype=float)
    wrapped = frac - np.floor(frac)
    # floor can leave exactly 1.0 behind for values like -1e-17
    return np.where(wrapped >= 1.0, wrapped - 1.0, wrapped)


@dataclass(frozen=True, eq=False)
class Site:
    species: str
    frac: np.ndarray

    def __post_init__(self):
        frac = wrap_frac(np.asarray(self.frac, dtype=float).reshape(3))
        frac.flags.writeable = False
        object.__setattr__(self, "frac", frac)

    def __eq__(self, other):
        if not isinstance(other, Site):
            return NotImplemented
        return self.species == other.species and np.array_equal(self.frac, other.frac)


@dataclass(frozen=True, eq=False)
class CrystalCell:
    """Immutable cell: lattice rows (Angstrom), sites, relative permittivity tensor.

    The dielectric tensor defaults to the identity (vacuum screening); it must
    be symmetric positive-definite.  The lattice must be right-handed and
    non-degenerate (det > 0).
    """

    lattice: np.ndarray
    sites: tuple[Site, ...] = ()
    dielectric: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        lat = np.array(self.lattice, dtype=float).reshape(3, 3)
        if not np.isfinite(lat).all():
            raise ValidationError("lattice contains non-finite entries")
        if np.linalg.det(lat) <= 0:
            raise ValidationError(
                f"lattice determinant must be > 0 (got {np.linalg.det(lat):g}); "
                "rows must form a right-handed, non-degenerate basis"
            )
        eps = np.array(self.dielectric, dtype=float)
        if eps.shape == ():
            eps = float(eps) * np.eye(3)
        elif eps.shape == (3,):
            eps = np.diag(eps)
        if eps.shape != (3, 3):
            raise ValidationError(f"dielectric tensor must be 3x3, got shape {eps.shape}")
        if not np.allclose(eps, eps.T, atol=1e-10):
            raise ValidationError("dielectric tensor must be symmetric")
        if np.linalg.eigvalsh(eps).min() <= 0:
            raise ValidationError("dielectric tensor must be positive-definite")
        lat.flags.writeable = False
        eps.flags.writeable = False
        object.__setattr__(self, "lattice", lat)
        object.__setattr__(self, "dielectric", eps)
        object.__setattr__(self, "sites", tuple(self.sites))

    def __eq__(self, other):
        if not isinstance(other, CrystalCell):
            return NotImplemented
        return (
            np.array_equal(self.lattice, other.lattice)
            and np.array_equal(self.dielectric, other.dielectric)
            and self.sites == other.sites
        )

    @property
    def volume(self) -> float:
        return float(np.linalg.det(self.lattice))

    def with_dielectric(self, dielectric) -> "CrystalCell":
        return CrystalCell(self.lattice, self.sites, dielectric)

    def site_positions(self) -> np.ndarray:
        """Fractional coordinates of all sites, shape (n_sites, 3)."""
        if not self.sites:
            return np.zeros((0, 3))
        return np.array([s.frac for s in self.sites])


def reciprocal(cell: CrystalCell | np.ndarray) -> np.ndarray:
    """Reciprocal lattice rows b_j (1/Angstrom) with a_i . b_j = 2 pi delta_ij."""
    lat = cell.lattice if isinstance(cell, CrystalCell) else np.asarray(cell, float)
    return 2.0 * np.pi * np.linalg.inv(lat).T


def supercell(cell: CrystalCell, n1: int, n2: int, n3: int) -> CrystalCell:
    """Replicate the cell n1 x n2 x n3 times; dielectric is intensive and kept."""
    reps = (int(n1), int(n2), int(n3))
    if any(n < 1 for n in reps):
        raise ValidationError(f"replication counts must be >= 1, got {reps}")
    lat = cell.lattice * np.array(reps, dtype=float)[:, None]
    scale = np.array(reps, dtype=float)
    sites = []
    for site in cell.sites:
        for shift in itertools.product(*(range(n) for n in reps)):
            sites.append(Site(site.species, (site.frac + np.array(shift)) / scale))
    return CrystalCell(lat, tuple(sites), cell.dielectric)


def frac_to_cart(cell: CrystalCell, frac) -> np.ndarray:
    """Cartesian coordinates (Angstrom): cart = frac @ lattice."""
    return np.asarray(frac, dtype=float) @ cell.lattice


def cart_to_frac(cell: CrystalCell, cart) -> np.ndarray:
    return np.asarray(cart, dtype=float) @ np.linalg.inv(cell.lattice)


def minimum_image(cell: CrystalCell, frac_delta) -> np.ndarray:
    """Shortest Cartesian displacement for a fractional difference vector.

    Searches the 3^3 neighbor images, which is sufficient for the
    reasonably compact cells this toolkit targets.
    """
    d = np.asarray(frac_delta, dtype=float).reshape(-1, 3)
    d = d - np.round(d)
    shifts = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=3)))
    cand = (d[:, None, :] + shifts[None, :, :]) @ cell.lattice
    norms = np.einsum("nsi,nsi->ns", cand, cand)
    best = np.argmin(norms, axis=1)
    out = cand[np.arange(len(d)), best]
    return out[0] if np.asarray(frac_delta).ndim == 1 else out


def ws_inscribed_radius(cell: CrystalCell) -> float:
    """Radius of the largest sphere inscribed in the Wigner-Seitz cell.

    Equals half the shortest nonzero lattice translation (search over a
    small index block, enough for non-pathological cells).
    """
    rng = range(-2, 3)
    best = np.inf
    for n in itertools.product(rng, rng, rng):
        if n == (0, 0, 0):
            continue
        best = min(best, float(np.linalg.norm(np.array(n, dtype=float) @ cell.lattice)))
    return 0.5 * best
