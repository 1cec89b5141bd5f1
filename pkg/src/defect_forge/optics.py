"""Zero-phonon lines, reference-table bookkeeping, and transition dipole moments.

ZPLs come from constrained-occupation total-energy differences and are
reported in meV.  Transition dipole moments are computed in the length
gauge from wavefunctions sampled on a periodic real-space grid, with the
position operator measured from the charge-density centroid of the state
pair under the minimum-image convention.  That choice is appropriate for
localized defect states in a large supercell: for orthogonal states the
matrix element is origin-independent, and the centroid removes the residual
dependence for nearly-orthogonal pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .lattice import CrystalCell
from .units import DEBYE_PER_E_ANG, HC_EV_NM, MEV_PER_EV

__all__ = [
    "OpticsRecord",
    "TableCheck",
    "GridFunction",
    "TransitionDipole",
    "zpl",
    "relative_shift",
    "table_consistency_check",
    "wavelength_to_energy_mev",
    "energy_mev_to_wavelength",
    "transition_dipole",
]

SPIN_CHANNELS = ("up", "down", "none")


@dataclass(frozen=True)
class OpticsRecord:
    """One row of a computed-optics table: ZPL, spin channel, squared TDM, shift.

    zpl_mev may be None for a record whose stated value is unreadable; such
    rows are reconstructed from reference + shift by the consistency check.
    shift_mev may be None for the reference row itself.
    """

    defect: str
    charge: int
    spin: str
    zpl_mev: float | None
    tdm_debye2: float | None
    shift_mev: float | None

    def __post_init__(self):
        if self.spin not in SPIN_CHANNELS:
            raise ValidationError(f"spin channel must be one of {SPIN_CHANNELS}, got '{self.spin}'")
        if self.zpl_mev is not None and self.zpl_mev <= 0:
            raise ValidationError(f"ZPL must be > 0 meV, got {self.zpl_mev}")
        if self.tdm_debye2 is not None and self.tdm_debye2 < 0:
            raise ValidationError(f"squared TDM must be >= 0, got {self.tdm_debye2}")


def zpl(e_excited_total: float, e_ground_total: float) -> float:
    """Zero-phonon line (meV) from excited/ground total energies (eV)."""
    if e_excited_total <= e_ground_total:
        raise ValidationError(
            "excited-state total energy must exceed the ground state "
            f"({e_excited_total:g} <= {e_ground_total:g}); check state labeling"
        )
    return MEV_PER_EV * (e_excited_total - e_ground_total)


def relative_shift(record: OpticsRecord | float, reference_zpl_mev: float) -> float:
    """ZPL shift (meV) against a reference ZPL; round only at display time."""
    if reference_zpl_mev <= 0:
        raise ValidationError(f"reference ZPL must be > 0 meV, got {reference_zpl_mev}")
    value = record.zpl_mev if isinstance(record, OpticsRecord) else float(record)
    if value is None:
        raise ValidationError("record has no ZPL value to shift")
    return value - reference_zpl_mev


@dataclass(frozen=True)
class TableCheck:
    """Consistency verdict for one table row."""

    record: OpticsRecord
    zpl_mev: float            # stated, or reconstructed when the stated value is missing
    reconstructed: bool
    recomputed_shift_mev: float | None
    discrepancy_mev: float
    flagged: bool


def table_consistency_check(records, reference_zpl_mev: float,
                            tolerance_mev: float = 0.5) -> list[TableCheck]:
    """Cross-check stated ZPLs against stated shifts for every record.

    A row is flagged when |stated shift - (ZPL - reference)| exceeds the
    tolerance.  Rows with a missing ZPL are reconstructed as
    reference + shift and reported as such (not flagged: the reconstruction
    is consistent by construction).
    """
    if reference_zpl_mev <= 0:
        raise ValidationError(f"reference ZPL must be > 0 meV, got {reference_zpl_mev}")
    out = []
    for rec in records:
        if rec.zpl_mev is None:
            if rec.shift_mev is None:
                raise ValidationError(
                    f"record '{rec.defect}' has neither a ZPL nor a shift; cannot reconstruct"
                )
            out.append(TableCheck(rec, reference_zpl_mev + rec.shift_mev, True, rec.shift_mev, 0.0, False))
            continue
        recomputed = rec.zpl_mev - reference_zpl_mev
        if rec.shift_mev is None:
            out.append(TableCheck(rec, rec.zpl_mev, False, recomputed, 0.0, False))
            continue
        disc = abs(rec.shift_mev - recomputed)
        out.append(TableCheck(rec, rec.zpl_mev, False, recomputed, disc, disc > tolerance_mev))
    return out


def wavelength_to_energy_mev(wavelength_nm: float) -> float:
    """Photon energy in meV for a wavelength in nm (E = hc / lambda)."""
    if wavelength_nm <= 0:
        raise ValidationError(f"wavelength must be > 0 nm, got {wavelength_nm}")
    return MEV_PER_EV * HC_EV_NM / wavelength_nm


def energy_mev_to_wavelength(energy_mev: float) -> float:
    if energy_mev <= 0:
        raise ValidationError(f"photon energy must be > 0 meV, got {energy_mev}")
    return MEV_PER_EV * HC_EV_NM / energy_mev


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Scalar field sampled on a uniform periodic grid over a cell.

    values has shape dims = (n1, n2, n3), C order with the third index
    fastest; grid point (i, j, k) sits at fractional (i/n1, j/n2, k/n3).
    """

    dims: tuple[int, int, int]
    values: np.ndarray
    cell: CrystalCell

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        if any(n < 1 for n in dims):
            raise ValidationError(f"grid dims must be positive, got {dims}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.size != dims[0] * dims[1] * dims[2]:
            raise ValidationError(
                f"value count {vals.size} does not match dims {dims} "
                f"({dims[0] * dims[1] * dims[2]} points)"
            )
        vals = vals.reshape(dims)
        if not np.isfinite(vals.view(float)).all():
            raise ValidationError("grid values contain non-finite entries")
        norm2 = float(np.sum(np.abs(vals) ** 2))
        if norm2 <= 0:
            raise ValidationError("grid function has zero L2 norm")
        vals.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return (self.dims == other.dims and np.array_equal(self.values, other.values)
                and self.cell == other.cell)

    @property
    def point_weight(self) -> float:
        """Quadrature weight per grid point (periodic trapezoid = V/N)."""
        return self.cell.volume / (self.dims[0] * self.dims[1] * self.dims[2])


@dataclass(frozen=True, eq=False)
class TransitionDipole:
    """Length-gauge transition dipole between two grid states.

    components_debye are the complex Cartesian matrix elements; the squared
    values and their sum are what enters radiative rates.  overlap is
    <psi_f|psi_i> of the normalized inputs, reported so constrained-occupation
    state quality can be judged.
    """

    components_debye: np.ndarray
    squared_components: np.ndarray
    squared_total: float
    overlap: complex
    centroid_frac: np.ndarray


def _frac_grids(dims):
    return [np.arange(n) / n for n in dims]


def transition_dipole(psi_i: GridFunction, psi_f: GridFunction,
                      overlap_tolerance: float = 1e-3) -> TransitionDipole:
    """|<psi_f| r |psi_i>|^2 in Debye^2, per Cartesian component and total.

    Both states are normalized on their grid first.  Positions are measured
    from the charge-density centroid of the pair, wrapped by minimum image,
    so identical states give exactly zero and the result is invariant under
    global phases and (for orthogonal states) under the choice of origin.
    Overlaps above `overlap_tolerance` only warn; the overlap is always
    reported.
    """
    if psi_i.dims != psi_f.dims:
        raise ValidationError(f"grid mismatch: {psi_i.dims} vs {psi_f.dims}")
    if not np.allclose(psi_i.cell.lattice, psi_f.cell.lattice, atol=1e-10):
        raise ValidationError("states live on different cells")

    w = psi_i.point_weight
    a = psi_i.values / np.sqrt(np.sum(np.abs(psi_i.values) ** 2) * w)
    b = psi_f.values / np.sqrt(np.sum(np.abs(psi_f.values) ** 2) * w)
    overlap = complex(np.sum(np.conj(b) * a) * w)
    if abs(overlap) > overlap_tolerance:
        warnings.warn(
            f"states are not orthogonal (|<f|i>| = {abs(overlap):.2e}); the length-gauge "
            "dipole retains an origin dependence of the same order"
        )

    dims = psi_i.dims
    fx, fy, fz = _frac_grids(dims)
    frac = np.stack(np.meshgrid(fx, fy, fz, indexing="ij"), axis=-1)  # (n1,n2,n3,3)

    rho = np.abs(a) ** 2 + np.abs(b) ** 2
    ref_idx = np.unravel_index(int(np.argmax(rho)), dims)
    ref = frac[ref_idx]
    # unwrap every point once around the pair-density maximum; measuring the
    # dipole from the centroid of the same unwrapped coordinates makes the
    # diagonal element vanish identically
    disp = frac - ref
    disp -= np.round(disp)
    offset = np.einsum("xyz,xyzc->c", rho, disp) / np.sum(rho)
    centroid = ref + offset

    cart = (disp - offset) @ psi_i.cell.lattice
    kernel = np.conj(b) * a * w
    components = DEBYE_PER_E_ANG * np.einsum("xyz,xyzc->c", kernel, cart)
    squared = np.abs(components) ** 2
    return TransitionDipole(
        components_debye=components,
        squared_components=squared,
        squared_total=float(squared.sum()),
        overlap=overlap,
        centroid_frac=centroid,
    )
