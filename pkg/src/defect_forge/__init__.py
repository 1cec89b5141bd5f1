"""defect-forge: post-processing for point-defect quantum-emitter studies.

Pipeline pieces: crystal-cell geometry (lattice), anisotropic periodic
electrostatics and charged-supercell finite-size corrections (ewald),
formation-energy diagrams and transition levels (thermo), zero-phonon-line
bookkeeping and transition dipole moments (optics), measured-data fitting
(spectro, fitting), fluence dose calibration (dose), and plain-text I/O plus
a CLI (io_formats, manifest, cli).
"""

from .dose import DoseCurve, calibrate, classify
from .errors import FitNonConvergence, ParseError, ValidationError
from .ewald import CorrectionResult, EwaldContext, ewald_potential, finite_size_correction, lattice_energy
from .lattice import CrystalCell, Site, cart_to_frac, frac_to_cart, reciprocal, supercell
from .optics import (
    GridFunction,
    OpticsRecord,
    TransitionDipole,
    energy_mev_to_wavelength,
    relative_shift,
    table_consistency_check,
    transition_dipole,
    wavelength_to_energy_mev,
    zpl,
)
from .spectro import (
    DecayTrace,
    Spectrum,
    fit_lifetime,
    fit_peaks,
    fit_saturation,
    raster_map,
    temperature_series,
)
from .thermo import (
    DefectRun,
    FormationDiagram,
    HostReference,
    build_diagram,
    delta_ks,
    formation_energy,
    transition_level,
)

__version__ = "0.1.0"

__all__ = [
    "CrystalCell", "Site", "reciprocal", "supercell", "frac_to_cart", "cart_to_frac",
    "EwaldContext", "CorrectionResult", "ewald_potential", "lattice_energy", "finite_size_correction",
    "DefectRun", "HostReference", "FormationDiagram", "formation_energy", "transition_level",
    "build_diagram", "delta_ks",
    "OpticsRecord", "GridFunction", "TransitionDipole", "zpl", "relative_shift",
    "table_consistency_check", "wavelength_to_energy_mev", "energy_mev_to_wavelength",
    "transition_dipole",
    "Spectrum", "DecayTrace", "fit_peaks", "fit_lifetime", "fit_saturation",
    "temperature_series", "raster_map",
    "DoseCurve", "calibrate", "classify",
    "ValidationError", "ParseError", "FitNonConvergence",
    "__version__",
]
