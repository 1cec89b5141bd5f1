#!/usr/bin/env python3
"""Convergence study for the periodic point-charge electrostatics.

Prints the lattice energy of a charged cubic cell across a wide range of the
splitting parameter (it should be flat to ~1e-12 eV), the auto-grown cutoffs,
and the approach of the direct image-sum oracle to the Ewald value with
increasing block radius.
"""

import numpy as np

from defect_forge import CrystalCell, EwaldContext, lattice_energy
from defect_forge.units import COULOMB_EV_ANG


def splitting_scan(a=5.0, eps=11.7):
    cell = CrystalCell(np.eye(3) * a, dielectric=eps)
    eta0 = EwaldContext.for_cell(cell).eta
    print(f"# splitting-parameter scan, cubic a={a} A, eps={eps}")
    print(f"# {'eta':>10} {'r_cut (A)':>10} {'g_cut (1/A)':>11} {'E (eV)':>22}")
    for factor in (0.25, 0.5, 1.0, 2.0, 4.0):
        ctx = EwaldContext.for_cell(cell, eta=factor * eta0)
        e = lattice_energy(ctx, -1)
        print(f"  {ctx.eta:10.5f} {ctx.real_cutoff:10.3f} {ctx.recip_cutoff:11.3f} {e:22.15f}")


def block_scan(a=5.0):
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
    from oracles import block_madelung_alpha

    ctx = EwaldContext.for_cell(CrystalCell(np.eye(3) * a))
    alpha = -2.0 * lattice_energy(ctx, 1.0) * a / COULOMB_EV_ANG
    print(f"\n# image-sum shape constant vs block half-width (Ewald: {alpha:.10f})")
    for half in (4, 6, 8, 10):
        est = block_madelung_alpha(a, half=half)
        print(f"  half={half:2d}: alpha={est:.10f}  delta={est - alpha:+.3e}")


if __name__ == "__main__":
    splitting_scan()
    block_scan()
