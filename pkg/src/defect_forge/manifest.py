"""Run manifests: one plain-text file wiring a whole analysis together.

A manifest names the host reference block (bulk energy, VBM, gap, chemical
potentials, dielectric tensor, cell file) plus any number of defect entries
and measurement files.  parse_manifest resolves and parses every referenced
file, so a returned RunManifest is fully validated.  Entries are parsed in
parallel; the DEFECT_FORGE_THREADS environment variable caps the worker
count.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParseError
from .io_formats import _lines, load_decay, load_grid, load_raster_points, load_spectrum, load_structure, load_xy
from .lattice import CrystalCell
from .optics import GridFunction
from .thermo import DefectRun, HostReference

__all__ = ["RunManifest", "DefectEntry", "SpectrumEntry", "parse_manifest", "load_manifest",
           "parse_defect_run", "parse_eigenvalues", "parse_site_potentials", "worker_count"]

SPECTRUM_KINDS = ("pl", "trpl", "dose", "raster")


def worker_count() -> int:
    """Parallelism cap: DEFECT_FORGE_THREADS when set, else the CPU count."""
    env = os.environ.get("DEFECT_FORGE_THREADS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ParseError(f"DEFECT_FORGE_THREADS must be an integer, got '{env}'", "<env>") from None
        if n < 1:
            raise ParseError("DEFECT_FORGE_THREADS must be >= 1", "<env>")
        return n
    return os.cpu_count() or 1


@dataclass(frozen=True)
class DefectEntry:
    label: str
    charge: int
    run: DefectRun
    run_path: str
    eigenvalue_path: str | None = None
    site_potential_path: str | None = None
    psi_initial: GridFunction | None = None
    psi_final: GridFunction | None = None


@dataclass(frozen=True)
class SpectrumEntry:
    kind: str
    path: str
    data: object  # Spectrum | DecayTrace | (fluence, intensity) | raster points
    metadata: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class RunManifest:
    project: str
    cell: CrystalCell
    host: HostReference
    defects: tuple[DefectEntry, ...]
    spectra: tuple[SpectrumEntry, ...]

    def runs_by_label(self) -> dict[str, list[DefectRun]]:
        grouped: dict[str, list[DefectRun]] = {}
        for entry in self.defects:
            grouped.setdefault(entry.label, []).append(entry.run)
        return grouped


# --- key=value record files ---------------------------------------------------

def _kv_lines(text: str, source: str):
    for no, ln in _lines(text):
        stripped = ln.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield no, stripped


def parse_defect_run(text: str, label: str, charge: int, source: str = "<string>") -> DefectRun:
    """Defect run record: e_total, delta.<species> entries, optional position."""
    e_total = None
    delta: dict[str, int] = {}
    position = None
    for no, ln in _kv_lines(text, source):
        if "=" not in ln:
            raise ParseError(f"expected 'key = value', got '{ln}'", source, no)
        key, _, value = (p.strip() for p in ln.partition("="))
        if key == "e_total":
            try:
                e_total = float(value)
            except ValueError:
                raise ParseError(f"e_total must be numeric, got '{value}'", source, no) from None
        elif key.startswith("delta."):
            species = key[len("delta."):]
            if not species:
                raise ParseError("delta key needs a species, e.g. 'delta.C'", source, no)
            try:
                delta[species] = int(value)
            except ValueError:
                raise ParseError(f"composition delta must be an integer, got '{value}'", source, no) from None
        elif key == "position":
            parts = value.split()
            if len(parts) != 3:
                raise ParseError("position needs 3 fractional coordinates", source, no)
            try:
                position = tuple(float(p) for p in parts)
            except ValueError:
                raise ParseError("position coordinates must be numeric", source, no) from None
        elif key == "label":
            if value != label:
                raise ParseError(f"label '{value}' contradicts manifest entry '{label}'", source, no)
        elif key == "charge":
            if int(value) != charge:
                raise ParseError(f"charge {value} contradicts manifest entry {charge:+d}", source, no)
        else:
            warnings.warn(f"{source}:{no}: ignoring unknown key '{key}'")
    if e_total is None:
        raise ParseError("run record is missing 'e_total'", source, 1)
    if not delta:
        raise ParseError("run record declares no composition change (no delta.* keys)", source, 1)
    try:
        return DefectRun(label=label, charge=charge, total_energy=e_total,
                         composition_delta=tuple(delta.items()), position=position)
    except Exception as exc:
        raise ParseError(str(exc), source, 1) from None


def parse_eigenvalues(text: str, source: str = "<string>"):
    """Eigenvalue table rows: 'spin index energy_eV occupation'."""
    channels: dict[str, dict[int, tuple[float, float]]] = {}
    for no, ln in _kv_lines(text, source):
        parts = ln.split()
        if len(parts) != 4:
            raise ParseError("expected 'spin index energy occupation'", source, no)
        spin = parts[0]
        if spin not in ("up", "down", "none"):
            raise ParseError(f"spin must be up|down|none, got '{spin}'", source, no)
        try:
            idx, energy, occ = int(parts[1]), float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ParseError(f"non-numeric eigenvalue field: {exc}", source, no) from None
        chan = channels.setdefault(spin, {})
        if idx in chan:
            raise ParseError(f"duplicate level index {idx} in spin channel '{spin}'", source, no)
        chan[idx] = (energy, occ)
    out = {}
    for spin, chan in channels.items():
        indices = sorted(chan)
        if indices != list(range(len(indices))):
            raise ParseError(
                f"spin channel '{spin}' indices must be contiguous from 0, got {indices}",
                source, 1,
            )
        out[spin] = tuple(chan[i] for i in indices)
    return out


def parse_site_potentials(text: str, source: str = "<string>"):
    """Site-potential rows: 'site_index delta_v_volts' (defect minus bulk)."""
    rows = []
    for no, ln in _kv_lines(text, source):
        parts = ln.split()
        if len(parts) != 2:
            raise ParseError("expected 'site_index delta_v'", source, no)
        try:
            rows.append((int(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"non-numeric site potential field: {exc}", source, no) from None
    if not rows:
        raise ParseError("site-potential file has no rows", source, 1)
    return tuple(rows)


# --- manifest proper ------------------------------------------------------------

_HOST_REQUIRED = ("cell", "e_bulk", "e_vbm", "e_gap")


def _sections(text: str, source: str):
    """Split into (header, [(lineno, key, value), ...]) with '' for the preamble."""
    sections: list[tuple[str, int, list]] = [("", 0, [])]
    for no, ln in _kv_lines(text, source):
        if ln.startswith("[") and ln.endswith("]"):
            sections.append((ln[1:-1].strip(), no, []))
            continue
        if "=" not in ln:
            raise ParseError(f"expected 'key = value' or a [section] header, got '{ln}'", source, no)
        key, _, value = (p.strip() for p in ln.partition("="))
        sections[-1][2].append((no, key, value))
    return sections


def _resolve(base: Path, rel: str, source: str, lineno: int) -> Path:
    path = (base / rel).resolve() if not Path(rel).is_absolute() else Path(rel)
    if not path.is_file():
        raise ParseError(f"referenced file does not exist: {path}", source, lineno)
    return path


def parse_manifest(text: str, base_dir, source: str = "<string>") -> RunManifest:
    base = Path(base_dir)
    sections = _sections(text, source)

    project = "unnamed"
    for no, key, value in sections[0][2]:
        if key == "project":
            project = value
        else:
            warnings.warn(f"{source}:{no}: ignoring unknown top-level key '{key}'")

    host_kv = None
    defect_blocks = []
    spectrum_blocks = []
    for header, no, kv in sections[1:]:
        parts = header.split()
        if parts and parts[0] == "host":
            if host_kv is not None:
                raise ParseError("duplicate [host] section", source, no)
            host_kv = (no, kv)
        elif parts and parts[0] == "defect":
            if len(parts) != 3:
                raise ParseError("defect section must be '[defect <label> <charge>]'", source, no)
            try:
                charge = int(parts[2])
            except ValueError:
                raise ParseError(f"defect charge must be an integer, got '{parts[2]}'", source, no) from None
            defect_blocks.append((no, parts[1], charge, kv))
        elif parts and parts[0] == "spectrum":
            if len(parts) != 2 or parts[1] not in SPECTRUM_KINDS:
                raise ParseError(
                    f"spectrum section must be '[spectrum <kind>]' with kind in {SPECTRUM_KINDS}",
                    source, no,
                )
            spectrum_blocks.append((no, parts[1], kv))
        else:
            raise ParseError(f"unknown section '[{header}]'", source, no)

    if host_kv is None:
        raise ParseError("manifest is missing the [host] section", source, 1)
    host_no, host_entries = host_kv
    host_map: dict[str, tuple[int, str]] = {}
    mu: dict[str, float] = {}
    for no, key, value in host_entries:
        if key.startswith("mu."):
            species = key[len("mu."):]
            try:
                mu[species] = float(value)
            except ValueError:
                raise ParseError(f"chemical potential must be numeric, got '{value}'", source, no) from None
        elif key in (*_HOST_REQUIRED, "dielectric"):
            host_map[key] = (no, value)
        else:
            warnings.warn(f"{source}:{no}: ignoring unknown host key '{key}'")
    for req in _HOST_REQUIRED:
        if req not in host_map:
            raise ParseError(f"host.{req} required", source, host_no)

    cell_path = _resolve(base, host_map["cell"][1], source, host_map["cell"][0])
    cell = load_structure(cell_path)
    if "dielectric" in host_map:
        no, value = host_map["dielectric"]
        parts = value.split()
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ParseError("dielectric must be 1, 3 or 9 numbers", source, no) from None
        if len(nums) == 1:
            eps = nums[0]
        elif len(nums) == 3:
            eps = np.diag(nums)
        elif len(nums) == 9:
            eps = np.array(nums).reshape(3, 3)
        else:
            raise ParseError("dielectric must be 1, 3 or 9 numbers", source, no)
        try:
            cell = cell.with_dielectric(eps)
        except Exception as exc:
            raise ParseError(str(exc), source, no) from None

    def host_float(key):
        no, value = host_map[key]
        try:
            return float(value)
        except ValueError:
            raise ParseError(f"host.{key} must be numeric, got '{value}'", source, no) from None

    try:
        host = HostReference(e_bulk=host_float("e_bulk"), e_vbm=host_float("e_vbm"),
                             e_gap=host_float("e_gap"), chemical_potentials=tuple(mu.items()))
    except ParseError:
        raise
    except Exception as exc:
        raise ParseError(str(exc), source, host_no) from None

    seen: set[tuple[str, int]] = set()
    jobs = []
    for no, label, charge, kv in defect_blocks:
        if (label, charge) in seen:
            raise ParseError(f"duplicate defect entry '{label}' with charge {charge:+d}", source, no)
        seen.add((label, charge))
        paths: dict[str, Path] = {}
        for kno, key, value in kv:
            if key in ("energy", "eigenvalues", "site_potentials", "wavefunction.i", "wavefunction.f"):
                paths[key] = _resolve(base, value, source, kno)
            else:
                warnings.warn(f"{source}:{kno}: ignoring unknown defect key '{key}'")
        if "energy" not in paths:
            raise ParseError(f"defect '{label}' ({charge:+d}) is missing the 'energy' file", source, no)
        if ("wavefunction.i" in paths) != ("wavefunction.f" in paths):
            raise ParseError(
                f"defect '{label}' ({charge:+d}) must name both wavefunction files or neither",
                source, no,
            )
        jobs.append((label, charge, paths))

    def load_entry(job) -> DefectEntry:
        label, charge, paths = job
        run = parse_defect_run(paths["energy"].read_text(), label, charge, str(paths["energy"]))
        eig_path = paths.get("eigenvalues")
        pot_path = paths.get("site_potentials")
        eig = parse_eigenvalues(eig_path.read_text(), str(eig_path)) if eig_path else None
        pots = parse_site_potentials(pot_path.read_text(), str(pot_path)) if pot_path else None
        run = DefectRun(label=run.label, charge=run.charge, total_energy=run.total_energy,
                        composition_delta=run.composition_delta,
                        eigenvalues=tuple(eig.items()) if eig else None,
                        site_potentials=pots,
                        position=run.position,
                        cell=cell)
        psi_i = psi_f = None
        if "wavefunction.i" in paths:
            psi_i = load_grid(paths["wavefunction.i"], cell)
            psi_f = load_grid(paths["wavefunction.f"], cell)
        return DefectEntry(label=label, charge=charge, run=run, run_path=str(paths["energy"]),
                           eigenvalue_path=str(eig_path) if eig_path else None,
                           site_potential_path=str(pot_path) if pot_path else None,
                           psi_initial=psi_i, psi_final=psi_f)

    spectrum_jobs = []
    for no, kind, kv in spectrum_blocks:
        path = None
        meta = []
        for kno, key, value in kv:
            if key == "file":
                path = _resolve(base, value, source, kno)
            else:
                meta.append((key, value))  # free-form entry metadata, passed through
        if path is None:
            raise ParseError(f"[spectrum {kind}] is missing the 'file' key", source, no)
        spectrum_jobs.append((kind, path, tuple(meta)))

    def load_spectrum_entry(job) -> SpectrumEntry:
        kind, path, meta = job
        if kind == "pl":
            data = load_spectrum(path)
        elif kind == "trpl":
            data = load_decay(path)
        elif kind == "dose":
            data = load_xy(path, "fluence_mJcm2,intensity")
        else:
            data = load_raster_points(path)
        return SpectrumEntry(kind=kind, path=str(path), data=data, metadata=meta)

    workers = worker_count()
    if workers > 1 and len(jobs) + len(spectrum_jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            defects = tuple(pool.map(load_entry, jobs))
            spectra = tuple(pool.map(load_spectrum_entry, spectrum_jobs))
    else:
        defects = tuple(load_entry(j) for j in jobs)
        spectra = tuple(load_spectrum_entry(j) for j in spectrum_jobs)

    return RunManifest(project=project, cell=cell, host=host, defects=defects, spectra=spectra)


def load_manifest(path) -> RunManifest:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read manifest: {exc}", str(path)) from None
    return parse_manifest(text, path.parent, source=str(path))
