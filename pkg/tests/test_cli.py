"""CLI surface: commands, exit codes, artifact layout, byte-determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from defect_forge import CrystalCell, DecayTrace, Spectrum
from defect_forge import io_formats as io
from defect_forge.cli import main
from defect_forge.fitting import decay_model, peak_model, saturation_model
from defect_forge.optics import GridFunction

from test_io import write_demo_manifest


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_diagram_command(tmp_path, capsys):
    manifest = write_demo_manifest(tmp_path / "inputs")
    out = tmp_path / "out"
    assert run_cli("diagram", "--manifest", manifest, "--out", out, "--fermi-grid", "101") == 0
    csv_path = out / "diagrams" / "Ci.csv"
    assert csv_path.is_file()
    charges, fermi, energies, envelope, stable = io.load_diagram_csv(csv_path)
    assert charges == [-1, 0]
    assert len(fermi) == 101
    np.testing.assert_array_equal(envelope, energies.min(axis=1))
    levels = json.loads((out / "diagrams" / "Ci_levels.json").read_text())
    assert levels["gap_eV"] == 1.17
    assert "stable charge at intrinsic" in capsys.readouterr().out


def test_diagram_green_region_topology(tmp_path):
    """A neutral-stable window must appear in the export when intercepts demand it."""
    base = tmp_path / "inputs"
    base.mkdir()
    io.save_structure(CrystalCell(np.eye(3) * 10.0), base / "host.cell")
    for q, c in ((0, 1.0), (-1, 1.45), (-2, 2.2), (-3, 3.2)):
        (base / f"q{q}.run").write_text(f"e_total = {c}\ndelta.C = 1\n")
    lines = ["project = topology", "[host]", "cell = host.cell", "e_bulk = 0.0",
             "e_vbm = 0.0", "e_gap = 1.17", "mu.C = 0.0"]
    for q in (0, -1, -2, -3):
        lines += [f"[defect Ci {q}]", f"energy = q{q}.run"]
    (base / "m.txt").write_text("\n".join(lines) + "\n")
    out = tmp_path / "out"
    assert run_cli("diagram", "--manifest", base / "m.txt", "--out", out) == 0
    _, fermi, _, _, stable = io.load_diagram_csv(out / "diagrams" / "Ci.csv")
    assert set(stable[fermi < 0.44]) == {0}          # the neutral (green) window
    assert stable[-1] == -3
    levels = json.loads((out / "diagrams" / "Ci_levels.json").read_text())
    assert levels["stable_at_intrinsic"] == -1


def test_check_table1_command(tmp_path, capsys):
    out = tmp_path / "out"
    assert run_cli("check-table1", "--out", out) == 0
    captured = capsys.readouterr().out
    assert "13 rows checked, 1 inconsistent, 1 reconstructed" in captured
    assert "1032" in captured
    text = (out / "optics" / "table1_check.csv").read_text()
    assert text.count("INCONSISTENT") == 1
    assert "reconstructed" in text


def test_optics_command(tmp_path):
    table = tmp_path / "records.csv"
    table.write_text(
        "label,charge,spin,zpl_meV,tdm_debye2,shift_meV\n"
        "A,0,none,569,0.1,\n"
        "B,0,none,600,0.2,31\n"
        "C,0,none,700,0.3,90\n"
    )
    out = tmp_path / "out"
    assert run_cli("optics", "--table", table, "--reference", "569", "--out", out) == 0
    text = (out / "optics" / "records_check.csv").read_text()
    assert text.count("INCONSISTENT") == 1  # C: 700-569=131 != 90


def test_tdm_command(tmp_path):
    base = tmp_path
    cell = CrystalCell(np.eye(3) * 8.0)
    io.save_structure(cell, base / "cell.txt")
    n = 16
    idx = np.arange(n) / n
    fx, fy, fz = np.meshgrid(idx, idx, idx, indexing="ij")
    d2 = (fx - 0.5) ** 2 + (fy - 0.5) ** 2 + (fz - 0.5) ** 2
    s = np.exp(-d2 * 64.0)
    pz = (fz - 0.5) * np.exp(-d2 * 64.0)
    io.save_grid(GridFunction((n, n, n), s, cell), base / "psi_i.grid")
    io.save_grid(GridFunction((n, n, n), pz, cell), base / "psi_f.grid")
    out = base / "out"
    code = run_cli("tdm", "--psi-i", base / "psi_i.grid", "--psi-f", base / "psi_f.grid",
                   "--cell", base / "cell.txt", "--out", out)
    assert code == 0
    payload = json.loads((out / "optics" / "tdm.json").read_text())
    assert payload["squared_total_debye2"] > 0
    assert abs(payload["overlap"]["re"]) < 1e-6


def test_fitpl_command(tmp_path):
    wl = np.arange(1449.0, 1453.0, 0.004)
    counts = peak_model(wl, [5.0, 1000.0, 1450.8, 0.03], "lorentzian")
    io.save_spectrum(Spectrum(wavelength_nm=wl, counts=counts, grating_gpmm=1200.0),
                     tmp_path / "pl.csv")
    out = tmp_path / "out"
    assert run_cli("fitpl", "--data", tmp_path / "pl.csv", "--out", out) == 0
    text = (out / "fits" / "pl_peaks.csv").read_text()
    assert "true" in text  # resolution-limited flag column
    assert "1450.8" in text


def test_fitpl_empty_csv_exit_2(tmp_path):
    (tmp_path / "empty.csv").write_text("")
    assert run_cli("fitpl", "--data", tmp_path / "empty.csv", "--out", tmp_path / "out") == 2


def test_fitpl_flat_spectrum_exit_2(tmp_path):
    wl = np.linspace(1400, 1460, 100)
    io.save_spectrum(Spectrum(wavelength_nm=wl, counts=np.full(100, 7.0)), tmp_path / "flat.csv")
    assert run_cli("fitpl", "--data", tmp_path / "flat.csv", "--out", tmp_path / "out") == 2


def test_lifetime_command(tmp_path):
    t = np.linspace(0, 30, 200)
    trace = DecayTrace(time_ns=t, counts=decay_model(t, [1000.0, 3.0, 10.0]))
    io.save_decay(trace, tmp_path / "decay.csv")
    out = tmp_path / "out"
    assert run_cli("lifetime", "--data", tmp_path / "decay.csv", "--out", out) == 0
    payload = json.loads((out / "fits" / "decay_lifetime.json").read_text())
    assert payload["tau_ns"] == pytest.approx(3.0, rel=1e-6)


def test_lifetime_rising_signal_exit_2(tmp_path):
    t = np.linspace(0, 30, 40)
    (tmp_path / "rise.csv").write_text(io.write_decay(
        DecayTrace(time_ns=t, counts=np.linspace(1, 100, 40))))
    assert run_cli("lifetime", "--data", tmp_path / "rise.csv", "--out", tmp_path / "out") == 2


def test_saturation_command(tmp_path):
    p = np.geomspace(0.05, 3.0, 16)
    (tmp_path / "sat.csv").write_text(io.write_xy(p, saturation_model(p, [5000.0, 0.7]),
                                                  "power_mW,intensity"))
    out = tmp_path / "out"
    assert run_cli("saturation", "--data", tmp_path / "sat.csv", "--out", out) == 0
    payload = json.loads((out / "fits" / "sat_saturation.json").read_text())
    assert payload["p_sat_mW"] == pytest.approx(0.7, rel=1e-6)
    assert payload["identifiable"] is True


def test_dose_command(tmp_path, capsys):
    (tmp_path / "dose.csv").write_text(io.write_xy(
        [10.0, 16.0, 22.0, 30.0, 38.0, 44.5],
        [150.0, 1000.0, 500.0, 60.0, 420.0, 900.0],
        "fluence_mJcm2,intensity"))
    out = tmp_path / "out"
    code = run_cli("dose", "--data", tmp_path / "dose.csv", "--label", "G",
                   "--classify", "16,30,44.5,300", "--damage-threshold", "100", "--out", out)
    assert code == 0
    rows = [json.loads(ln) for ln in
            (out / "fits" / "dose_classified.jsonl").read_text().splitlines()]
    assert [r["regime"] for r in rows] == ["write", "erase", "rewrite", "near-damage(W-forming)"]
    assert rows[0]["segment"] == 0 and rows[-1]["segment"] is None


def test_raster_command(tmp_path):
    (tmp_path / "scan.csv").write_text(
        "x_um,y_um,counts\n0,0,1\n1,0,2\n2,0,3\n0,1,4\n1,1,5\n2,1,6\n")
    out = tmp_path / "out"
    assert run_cli("raster", "--data", tmp_path / "scan.csv", "--out", out) == 0
    assert (out / "fits" / "scan_raster.csv").is_file()
    assert (out / "fits" / "scan_raster.pgm").read_text().startswith("P2\n3 2\n")


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_repeated_runs_byte_identical(tmp_path):
    manifest = write_demo_manifest(tmp_path / "inputs")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    for out in (out1, out2):
        assert run_cli("--verbose", "diagram", "--manifest", manifest, "--out", out) == 0
    a, b = _tree_bytes(out1), _tree_bytes(out2)
    assert a.keys() == b.keys()
    assert a == b


def test_verbose_writes_log(tmp_path):
    manifest = write_demo_manifest(tmp_path / "inputs")
    out = tmp_path / "out"
    assert run_cli("--verbose", "diagram", "--manifest", manifest, "--out", out) == 0
    log = (out / "logs" / "diagram.log").read_text()
    assert "wrote diagrams/Ci.csv" in log
