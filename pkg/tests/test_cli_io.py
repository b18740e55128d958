import json

import numpy as np
import pytest

from chns.cli import main
from chns.config import ConfigError, parse_config
from chns.experiments import EnergyTrace, ErrorRecord
from chns.io import ENERGY_HEADER, write_energy_csv, write_error_table_csv, \
    write_h1_error_table_csv, write_vtk_snapshot
from chns.mesh import build_uniform_mesh


def make_record(h, tau, scale):
    return ErrorRecord(h=h, tau=tau,
                       phi_linf_l2=3.1e-4 * scale, mu_l2_l2=5.4e-2 * scale,
                       u_linf_l2=3.7e-3 * scale, p_l2_l2=3.0e-2 * scale,
                       phi_h1=8.4e-2 * scale, mu_h1=5.4e-1 * scale,
                       u_h1=1.5e-1 * scale, p_h1=1.8e-1 * scale,
                       r_err=1e-5, rho_err=1e-6)


# -- configuration -----------------------------------------------------------

def test_converge_defaults_match_reference_setup():
    cfg = parse_config(kind="converge")
    assert (cfg.mobility, cfg.lam, cfg.eps, cfg.nu) == (0.001, 0.001, 0.04, 0.1)
    assert (cfg.c1, cfg.c2, cfg.gamma, cfg.t_end) == (0.1, 0.1, 1.0, 0.1)
    assert cfg.levels == [4, 8, 16]


def test_explicit_shift_must_dominate_gamma(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"kind": "coarsen", "c1": 0.5}))
    with pytest.raises(ConfigError, match="c1 must exceed gamma"):
        parse_config(str(path))


def test_override_wins():
    cfg = parse_config(kind="coarsen", overrides={"tau": 0.01})
    assert cfg.tau == 0.01


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"kind": "coarsen", "weird_knob": 1}))
    with pytest.raises(ConfigError, match="unknown config keys"):
        parse_config(str(path))


def test_malformed_file_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(str(path))


def test_bad_kind_rejected():
    with pytest.raises(ConfigError):
        parse_config(kind="simulate")


# -- CSV writers -------------------------------------------------------------

def test_error_table_shape_and_roundtrip(tmp_path):
    records = [make_record(0.25, 1.5625e-3, 1.0), make_record(0.125, 1.953125e-4, 0.2)]
    path = tmp_path / "l2.csv"
    write_error_table_csv(records, str(path))
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 3
    header = lines[0].split(",")
    assert header == ["h", "tau", "err_phi_linf_l2", "rate", "err_mu_l2_l2", "rate",
                      "err_u_linf_l2", "rate", "err_p_l2_l2", "rate"]
    first = lines[1].split(",")
    assert first[3] == ""  # no rate on the first row
    second = lines[2].split(",")
    assert float(second[3]) == pytest.approx(np.log2(5.0), rel=1e-9)
    # round-trip to 12 significant digits
    assert float(first[2]) == pytest.approx(records[0].phi_linf_l2, rel=1e-12)

    write_h1_error_table_csv(records, str(tmp_path / "h1.csv"))
    h1_lines = (tmp_path / "h1.csv").read_text().strip().split("\n")
    assert h1_lines[0].startswith("h,tau,err_phi_h1,rate")


def test_single_record_has_no_rates(tmp_path):
    path = tmp_path / "one.csv"
    write_error_table_csv([make_record(0.25, 1e-3, 1.0)], str(path))
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 2
    assert lines[1].endswith(",")


def test_energy_csv_header_and_rows(tmp_path):
    tr = EnergyTrace()
    for i in range(3):
        tr.steps.append(i + 1)
        tr.times.append(0.001 * (i + 1))
        tr.energy.append(100.0 - i)
        tr.dissipation.append(0.05)
        tr.identity_residual.append(1e-12)
        tr.discriminant.append(4.0)
        tr.root_ratio.append(1.0)
    path = tmp_path / "energy.csv"
    write_energy_csv(tr, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == ENERGY_HEADER
    assert len(lines) == 4
    energies = [float(l.split(",")[2]) for l in lines[1:]]
    assert energies == sorted(energies, reverse=True)  # monotone, derivable from column


# -- VTK writer --------------------------------------------------------------

def parse_legacy_vtk(path):
    """Minimal independent reader of the legacy ASCII unstructured format."""
    with open(path) as fh:
        lines = [l.strip() for l in fh]
    assert lines[0].startswith("# vtk DataFile")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    i = 4
    npts = int(lines[i].split()[1])
    pts = np.array([[float(v) for v in lines[i + 1 + k].split()] for k in range(npts)])
    i += 1 + npts
    ncells, _ = int(lines[i].split()[1]), int(lines[i].split()[2])
    cells = [[int(v) for v in lines[i + 1 + k].split()] for k in range(ncells)]
    i += 1 + ncells
    assert lines[i].split()[0] == "CELL_TYPES"
    types = [int(lines[i + 1 + k]) for k in range(ncells)]
    i += 1 + ncells
    assert lines[i].split()[0] == "POINT_DATA"
    data = {}
    i += 1
    while i < len(lines) and lines[i]:
        kind, name = lines[i].split()[0], lines[i].split()[1]
        if kind == "SCALARS":
            i += 2  # skip LOOKUP_TABLE
            data[name] = np.array([float(lines[i + k]) for k in range(npts)])
            i += npts
        else:
            i += 1
            data[name] = np.array([[float(v) for v in lines[i + k].split()]
                                   for k in range(npts)])
            i += npts
    return pts, cells, types, data


def test_vtk_snapshot_two_triangles(tmp_path):
    mesh = build_uniform_mesh(1, 1)
    path = tmp_path / "snap.vtk"
    fields = {"phi": np.ones(4), "mu": np.arange(4.0), "p": np.zeros(4),
              "u": np.arange(8.0)}
    write_vtk_snapshot(mesh, fields, str(path))
    pts, cells, types, data = parse_legacy_vtk(str(path))
    assert pts.shape == (4, 3)
    assert len(cells) == 2 and all(c[0] == 3 for c in cells)
    assert types == [5, 5]
    assert np.allclose(data["phi"], 1.0)
    assert np.allclose(data["mu"], [0, 1, 2, 3])
    assert np.allclose(data["u"][:, 0], [0, 2, 4, 6])
    assert np.allclose(data["u"][:, 2], 0.0)


# -- CLI ---------------------------------------------------------------------

def test_cli_converge_writes_tables(tmp_path):
    out = tmp_path / "conv"
    code = main(["converge", "--nx", "4", "--out", str(out)])
    assert code == 0
    assert (out / "l2_errors.csv").exists()
    assert (out / "h1_errors.csv").exists()


def test_cli_converge_with_config_file(tmp_path):
    cfg = tmp_path / "conv.json"
    cfg.write_text(json.dumps({"levels": [4], "out_dir": str(tmp_path / "from_file")}))
    code = main(["converge", "--config", str(cfg)])
    assert code == 0
    assert (tmp_path / "from_file" / "l2_errors.csv").exists()


def test_cli_stability_writes_one_csv_per_tau(tmp_path):
    out = tmp_path / "stab"
    code = main(["stability", "--nx", "8", "--tau", "1e-2,1e-1",
                 "--t-end", "0.1", "--out", str(out)])
    assert code == 0
    assert (out / "energy_tau0.01.csv").exists()
    assert (out / "energy_tau0.1.csv").exists()


def test_cli_coarsen_and_snapshots(tmp_path):
    out = tmp_path / "co"
    code = main(["coarsen", "--nx", "8", "--tau", "1e-2", "--t-end", "0.05",
                 "--out", str(out)])
    assert code == 0
    assert (out / "energy.csv").exists()


def test_cli_relax_runs(tmp_path):
    out = tmp_path / "rx"
    code = main(["relax", "--nx", "8", "--tau", "1e-2", "--t-end", "0.02",
                 "--out", str(out)])
    assert code == 0
    assert (out / "energy.csv").exists()


def test_cli_selftest_passes():
    assert main(["selftest"]) == 0


def test_cli_no_args_usage_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_cli_unknown_subcommand_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2


def test_cli_config_violation_is_reported(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"c1": 0.5}))
    code = main(["coarsen", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_determinism_byte_identical_energy(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["coarsen", "--nx", "8", "--tau", "1e-2", "--t-end", "0.03",
                     "--seed", "2024", "--out", str(out)]) == 0
    b1 = (out1 / "energy.csv").read_bytes()
    b2 = (out2 / "energy.csv").read_bytes()
    assert b1 == b2
