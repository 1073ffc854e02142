import numpy as np
import pytest

from buckopt.io_utils import (
    load_checkpoint,
    save_checkpoint,
    write_history_csv,
    write_manifest,
    write_pbm,
    write_pgm,
    write_sweep_csv,
    write_vtk,
)
from buckopt.mesh import build_rect_domain, build_strip_domain
from buckopt.optimizer import FrozenRefs


def test_vtk_layout(tmp_path):
    mesh = build_strip_domain(3, 2, 3.0)
    path = tmp_path / "f.vtk"
    u = np.arange(mesh.n_dof, dtype=float)
    write_vtk(path, mesh, cell_fields={"rho": np.linspace(0, 1, 6)},
              point_fields={"u": u})
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert "DIMENSIONS 4 3 1" in lines
    assert f"CELL_DATA {mesh.n_elem}" in lines
    assert f"POINT_DATA {mesh.n_nodes}" in lines
    i = lines.index("LOOKUP_TABLE default")
    vals = [float(v) for v in lines[i + 1:i + 1 + mesh.n_elem]]
    assert vals == pytest.approx(np.linspace(0, 1, 6))
    j = lines.index("VECTORS u float")
    assert lines[j + 1] == "0 1 0"
    assert lines[j + 2] == "2 3 0"


def test_pgm_content(tmp_path):
    mesh = build_rect_domain(2, 2, 1.0)
    path = tmp_path / "f.pgm"
    # element order is row-major bottom-up; image rows are top-down
    write_pgm(path, mesh, [0.0, 1.0, 0.5, 0.25])
    lines = path.read_text().splitlines()
    assert lines[:3] == ["P2", "2 2", "255"]
    assert lines[3] == "128 191"   # top image row = upper mesh row
    assert lines[4] == "255 0"


def test_pbm_content(tmp_path):
    mesh = build_rect_domain(2, 2, 1.0)
    path = tmp_path / "f.pbm"
    write_pbm(path, mesh, [1.0, 0.0, 0.0, 1.0])
    lines = path.read_text().splitlines()
    assert lines[:2] == ["P1", "2 2"]
    assert lines[2] == "0 1"
    assert lines[3] == "1 0"


def test_history_csv_union_columns(tmp_path):
    path = tmp_path / "h.csv"
    write_history_csv(path, [
        {"iteration": 0, "beta": 2.0, "gv": -0.1},
        {"iteration": 1, "beta": 2.0, "gv": -0.05, "gs_b": 0.01},
    ])
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,beta,gv,gs_b"
    assert lines[1] == "0,2,-0.1,"
    assert lines[2] == "1,2,-0.05,0.01"


def test_history_csv_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_history_csv(tmp_path / "h.csv", [])


def test_sweep_csv_pads_missing_modes(tmp_path):
    path = tmp_path / "s.csv"
    write_sweep_csv(path, [
        {"epsilon": 0.05, "x_off": 0.0, "y_off": 0.25,
         "lambdas": np.array([1.5, 2.0]), "compliance": 3.25,
         "volume_fraction": 0.42, "local_mode": False},
        {"epsilon": 0.08, "x_off": -0.25, "y_off": 0.5,
         "lambdas": np.array([0.9]), "compliance": 3.5,
         "volume_fraction": 0.44, "local_mode": True},
    ], n_eig=3)
    lines = path.read_text().splitlines()
    assert lines[0] == "epsilon,x_off,y_off,lambda1,lambda2,lambda3,compliance,volume_fraction,local_mode"
    assert lines[1] == "0.05,0,0.25,1.5,2,,3.25,0.42,0"
    assert lines[2] == "0.08,-0.25,0.5,0.9,,,3.5,0.44,1"


def test_manifest_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_manifest(a, {"zeta": 1, "alpha": {"b": 2, "a": [1, 2]}})
    write_manifest(b, {"alpha": {"a": [1, 2], "b": 2}, "zeta": 1})
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith('{\n  "alpha"')


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    x = rng.uniform(0.2, 1.0, 25)
    s = rng.uniform(0.0, 1.0, 25)
    refs = FrozenRefs()
    refs.compliance.update({"e": 1.5, "b": 1.2, "d": 1.0})
    refs.ks.update({"e": -0.5, "b": -0.4})
    refs.gamma0.update({"b": -0.3})
    refs.stress_norm.update({})
    path = tmp_path / "ck.npz"
    save_checkpoint(path, x, s, iteration=42, beta=16.0,
                    correction={"e": 1.1, "b": 1.0, "d": 0.9},
                    vstar_d=0.55, refs=refs)
    out = load_checkpoint(path)
    assert np.array_equal(out["x"], x)
    assert np.array_equal(out["s"], s)
    assert out["iteration"] == 42 and isinstance(out["iteration"], int)
    assert out["beta"] == 16.0
    assert out["vstar_d"] == 0.55
    assert list(out["realizations"]) == ["e", "b", "d"]
    assert out["correction"] == pytest.approx([1.1, 1.0, 0.9])
    assert out["compliance0"] == pytest.approx([1.5, 1.2, 1.0])
    assert out["ks0"][:2] == pytest.approx([-0.5, -0.4])
    assert np.isnan(out["ks0"][2])
    assert out["gamma0"][1] == pytest.approx(-0.3)
    assert np.all(np.isnan(out["stress_norm0"]))
