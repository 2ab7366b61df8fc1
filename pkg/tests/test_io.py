import numpy as np
import pytest

from mdem.io import (atomic_write_text, atomic_writer, point_hash, read_fields_csv, read_history_csv,
                     write_fields_csv, write_history_csv, write_vtk)


def test_fields_round_trip_is_exact(tmp_path, rng):
    x, u, P, psi = rng.random((7, 2)), rng.standard_normal((7, 2)), rng.standard_normal((7, 2, 2)), rng.random(7)
    write_fields_csv(tmp_path / "f.csv", x, u, P, psi)
    f = read_fields_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(np.column_stack([f["x"], f["y"]]), x)
    np.testing.assert_array_equal(np.column_stack([f["p11"], f["p12"], f["p21"], f["p22"]]), P.reshape(-1, 4))
    np.testing.assert_array_equal(f["psi"], psi)
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "x,y,ux,uy,p11,p12,p21,p22,psi"


def test_fields_bad_header(tmp_path):
    (tmp_path / "f.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_fields_csv(tmp_path / "f.csv")


def test_history_round_trip(tmp_path):
    hist = [{"iter": 0, "total": 0.1, "pi": -1 / 3, "mse_r": 0.0, "mse_t": 1e-300, "mse_u": 0.0, "mse_p": 2.5,
             "phase": "adam"},
            {"iter": 1, "total": -0.2, "pi": 7.0, "mse_r": 0.0, "mse_t": 0.0, "mse_u": 0.0, "mse_p": 0.0,
             "phase": "lbfgs"}]
    write_history_csv(tmp_path / "h.csv", hist)
    assert read_history_csv(tmp_path / "h.csv") == hist
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "iter,total,pi,mse_r,mse_t,mse_u,mse_p,phase"


def test_atomic_writer_keeps_old_file_on_error(tmp_path):
    p = tmp_path / "a.txt"
    atomic_write_text(p, "old")
    with pytest.raises(RuntimeError):
        with atomic_writer(p) as fh:
            fh.write("new")
            raise RuntimeError("boom")
    assert p.read_text() == "old"
    assert sorted(q.name for q in tmp_path.iterdir()) == ["a.txt"]


def test_point_hash():
    x = np.array([[0.1, 0.2], [0.3, 0.4]])
    assert point_hash(x) == point_hash(x + 1e-15)
    assert point_hash(x) != point_hash(x[::-1])
    assert point_hash(np.array([[0.0, -0.0]])) == point_hash(np.array([[0.0, 0.0]]))


def test_vtk_structure(tmp_path):
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    tris = np.array([[0, 1, 2], [1, 3, 2]])
    write_vtk(tmp_path / "m.vtk", pts, tris, {"u": pts * 2, "P": np.ones((4, 4)), "psi": np.arange(4.0)})
    lines = (tmp_path / "m.vtk").read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert "POINTS 4 double" in lines and "CELLS 2 8" in lines and "CELL_TYPES 2" in lines
    assert "3 1 3 2" in lines
    assert "VECTORS u double" in lines and "TENSORS P double" in lines and "SCALARS psi double 1" in lines
    k = lines.index("TENSORS P double")
    assert lines[k + 3] == "0.0 0.0 0.0"
    with pytest.raises(ValueError, match="rows"):
        write_vtk(tmp_path / "bad.vtk", pts, tris, {"psi": np.zeros(3)})
