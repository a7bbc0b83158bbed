from unittest.mock import patch

import numpy as np
import numpy.testing as npt
import pytest


@pytest.fixture
def params():
    from bilayer.network import Architecture, init_params

    return init_params(Architecture(blocks=2, width=5), seed=17)


@pytest.fixture
def rows():
    from bilayer.trainer import MetricsRow

    return [
        MetricsRow(1000, 12.5, 0.1, 13.0, None, "pre-1"),
        MetricsRow(2000, 11.0 / 3.0, 1e-3, 3.7, 1.25, "main"),
        MetricsRow(2000, 20.0, 2e-3, 20.5, None, "test", 0.05, "cylinder"),
    ]


def test_write_read_checkpoint(params, tmp_path):
    from bilayer.io import read_checkpoint, write_checkpoint

    path = tmp_path / "ckpt_5.txt"
    write_checkpoint(path, params)

    lines = path.read_text().splitlines()
    assert lines[0] == f"arch 2 5 {params.size} 17"
    assert len(lines) == params.size + 1
    assert not (tmp_path / "ckpt_5.txt.tmp").exists()

    loaded, role = read_checkpoint(path)
    assert role is None
    assert loaded.arch == params.arch
    assert loaded.seed == 17
    # parameters round-trip exactly
    npt.assert_array_equal(loaded.theta, params.theta)


def test_checkpoint_role(params, tmp_path):
    from bilayer.boundary import NetworkLift
    from bilayer.io import read_checkpoint, read_lift, write_checkpoint
    from bilayer.network import Architecture, init_params

    g1 = init_params(Architecture(blocks=1, width=4, outputs=1), seed=3)
    path = tmp_path / "g1.txt"
    write_checkpoint(path, g1, role="g1")
    assert path.read_text().splitlines()[0] == "arch 1 4 57 3 role=g1"

    loaded, role = read_checkpoint(path)
    assert role == "g1"
    assert loaded.arch.outputs == 1

    bc = read_lift(path)
    assert isinstance(bc, NetworkLift)
    npt.assert_array_equal(bc.params.theta, g1.theta)

    other = tmp_path / "other.txt"
    write_checkpoint(other, params)
    with pytest.raises(ValueError, match="does not hold a g1 network"):
        read_lift(other)

    with pytest.raises(ValueError, match="invalid checkpoint role"):
        write_checkpoint(other, params, role="g 1")


def test_read_checkpoint_errors(params, tmp_path):
    from bilayer.io import read_checkpoint

    path = tmp_path / "bad.txt"
    path.write_text("net 1 4 67 0\n")
    with pytest.raises(ValueError, match="invalid checkpoint header"):
        read_checkpoint(path)

    path.write_text("arch 1 4 67 0 kind=g1\n")
    with pytest.raises(ValueError, match="invalid checkpoint header"):
        read_checkpoint(path)

    path.write_text("arch 1 4 67 0\n1.0\n2.0\n")
    with pytest.raises(ValueError, match="expected 67 parameters, found 2"):
        read_checkpoint(path)

    path.write_text("arch 1 4 3 0\n1.0\n2.0\n3.0\n")
    with pytest.raises(ValueError, match="does not match"):
        read_checkpoint(path)


def test_outputs_from_size():
    from bilayer.io import _outputs_from_size
    from bilayer.network import Architecture

    for arch in (Architecture(), Architecture(1, 4, outputs=1), Architecture(3, 7)):
        assert _outputs_from_size(arch.blocks, arch.width, arch.size) == arch.outputs


def test_write_read_optimizer_state(tmp_path):
    from bilayer.io import (
        optimizer_path,
        read_optimizer_state,
        write_optimizer_state,
    )
    from bilayer.trainer import OptimizerState

    assert optimizer_path(tmp_path / "ckpt_10.txt") == tmp_path / "ckpt_10.adam.npz"

    rng = np.random.default_rng(0)
    state = OptimizerState(rng.normal(size=9), rng.random(9), 42, lr=5e-4)
    path = tmp_path / "ckpt_10.adam.npz"
    write_optimizer_state(path, state, 10)

    loaded, step = read_optimizer_state(path)
    assert step == 10
    assert loaded.t == 42
    assert loaded.lr == 5e-4
    assert loaded.betas == (0.9, 0.999)
    assert loaded.eps == 1e-8
    assert loaded.checksum() == state.checksum()


def test_checkpoint_step():
    from bilayer.io import checkpoint_step

    assert checkpoint_step("run/ckpt_120000.txt") == 120000
    with pytest.raises(ValueError, match="not a checkpoint"):
        checkpoint_step("run/mesh_10.obj")


def test_write_read_metrics(rows, tmp_path):
    from bilayer.io import read_metrics, write_metrics

    path = tmp_path / "metrics.csv"
    write_metrics(path, rows[:2])
    lines = path.read_text().splitlines()
    assert lines[0] == "step,E,C,Istar,elapsed_s,phase,eL2,shape"
    assert lines[1] == "1000,12.5,0.1,13.0,,pre-1,,"

    write_metrics(path, rows[2:], append=True)
    assert read_metrics(path) == rows

    path.write_text("a,b\n")
    with pytest.raises(ValueError, match="not a metrics file"):
        read_metrics(path)


def test_read_metrics_short_records(tmp_path):
    from bilayer.io import read_metrics

    path = tmp_path / "metrics.csv"
    path.write_text("step,E,C,Istar,elapsed_s,phase\n10,1.0,0.5,2.0,,main\n")
    (row,) = read_metrics(path)
    assert row.step == 10
    assert row.e_l2 is None
    assert row.shape is None


def test_mesh_grid_square():
    from bilayer.geometry import PlateDomain, Rectangle
    from bilayer.io import mesh_grid

    vertices, faces = mesh_grid(PlateDomain(Rectangle(0, 1, 0, 1)), (2, 2))
    npt.assert_array_equal(vertices, [[0, 0], [1, 0], [0, 1], [1, 1]])
    npt.assert_array_equal(faces, [[0, 1, 3, 2]])

    vertices, faces = mesh_grid(PlateDomain(Rectangle(0, 2, 0, 1)), (3, 2))
    npt.assert_array_equal(vertices[:, 0], [0, 1, 2, 0, 1, 2])
    npt.assert_array_equal(faces, [[0, 1, 4, 3], [1, 2, 5, 4]])

    with pytest.raises(ValueError, match="at least 2"):
        mesh_grid(PlateDomain(Rectangle(0, 1, 0, 1)), (1, 5))


def test_mesh_grid_hole(oshape):
    from bilayer.io import mesh_grid

    vertices, faces = mesh_grid(oshape, (31, 13))
    assert faces.shape == (360 - 160, 4)
    assert len(vertices) == 31 * 13 - 19 * 7
    # every vertex is used
    npt.assert_array_equal(np.unique(faces), np.arange(len(vertices)))
    # quads are counterclockwise
    a, b, c = (vertices[faces[:, k]] for k in range(3))
    cross = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0]
    assert np.all(cross > 0)


def test_write_mesh(tmp_path):
    from bilayer.io import write_mesh

    path = tmp_path / "mesh.obj"
    vertices = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.5], [1.0, 1.0, 0.1], [0, 1, 0]])
    write_mesh(path, vertices, np.array([[0, 1, 2, 3]]))
    assert path.read_text().splitlines() == [
        "v 0 0 0",
        "v 1 0 0.5",
        "v 1 1 0.10000000000000001",
        "v 0 1 0",
        "f 1 2 3 4",
    ]


def test_export_mesh(plate, params, tmp_path):
    from bilayer.boundary import edge_lift
    from bilayer.evaluation import cylinder_reference
    from bilayer.io import export_mesh, mesh_grid

    ref = cylinder_reference(1.0, plate)
    path = tmp_path / "cylinder.obj"
    with patch("bilayer.boundary.deformation", return_value=ref.jet):
        vertices, faces = export_mesh(params, edge_lift(plate), plate, (11, 5), path)

    points, expected = mesh_grid(plate, (11, 5))
    npt.assert_array_equal(faces, expected)
    npt.assert_allclose(vertices, ref.jet(points).value)
    text = path.read_text().splitlines()
    assert sum(line.startswith("v ") for line in text) == 55
    assert sum(line.startswith("f ") for line in text) == 40


def test_run_directory(plate, params, rows, tmp_path):
    from bilayer.boundary import edge_lift
    from bilayer.io import (
        RunDirectory,
        read_checkpoint,
        read_metrics,
        read_optimizer_state,
    )
    from bilayer.trainer import OptimizerState

    out = RunDirectory(tmp_path / "run", plate, edge_lift(plate), resolution=(11, 5))
    assert out.metrics_path.exists()
    assert read_metrics(out.metrics_path) == []

    for row in rows:
        out.write_metrics(row)
    assert read_metrics(out.metrics_path) == rows

    state = OptimizerState.zeros(params.size)
    out.checkpoint(10, params, state)
    out.checkpoint(2, params, state)
    assert [p.name for p in out.checkpoints()] == ["ckpt_2.txt", "ckpt_10.txt"]
    loaded, _ = read_checkpoint(tmp_path / "run" / "ckpt_10.txt")
    npt.assert_array_equal(loaded.theta, params.theta)
    _, step = read_optimizer_state(tmp_path / "run" / "ckpt_10.adam.npz")
    assert step == 10

    out.snapshot(10, params)
    assert (tmp_path / "run" / "mesh_10.obj").exists()


def test_run_directory_resume(plate, rows, tmp_path):
    from bilayer.boundary import edge_lift
    from bilayer.io import RunDirectory, read_metrics, write_metrics

    path = tmp_path / "run"
    path.mkdir()
    write_metrics(path / "metrics.csv", rows)

    out = RunDirectory(path, plate, edge_lift(plate), resume_step=1000)
    assert read_metrics(out.metrics_path) == rows[:1]

    # a fresh run starts a new metrics file
    write_metrics(path / "metrics.csv", rows)
    out = RunDirectory(path, plate, edge_lift(plate))
    assert read_metrics(out.metrics_path) == []
