from unittest.mock import patch

import numpy as np
import pytest

SMALL_RUN = """\
# tiny experiment on the standard plate
[domain]
outer = -5 5 -2 2
clamp = -5 -2 -5 2

[energy]
Z = -1 0 0 -1
beta = 10

[network]
blocks = 1
width = 4

[schedule]
epochs = 4
batch-size = 4
metrics-every = 2
checkpoint-every = 2
export-every = 4

[evaluation]
alpha = 1
density = 1

[run]
output = {output}
mesh-resolution = 3 3
"""


def parse(text):
    from bilayer.cli import ConfigParser, experiment_from_config

    config = ConfigParser()
    config.read_experiment(text, "test.ini")
    return experiment_from_config(config)


def test_getlist():
    from bilayer.cli import getlist

    assert getlist(
        """
                -5 -2 -5 -4/3
                -5 -2 -13/3 -2
            """,
    ) == ["-5 -2 -5 -4/3", "-5 -2 -13/3 -2"]
    assert getlist("xyz") == ["xyz"]


def test_getnumber():
    from bilayer.cli import getfloats, getnumber

    assert getnumber("10/3") == 10 / 3
    assert getnumber(" -5 ") == -5.0
    assert getnumber("1e-3") == 1e-3
    assert getnumber("2.5") == 2.5
    with pytest.raises(ValueError, match="expected a number"):
        getnumber("abc")
    with pytest.raises(ValueError, match="expected a number"):
        getnumber("1/0")

    assert getfloats("-10/3 10/3 -4/3 4/3") == [-10 / 3, 10 / 3, -4 / 3, 4 / 3]
    assert getfloats("") == []


def test_getresolution():
    from bilayer.cli import getresolution

    assert getresolution("101 41") == (101, 41)
    with pytest.raises(ValueError, match="two integers"):
        getresolution("101")
    with pytest.raises(ValueError, match="two integers"):
        getresolution("10 -1")


def test_getchoice():
    from bilayer.cli import getchoice

    choices = {"I": 1, "tilde": 2}
    assert getchoice("tilde", choices) == 2
    with pytest.raises(ValueError, match="Invalid value"):
        getchoice("J", choices)


@patch.dict("os.environ", {"HOME": "/home/user", "TEST": "folder"})
def test_getpath():
    from bilayer.cli import getpath

    assert getpath("~/${TEST}/g1.txt") == "/home/user/folder/g1.txt"


def test_option_lines():
    from bilayer.cli import option_lines

    text = "# comment\n[domain]\nouter = 1\nclamp =\n    1 2 3 4\n\n[energy]\nZ = 1\n"
    assert option_lines(text) == {
        ("domain", None): 2,
        ("domain", "outer"): 3,
        ("domain", "clamp"): 4,
        ("energy", None): 7,
        ("energy", "z"): 8,
    }


def test_read_experiment_errors():
    from bilayer.cli import ConfigParser
    from bilayer.core import ConfigError

    config = ConfigParser()
    with pytest.raises(ConfigError, match=r"^test.ini:3: duplicate option 'outer'"):
        config.read_experiment("[domain]\nouter = 1\nouter = 2\n", "test.ini")

    config = ConfigParser()
    with pytest.raises(ConfigError, match=r"^test.ini:1: option outside of a section"):
        config.read_experiment("outer = 1\n", "test.ini")

    config = ConfigParser()
    with pytest.raises(ConfigError, match=r"^test.ini:3: duplicate section"):
        config.read_experiment("[domain]\n\n[domain]\n", "test.ini")


def test_schema_errors():
    from bilayer.core import ConfigError

    base = "[domain]\nouter = -5 5 -2 2\n[energy]\nZ = -1 0 0 -1\nbeta = 10\n"

    with pytest.raises(ConfigError, match=r"^test.ini:3: unknown option 'width'") as e:
        parse("[domain]\nouter = -5 5 -2 2\nwidth = 3\n")
    assert e.value.line == 3

    with pytest.raises(ConfigError, match=r"^test.ini:6: unknown section \[model\]"):
        parse(base + "[model]\n")

    with pytest.raises(ConfigError, match=r"missing section \[energy\]"):
        parse("[domain]\nouter = -5 5 -2 2\n")

    with pytest.raises(ConfigError, match=r"^test.ini:3: missing option 'beta'"):
        parse("[domain]\nouter = -5 5 -2 2\n[energy]\nZ = -1 0 0 -1\n")

    with pytest.raises(
        ConfigError,
        match=r"^test.ini:5: \[energy\] beta: Invalid value: 'abc'",
    ):
        parse(base.replace("beta = 10", "beta = abc"))

    with pytest.raises(ConfigError, match=r"^test.ini:4: .*symmetric"):
        parse(base.replace("Z = -1 0 0 -1", "Z = -1 1 0 -1"))

    with pytest.raises(ConfigError, match=r"^test.ini:4: .*expected 4 numbers for Z"):
        parse(base.replace("Z = -1 0 0 -1", "Z = -1 0 -1"))


def test_domain_errors():
    from bilayer.core import ConfigError

    energy = "[energy]\nZ = -1 0 0 -1\nbeta = 10\n"

    # pre-training needs a clamp
    with pytest.raises(ConfigError, match=r"^test.ini:7: .*without clamped boundary"):
        parse("[domain]\nouter = -1 1 -1 1\n" + energy + "[schedule]\npretrain = 3\n")

    with pytest.raises(ConfigError, match=r"^test.ini:7: pretrain must be 0"):
        parse("[domain]\nouter = -1 1 -1 1\n" + energy + "[schedule]\npretrain = 1\n")

    # clamp that is not a full edge needs a trained g1
    with pytest.raises(ConfigError, match=r"^test.ini:3: .*train g1 instead"):
        parse("[domain]\nouter = -5 5 -2 2\nclamp = -5 -2 -5 0\n" + energy)

    with pytest.raises(ConfigError, match=r"^test.ini:1: .*strictly inside"):
        parse("[domain]\nouter = -1 1 -1 1\nhole = 0 1 -0.5 0.5\n" + energy)

    with pytest.raises(ConfigError, match=r"^test.ini:6: g1 given for a domain"):
        parse("[domain]\nouter = -1 1 -1 1\n" + energy + "[g1]\ntarget = 0 0 1\n")

    with pytest.raises(ConfigError, match=r"reference energy given without alpha"):
        parse(
            "[domain]\nouter = -1 1 -1 1\n"
            + energy
            + "[evaluation]\nreference-energy = 1\n"
        )


def test_energy_source():
    exp = parse(
        "[domain]\nouter = -1 1 -1 1\n[energy]\nZ = 1 0 0 1\nbeta = 2\n"
        "formulation = tilde\nsource = 0 0 1\nsource-gradient = 1 0 0 0 0 1\n"
    )
    assert exp.energy.formulation == "tilde"
    assert exp.energy.source.constant == (0.0, 0.0, 1.0)
    assert exp.energy.source.gradient == ((1.0, 0.0), (0.0, 0.0), (0.0, 1.0))
    assert parse(exp.to_config()) == exp


def test_presets():
    from bilayer.cli import load_experiment
    from bilayer.presets import PRESETS, preset

    assert set(PRESETS) == {
        "example1",
        "example2",
        "example3",
        "example3-pretrain",
        "example4",
        "example4-direct",
        "oshape",
        "oshape-corner",
        "corkscrew",
        "cigar",
        "helix",
    }
    with pytest.raises(KeyError, match="unknown preset"):
        preset("example5")

    for name in PRESETS:
        exp = load_experiment(name)
        assert exp.output == name
        text = exp.to_config()
        # configurations round-trip through their text
        assert parse(text) == exp
        assert parse(text).to_config() == text


def test_preset_values():
    from bilayer.boundary import AffineTarget
    from bilayer.cli import load_experiment

    exp = load_experiment("example4")
    assert exp.energy.Z == ((-10.0, 0.0), (0.0, -10.0))
    assert exp.energy.beta == 1000.0
    assert exp.pretrain == 5
    assert exp.schedule.epochs_pre == 50_000
    assert exp.schedule.epochs == 2_000_000
    assert exp.evaluation.alpha == 10.0
    schedule = exp.training_schedule()
    assert len(schedule.chain) == 5
    assert schedule.total_steps == 2_200_000

    exp = load_experiment("oshape")
    assert exp.domain.area == pytest.approx(40 - 160 / 9)
    assert exp.evaluation.reference(exp.domain).energy == 277.78

    exp = load_experiment("oshape-corner")
    assert len(exp.domain.clamp) == 2
    assert exp.g1.target == AffineTarget(1.0, 1.0, 19 / 3)
    assert exp.training_schedule().chain.axis == 0

    exp = load_experiment("corkscrew")
    assert exp.energy.Z == ((-3.0, 2.0), (2.0, -3.0))
    assert exp.evaluation.reference(exp.domain) is None

    for name in ("cigar", "helix"):
        exp = load_experiment(name)
        assert exp.domain.free
        assert exp.pretrain == 0


def test_load_experiment_file(tmp_path):
    from bilayer.cli import load_experiment
    from bilayer.core import ConfigError

    path = tmp_path / "small.ini"
    path.write_text(SMALL_RUN.format(output="out"))
    exp = load_experiment(str(path))
    assert exp.arch.blocks == 1
    assert exp.schedule.batch_size == 4
    assert exp.mesh_resolution == (3, 3)
    assert exp.evaluation.samples(exp.domain) == 40

    with pytest.raises(ConfigError, match="no such config file or preset"):
        load_experiment(str(tmp_path / "missing.ini"))


def test_output_path(tmp_path):
    from pathlib import Path

    from bilayer.cli import output_path

    with patch.dict("os.environ", {"BILAYER_OUTPUT": str(tmp_path)}):
        assert output_path("example1") == tmp_path / "example1"
        assert output_path("/abs/run") == Path("/abs/run")
    with patch.dict("os.environ", clear=True):
        assert output_path("example1") == Path("example1")


def test_main_preset(capsys):
    from bilayer.cli import main
    from bilayer.presets import PRESETS

    assert main(["preset", "cigar"]) == 0
    assert capsys.readouterr().out == PRESETS["cigar"]

    assert main(["preset", "nope"]) == 1


def test_main_no_command(capsys):
    from bilayer.cli import main

    assert main([]) == 1
    assert "usage: bilayer" in capsys.readouterr().out


def test_main_config_error(tmp_path):
    from bilayer.cli import EXIT_CONFIG_ERROR, main

    path = tmp_path / "bad.ini"
    path.write_text("[domain]\nouter = -5 5 -2 2\nwidth = 3\n")
    assert main(["run", "--no-progress", str(path)]) == EXIT_CONFIG_ERROR


def test_main_oracle():
    from bilayer.cli import EXIT_ORACLE_FAILURE, main
    from bilayer.oracles import OracleReport

    report = OracleReport()
    report.relative("check", 1.0, 1.0, 1e-3)
    with patch("bilayer.oracles.oracle_suite", return_value=report) as suite:
        assert main(["oracle", "--no-progress", "--resolution", "10", "4"]) == 0
    assert suite.call_args.args[:2] == ((10, 4), 1e-3)

    report.relative("broken", 2.0, 1.0, 1e-3)
    with patch("bilayer.oracles.oracle_suite", return_value=report):
        assert main(["oracle", "--no-progress"]) == EXIT_ORACLE_FAILURE


def test_main_unexpected_error():
    from bilayer.cli import EXIT_CONFIG_ERROR, EXIT_FAILURE, main

    with patch("bilayer.oracles.oracle_suite", side_effect=RuntimeError("boom")):
        assert main(["oracle", "--no-progress"]) == EXIT_FAILURE
    assert EXIT_FAILURE != EXIT_CONFIG_ERROR


def test_main_run_elapsed(tmp_path):
    from bilayer.cli import main
    from bilayer.io import read_metrics

    out = tmp_path / "out"
    config = tmp_path / "small.ini"
    config.write_text(SMALL_RUN.format(output=out))
    assert main(["run", "--no-progress", str(config)]) == 0
    rows = read_metrics(out / "metrics.csv")
    assert [r.elapsed for r in rows] == [None, None, None]

    # wall times are recorded on all rows when not deterministic
    out = tmp_path / "timed"
    text = SMALL_RUN.format(output=out)
    text = text.replace("[schedule]\n", "[schedule]\ndeterministic = false\n")
    config.write_text(text)
    assert main(["run", "--no-progress", str(config)]) == 0
    rows = read_metrics(out / "metrics.csv")
    assert rows[-1].phase == "test"
    assert all(r.elapsed is not None and r.elapsed >= 0 for r in rows)
    assert rows[-1].elapsed >= rows[-2].elapsed


def test_main_run_resume_export(tmp_path, capsys):
    from bilayer.cli import main
    from bilayer.io import read_checkpoint, read_metrics

    out = tmp_path / "out"
    config = tmp_path / "small.ini"
    config.write_text(SMALL_RUN.format(output=out))

    assert main(["run", "--no-progress", str(config)]) == 0

    assert (out / "config.ini").exists()
    rows = read_metrics(out / "metrics.csv")
    assert [(r.step, r.phase) for r in rows] == [(2, "main"), (4, "main"), (4, "test")]
    assert rows[-1].shape in ("cylinder", "non-cylinder")
    assert rows[-1].e_l2 is not None
    assert (out / "ckpt_2.txt").exists()
    assert (out / "ckpt_4.adam.npz").exists()
    assert (out / "mesh_4.obj").exists()
    final, _ = read_checkpoint(out / "ckpt_4.txt")

    # resuming from step 2 reproduces the run
    resume = str(out / "ckpt_2.txt")
    assert main(["run", "--no-progress", "--resume", resume, str(config)]) == 0
    assert read_metrics(out / "metrics.csv") == rows
    resumed, _ = read_checkpoint(out / "ckpt_4.txt")
    np.testing.assert_array_equal(resumed.theta, final.theta)

    mesh = tmp_path / "final.obj"
    args = ["export", "--no-progress", "--resolution", "5", "3"]
    assert main([*args, str(out / "ckpt_4.txt"), str(config), str(mesh)]) == 0
    lines = mesh.read_text().splitlines()
    assert sum(line.startswith("v ") for line in lines) == 15
    assert sum(line.startswith("f ") for line in lines) == 8

    assert main(["metrics", "--no-progress", str(out)]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["step", "phase", "E", "C", "Istar", "eL2", "shape"]
    assert len(table) == 4


def test_main_numerical_error(tmp_path):
    from bilayer.cli import EXIT_NUMERICAL_ERROR, main
    from bilayer.core import NumericalError

    config = tmp_path / "small.ini"
    config.write_text(SMALL_RUN.format(output=tmp_path / "out"))
    error = NumericalError("non-finite loss", step=3)
    with patch("bilayer.trainer.run_schedule", side_effect=error):
        assert main(["run", "--no-progress", str(config)]) == EXIT_NUMERICAL_ERROR


def test_main_resume_mismatch(tmp_path):
    from bilayer.cli import main
    from bilayer.io import write_checkpoint, write_optimizer_state
    from bilayer.network import Architecture, init_params
    from bilayer.trainer import OptimizerState

    config = tmp_path / "small.ini"
    config.write_text(SMALL_RUN.format(output=tmp_path / "out"))
    params = init_params(Architecture(blocks=2, width=4))
    ckpt = tmp_path / "ckpt_2.txt"
    write_checkpoint(ckpt, params)
    state = OptimizerState.zeros(params.size)
    write_optimizer_state(tmp_path / "ckpt_2.adam.npz", state, 2)
    assert main(["run", "--no-progress", "--resume", str(ckpt), str(config)]) == 1
