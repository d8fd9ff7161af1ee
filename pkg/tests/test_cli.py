import json

import pytest

from graphdiff.cli import main
from graphdiff.io import read_graphs

CONFIG = """
[data]
path = "{data}/manifest.json"
generator = "cycles"
num_graphs = 20
[noise]
T = 6
[model]
n_layers = 1
hidden_x = 8
hidden_e = 4
hidden_y = 4
heads = 2
ff_x = 8
ff_e = 4
ff_y = 4
[train]
steps = 4
batch_size = 4
[sample]
count = 5
[guidance]
regressor_steps = 3
target = [6.0]
scale = 1.0
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "c.toml"
    cfg.write_text(CONFIG.format(data=root / "data"))
    assert main(["gen-data", "--config", str(cfg), "--seed", "1", "--out", str(root / "data")]) == 0
    assert main(["train", "--config", str(cfg), "--seed", "7", "--out", str(root / "r1")]) == 0
    return root, cfg


def _run(workspace, *argv):
    root, cfg = workspace
    return main([argv[0], "--config", str(cfg), "--seed", "3", *map(str, argv[1:])])


def test_training_is_byte_reproducible(workspace):
    root, cfg = workspace
    assert main(["train", "--config", str(cfg), "--seed", "7", "--out", str(root / "r2")]) == 0
    assert (root / "r1" / "model.gdf").read_bytes() == (root / "r2" / "model.gdf").read_bytes()
    run = json.loads((root / "r1" / "run.json").read_text())
    assert run["command"] == "train" and run["seed"] == 7 and run["config"]["noise"]["T"] == 6


@pytest.mark.filterwarnings("ignore::graphdiff.metrics.MetricWarning")
def test_sample_count_and_evaluate_keys(workspace):
    root, _ = workspace
    assert _run(workspace, "sample", "--checkpoint", root / "r1" / "model.gdf", "--count", 13, "--out", root / "s") == 0
    graphs = read_graphs(root / "s" / "samples.graphs")
    assert len(graphs) == 13
    assert _run(workspace, "evaluate", "--generated", root / "s" / "samples.graphs", "--out", root / "ev") == 0
    report = dict(
        line.split(" = ") for line in (root / "ev" / "report.txt").read_text().splitlines() if " = " in line
    )
    for key in ("mmd_ratio_degree", "mmd_ratio_clustering", "mmd_ratio_orbit", "validity", "uniqueness", "novelty"):
        assert key in report


def test_other_commands_run(workspace, tmp_path):
    root, _ = workspace
    ckpt = root / "r1" / "model.gdf"
    assert _run(workspace, "elbo", "--checkpoint", ckpt, "--out", root / "el") == 0
    assert (root / "el" / "elbo.txt").read_text().strip()
    assert _run(workspace, "train-regressor", "--out", root / "reg") == 0
    meta = json.loads((root / "reg" / "regressor.json").read_text())
    assert meta["model"]["n_layers"] == 1 and meta["model"]["features"] == []
    assert _run(workspace, "guide", "--checkpoint", ckpt, "--regressor", root / "reg" / "regressor.gdf",
                "--target", 6.0, "--guidance-scale", 2.0, "--count", 3, "--out", root / "g") == 0
    assert len(read_graphs(root / "g" / "samples.graphs")) == 3
    scaffold = tmp_path / "edge.graphs"
    scaffold.write_text("2 1 2\n0 0\n0 1 1\n")
    assert _run(workspace, "scaffold", "--checkpoint", ckpt, "--scaffold-file", scaffold, "--count", 4,
                "--out", root / "sc") == 0
    for g in read_graphs(root / "sc" / "samples.graphs"):
        assert g.adjacency()[0, 1] == 1


def test_congress_mode_trains(workspace):
    root, _ = workspace
    assert _run(workspace, "train", "--mode", "congress", "--out", root / "rc") == 0
    assert _run(workspace, "sample", "--checkpoint", root / "rc" / "model.gdf", "--out", root / "sc2") == 0
    assert len(read_graphs(root / "sc2" / "samples.graphs")) == 5


def test_errors_exit_cleanly(workspace, tmp_path, capsys):
    root, cfg = workspace
    bad = tmp_path / "bad.toml"
    bad.write_text(cfg.read_text().replace("steps = 4", "steps = 4\nbogus = 1"))
    assert main(["train", "--config", str(bad), "--seed", "1", "--out", str(tmp_path / "x")]) == 2
    assert "bogus" in capsys.readouterr().err
    assert _run(workspace, "sample", "--checkpoint", tmp_path / "missing.gdf", "--out", tmp_path / "y") == 2
    assert "not found" in capsys.readouterr().err
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "z")]) == 2
