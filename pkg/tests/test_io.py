import numpy as np
import pytest

from graphdiff.io import (CheckpointError, FormatError, load_checkpoint, parse_graphs, read_graphs,
                          read_manifest, save_checkpoint, write_graphs, write_manifest)
from graphdiff.graph import from_edge_list

from conftest import random_graph


def test_graph_file_round_trip(tmp_path, rng):
    graphs = [random_graph(rng, int(rng.integers(0, 10)), 3, 4) for _ in range(100)]
    path = tmp_path / "g.txt"
    write_graphs(path, graphs)
    assert read_graphs(path) == graphs


def test_comments_and_blank_lines():
    text = "# header comment\n3 1 2\n0 0 0\n0 1 1  # an edge\n\n\n2 2 2\n1 0\n"
    gs = parse_graphs(text)
    assert len(gs) == 2 and gs[0].num_edges() == 1 and list(gs[1].node_labels()) == [1, 0]


@pytest.mark.parametrize(
    "text, line",
    [
        ("3 1 2\n0 0\n", 2),
        ("2 1 2\n0 0\n1 0 1\n", 3),
        ("2 1 2\n0 0\n0 1 2\n", 3),
        ("2 1 2\n0 x\n", 2),
        ("2 1\n0 0\n", 1),
        ("2 1 2\n0 0\n\n2 1 2\n0 0\n0 1 1\n0 1 1\n", 7),
    ],
)
def test_malformed_files_report_line_numbers(text, line):
    with pytest.raises(FormatError, match=f"line {line}:"):
        parse_graphs(text)


def test_checkpoint_round_trip(tmp_path, rng):
    state = {"w": rng.normal(size=(3, 4)), "b": rng.normal(size=4), "s": np.array(2.5), "e": np.zeros((0, 3))}
    path = tmp_path / "m.gdf"
    save_checkpoint(path, state)
    back = load_checkpoint(path)
    assert list(back) == list(state)
    for k in state:
        assert back[k].shape == state[k].shape and np.array_equal(back[k], state[k])


def test_checkpoint_errors(tmp_path, rng):
    path = tmp_path / "m.gdf"
    save_checkpoint(path, {"w": rng.normal(size=(5, 5))})
    raw = path.read_bytes()
    path.write_bytes(raw[:-7])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)
    path.write_bytes(b"GDF2" + raw[4:])
    with pytest.raises(CheckpointError, match="version GDF2.*GDF1"):
        load_checkpoint(path)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CheckpointError, match="not a GDF"):
        load_checkpoint(path)
    path.write_bytes(raw + b"\0")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)
    with pytest.raises(CheckpointError, match="not found"):
        load_checkpoint(tmp_path / "missing.gdf")


def test_manifest(tmp_path):
    m = tmp_path / "data" / "manifest.json"
    m.parent.mkdir()
    write_manifest(m, {"train": "train.txt", "test": "test.txt"})
    assert read_manifest(m) == {"train": m.parent / "train.txt", "test": m.parent / "test.txt"}
    with pytest.raises(ValueError):
        write_manifest(m, {"holdout": "x"})
