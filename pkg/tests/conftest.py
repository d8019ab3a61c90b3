import csv

import pytest

from modfleet.network import load_network


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


@pytest.fixture
def net_files(tmp_path):
    """Write nodes/edges CSVs and return their paths."""

    def make(nodes, edges, with_speed_column=True):
        nodes_path = write_csv(tmp_path / "nodes.csv", ["id", "lat", "lon"], nodes)
        header = ["id", "from", "to", "length_m", "lanes"]
        if with_speed_column:
            header.append("speed_kmh")
        edges_path = write_csv(tmp_path / "edges.csv", header, edges)
        return nodes_path, edges_path

    return make


@pytest.fixture
def square_net(net_files):
    """2x2 grid, 200 m blocks, both directions on every segment (8 edges)."""
    nodes = [
        (0, 50.000, 14.000),
        (1, 50.000, 14.003),
        (2, 50.002, 14.000),
        (3, 50.002, 14.003),
    ]
    edges = []
    eid = 0
    for u, v in [(0, 1), (0, 2), (1, 3), (2, 3)]:
        edges.append((eid, u, v, 200.0, 1))
        eid += 1
        edges.append((eid, v, u, 200.0, 1))
        eid += 1
    nodes_path, edges_path = net_files(nodes, edges, with_speed_column=False)
    return load_network(nodes_path, edges_path, default_speed_kmh=40.0)


@pytest.fixture
def acceptance_report(capsys):
    """Print an unconditional PASS line for an acceptance criterion."""

    def report(criterion: str):
        with capsys.disabled():
            print(f"ACCEPTANCE {criterion}: PASS")

    return report
