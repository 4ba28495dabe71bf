import csv
import math

import numpy as np
import pytest

from ldpkatz.cli import main
from ldpkatz.exact import CentralityVector, exact_katz_iterative
from ldpkatz.graph import load_edge_list, max_eigenvalue


@pytest.fixture
def path3(tmp_path):
    p = tmp_path / "path.txt"
    p.write_text("0 1\n1 2\n")
    return p


@pytest.fixture
def k4(tmp_path):
    p = tmp_path / "k4.txt"
    p.write_text("".join(f"{u} {v}\n" for u in range(4) for v in range(u + 1, 4)))
    return p


@pytest.fixture
def er(tmp_path):
    rng = np.random.default_rng(0)
    lines = [f"{u} {v}" for u in range(40) for v in range(u + 1, 40) if rng.random() < 0.15]
    p = tmp_path / "er.txt"
    p.write_text("\n".join(lines) + "\n")
    return p


def read_values(path):
    return CentralityVector.from_csv(path).values


def test_inspect(path3, capsys):
    assert main(["inspect", "--graph", str(path3)]) == 0
    out = dict(line.split(": ") for line in capsys.readouterr().out.splitlines())
    assert out["n"] == "3" and out["m"] == "2" and out["max_degree"] == "2"
    assert float(out["lambda_max"]) == pytest.approx(math.sqrt(2), abs=1e-6)


def test_inspect_warns_on_one_way_edges(tmp_path, capsys):
    p = tmp_path / "d.txt"
    p.write_text("0 1\n1 0\n1 2\n")
    assert main(["inspect", "--graph", str(p)]) == 0
    assert "symmetrized 1" in capsys.readouterr().err


def test_exact_isolated_node(tmp_path):
    p = tmp_path / "loop.txt"
    p.write_text("0 0\n")
    assert main(["exact", "--graph", str(p), "--alpha", "0.5", "--out", str(tmp_path / "o")]) == 0
    assert read_values(tmp_path / "o" / "katz.csv").tolist() == [0.0]


def test_exact_single_edge(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("0 1\n")
    assert main(["exact", "--graph", str(p), "--alpha", "0.5", "--solve", "--out", str(tmp_path / "o")]) == 0
    np.testing.assert_allclose(read_values(tmp_path / "o" / "katz.csv"), [1.0, 1.0])


def test_exact_solve_agrees_with_iteration(k4, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["exact", "--graph", str(k4), "--alpha", "0.2", "--solve", "--out", str(a)]) == 0
    assert main(["exact", "--graph", str(k4), "--alpha", "0.2", "--out", str(b)]) == 0
    np.testing.assert_allclose(read_values(a / "katz.csv"), 0.6 / 0.4, rtol=1e-12)
    np.testing.assert_allclose(read_values(b / "katz.csv"), read_values(a / "katz.csv"), rtol=1e-9)


def test_estimate_noise_free_equals_exact(er, tmp_path):
    out = tmp_path / "run"
    assert main(["estimate", "--graph", str(er), "--noise-free", "--no-clip", "--steps", "6", "--out", str(out)]) == 0
    g = load_edge_list(er)
    alpha = 0.85 / max_eigenvalue(g)
    want = exact_katz_iterative(g, alpha, 6).values
    assert np.array_equal(read_values(out / "katz_estimate.csv"), want)


def test_estimate_same_seed_is_byte_identical(er, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d, seed in ((a, "3"), (b, "3"), (c, "4")):
        assert main(["estimate", "--graph", str(er), "--seed", seed, "--out", str(d)]) == 0
    assert (a / "katz_estimate.csv").read_bytes() == (b / "katz_estimate.csv").read_bytes()
    assert (a / "katz_estimate.csv").read_bytes() != (c / "katz_estimate.csv").read_bytes()


def test_manifest_replay(er, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["estimate", "--graph", str(er), "--seed", "9", "--epsilon", "2", "--steps", "3", "--out", str(a)]) == 0
    manifest = (a / "manifest.txt").read_text()
    assert "graph_sha256=" in manifest and "command=estimate" in manifest
    assert main(["estimate", "--config", str(a / "manifest.txt"), "--out", str(b)]) == 0
    assert (a / "katz_estimate.csv").read_bytes() == (b / "katz_estimate.csv").read_bytes()
    # flags beat the config file
    c = tmp_path / "c"
    assert main(["estimate", "--config", str(a / "manifest.txt"), "--seed", "10", "--out", str(c)]) == 0
    assert (a / "katz_estimate.csv").read_bytes() != (c / "katz_estimate.csv").read_bytes()


def test_exit_codes(tmp_path, er):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\nx y\n")
    assert main(["inspect", "--graph", str(bad)]) == 2
    assert main(["inspect", "--graph", str(tmp_path / "missing.txt")]) == 2
    k3 = tmp_path / "k3.txt"
    k3.write_text("0 1\n1 2\n0 2\n")
    assert main(["exact", "--graph", str(k3), "--alpha", "0.5", "--solve", "--out", str(tmp_path / "o")]) == 3
    with pytest.raises(SystemExit) as info:
        main(["estimate", "--bogus"])
    assert info.value.code == 2
    k50 = tmp_path / "k50.txt"
    k50.write_text("".join(f"{u} {v}\n" for u in range(50) for v in range(u + 1, 50)))
    code = main(["estimate", "--graph", str(k50), "--alpha", "10", "--no-clip", "--steps", "400",
                 "--out", str(tmp_path / "div")])
    assert code == 4
    assert (tmp_path / "div" / "config.txt").read_text().endswith("diverged=True\n")


def test_sweep_rows(er, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--graph", str(er), "--sweep-steps", "1..3", "--trials", "5", "--topk", "5,10",
                 "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    # 3 points x 2 variants x (5 scalar + 2 recall + 2 ci) metrics
    assert len(rows) == 3 * 2 * 9
    assert {r["variant"] for r in rows} == {"clipped", "unclipped"}


def test_sweep_clip_multiples(er, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep", "--graph", str(er), "--sweep-clip", "0.5..2:3", "--trials", "3", "--topk", "5",
                 "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        values = sorted({float(r["sweep_value"]) for r in csv.DictReader(fh)})
    lam = max_eigenvalue(load_edge_list(er))
    np.testing.assert_allclose(values, [0.5 * lam, lam, 2 * lam], rtol=1e-12)


def test_sweep_refuses_noise_free(er, tmp_path):
    assert main(["sweep", "--graph", str(er), "--sweep-steps", "1..2", "--noise-free", "--out", str(tmp_path)]) == 3


def test_bounds(capsys, tmp_path):
    assert main(["bounds", "--max-degree", "100", "--clip", "10", "--high-degree-count", "2",
                 "--alpha", "0.01", "--steps", "5", "--epsilon", "1", "--step", "2", "--out", str(tmp_path)]) == 0
    out = dict(line.split(": ") for line in capsys.readouterr().out.splitlines())
    assert float(out["path_bias_bound"]) == pytest.approx(2 * (1 + 5**0.5) / 2 * 10 * 100 * 5)
    assert out["alpha_lt_inv_phi_x"] == "True"
    assert (tmp_path / "bounds.csv").exists()
    assert main(["bounds", "--clip", "10"]) == 2
