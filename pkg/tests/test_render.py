import os

import numpy as np

from symnoise.render import read_matrix_csv, render_heatmap, render_svg, write_filter_csv, write_matrix_csv
from symnoise.scenarios import ScenarioConfig, run_scenario

LABELS = ["q=0#0", "q=2#0", "q=2#1", "q=2#2"]
SECTORS = [(0.0, 0, 1), (2.0, 1, 4)]


def test_matrix_csv_round_trip(tmp_path, rng):
    mat = rng.random((4, 4))
    path = tmp_path / "m.csv"
    write_matrix_csv(path, mat, LABELS, SECTORS)
    back, labels, sectors = read_matrix_csv(path)
    assert np.array_equal(back, mat)
    assert labels == LABELS
    assert [tuple(s) for s in sectors] == SECTORS


def test_svg_is_deterministic(rng):
    mat = rng.random((4, 4))
    a = render_svg(mat, LABELS, SECTORS, title="x")
    b = render_svg(mat.copy(), list(LABELS), SECTORS, title="x")
    assert a == b
    assert a.startswith("<svg") or a.startswith("<?xml")
    assert render_svg(mat, LABELS, SECTORS, scale="log") != a


def test_mixed_sector_state_renders_uniform_block():
    mat = np.zeros((4, 4))
    mat[1:, 1:] = 1 / 3
    svg = render_svg(mat, LABELS, SECTORS)
    fills = [seg.split('"')[0] for seg in svg.split('fill="')[1:]]
    counts = {f: fills.count(f) for f in set(fills)}
    # the nine sector cells share one colour
    assert max(counts.values()) >= 9


def test_heatmap_and_filter_files(tmp_path):
    cfg = ScenarioConfig.from_dict(dict(tfim={"n": 2, "duration": 0.5}, trajectories=100, checkpoints=0,
                                        n_omega=200))
    report = run_scenario(cfg)
    paths = render_heatmap(report, tmp_path, "mc")
    assert sorted(paths) == ["csv", "svg"]
    assert all(os.path.exists(p) for p in paths.values())
    mat, labels, _ = read_matrix_csv(tmp_path / "rho_mc.csv")
    assert np.allclose(mat, np.abs(report.rho_mc))
    write_filter_csv(tmp_path / "ff.csv", report.filter_functions, report.basis)
    header = (tmp_path / "ff.csv").read_text().splitlines()[0]
    assert header.startswith("omega")
