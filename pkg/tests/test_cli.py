"""Command-line workflows: outputs, verdicts, exit codes, reproducibility."""

import json
import os
import re

import numpy as np
import pytest

from bubblescape.bubbles import ResidualRow, ResidualTable
from bubblescape.cli import GridOutput, main
from bubblescape.errors import PreconditionError
from bubblescape.landscape import constants as model_constants

FAST = ["--near-budget", "4096", "--far-shells", "16", "--replicates", "2"]
MID = ["--near-budget", "32768", "--far-shells", "24", "--replicates", "4", "--multistart", "4"]


def write_domain(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def ball3_file(tmp_path):
    return write_domain(
        tmp_path, "ball3.json", {"dimension": 3, "root": {"type": "ball", "center": [0.0, 0.0, 0.0], "radius": 1.0}}
    )


def ball4_file(tmp_path):
    return write_domain(
        tmp_path,
        "ball4.json",
        {"dimension": 4, "root": {"type": "ball", "center": [0.0, 0.0, 0.0, 0.0], "radius": 1.0}},
    )


def read_csv(path):
    comments, header, rows = [], None, []
    for line in open(path).read().splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return comments, header, rows


def snapshot(out_dir):
    blobs = {}
    for name in sorted(os.listdir(out_dir)):
        with open(os.path.join(out_dir, name), "rb") as fh:
            blobs[name] = fh.read()
    return blobs


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def test_constants_command(tmp_path):
    out = str(tmp_path / "c")
    assert main(["constants", "--dim", "4", "--out", out]) == 0
    payload = json.loads(open(os.path.join(out, "constants.json")).read())
    consts = model_constants(4)
    assert payload["dimension"] == 4
    assert payload["values"]["c1"] == pytest.approx(32.0, rel=1e-9)
    assert payload["values"]["a"] == consts.a
    assert set(payload["provenance"]) == set(payload["values"])
    assert "injected default" in payload["provenance"]["c2_nodal"]
    # rerun into the same directory: byte-identical files
    first = snapshot(out)
    assert main(["constants", "--dim", "4", "--out", out]) == 0
    assert snapshot(out) == first


def test_constants_requires_dim(tmp_path):
    assert main(["constants", "--out", str(tmp_path)]) == 2


# ---------------------------------------------------------------------------
# psi-grid
# ---------------------------------------------------------------------------


def test_psi_grid_ball_argmin_at_center(tmp_path):
    out = str(tmp_path / "g")
    rc = main(
        ["psi-grid", "--domain", ball3_file(tmp_path), "--out", out, *FAST]
        + ["--steps", "9", "9", "--lo", "-1.2", "-1.2", "--hi", "1.2", "1.2"]
    )
    assert rc == 0
    comments, header, rows = read_csv(os.path.join(out, "psi_grid.csv"))
    assert header == ["i", "j", "x0", "x1", "psi"]
    assert any("sentinel -1.0" in c for c in comments)
    assert any(c.startswith("# summary: min=") for c in comments)
    cells = {(int(r[0]), int(r[1])): float(r[4]) for r in rows}
    assert len(cells) == 81
    assert cells[(0, 0)] == -1.0  # corner lies outside the ball
    interior = {k: v for k, v in cells.items() if v != -1.0}
    assert all(v > 0.0 for v in interior.values())
    assert min(interior, key=interior.get) == (4, 4)  # the center cell
    assert interior[(4, 4)] == pytest.approx(4.0 * np.pi / 3.0, rel=1e-9)
    # reproducibility: rerun into the same directory
    first = snapshot(out)
    rc = main(
        ["psi-grid", "--domain", ball3_file(tmp_path), "--out", out, *FAST]
        + ["--steps", "9", "9", "--lo", "-1.2", "-1.2", "--hi", "1.2", "1.2"]
    )
    assert rc == 0 and snapshot(out) == first


def test_psi_grid_csv_is_plain_lf_decimal_dot(tmp_path):
    out = str(tmp_path / "g")
    main(
        ["psi-grid", "--domain", ball3_file(tmp_path), "--out", out, *FAST]
        + ["--steps", "3", "3", "--lo", "-0.4", "-0.4", "--hi", "0.4", "0.4"]
    )
    blob = open(os.path.join(out, "psi_grid.csv"), "rb").read()
    assert b"\r" not in blob
    text = blob.decode("ascii")
    data_lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    assert all(line.count(",") == 4 for line in data_lines)


def test_psi_grid_asymmetric_dumbbell_ridge(tmp_path):
    dom = write_domain(
        tmp_path,
        "dumbbell.json",
        {
            "dimension": 3,
            "root": {
                "type": "union",
                "left": {"type": "ball", "center": [-1.5, 0.0, 0.0], "radius": 1.0},
                "right": {
                    "type": "union",
                    "left": {"type": "ball", "center": [1.5, 0.0, 0.0], "radius": 0.7},
                    "right": {
                        "type": "capsule",
                        "a": [-1.5, 0.0, 0.0],
                        "b": [1.5, 0.0, 0.0],
                        "radius": 0.3,
                    },
                },
            },
        },
    )
    out = str(tmp_path / "g")
    rc = main(
        ["psi-grid", "--domain", dom, "--out", out, *FAST]
        + ["--steps", "13", "7", "--lo", "-2.7", "-1.2", "--hi", "2.1", "1.2"]
    )
    assert rc == 0
    _, _, rows = read_csv(os.path.join(out, "psi_grid.csv"))
    by_xy = {(float(r[2]), float(r[3])): float(r[4]) for r in rows}
    interior = {k: v for k, v in by_xy.items() if v != -1.0}
    # global argmin inside the larger lobe, at its center node
    argmin = min(interior, key=interior.get)
    assert argmin[0] == pytest.approx(-1.5) and argmin[1] == pytest.approx(0.0)
    # the bridge cell is a ridge: above the minima of both lobes
    big_min = min(v for (x, y), v in interior.items() if x < -0.7)
    small_min = min(v for (x, y), v in interior.items() if x > 0.9)
    bridge = min(v for (x, y), v in interior.items() if abs(x - 0.1) < 1e-9 and abs(y) < 1e-9)
    assert bridge > big_min and bridge > small_min
    assert big_min < small_min  # deeper lobe hosts the global minimum


def test_psi_grid_slice_outside_exits_2(tmp_path):
    rc = main(
        ["psi-grid", "--domain", ball3_file(tmp_path), "--out", str(tmp_path / "g"), *FAST]
        + ["--steps", "4", "4", "--lo", "5.0", "5.0", "--hi", "6.0", "6.0"]
    )
    assert rc == 2


def test_grid_output_validates_shape():
    with pytest.raises(PreconditionError):
        GridOutput(
            axis_indices=(0, 1),
            first_axis=np.linspace(0, 1, 4),
            second_axis=np.linspace(0, 1, 5),
            fixed_values=np.zeros(1),
            values=np.zeros((4, 4)),
        )


# ---------------------------------------------------------------------------
# crit
# ---------------------------------------------------------------------------


def test_crit_ball_single_minimum(tmp_path):
    out = str(tmp_path / "k")
    rc = main(["crit", "--domain", ball3_file(tmp_path), "--out", out, *MID])
    assert rc == 0
    rep = json.loads(open(os.path.join(out, "census.json")).read())
    assert rep["satisfied"] is True
    assert rep["cat_lower_bound"] == 1
    assert len(rep["points"]) == 1
    pt = rep["points"][0]
    assert pt["morse_index"] == 0 and pt["nondegenerate"] is True
    assert np.linalg.norm(pt["location"]) <= 1e-6
    # stable key order + rerun reproducibility
    first = snapshot(out)
    assert main(["crit", "--domain", ball3_file(tmp_path), "--out", out, *MID]) == 0
    assert snapshot(out) == first


def test_crit_two_balls_two_minima(tmp_path):
    dom = write_domain(
        tmp_path,
        "pair.json",
        {
            "dimension": 3,
            "root": {
                "type": "union",
                "left": {"type": "ball", "center": [0.0, 0.0, 0.0], "radius": 1.0},
                "right": {"type": "ball", "center": [4.0, 0.0, 0.0], "radius": 0.6},
            },
        },
    )
    out = str(tmp_path / "k")
    assert main(["crit", "--domain", dom, "--out", out, *MID]) == 0
    rep = json.loads(open(os.path.join(out, "census.json")).read())
    assert len(rep["points"]) == 2
    assert rep["cat_lower_bound"] == 2
    assert [p["morse_index"] for p in rep["points"]] == [0, 0]
    # report is ordered by landscape value: big lobe first
    assert rep["points"][0]["psi_value"] < rep["points"][1]["psi_value"]


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def test_predict_sub_ball_power_law(tmp_path):
    out = str(tmp_path / "p")
    rc = main(
        ["predict", "--regime", "sub", "--domain", ball3_file(tmp_path), "--out", out, *FAST]
        + ["--xi", "0", "0", "0", "--sweep-min", "1e-3", "--sweep-max", "1e-1", "--sweep-count", "5"]
    )
    assert rc == 0
    comments, header, rows = read_csv(os.path.join(out, "predict_sub.csv"))
    assert header == ["epsilon", "delta_1", "xi_1_0", "xi_1_1", "xi_1_2"]
    ratios = [float(r[1]) / float(r[0]) ** (1.0 / 3.0) for r in rows]
    for q in ratios[1:]:
        assert q == pytest.approx(ratios[0], rel=1e-12)
    for r in rows:
        assert all(float(v) == 0.0 for v in r[2:])
    blob = "\n".join(comments)
    d_star = float(re.search(r"d_star=([^;\s]+)", blob).group(1))
    assert ratios[0] == pytest.approx(d_star, rel=1e-12)


def test_predict_nodal_ball_antipodal_boundary_pair(tmp_path):
    out = str(tmp_path / "p")
    rc = main(
        ["predict", "--regime", "nodal", "--domain", ball3_file(tmp_path), "--out", out, *FAST]
        + ["--sweep-min", "1e-4", "--sweep-max", "1e-2", "--sweep-count", "3"]
    )
    assert rc == 0
    comments, header, rows = read_csv(os.path.join(out, "predict_nodal.csv"))
    assert header[:5] == ["epsilon", "delta_1", "delta_2", "tau_1", "tau_2"]
    # scale coefficients: the closed-form symmetric optimum for the unit ball
    for r in rows:
        eps = float(r[0])
        assert float(r[1]) / eps == pytest.approx(np.pi / 16.0, rel=1e-8)
        assert float(r[2]) / eps == pytest.approx(np.pi / 16.0, rel=1e-8)
        assert float(r[3]) / np.sqrt(eps) == pytest.approx((np.pi**2 / 512.0) ** 0.25, rel=1e-8)
    # the two centers stay antipodal and approach the boundary as eps -> 0
    taus = [float(r[3]) for r in rows]
    assert taus == sorted(taus)
    for r in rows:
        c1 = np.array([float(v) for v in r[5:8]])
        c2 = np.array([float(v) for v in r[8:11]])
        np.testing.assert_allclose(c1, -c2, atol=1e-14)
    last = rows[0]
    c1 = np.array([float(v) for v in last[5:8]])
    assert np.linalg.norm(c1) == pytest.approx(1.0, abs=2.0 * taus[0])
    assert "signs=(1, -1)" in comments[0]


def test_predict_hole_ball_limit_constant(tmp_path):
    out = str(tmp_path / "p")
    rc = main(
        ["predict", "--regime", "hole", "--domain", ball3_file(tmp_path), "--out", out, *FAST]
        + ["--sweep-min", "1e-4", "--sweep-max", "1e-2", "--sweep-count", "3"]
    )
    assert rc == 0
    comments, header, rows = read_csv(os.path.join(out, "predict_hole.csv"))
    assert header[0] == "rho"
    blob = "\n".join(comments)
    d0 = float(re.search(r"d0=([^;\s]+)", blob).group(1))
    assert d0 == pytest.approx(1.0, abs=1e-10)  # unit ball: b1 equals b2
    for r in rows:
        assert float(r[1]) == pytest.approx(d0 * np.sqrt(float(r[0])), rel=1e-12)


def test_predict_nodal_misaligned_normals_exits_3(tmp_path):
    lens = write_domain(
        tmp_path,
        "lens.json",
        {
            "dimension": 3,
            "root": {
                "type": "difference",
                "left": {"type": "ball", "center": [-0.6, 0.0, 0.0], "radius": 1.0},
                "right": {
                    "type": "difference",
                    "left": {"type": "ball", "center": [-0.6, 0.0, 0.0], "radius": 1.0},
                    "right": {"type": "ball", "center": [0.6, 0.0, 0.0], "radius": 1.0},
                },
            },
        },
    )
    assert main(["predict", "--regime", "nodal", "--domain", lens, "--out", str(tmp_path / "p"), *FAST]) == 3


# ---------------------------------------------------------------------------
# energy-check
# ---------------------------------------------------------------------------


def test_energy_check_sub_ball4_pass(tmp_path):
    out = str(tmp_path / "e")
    rc = main(
        ["energy-check", "--regime", "sub", "--domain", ball4_file(tmp_path), "--out", out]
        + ["--near-budget", "65536", "--replicates", "4", "--values", "0.1", "0.025"]
        + ["--xi", "0", "0", "0", "0"]
    )
    assert rc == 0
    comments, header, rows = read_csv(os.path.join(out, "energy_check_sub.csv"))
    assert header == ["epsilon", "j_eps", "residual", "std_error"]
    assert any("verdict: PASS" in c for c in comments)
    assert float(rows[0][1]) == pytest.approx(30.164380956, rel=1e-8)
    assert float(rows[1][1]) == pytest.approx(27.550537512, rel=1e-8)
    assert float(rows[0][2]) == pytest.approx(-3.038699, abs=2e-3)
    assert float(rows[1][2]) == pytest.approx(-1.350812, abs=2e-3)


def test_energy_check_increasing_values_exit_2(tmp_path):
    rc = main(
        ["energy-check", "--regime", "sub", "--domain", ball4_file(tmp_path), "--out", str(tmp_path / "e")]
        + FAST
        + ["--values", "0.025", "0.1", "--xi", "0", "0", "0", "0"]
    )
    assert rc == 2


def test_energy_check_fail_verdict_exits_1(tmp_path, monkeypatch):
    rows = [
        ResidualRow(small_parameter=0.1, j_value=1.0, j_std=0.0, residual=-1.0, residual_std=0.0),
        ResidualRow(small_parameter=0.05, j_value=1.0, j_std=0.0, residual=-2.0, residual_std=0.0),
    ]
    table = ResidualTable(regime="subcritical", rows=rows, parameters={"d": 1.0})

    monkeypatch.setattr("bubblescape.cli.expansion_residual_sub", lambda *a, **k: table)
    out = str(tmp_path / "e")
    rc = main(
        ["energy-check", "--regime", "sub", "--domain", ball4_file(tmp_path), "--out", out, *FAST]
        + ["--xi", "0", "0", "0", "0"]
    )
    assert rc == 1
    comments, _, _ = read_csv(os.path.join(out, "energy_check_sub.csv"))
    assert any("verdict: FAIL" in c for c in comments)


# ---------------------------------------------------------------------------
# morse-audit
# ---------------------------------------------------------------------------


def test_morse_audit_ball_stable(tmp_path):
    out = str(tmp_path / "m")
    rc = main(
        ["morse-audit", "--domain", ball3_file(tmp_path), "--out", out, *MID]
        + ["--rho", "0.05", "--trials", "2"]
    )
    assert rc == 0
    audit = json.loads(open(os.path.join(out, "morse_audit.json")).read())
    assert audit["stable"] is True
    assert audit["trials"] == 2
    assert audit["failures"] == []
    assert audit["min_margin"] > 1e-6
    assert audit["base"]["satisfied"] is True


# ---------------------------------------------------------------------------
# manifest + shared precondition paths
# ---------------------------------------------------------------------------


def test_manifest_records_resolved_configuration(tmp_path):
    out = str(tmp_path / "c")
    main(["constants", "--dim", "5", "--seed", "7", "--out", out, "--near-budget", "2048"])
    man = json.loads(open(os.path.join(out, "manifest.json")).read())
    assert man["command"] == "constants"
    assert man["dimension"] == 5
    assert man["seed"] == 7
    assert man["quadrature"]["near_budget"] == 2048
    assert man["quadrature"]["replicates"] == 8
    assert man["critical"]["newton_tol"] == 1e-3


def test_missing_domain_exits_2(tmp_path):
    assert main(["crit", "--out", str(tmp_path)]) == 2
    assert main(["crit", "--domain", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2


def test_dimension_mismatch_exits_2(tmp_path):
    rc = main(["crit", "--domain", ball3_file(tmp_path), "--dim", "4", "--out", str(tmp_path)])
    assert rc == 2


def test_bad_axes_exit_2(tmp_path):
    rc = main(
        ["psi-grid", "--domain", ball3_file(tmp_path), "--out", str(tmp_path), *FAST]
        + ["--axes", "0", "0"]
    )
    assert rc == 2


def test_xi_on_wrong_regime_exits_2(tmp_path):
    rc = main(
        ["predict", "--regime", "hole", "--domain", ball3_file(tmp_path), "--out", str(tmp_path), *FAST]
        + ["--xi", "0", "0", "0"]
    )
    assert rc == 2
