import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from resist.cli import build_parser, main, parse_grid, resolve
from resist.errors import ConfigError


def _manifest_ok(out):
    man = json.loads((out / "manifest.json").read_text())
    for entry in man["files"]:
        data = (out / entry["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    return man


def test_parse_grid():
    assert np.allclose(parse_grid("0:0.25:1"), [0, 0.25, 0.5, 0.75, 1])
    assert parse_grid("0:0.1:1")[-1] == 1.0 and len(parse_grid("0:0.1:1")) == 11
    assert np.array_equal(parse_grid("0.5"), [0.5])
    for bad in ("1:0.1:0", "0:0:1", "a:b:c", "0:1"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_stretch_writes_hashed_artifacts(tmp_path):
    out = tmp_path / "a"
    assert main(["stretch", "--out", str(out), "--s", "0:0.25:1", "--frames"]) == 0
    man = _manifest_ok(out)
    names = {e["file"] for e in man["files"]}
    assert {"family.csv", "result.json", "frames/frame_0000.off"} <= names
    res = json.loads((out / "result.json").read_text())
    assert res["max_residual"] <= 1e-9
    assert man["settings"]["s"] == "0:0.25:1" and man["settings"]["seed"] == 0


def test_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["stretch", "--out", str(out), "--body", "tetra", "--apex", "0.2,0.1,2.5"]) == 0
    assert (a / "family.csv").read_bytes() == (b / "family.csv").read_bytes()
    assert (a / "manifest.json").read_text().replace(str(a), "") == (b / "manifest.json").read_text().replace(str(b), "")


def test_verify_suite(tmp_path):
    assert main(["verify", "--suite", "appendix", "--out", str(tmp_path), "--seed", "3"]) == 0
    text = (tmp_path / "suite_appendix.csv").read_text()
    assert text.splitlines()[0] == "instance,check,value,threshold,ok"
    _manifest_ok(tmp_path)


def test_solve_radial_command(tmp_path):
    assert main(["solve-radial", "--N", "200", "--rings", "20", "--out", str(tmp_path), "--check"]) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["P5"]["boundary_max"] <= 1e-9 and res["P4"]["ok"]
    assert (tmp_path / "profile.csv").read_text().startswith("r,phi")


def test_solve_2d_command(tmp_path):
    argv = ["solve-2d", "--omega", "disc:1:12", "--rings", "4", "--seeds", "1", "--iters", "2", "--N", "100"]
    assert main(argv + ["--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "result.json").read_text())
    assert res["objective"] <= res["radial_objective"]
    assert (tmp_path / "field.off").exists() and (tmp_path / "field.json").exists()
    _manifest_ok(tmp_path)


def test_probe_default_cap(tmp_path):
    assert main(["probe", "--out", str(tmp_path), "--rings", "12"]) == 0
    rep = json.loads((tmp_path / "probe.json").read_text())
    assert rep["verdict"] == "certified-nonoptimal" and max(rep["Q"]) < 0


def test_probe_reads_saved_field(tmp_path):
    from resist.newton.field import HeightField, regular_polygon, sector_mesh

    m = sector_mesh(regular_polygon(1, 32), 12)
    HeightField(m, 2.0, 1 - 0.5 * (m.points**2).sum(axis=1)).save(tmp_path / "cap.off")
    assert main(["probe", "--field", str(tmp_path / "cap.off"), "--out", str(tmp_path / "p")]) == 0
    rep = json.loads((tmp_path / "p" / "probe.json").read_text())
    assert np.allclose(rep["hess_u"], -np.eye(2), atol=1e-9)
    # a point on the rim is refused
    assert main(["probe", "--field", str(tmp_path / "cap.off"), "--x0", "0.95,0", "--out", str(tmp_path / "q")]) == 2


def test_failed_check_exits_one(tmp_path):
    argv = ["stretch", "--out", str(tmp_path), "--tol", "closure=1e-300"]
    assert main(argv) == 0  # a miss is only reported
    assert main(argv + ["--check"]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["stretch", "--s", "1:0.1:0"],
        ["stretch", "--s", "0:0.5:2"],
        ["stretch", "--law", "no-such-law"],
        ["stretch", "--body", "missing.off"],
        ["stretch", "--apex", "1,2"],
        ["stretch", "--tol", "nonsense=1"],
        ["stretch", "--tol", "plane"],
        ["solve-radial", "--M", "-1"],
        ["solve-2d", "--omega", "blob"],
    ],
)
def test_bad_input_exits_two(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == 2


def test_argparse_errors_exit_two(capsys):
    assert main(["no-such-command"]) == 2
    assert main(["stretch", "--frames=3"]) == 2
    assert main(["--help"]) == 0
    capsys.readouterr()


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"s": "0:0.5:1", "seed": 4, "law": "area"}))
    p = build_parser()
    st = resolve(p.parse_args(["stretch", "--config", str(cfg)]), environ={})
    assert st["s"] == "0:0.5:1" and st["seed"] == 4 and st["law"] == "area" and st["body"] == "cube"
    st = resolve(p.parse_args(["stretch", "--config", str(cfg), "--s", "0:1:1", "--seed", "9"]), environ={"RESIST_SEED": "5"})
    assert st["s"] == "0:1:1" and st["seed"] == 9


def test_seed_from_environment():
    p = build_parser()
    assert resolve(p.parse_args(["verify"]), environ={"RESIST_SEED": "5"})["seed"] == 5
    assert resolve(p.parse_args(["verify"]), environ={})["seed"] == 0
    with pytest.raises(ConfigError):
        resolve(p.parse_args(["verify"]), environ={"RESIST_SEED": "x"})


def test_config_errors(tmp_path):
    p = build_parser()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"frobnicate": 1}))
    with pytest.raises(ConfigError):
        resolve(p.parse_args(["stretch", "--config", str(bad)]), environ={})
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"command": "verify"}))
    with pytest.raises(ConfigError):
        resolve(p.parse_args(["stretch", "--config", str(other)]), environ={})
    assert main(["stretch", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["stretch", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2


def test_tolerance_overrides_recorded(tmp_path):
    assert main(["stretch", "--tol", "plane=1e-8", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["settings"]["tol"] == {"plane": 1e-8}


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "resist.cli", "stretch", "--out", str(tmp_path), "--s", "0:0.5:1"],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0 and "slope" in r.stdout
