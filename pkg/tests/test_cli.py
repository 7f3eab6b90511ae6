import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuspext import Scenario, Where, in_Ms
from cuspext import profiles
from cuspext.checks import boundary_compatibility
from cuspext.cli import (MAX_SIDE, ConfigError, ImageSpec, cmd_eval, cmd_render, cmd_verify, dumps17,
                         fmt, main, ppm_bytes, read_ppm, read_points)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_boundary_csv(tmp_path, capsys):
    path = tmp_path / "b.csv"
    code, out, _ = run(capsys, "boundary", "--s", 1.5, "--n", 257, "--out", path)
    assert code == 0 and "rows" in out
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"branch", "u", "x", "y"}
    up = [r for r in rows if r["branch"] == "upper"]
    lo = [r for r in rows if r["branch"] == "lower"]
    assert len(up) == len(lo) == 257
    for a, b in zip(up, lo):
        assert a["x"] == b["x"] and float(a["y"]) == -float(b["y"])
    xy = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    assert xy[:, 0].min() >= -1 - 1e-12
    # 17 significant digits survive the round trip
    assert all(float(fmt(float(r["x"]))) == float(r["x"]) for r in rows)
    assert np.all(in_Ms(1.5, xy[[r["branch"] != "arc" for r in rows]]) == Where.BOUNDARY)


def test_boundary_rejects_bad_args(tmp_path, capsys):
    assert run(capsys, "boundary", "--s", 1.0, "--out", tmp_path / "x.csv")[0] == 2
    assert run(capsys, "boundary", "--out", tmp_path / "no" / "such" / "x.csv")[0] == 2


def test_eval(tmp_path, capsys):
    p = tmp_path / "pts.csv"
    p.write_text("x,y\n0.5,0\n20,0\n-0.02,0.001\n0,0\n")
    code, out, _ = run(capsys, "eval", p)
    assert code == 0
    recs = json.loads(out)
    assert [r["region"] for r in recs][:2] == ["Ms_closure", "Omega2"]
    assert recs[0]["image"] == [0.25, 0.0]
    for r in recs:
        det = np.linalg.det(np.array(r["jacobian"]))
        assert ("K" in r) == (det > 0)
        if "K" in r:
            assert r["K"] >= 1
    code, out, _ = run(capsys, "eval", p, "--no-jacobian")
    assert "jacobian" not in json.loads(out)[0]


@pytest.mark.parametrize("text,lineno", [("x,y\n1,2\n3\n", 3), ("1,2\n1,abc\n", 2), ("1,nan\n", 1),
                                         ("1,2,3\n", 1)])
def test_eval_bad_rows(tmp_path, capsys, text, lineno):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ConfigError, match=f":{lineno}:"):
        read_points(p)
    code, _, err = run(capsys, "eval", p)
    assert code == 2 and f":{lineno}:" in err


def test_eval_empty(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("x,y\n")
    assert cmd_eval(Scenario(), read_points(p)) == []


def test_config_errors(tmp_path, capsys):
    p = tmp_path / "pts.csv"
    p.write_text("0,0\n")
    assert run(capsys, "eval", p, "--s", 0.9)[0] == 2
    assert run(capsys, "eval", p, "--delta", "cubic")[0] == 2
    assert run(capsys, "eval", p, "--jmin", 3)[0] == 2
    assert run(capsys, "exponents", "--construction", "squeezed", "--jmax", 15, "--out", tmp_path)[0] == 2
    assert run(capsys, "exponents", "--quantity", "Kq", "--out", tmp_path)[0] == 2
    assert run(capsys, "exponents", "--q", "1,x", "--out", tmp_path)[0] == 2


def test_exponents_outputs(tmp_path, capsys):
    code, _, err = run(capsys, "exponents", "--quantity", "Kf", "--q", "1,3", "--jmax", 10, "--out", tmp_path)
    assert code == 0 and "critical exponent" in err
    summary = json.loads((tmp_path / "exponents.json").read_text())
    assert [s["exponent"] for s in summary["series"]] == [1.0, 3.0]
    assert summary["critical"]["Kf"]["value"] == pytest.approx(2.0, abs=0.1)
    head = (tmp_path / "series_Kf_1.csv").read_text().splitlines()
    assert head[0] == "j,integral,log2_ratio" and len(head) == 6
    rep = json.loads((tmp_path / "series_Kf_3.json").read_text())
    assert rep["verdict"] == "diverges" and rep["slope"] == pytest.approx(1.0, abs=0.15)


def test_ppm_round_trip(rng):
    rgb = rng.integers(0, 256, (7, 5, 3), dtype=np.uint8)
    data = ppm_bytes(rgb)
    assert data.startswith(b"P6\n5 7\n255\n")
    assert np.array_equal(read_ppm(data), rgb)


def test_heatmap(tmp_path, capsys):
    path = tmp_path / "h.ppm"
    code, _, _ = run(capsys, "render", "--mode", "heatmap", "--size", "96x64", "--viewport=-1,1,-1,1",
                     "--file", path)
    assert code == 0
    img = read_ppm(path.read_bytes())
    assert img.shape == (64, 96, 3)
    spec = ImageSpec(-1, 1, -1, 1, 96, 64)
    pts = spec.pixel_centres().reshape(-1, 2)
    g = img[..., 0].reshape(-1)
    inside = in_Ms(1.5, pts, "radial") == Where.INSIDE
    # z^2 is conformal, so all of M_s is one gray level
    assert len(np.unique(g[inside])) == 1 and g[inside][0] == 0
    # along the negative axis toward the cusp the distortion grows
    row = img[32, :48, 0].astype(int)
    tail = row[row > 0]
    assert len(tail) > 3 and tail[-1] >= tail[0]


def test_warp(tmp_path):
    rgb = cmd_render(Scenario(), ImageSpec(width=80, height=60, grid=8), "warp", tmp_path / "w.ppm")
    assert rgb.shape == (60, 80, 3) and (rgb == 0).any() and (rgb == 255).any()


def test_render_size_limits(tmp_path, capsys):
    assert run(capsys, "render", "--size", f"{MAX_SIDE + 1}x10", "--out", tmp_path)[0] == 2
    assert run(capsys, "render", "--size", "0x10", "--out", tmp_path)[0] == 2
    assert run(capsys, "render", "--viewport=1,0,0,1", "--out", tmp_path)[0] == 2
    assert run(capsys, "render", "--viewport=1,2,3", "--out", tmp_path)[0] == 2


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify", "--jmax", 10)
    res = json.loads(out)
    assert code == 0 and res["ok"] and res["failures"] == []
    slopes = [c for c in res["checks"] if c["check"].startswith("slope_")]
    assert len(slopes) == 3 and all("stderr" in c for c in slopes)


def test_verify_squeezed():
    res = cmd_verify(Scenario(1.5, 6, "squeezed"), range(6, 10))
    assert res["ok"], res["failures"]


def test_tampered_eta_is_caught(monkeypatch):
    assert boundary_compatibility(Scenario(1.5, 6))["ok"]
    orig = profiles.PowerProfile.eta

    def bad_eta(self, U):
        return orig(self, U) * (1 + 1e-3 * np.asarray(U) ** 0.25)

    monkeypatch.setattr(profiles.PowerProfile, "eta", bad_eta)
    r = boundary_compatibility(Scenario(1.5, 6))
    assert not r["ok"] and r["value"] > 1e-6


def test_huge_integrals_serialise(tmp_path, capsys):
    code, _, _ = run(capsys, "exponents", "--construction", "squeezed", "--quantity", "Df", "--p-exp", "2",
                     "--jmin", 12, "--jmax", 13, "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "series_Df_2.csv").read_text().splitlines()[1:]
    assert rows[-1].split(",")[1] == "inf"
    rep = json.loads((tmp_path / "series_Df_2.json").read_text())
    assert rep["log2_integral"][-1] > 1024


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_dumps17_round_trip(x):
    d = json.loads(dumps17({"v": x, "a": np.array([x, 1.0])}))
    assert d["v"] == x and d["a"][0] == x


def test_dumps17_non_finite():
    assert json.loads(dumps17({"v": math.inf, "w": np.float64(0.1), "n": np.int64(3)})) == \
        {"v": None, "w": 0.1, "n": 3}
