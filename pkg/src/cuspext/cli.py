"""Command-line front end: boundary tables, point evaluation, exponent scans, images, verification.

Exit codes: 0 success, 1 a verification check failed, 2 bad configuration or input.
"""
import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import linalg2 as la
from .analysis import (CellQuadrature, combined_M, critical_exponent_scan, dyadic_series,
                       predicted_slope, thresholds)
from .extension import Extension
from .geometry import boundary_rows
from .scenario import EXP_J_CAP, Scenario
from .squeeze import SqueezeParams

MAX_SIDE = 8192
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

K_QUANTITIES = ("Kf", "Kfinv")
D_QUANTITIES = ("Df", "Dfinv")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ serialization

def fmt(x):
    return format(float(x), ".17g")


def dumps17(obj, indent=None):
    """JSON with every float written to 17 significant digits."""
    def conv(o):
        if isinstance(o, (float, np.floating)):
            v = float(o)
            if not math.isfinite(v):
                return None
            return _Raw(fmt(v))
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, np.ndarray):
            return [conv(v) for v in o.tolist()]
        if isinstance(o, dict):
            return {str(k): conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(v) for v in o]
        return o

    text = json.dumps(conv(obj), indent=indent, sort_keys=True, default=lambda r: r.token)
    # raw tokens were emitted as quoted markers; unquote them
    return text.replace('"' + _MARK, "").replace(_MARK + '"', "")


_MARK = "@@f17@@"


class _Raw:
    def __init__(self, s):
        self.token = _MARK + s + _MARK


# ----------------------------------------------------------------- config

@dataclass
class ScenarioConfig:
    s: float = 1.5
    j0: int = 6
    construction: str = "simple"
    delta_mode: str = "exp"
    p: float = 2.0
    j_min: int = 6
    j_max: int = 14
    quantities: list = field(default_factory=list)
    q_grid: list = field(default_factory=list)
    p_grid: list = field(default_factory=list)
    out: str = "."
    cardioid: bool = False

    def validate(self):
        if not self.s > 1:
            raise ConfigError("--s must exceed 1")
        if not (self.j0 <= self.j_min <= self.j_max):
            raise ConfigError("need j0 <= jmin <= jmax")
        if self.construction not in ("simple", "squeezed"):
            raise ConfigError(f"unknown construction {self.construction!r}")
        if self.delta_mode not in ("exp", "power_log"):
            raise ConfigError(f"unknown delta mode {self.delta_mode!r}")
        if self.construction == "squeezed" and self.delta_mode == "exp" and self.j_max > EXP_J_CAP:
            raise ConfigError(f"exp-mode squeeze caps jmax at {EXP_J_CAP}")
        if self.delta_mode == "power_log" and not self.p > 1:
            raise ConfigError("power-log squeeze needs --p > 1")
        for q in self.quantities:
            if q not in K_QUANTITIES + D_QUANTITIES:
                raise ConfigError(f"unknown quantity {q!r}")
        return self

    def scenario(self):
        try:
            return Scenario(s=self.s, j0=self.j0, construction=self.construction,
                            squeeze=SqueezeParams(self.delta_mode, self.p), cardioid=self.cardioid)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    @property
    def js(self):
        return list(range(self.j_min, self.j_max + 1))


def _grid(text):
    if text is None:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"bad number list {text!r}") from e


def config_from_args(a):
    mode = {"exp": "exp", "powerlog": "power_log", "power_log": "power_log"}.get(a.delta)
    if mode is None:
        raise ConfigError(f"unknown --delta {a.delta!r}")
    jmax = a.jmax
    if jmax is None:
        jmax = 12 if (a.construction == "squeezed") else 14
    return ScenarioConfig(
        s=a.s, j0=a.j0, construction=a.construction, delta_mode=mode, p=a.p,
        j_min=a.jmin if a.jmin is not None else a.j0, j_max=jmax,
        quantities=a.quantity or [], q_grid=_grid(a.q), p_grid=_grid(a.p_exp),
        out=a.out, cardioid=getattr(a, "cardioid", False)).validate()


def _add_scenario_flags(p):
    p.add_argument("--s", type=float, default=1.5, help="cusp degree s > 1")
    p.add_argument("--j0", type=int, default=6)
    p.add_argument("--construction", choices=["simple", "squeezed"], default="simple")
    p.add_argument("--delta", default="exp", help="exp | powerlog")
    p.add_argument("--p", type=float, default=2.0, help="power-log squeeze exponent")
    p.add_argument("--jmin", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--quantity", action="append", help="Kf | Kfinv | Df | Dfinv (repeatable)")
    p.add_argument("--q", help="comma list of K exponents")
    p.add_argument("--p-exp", dest="p_exp", help="comma list of |D| exponents")
    p.add_argument("--cardioid", action="store_true")
    p.add_argument("--out", default=".")


# --------------------------------------------------------------- commands

def cmd_boundary(s, n, out):
    rows = boundary_rows(s, n)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch", "u", "x", "y"])
        for b, u, x, y in rows:
            w.writerow([b, fmt(u), fmt(x), fmt(y)])
    return len(rows)


def read_points(path):
    pts = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or (lineno == 1 and row[0].strip().lower() == "x"):
                continue
            if len(row) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: not a number: {row!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ConfigError(f"{path}:{lineno}: non-finite coordinate")
            pts.append((x, y))
    return np.array(pts, dtype=float).reshape(-1, 2)


def cmd_eval(scenario, pts, with_jacobian=True):
    E = Extension(scenario)
    out = []
    if len(pts) == 0:
        return out
    img = E(pts)
    D = E.jac(pts) if with_jacobian else None
    for k, z in enumerate(pts):
        rec = {"input": [z[0], z[1]], "region": str(E.classify_region(z)), "image": [img[k, 0], img[k, 1]]}
        if with_jacobian:
            rec["jacobian"] = D[k].tolist()
            det = float(la.det(D[k]))
            if det > 0:
                rec["K"] = float(la.distortion(D[k]))
        out.append(rec)
    return out


def cmd_exponents(cfg, log=print):
    """Dyadic series and critical scans; writes one CSV + JSON per series and a summary."""
    sc = cfg.scenario()
    quad = CellQuadrature(sc)
    os.makedirs(cfg.out, exist_ok=True)
    quantities = cfg.quantities or (["Kf", "Kfinv", "Dfinv"] if cfg.construction == "simple" else ["Df", "Kf"])
    summary = {"scenario": sc.descriptor(), "series": [], "critical": {}}
    for qn in quantities:
        grid = cfg.q_grid if qn in K_QUANTITIES else cfg.p_grid
        if not grid:
            grid = _default_grid(qn, sc)
        for e in grid:
            rep = dyadic_series(quad, qn, e, cfg.js)
            stem = os.path.join(cfg.out, f"series_{qn}_{fmt(e)}")
            with open(stem + ".csv", "w") as fh:
                fh.write(rep.to_csv())
            with open(stem + ".json", "w") as fh:
                fh.write(rep.to_json())
            log(f"{qn} e={e:g}: slope {rep.slope:+.4f} +/- {rep.slope_stderr:.4f} ({rep.verdict})")
            summary["series"].append({"quantity": qn, "exponent": e, "slope": rep.slope,
                                      "slope_stderr": rep.slope_stderr, "verdict": rep.verdict})
        br = _bracket(qn, sc)
        if br is not None:
            try:
                ce = critical_exponent_scan(quad, qn, br, cfg.js)
                summary["critical"][qn] = {"value": ce.value, "uncertainty": ce.uncertainty,
                                           "slope": ce.slope, "bracket": list(br)}
                log(f"{qn}: critical exponent {ce.value:.4f} +/- {ce.uncertainty:.4f}")
            except ValueError as e:
                summary["critical"][qn] = {"error": str(e), "bracket": list(br)}
    with open(os.path.join(cfg.out, "exponents.json"), "w") as fh:
        fh.write(dumps17(summary, indent=1))
    return summary


def _default_grid(qn, sc):
    th = thresholds(sc.degree)
    if qn == "Kf":
        c = float(th.q_Kf)
        return [max(c - 1, 0.5), c, c + 1]
    if qn == "Kfinv":
        c = float(th.q_Kfinv)
        return [c - 2, c, c + 2]
    if qn == "Dfinv":
        c = float(th.p_inv)
        return [c - 0.5, c, c + 0.5]
    return [1.0, 2.0]


def _bracket(qn, sc):
    if sc.construction == "squeezed":
        if sc.squeeze.mode == "power_log" and qn == "Kf":
            m = float(combined_M(sc.squeeze.p, sc.degree))
            return (max(0.3, m - 0.4), m + 0.4)
        return None
    th = thresholds(sc.degree)
    centre = {"Kf": th.q_Kf, "Kfinv": th.q_Kfinv, "Dfinv": th.p_inv}.get(qn)
    if centre is None:
        return None
    c = float(centre)
    w = {"Kf": 1.0, "Kfinv": 2.0, "Dfinv": 0.5}[qn]
    return (max(c - w, 0.5), c + w)


# -------------------------------------------------------------------- render

@dataclass
class ImageSpec:
    xmin: float = -2.0
    xmax: float = 2.0
    ymin: float = -2.0
    ymax: float = 2.0
    width: int = 512
    height: int = 512
    grid: int = 24

    def validate(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigError("empty viewport")
        if not (0 < self.width <= MAX_SIDE and 0 < self.height <= MAX_SIDE):
            raise ConfigError(f"image side must be in 1..{MAX_SIDE}")
        return self

    def pixel_centres(self):
        xs = self.xmin + (np.arange(self.width) + 0.5) * (self.xmax - self.xmin) / self.width
        ys = self.ymax - (np.arange(self.height) + 0.5) * (self.ymax - self.ymin) / self.height
        X, Y = np.meshgrid(xs, ys)
        return np.stack([X, Y], -1)


def ppm_bytes(rgb):
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()


def read_ppm(data):
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = map(int, parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def heatmap(E, spec):
    """Gray level proportional to log10 K, clipped to [0, 6]."""
    pts = spec.pixel_centres().reshape(-1, 2)
    K = np.empty(len(pts))
    for k in range(0, len(pts), 65536):
        D = E.jac(pts[k:k + 65536])
        K[k:k + 65536] = la.distortion(D)
    lk = np.clip(np.log10(np.maximum(K, 1.0)), 0.0, 6.0)
    g = np.rint(lk / 6.0 * 255).astype(np.uint8).reshape(spec.height, spec.width)
    return np.repeat(g[..., None], 3, -1)


def grid_warp(E, spec):
    """Images under E of the Cartesian grid over the viewport, fitted to the frame."""
    n = max(spec.width, spec.height) * 4
    lines = []
    for v in np.linspace(spec.xmin, spec.xmax, spec.grid + 1):
        lines.append(np.stack([np.full(n, v), np.linspace(spec.ymin, spec.ymax, n)], -1))
    for v in np.linspace(spec.ymin, spec.ymax, spec.grid + 1):
        lines.append(np.stack([np.linspace(spec.xmin, spec.xmax, n), np.full(n, v)], -1))
    img_pts = E(np.concatenate(lines))
    lo = img_pts.min(0)
    hi = img_pts.max(0)
    span = np.maximum(hi - lo, 1e-300) * 1.05
    mid = 0.5 * (lo + hi)
    scale = min(spec.width / span[0], spec.height / span[1])
    px = np.rint((img_pts[:, 0] - mid[0]) * scale + spec.width / 2 - 0.5).astype(int)
    py = np.rint(spec.height / 2 - 0.5 - (img_pts[:, 1] - mid[1]) * scale).astype(int)
    ok = (px >= 0) & (px < spec.width) & (py >= 0) & (py < spec.height)
    rgb = np.full((spec.height, spec.width, 3), 255, dtype=np.uint8)
    rgb[py[ok], px[ok]] = 0
    return rgb


def cmd_render(scenario, spec, mode, out):
    spec.validate()
    E = Extension(scenario)
    rgb = heatmap(E, spec) if mode == "heatmap" else grid_warp(E, spec)
    with open(out, "wb") as fh:
        fh.write(ppm_bytes(rgb))
    return rgb


# ------------------------------------------------------------------- verify

def cmd_verify(scenario, js=range(6, 11)):
    from .checks import structural_suite
    checks = structural_suite(scenario)
    quad = CellQuadrature(scenario)
    slopes = []
    if scenario.construction == "simple":
        s = scenario.degree
        th = thresholds(s)
        for qn, e in (("Kf", float(th.q_Kf)), ("Kfinv", float(th.q_Kfinv)), ("Dfinv", float(th.p_inv))):
            rep = dyadic_series(quad, qn, e, list(js))
            pred = predicted_slope(qn, e, s)
            ok = abs(rep.slope - pred) <= 0.15
            slopes.append({"check": f"slope_{qn}", "exponent": e, "value": rep.slope,
                           "stderr": rep.slope_stderr, "expected": pred, "ok": ok})
    else:
        # the squeezed map still carries each cell onto its target: |J| integrates to the area
        rep = dyadic_series(quad, "J", 1.0, list(js))
        pred = -2 * (1 + scenario.degree)
        slopes.append({"check": "slope_J", "value": rep.slope, "stderr": rep.slope_stderr,
                       "expected": pred, "ok": abs(rep.slope - pred) <= 0.15})
    allc = checks + slopes
    return {"scenario": scenario.descriptor(), "ok": all(c["ok"] for c in allc),
            "checks": allc, "failures": [c["check"] for c in allc if not c["ok"]]}


# --------------------------------------------------------------------- main

def build_parser():
    ap = argparse.ArgumentParser(prog="cuspext", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("boundary", help="write the model domain boundary as CSV")
    b.add_argument("--s", type=float, default=1.5)
    b.add_argument("--n", type=int, default=1024)
    b.add_argument("--out", default="boundary.csv")

    e = sub.add_parser("eval", help="evaluate E at points from a CSV of x,y")
    _add_scenario_flags(e)
    e.add_argument("points")
    e.add_argument("--no-jacobian", action="store_true")

    x = sub.add_parser("exponents", help="dyadic series and critical exponent scans")
    _add_scenario_flags(x)

    r = sub.add_parser("render", help="PPM grid warp or log10 K heatmap")
    _add_scenario_flags(r)
    r.add_argument("--mode", choices=["warp", "heatmap"], default="heatmap")
    r.add_argument("--viewport", default="-2,2,-2,2", help="xmin,xmax,ymin,ymax")
    r.add_argument("--size", default="512x512", help="WIDTHxHEIGHT")
    r.add_argument("--grid", type=int, default=24)
    r.add_argument("--file", default=None, help="output file (default <out>/<mode>.ppm)")

    v = sub.add_parser("verify", help="run the structural checks; exit 1 on failure")
    _add_scenario_flags(v)
    return ap


def main(argv=None):
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        if a.cmd == "boundary":
            if not a.s > 1 or a.n < 2:
                raise ConfigError("need s > 1 and n >= 2")
            try:
                k = cmd_boundary(a.s, a.n, a.out)
            except OSError as err:
                raise ConfigError(f"cannot write {a.out}: {err}") from None
            print(f"wrote {k} rows to {a.out}")
            return EXIT_OK
        cfg = config_from_args(a)
        sc = cfg.scenario()
        if a.cmd == "eval":
            pts = read_points(a.points)
            print(dumps17(cmd_eval(sc, pts, not a.no_jacobian)))
            return EXIT_OK
        if a.cmd == "exponents":
            cmd_exponents(cfg, log=lambda m: print(m, file=sys.stderr))
            return EXIT_OK
        if a.cmd == "render":
            try:
                vp = [float(v) for v in a.viewport.split(",")]
                w, h = (int(v) for v in a.size.lower().split("x"))
            except ValueError:
                raise ConfigError("bad --viewport or --size") from None
            if len(vp) != 4:
                raise ConfigError("--viewport needs four numbers")
            spec = ImageSpec(*vp, w, h, a.grid)
            os.makedirs(cfg.out, exist_ok=True)
            path = a.file or os.path.join(cfg.out, f"{a.mode}.ppm")
            cmd_render(sc, spec, a.mode, path)
            print(f"wrote {path}")
            return EXIT_OK
        if a.cmd == "verify":
            res = cmd_verify(sc, range(cfg.j_min, min(cfg.j_max, cfg.j_min + 4) + 1))
            print(dumps17(res, indent=1))
            return EXIT_OK if res["ok"] else EXIT_FAIL
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
