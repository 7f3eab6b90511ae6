"""End-to-end acceptance: one test per criterion, each printing a single PASS/FAIL line."""
import time
from fractions import Fraction

import numpy as np
import sympy as sp

from cuspext import CardioidMap, Scenario
from cuspext.analysis import (CellQuadrature, critical_exponent_scan, dyadic_series, predicted_slope,
                              q_combined, thresholds)
from cuspext.checks import global_continuity, structural_suite
from cuspext.cli import _bracket
from cuspext.squeeze import SqueezeParams
from cuspext.testfns import annulus_scaling, oscillation_check, strip_scaling

SIMPLE_JS = range(6, 15)
SQUEEZED_JS = range(6, 13)


def _slopes(quad, qn, exps, js):
    return {e: dyadic_series(quad, qn, e, js) for e in exps}


def _fmt_slopes(reps):
    return ", ".join(f"{e:g}:{r.slope:+.3f}" for e, r in reps.items())


def test_criterion_1_thresholds(acceptance):
    S, P = sp.symbols("s p", positive=True)
    forms = {
        "q_Kf": sp.Max(1 / (S - 1), 1),
        "p_inv": 2 * (S + 1) / (2 * S - 1),
        "q_Kfinv": (S + 1) / (S - 1),
        "q_comb": sp.Max(1 / (S - 1), 3 * P / ((2 * S - 1) * P + 4 - 2 * S)),
    }
    ok = True
    th = thresholds(Fraction(3, 2))
    ok &= (th.q_Kf, th.p_inv, th.q_Kfinv) == (2, Fraction(5, 2), 5)
    ok &= all(isinstance(v, Fraction) for v in (th.q_Kf, th.p_inv, th.q_Kfinv))
    for s in (Fraction(5, 4), Fraction(3, 2), Fraction(2), Fraction(3)):
        th = thresholds(s)
        sub = {S: sp.Rational(s.numerator, s.denominator)}
        got = {"q_Kf": th.q_Kf, "p_inv": th.p_inv, "q_Kfinv": th.q_Kfinv}
        for k, v in got.items():
            ok &= sp.simplify(forms[k].subs(sub) - sp.Rational(v.numerator, v.denominator)) == 0
        for p in (Fraction(3, 2), Fraction(2), Fraction(4)):
            v = q_combined(p, s)
            ok &= sp.simplify(forms["q_comb"].subs({**sub, P: sp.Rational(p.numerator, p.denominator)})
                              - sp.Rational(v.numerator, v.denominator)) == 0
    assert acceptance(1, ok, "thresholds(3/2) = (2, 5/2, 5); four closed forms match for s in {5/4, 3/2, 2, 3}")


def test_criterion_2_forward_distortion(acceptance):
    t0 = time.perf_counter()
    quad = CellQuadrature(Scenario(1.5, 6))
    reps = _slopes(quad, "Kf", (1.0, 2.0, 3.0), SIMPLE_JS)
    ok = all(abs(r.slope - (e - 2)) <= 0.15 and r.converged for e, r in reps.items())
    dt = time.perf_counter() - t0
    ok &= dt < 120
    assert acceptance(2, ok, f"Kf slopes {_fmt_slopes(reps)} (want -1, 0, +1 +/- 0.15); {dt:.1f}s")


def test_criterion_3_inverse_distortion(acceptance):
    t0 = time.perf_counter()
    quad = CellQuadrature(Scenario(1.5, 6))
    reps = _slopes(quad, "Kfinv", (3.0, 5.0, 7.0), SIMPLE_JS)
    ok = all(abs(r.slope - (e - 5)) <= 0.15 and r.converged for e, r in reps.items())
    dt = time.perf_counter() - t0
    ok &= dt < 120
    assert acceptance(3, ok, f"Kfinv slopes {_fmt_slopes(reps)} (want -2, 0, +2 +/- 0.15); {dt:.1f}s")


def _inverse_sobolev_and_criticals(sc):
    quad = CellQuadrature(sc)
    reps = _slopes(quad, "Dfinv", (2.0, 2.5, 3.0), SIMPLE_JS)
    ok = all(abs(r.slope - predicted_slope("Dfinv", e, 1.5)) <= 0.15 and r.converged for e, r in reps.items())
    crit = {qn: critical_exponent_scan(quad, qn, _bracket(qn, sc), SIMPLE_JS).value
            for qn in ("Kf", "Kfinv", "Dfinv")}
    want = {"Kf": (2.0, 0.1), "Kfinv": (5.0, 0.25), "Dfinv": (2.5, 0.1)}
    ok &= all(abs(crit[k] - c) <= tol for k, (c, tol) in want.items())
    return ok, reps, crit


def test_criterion_4_inverse_sobolev(acceptance):
    t0 = time.perf_counter()
    ok, reps, crit = _inverse_sobolev_and_criticals(Scenario(1.5, 6))
    dt = time.perf_counter() - t0
    crit_s = ", ".join(f"{k} {v:.3f}" for k, v in crit.items())
    assert acceptance(4, ok, f"Dfinv slopes {_fmt_slopes(reps)} (want -1, 0, +1); criticals {crit_s}; {dt:.1f}s")


def test_criterion_5_squeezed(acceptance):
    t0 = time.perf_counter()
    quad = CellQuadrature(Scenario(1.5, 6, "squeezed"))
    df = dyadic_series(quad, "Df", 1.0, SQUEEZED_JS)
    k = dyadic_series(quad, "Kf", 0.9, SQUEEZED_JS)
    ps = k.log2_partial_sums()
    last_rel = 2.0 ** (k.log2_integral[-1] - ps[-1])
    dt = time.perf_counter() - t0
    ok = abs(df.slope + 3) <= 0.2 and df.converged and k.converged and last_rel < 1e-3 and dt < 300
    assert acceptance(5, ok, f"|DF| slope {df.slope:+.3f} (want -3 +/- 0.2); K^0.9 last/partial {last_rel:.2e}; "
                             f"{dt:.1f}s")


def test_criterion_6_power_log(acceptance):
    t0 = time.perf_counter()
    sc = Scenario(3.0, 6, "squeezed", SqueezeParams("power_log", 2.0))
    quad = CellQuadrature(sc)
    d2 = dyadic_series(quad, "Df", 2.0, SQUEEZED_JS)
    js = np.asarray(d2.j)
    ratio = 2.0 ** np.diff(d2.log2_integral)
    # terms decay like j^-p: consecutive ratios follow (j / (j + 1))^p
    trend = np.max(np.abs(ratio / (js[:-1] / js[1:]) ** 2 - 1))
    # tail of sum_{k > J} C k^-2 is below C / (J - 1): bounded partial sums
    last = 2.0 ** d2.log2_integral[-1]
    tail = last * js[-1] ** 2 / (js[-1] - 1)
    total = 2.0 ** d2.log2_partial_sums()[-1]
    bounded = d2.converged and trend < 1e-3 and tail < total
    ce = critical_exponent_scan(quad, "Kf", _bracket("Kf", sc), SQUEEZED_JS)
    dt = time.perf_counter() - t0
    ok = bounded and abs(ce.value - 0.75) <= 0.1
    assert acceptance(6, ok, f"|DE|^2 ratio vs (j/(j+1))^2 max dev {trend:.1e}, tail/total {tail / total:.2f}; "
                             f"combined critical {ce.value:.3f} (want 0.75 +/- 0.1); {dt:.1f}s")


def test_criterion_7_structural(acceptance):
    t0 = time.perf_counter()
    res = structural_suite(Scenario())
    dt = time.perf_counter() - t0
    ok = all(r["ok"] for r in res) and dt < 180
    detail = ", ".join(f"{r['check']} {r['value']:.1e}" for r in res)
    assert acceptance(7, ok, f"{detail}; {dt:.1f}s")


def test_criterion_8_lemma_scalings(acceptance):
    strip = {s: strip_scaling(s, range(6, 15)).exponent for s in (1.5, 2.0)}
    ann = annulus_scaling(1.5, range(6, 11))
    osc = oscillation_check(Scenario(1.5, 6), range(6, 13))
    ok = (all(abs(v - 2 * (s - 1)) <= 0.1 for s, v in strip.items())
          and ann.extra["max_over_min"] <= 2 and osc.extra["max_over_min"] <= 4)
    assert acceptance(8, ok, f"strip exponents {strip[1.5]:.3f}, {strip[2.0]:.3f} (want 1, 2); annulus max/min "
                             f"{ann.extra['max_over_min']:.3f}; oscillation max/min {osc.extra['max_over_min']:.3f}")


def test_criterion_9_cardioid(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    r = np.sqrt(rng.uniform(0, 1, 1000)) * (1 - 1e-12)
    a = rng.uniform(0, 2 * np.pi, 1000)
    z = np.stack([r * np.cos(a), r * np.sin(a)], -1)
    w = (z[:, 0] + 1 + 1j * z[:, 1]) ** 2
    err = np.max(np.hypot(*(CardioidMap()(z) - np.stack([w.real, w.imag], -1)).T))
    sc = Scenario(cardioid=True)
    cont = global_continuity(sc)["value"]
    quad = CellQuadrature(sc)
    k = _slopes(quad, "Kf", (1.0, 2.0, 3.0), SIMPLE_JS)
    ki = _slopes(quad, "Kfinv", (3.0, 5.0, 7.0), SIMPLE_JS)
    ok_slopes = (all(abs(r.slope - (e - 2)) <= 0.15 for e, r in k.items())
                 and all(abs(r.slope - (e - 5)) <= 0.15 for e, r in ki.items()))
    ok_inv, reps, crit = _inverse_sobolev_and_criticals(sc)
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and cont <= 1e-8 and ok_slopes and ok_inv
    crit_s = ", ".join(f"{k_} {v:.3f}" for k_, v in crit.items())
    assert acceptance(9, ok, f"|f0 - (z+1)^2| {err:.1e}; jump {cont:.1e}; criticals {crit_s}; {dt:.1f}s")
