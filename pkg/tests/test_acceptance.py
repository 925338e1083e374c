"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are printed even
under output capture) or directly with ``python tests/test_acceptance.py``.
"""
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import shift_pair_eps, sin_squared_pair, symmetric_pair, sign_changing_pair  # noqa: E402
from oracles import direct_zeros  # noqa: E402
from fdeosc.cli import main, run  # noqa: E402
from fdeosc.config import load_config  # noqa: E402
from fdeosc.odeosc import ComparisonODE, StepPolicy, prufer_advance  # noqa: E402
from fdeosc.problem import build_problem  # noqa: E402
from fdeosc.report import strip_timestamp  # noqa: E402
from fdeosc.riccati import RiccatiProblem, compare_riccati, solve_riccati  # noqa: E402
from fdeosc.solvability import picard_solve, theorem_2_1_check  # noqa: E402

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# pinned tolerances
RUNTIME_BUDGET_S = 60.0
EULER_BOUND = 0.25
RESIDUAL_TOL = 1e-5
ORDERING_TOL = 1e-6
BLOWUP_TOL = 1e-4
COSH_TOL = 1e-6
SPACING_RTOL = 1e-6
FITE_ZEROS, FITE_SLACK = 12, 1

RICCATI_INSTANCES = 200
PRUFER_INSTANCES = 50
SEED = 20240611


def _line(number: int, title: str, ok: bool, detail: str) -> str:
    return f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})"


@pytest.fixture
def record(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print("\n" + _line(number, title, ok, detail))
        assert ok, detail
    return emit


def _run(name: str, command: str | None = None, **updates):
    cfg = load_config(CONFIGS / name)
    if command:
        cfg = cfg.model_copy(update={"command": command})
    for section, values in updates.items():
        cfg = cfg.model_copy(update={section: getattr(cfg, section).model_copy(update=values)})
    return run(cfg, str(CONFIGS / name))


def _conclusions(report):
    return [v["conclusion"] for v in report["verdicts"]]


# --- 1 ---------------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    outcomes = {
        "shift pair T2_2": _conclusions(_run("shift_pair_eps.toml", criteria={"theorem": "T2_2"})),
        "sin^2 pair T2_4": _conclusions(_run("sin_squared_pair.toml", criteria={"theorem": "T2_4"})),
        "symmetric pair T2_5": _conclusions(_run("symmetric_pair.toml", criteria={"theorem": "T2_5"})),
    }
    for lam in (0.1, 1.0, 10.0):
        rep = _run("loglog_delay.toml", problem={"params": {"lambda": lam}}, criteria={"theorem": "T2_4"})
        outcomes[f"loglog delay lambda={lam:g} T2_4"] = _conclusions(rep)
    scan = _run("sign_changing_scan.toml")
    outcomes["sign-changing scan m=1..3"] = _conclusions(scan)
    windows = scan["verdicts"][0]["parameters"]["windows"]
    elapsed = time.perf_counter() - start
    bad = [k for k, v in outcomes.items() if v != ["OscillatoryByCriterion"]]
    ok = not bad and len(windows) == 3 and all(w["inside_window"] for w in windows) and elapsed < RUNTIME_BUDGET_S
    return ok, f"{len(outcomes) - len(bad)}/{len(outcomes)} oscillatory, {elapsed:.1f} s < {RUNTIME_BUDGET_S:g} s" + (
        f"; failing {bad}" if bad else "")


def test_criterion_1_examples(record):
    record(1, "example reproduction", *criterion_1())


# --- 2 ---------------------------------------------------------------------


def _loglog_mixed_t2q(t, t1, lam=1.0):
    # hand-derived: unit weight, P(t) = t, ratio clamped to [0, 1]
    ratio = np.clip((np.log(t) - t1) / (t - t1), 0.0, 1.0)
    return t * t * lam / (t * np.log(t) * np.log(np.log(t))) * ratio


def criterion_2():
    rep = _run("loglog_delay.toml", criteria={"theorem": "T2_5"})
    v = rep["verdicts"][0]
    ok = v["conclusion"] == "CriterionNotApplicable"
    worst = 0.0
    for sub, t1 in zip(v["sub_verdicts"], v["parameters"]["t1_samples"]):
        ok &= sub["kind"] == "NonOscillatory" and sub["test"] == "EulerComparison"
        lo, hi = sub["evidence"]["verified_window"]
        ok &= sub["evidence"]["max_t2Q"] <= EULER_BOUND
        tt = np.geomspace(lo, hi, 20001)
        direct = float(_loglog_mixed_t2q(tt, t1).max())
        worst = max(worst, direct)
        ok &= direct <= EULER_BOUND
    return bool(ok), f"{v['conclusion']}; direct max t^2 Q = {worst:.4f} <= {EULER_BOUND}"


def test_criterion_2_negative_control(record):
    record(2, "negative control via the Euler bound", *criterion_2())


# --- 3 ---------------------------------------------------------------------


def criterion_3():
    cases = {"shift pair": (shift_pair_eps(0.01), 3.0), "sin^2 pair": (sin_squared_pair(), 3.0), "symmetric pair": (symmetric_pair(), 3.0),
             "sign-changing pair": (sign_changing_pair(), 1.0)}
    details, ok = [], True
    for name, (prob, half) in cases.items():
        res = theorem_2_1_check(prob, 1.0, 0.0, half, 1e-10, residual_tol=RESIDUAL_TOL)
        good = (res.verdict == "GloballySolvable" and res.residual < RESIDUAL_TOL and res.roots.neg_root < 0
                < res.roots.pos_root)
        ok &= good
        details.append(f"{name} res={res.residual if res.residual is not None else float('nan'):.1e}")
    return bool(ok), ", ".join(details)


def test_criterion_3_solvability(record):
    record(3, "global solvability", *criterion_3())


# --- 4 ---------------------------------------------------------------------


def criterion_4():
    rng = np.random.default_rng(SEED)
    failures = 0
    for _ in range(RICCATI_INSTANCES):
        a0, a1 = rng.uniform(0, 2), rng.uniform(0, 1)
        b0, bc = rng.uniform(-1.5, 1.5), rng.uniform(-1, 1)
        g0, g1 = rng.uniform(0, 1.5), rng.uniform(0, 1)
        y1 = rng.uniform(-1, 1)
        y0 = y1 + rng.uniform(0, 1)
        a = lambda t, a0=a0, a1=a1: a0 + a1 * math.sin(t) ** 2  # noqa: E731
        b = lambda t, b0=b0, bc=bc: b0 + bc * math.cos(t)  # noqa: E731
        b1 = lambda t, b=b, g0=g0, g1=g1: b(t) + g0 + g1 * math.sin(3 * t) ** 2  # noqa: E731
        r = compare_riccati(a, b, b1, y0, y1, (0.0, 4.0), ORDERING_TOL)
        failures += not (r.ordering_holds and r.existence_ordered)
    return failures == 0, f"{RICCATI_INSTANCES} instances, {failures} failures"


def test_criterion_4_riccati_property(record):
    record(4, "Riccati comparison ordering", *criterion_4())


# --- 5 ---------------------------------------------------------------------


def criterion_5():
    rng = np.random.default_rng(SEED + 1)
    tight = StepPolicy(rtol=1e-11, atol=1e-13)
    mismatches = []
    for i in range(PRUFER_INSTANCES):
        c0, c1 = rng.uniform(-0.5, 4.0), rng.uniform(-2.0, 2.0)
        Q = lambda t, c0=c0, c1=c1: c0 + c1 * math.sin(t)  # noqa: E731
        # phi(0) = 1, phi'(0) = 0 keeps zeros off the left end
        r = prufer_advance(ComparisonODE.with_unit_weight(Q, 0.0), 0.0, 50.0, math.pi / 2, tight)
        ref = direct_zeros(Q, 0.0, 50.0, 1.0, 0.0)
        if r.zero_count != len(ref):
            mismatches.append((i, r.zero_count, len(ref)))
    return not mismatches, f"{PRUFER_INSTANCES} ODEs, mismatches {mismatches}"


def test_criterion_5_prufer_oracle(record):
    record(5, "Prufer counts equal direct counts", *criterion_5())


# --- 6 ---------------------------------------------------------------------


def criterion_6():
    tr = solve_riccati(RiccatiProblem(lambda t: 1.0, lambda t: 0.0, -2.0, 0.0), 2.0)
    blow = abs(tr.blowup - 0.5)
    prob = build_problem({"p": "1", "t0": 0, "form": "ConstantShift", "terms": [{"q": "-1", "h": 0, "a0": 1}]})
    sol = picard_solve(prob, 1.0, 0.0, 3.0, 1e-12, 80, 1e-3)
    cosh_err = float(np.max(np.abs(sol.values - np.cosh(sol.grid))))
    spacing = 0.0
    for k in (1, 2, 3):
        r = prufer_advance(ComparisonODE.with_unit_weight(lambda t, k=k: k * k, 0.0), 0.0, 20.0, math.pi / 2,
                           StepPolicy(rtol=1e-11, atol=1e-13))
        spacing = max(spacing, float(np.max(np.abs(np.diff(r.zero_locations) * k / math.pi - 1))))
    ok = blow < BLOWUP_TOL and cosh_err < COSH_TOL and spacing < SPACING_RTOL and sol.window == (-3.0, 3.0)
    return ok, f"blowup err {blow:.1e}, cosh err {cosh_err:.1e}, spacing rel err {spacing:.1e}"


def test_criterion_6_closed_forms(record):
    record(6, "closed-form checks", *criterion_6())


# --- 7 ---------------------------------------------------------------------


def criterion_7():
    crit = _run("unit_potential.toml", criteria={"theorem": "T2_4"})
    oracle = _run("unit_potential.toml", "oracle", oracle={"windows": [[0.0, 40.0]], "t_end": 40.0})
    n = oracle["oracle"]["windows"][0]["zero_count"]
    ok = _conclusions(crit) == ["OscillatoryByCriterion"] and abs(n - FITE_ZEROS) <= FITE_SLACK
    return ok, f"{_conclusions(crit)[0]}, {n} zeros on [0, 40]"


def test_criterion_7_fite(record):
    record(7, "Fite sanity", *criterion_7())


# --- 8 ---------------------------------------------------------------------


def criterion_8(tmp: Path):
    same = []
    for name in ("symmetric_pair.toml", "sign_changing_scan.toml", "loglog_delay.toml"):
        out = tmp / f"{name}.json"
        texts = []
        for _ in range(2):
            main(["--config", str(CONFIGS / name), "--report", str(out)])
            texts.append(out.read_text())
        same.append(strip_timestamp(texts[0]) == strip_timestamp(texts[1]))
        json.loads(texts[0])
    return all(same), f"{sum(same)}/{len(same)} configs identical across two runs"


def test_criterion_8_determinism(record, tmp_path):
    record(8, "determinism", *criterion_8(tmp_path))


if __name__ == "__main__":
    import tempfile

    checks = [(1, "example reproduction", criterion_1), (2, "negative control via the Euler bound", criterion_2),
              (3, "global solvability", criterion_3), (4, "Riccati comparison ordering", criterion_4),
              (5, "Prufer counts equal direct counts", criterion_5), (6, "closed-form checks", criterion_6),
              (7, "Fite sanity", criterion_7)]
    all_ok = True
    for number, title, fn in checks:
        ok, detail = fn()
        all_ok &= ok
        print(_line(number, title, ok, detail))
    with tempfile.TemporaryDirectory() as d:
        ok, detail = criterion_8(Path(d))
    all_ok &= ok
    print(_line(8, "determinism", ok, detail))
    sys.exit(0 if all_ok else 1)
