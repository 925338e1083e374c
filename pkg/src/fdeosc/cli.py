"""Run oscillation and solvability checks described by a TOML configuration.

Exit status: 0 when the command completed (whatever the verdict), 2 for a
configuration error, 3 for a numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import COMMANDS, THEOREMS, ConfigParseError, RunConfig, load_config
from .criteria import (
    EmptyOmegaSet,
    OrderingViolated,
    WeightOutOfRange,
    corollary_2_1,
    remark_2_1_scan,
    theorem_2_2,
    theorem_2_3,
    theorem_2_4,
    theorem_2_5,
    theorem_2_6,
)
from .expr import ExprSyntaxError
from .odeosc import OscPolicy, StepPolicy
from .problem import FDEProblem, ProblemError, build_problem, classify_terms, evaluate_conditions
from .report import VERDICT_WORDING, add_warnings, new_report, write_report
from .solvability import (
    AdvancedTermPresent,
    GridTooCoarse,
    method_of_steps_solve,
    picard_solve,
    picard_trajectory,
    theorem_2_1_check,
    write_trajectory_csv,
    zero_locations,
)

log = logging.getLogger("fdeosc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericFailure(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"numeric failure during {stage}: {cause}")
        self.stage = stage


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fdeosc", description=__doc__.splitlines()[0] if __doc__ else None)
    ap.add_argument("--config", required=True, help="TOML run configuration")
    ap.add_argument("--command", choices=COMMANDS, help="override the config's command")
    ap.add_argument("--theorem", choices=THEOREMS, help="criterion to run for the criteria command")
    ap.add_argument("--t-max", type=float, help="largest t reached by zero counting at infinity")
    ap.add_argument("--tol", type=float, help="relative tolerance of the ODE integrators")
    ap.add_argument("--report", help="write the JSON report here (default: stdout)")
    ap.add_argument("--csv-dir", help="directory for trajectory CSV sidecars")
    ap.add_argument("--jobs", type=int, help="parallel tasks for sweeps and window scans")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    upd = {}
    if args.command:
        upd["command"] = args.command
    pol = {}
    if args.t_max is not None:
        pol["t_max"] = args.t_max
    if args.tol is not None:
        pol["tol"] = args.tol
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigParseError("--jobs must be at least 1")
        pol["jobs"] = args.jobs
    if pol:
        upd["policy"] = cfg.policy.model_copy(update=pol)
    if args.theorem:
        upd["criteria"] = cfg.criteria.model_copy(update={"theorem": args.theorem})
    out = {}
    if args.report:
        out["report"] = args.report
    if args.csv_dir:
        out["csv_dir"] = args.csv_dir
    if out:
        upd["output"] = cfg.output.model_copy(update=out)
    return cfg.model_copy(update=upd) if upd else cfg


def _policies(cfg: RunConfig) -> tuple[StepPolicy, OscPolicy]:
    step = StepPolicy(rtol=cfg.policy.tol, atol=cfg.policy.tol * 1e-2)
    return step, OscPolicy(t_max=cfg.policy.t_max, step=step)


def _policy_record(cfg: RunConfig) -> dict:
    step, osc = _policies(cfg)
    return {
        "run": cfg.policy.model_dump(),
        "step": dataclasses.asdict(step),
        "oscillation": {k: v for k, v in dataclasses.asdict(osc).items() if k not in ("step",)},
    }


def _classification(problem: FDEProblem, cfg: RunConfig):
    horizon = cfg.policy.horizon if cfg.policy.horizon is not None else problem.t0 + 200.0
    return classify_terms(problem, horizon, cfg.policy.grid_step)


def _stage(name: str, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ArithmeticError, GridTooCoarse) as exc:
        raise NumericFailure(name, exc) from exc


def _selected(theorem: str, cfg: RunConfig) -> list[str]:
    if theorem != "all":
        return [theorem]
    picks = ["T2_2", "T2_3", "T2_4", "T2_5"]
    if cfg.criteria.weights is not None:
        picks.append("C2_1")
    if cfg.criteria.interval is not None:
        picks.append("T2_6")
    return picks


def _weights(cfg: RunConfig, classification):
    w = cfg.criteria.weights
    if w is None:
        return 0.5
    if isinstance(w, list):
        ks = classification.minus_only
        if len(w) != len(ks):
            raise ConfigParseError(f"criteria.weights: need {len(ks)} weights, one per retarded term")
        return dict(zip(ks, w))
    return w


def run_criteria(cfg: RunConfig, problem: FDEProblem, report: dict) -> None:
    step, osc = _policies(cfg)
    crit = cfg.criteria
    cl = _stage("classification", _classification, problem, cfg)
    report["classification"] = cl.as_dict()
    add_warnings(report, [f"unclassified terms dropped: {[k + 1 for k in cl.unclassified]}"]
                 if cl.unclassified else [])
    conds = None
    verdicts = []
    for th in _selected(crit.theorem, cfg):
        if th != "T2_6" and conds is None:
            conds = _stage("conditions", evaluate_conditions, problem, cl)
            report["conditions"] = conds.as_dict()
        if th == "T2_2":
            v = _stage(th, theorem_2_2, problem, cl, osc, conditions=conds)
        elif th == "T2_3":
            v = _stage(th, theorem_2_3, problem, cl, osc, conditions=conds)
        elif th == "T2_4":
            v = _stage(th, theorem_2_4, problem, cl, conditions=conds, use_c_prime=crit.use_c_prime,
                       osc_policy=osc)
        elif th == "T2_5":
            v = _stage(th, theorem_2_5, problem, cl, crit.t1_samples, osc, conditions=conds,
                       jobs=cfg.policy.jobs)
        elif th == "C2_1":
            v = _stage(th, corollary_2_1, problem, cl, _weights(cfg, cl), osc, conditions=conds)
        else:
            if crit.interval is None or len(crit.interval) != 4:
                raise ConfigParseError("criteria.interval must list t1, t2, t3, t4 for T2_6")
            try:
                v = _stage(th, theorem_2_6, problem, *crit.interval, eps_sweep=crit.eps_sweep,
                           step_policy=step)
            except EmptyOmegaSet as exc:
                verdicts.append({"theorem": th, "conclusion": "CriterionNotApplicable",
                                 "failed": {"hypothesis": "index sets nonempty", "detail": str(exc)},
                                 "policy": report["policy"]})
                continue
        d = v.as_dict()
        d["policy"] = report["policy"]
        verdicts.append(d)
        add_warnings(report, v.warnings)
    report["verdicts"] = verdicts


def run_scan(cfg: RunConfig, problem: FDEProblem, report: dict) -> None:
    step, _ = _policies(cfg)
    windows = [w.model_dump() for w in cfg.scan.windows]
    v = _stage("scan", remark_2_1_scan, problem, windows, cfg.criteria.eps_sweep, step, jobs=cfg.policy.jobs)
    d = v.as_dict()
    d["policy"] = report["policy"]
    report["verdicts"] = [d]
    add_warnings(report, v.warnings)


def run_solve(cfg: RunConfig, problem: FDEProblem, report: dict) -> None:
    s = cfg.solve
    t0 = problem.t0 if s.t0 is None else s.t0
    res = _stage("solve", theorem_2_1_check, problem, s.gamma0, t0, s.half_width, s.tol, N_max=s.n_max,
                 step=s.step, residual_tol=s.residual_tol)
    report["solvability"] = res.as_dict()
    if cfg.output.csv_dir and res.solution is not None:
        out = Path(cfg.output.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(out / "picard_solution.csv", picard_trajectory(res.solution))


def run_oracle(cfg: RunConfig, problem: FDEProblem, report: dict) -> None:
    o = cfg.oracle
    try:
        traj = _stage("oracle", method_of_steps_solve, problem, o.prehistory, o.t_end, cfg.policy.tol,
                      dphi0=o.dphi0)
        method = "method of steps"
    except AdvancedTermPresent as exc:
        if problem.form != "ConstantShift":
            raise NumericFailure("oracle", exc) from exc
        # the series only converges on moderate windows, so the solve settings decide its extent
        half = cfg.solve.half_width
        sol = _stage("oracle", picard_solve, problem, o.prehistory, problem.t0, half, cfg.solve.tol,
                     cfg.solve.n_max, cfg.solve.step)
        if not sol.converged:
            raise NumericFailure("oracle", ArithmeticError("series did not converge"))
        traj = picard_trajectory(sol)
        method = "truncated series on a window"
        windows = o.windows or [list(sol.window)]
    else:
        windows = o.windows or [[problem.t0, o.t_end]]
    counts = []
    for a, b in windows:
        zs = zero_locations(traj, (a, b))
        counts.append({"window": [a, b], "zero_count": len(zs), "zeros": zs})
    report["oracle"] = {"method": method, "windows": counts}
    if cfg.output.csv_dir:
        out = Path(cfg.output.csv_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(out / "oracle_trajectory.csv", traj)


def run(cfg: RunConfig, source: str | None = None) -> dict:
    """Execute the configured command and return the report."""
    report = new_report(cfg.command, cfg.model_dump(), _policy_record(cfg))
    report["verdict_wording"] = VERDICT_WORDING
    try:
        problem = build_problem(cfg.problem_mapping())
    except (ProblemError, ExprSyntaxError, ArithmeticError) as exc:
        raise ConfigParseError(f"problem: {exc}", path=source) from exc
    report["problem"] = problem.describe()
    if cfg.command == "classify":
        cl = _stage("classification", _classification, problem, cfg)
        report["classification"] = cl.as_dict()
        report["conditions"] = _stage("conditions", evaluate_conditions, problem, cl).as_dict()
        if cl.unclassified:
            add_warnings(report, [f"unclassified terms: {[k + 1 for k in cl.unclassified]}"])
    elif cfg.command == "criteria":
        run_criteria(cfg, problem, report)
    elif cfg.command == "scan":
        run_scan(cfg, problem, report)
    elif cfg.command == "solve":
        run_solve(cfg, problem, report)
    elif cfg.command == "oracle":
        run_oracle(cfg, problem, report)
    return report


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        report = run(cfg, args.config)
    except (ConfigParseError, WeightOutOfRange, OrderingViolated) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERIC
    text = write_report(report, cfg.output.report)
    if cfg.output.report is None:
        sys.stdout.write(text)
    else:
        log.info("report written to %s", cfg.output.report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
