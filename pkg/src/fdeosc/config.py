"""TOML run configuration: one ``[problem]`` table, repeated ``[[term]]``
tables, and optional ``[policy]``, ``[criteria]``, ``[solve]``, ``[scan]``,
``[oracle]`` and ``[output]`` tables. Unknown keys are rejected."""
from __future__ import annotations

import sys
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "COMMANDS",
    "THEOREMS",
    "ConfigParseError",
    "RunConfig",
    "load_config",
    "parse_config",
]

COMMANDS = ("validate", "classify", "criteria", "solve", "scan", "oracle")
THEOREMS = ("T2_2", "T2_3", "T2_4", "T2_5", "C2_1", "T2_6", "all")

Number = Union[float, str]


class ConfigParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = f"{path or '<config>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ProblemSection(_Strict):
    p: Number
    t0: Number
    form: Literal["VariableCoeff", "ConstantShift"] = "VariableCoeff"
    params: dict[str, float] = Field(default_factory=dict)


class TermSection(_Strict):
    q: Number
    alpha: Optional[str] = None
    h: Optional[Number] = None
    a0: Optional[Number] = None


class PolicySection(_Strict):
    horizon: Optional[float] = None  # classification horizon, default t0 + 200
    grid_step: float = 0.01
    t_max: float = 1e4
    tol: float = 1e-8
    jobs: int = Field(1, ge=1)


class CriteriaSection(_Strict):
    theorem: str = "all"
    t1_samples: Optional[list[float]] = None
    weights: Optional[Union[float, list[float]]] = None
    use_c_prime: bool = False
    eps_sweep: list[float] = Field(default_factory=lambda: [0.5, 0.25, 0.125])
    interval: Optional[list[float]] = None  # t1, t2, t3, t4 for T2_6


class SolveSection(_Strict):
    gamma0: float = 1.0
    t0: Optional[float] = None
    half_width: float = 3.0
    tol: float = 1e-10
    n_max: int = 60
    step: float = 1e-3
    residual_tol: float = 1e-5


class WindowSection(_Strict):
    L: list[float] = Field(min_length=2, max_length=2)
    t: list[float] = Field(min_length=4, max_length=4)


class ScanSection(_Strict):
    windows: list[WindowSection] = Field(default_factory=list)


class OracleSection(_Strict):
    t_end: float = 40.0
    prehistory: float = 1.0
    dphi0: float = 0.0
    windows: Optional[list[list[float]]] = None


class OutputSection(_Strict):
    report: Optional[str] = None
    csv_dir: Optional[str] = None


class RunConfig(_Strict):
    command: Literal["validate", "classify", "criteria", "solve", "scan", "oracle"] = "validate"
    problem: ProblemSection
    term: list[TermSection] = Field(min_length=1)
    policy: PolicySection = Field(default_factory=PolicySection)
    criteria: CriteriaSection = Field(default_factory=CriteriaSection)
    solve: SolveSection = Field(default_factory=SolveSection)
    scan: ScanSection = Field(default_factory=ScanSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def problem_mapping(self) -> dict:
        """The plain mapping accepted by ``build_problem``."""
        terms = [t.model_dump(exclude_none=True) for t in self.term]
        return {**self.problem.model_dump(), "terms": terms}


def _key_line(text: str, loc: tuple) -> int | None:
    """Best-effort line of the first key named in a validation location."""
    names = [str(x) for x in loc if isinstance(x, str)]
    if not names:
        return None
    lines = text.splitlines()
    header = names[0]
    start = None
    for i, line in enumerate(lines):
        s = line.strip()
        if s in (f"[{header}]", f"[[{header}]]"):
            start = i
            break
    if start is None:
        return None
    target = names[-1]
    for i in range(start, len(lines)):
        s = lines[i].strip()
        if s.startswith(target) and s[len(target):].lstrip().startswith("="):
            return i + 1
    return start + 1


def parse_config(text: str, path: str | None = None) -> RunConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None and "line " in str(exc):
            try:
                line = int(str(exc).rsplit("line ", 1)[1].split(",")[0].rstrip(")"))
            except ValueError:
                line = None
        raise ConfigParseError(str(exc), line, path) from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        dotted = ".".join(str(x) for x in loc)
        raise ConfigParseError(f"{dotted}: {err['msg']}", _key_line(text, loc), path) from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))
