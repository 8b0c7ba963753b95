"""Plain-text experiment configuration: strict key=value format with
sections, documented below, plus a canonical serializer.

Format
------
Lines are ``key = value`` inside ``[section]`` headers; ``#`` starts a
comment; blank lines are ignored.  Unknown sections or keys are errors
(strict mode), and invariant violations are reported with the offending
line number.  Example::

    [levy]
    atoms = 0.3:2.0, -0.2:1.0    # jump_size:intensity pairs, or 'none'
    drift_b = 0.0
    sigma = 0.0
    compensated = false

    [grid]
    horizon = 1.0
    n_steps = 200

    [problem]
    name = example51             # constant | linear | deterministic_obstacle | example51
    theta = 1.0
    x0 = 0.0
    param.fy = -0.1              # numeric overrides of the named set

    [forward]
    sigma_x = constant:1.0       # or affine:a:b for a + b*x
    a_mode = local-time          # identity-time | local-time

    [solver]
    n_paths = 20000
    penalization = projection    # or a positive number
    degree = 4
    outer_b_samples = 1
    seed = 20240601
    n_schedule = 4,16,64,256

    [fd]
    n_space = 200
    n_time = 400

    [suite]
    checks = all                 # or a comma list of suite names

    [output]
    dir = out
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigParseError, UnknownCoefficientName
from .levy import LevySpec, ValidatedLevySpec, validate_levy_spec
from .paths import TimeGrid
from .problems import REGISTRY, ProblemSpec, build_problem
from .solver import SolverConfig

SUITE_NAMES = (
    "orthonormality",
    "skorokhod",
    "penalization",
    "comparison",
    "uniqueness",
    "feynman_kac",
)

_SCHEMA: dict[str, tuple[str, ...]] = {
    "levy": ("atoms", "drift_b", "sigma", "compensated"),
    "grid": ("horizon", "n_steps"),
    "problem": ("name", "theta", "x0"),  # plus param.* keys
    "forward": ("sigma_x", "a_mode"),
    "solver": (
        "n_paths",
        "penalization",
        "degree",
        "boundary_layer",
        "outer_b_samples",
        "seed",
        "n_schedule",
    ),
    "fd": ("n_space", "n_time"),
    "suite": ("checks",),
    "output": ("dir",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative experiment description; builders turn it into objects."""

    levy: LevySpec
    grid: TimeGrid
    problem_name: str
    problem_params: tuple[tuple[str, float], ...]
    theta: float
    x0: float
    sigma_x_kind: str
    sigma_x_params: tuple[float, ...]
    a_mode: str
    n_paths: int
    penalization: float | None
    degree: int
    boundary_layer: float | None
    outer_b_samples: int
    seed: int
    n_schedule: tuple[float, ...]
    fd_space: int
    fd_time: int
    checks: tuple[str, ...]
    out_dir: str | None

    def build_levy(self) -> ValidatedLevySpec:
        return validate_levy_spec(self.levy)

    def build_problem(self) -> ProblemSpec:
        return build_problem(self.problem_name, dict(self.problem_params), self.theta)

    def build_sigma_x(self) -> Callable:
        if self.sigma_x_kind == "constant":
            value = self.sigma_x_params[0]
            return lambda x: np.full_like(np.asarray(x, dtype=float), value)
        if self.sigma_x_kind == "affine":
            a, b = self.sigma_x_params
            return lambda x: a + b * np.asarray(x, dtype=float)
        raise ValueError(f"unknown sigma_x kind {self.sigma_x_kind!r}")

    def build_solver_config(self, penalization="unset", n_paths=None, outer=None) -> SolverConfig:
        if penalization == "unset":
            penalization = self.penalization
        return SolverConfig(
            n_paths=n_paths if n_paths is not None else self.n_paths,
            penalization=penalization,
            degree=self.degree,
            boundary_layer=self.boundary_layer,
            outer_b_samples=outer if outer is not None else self.outer_b_samples,
            master_seed=self.seed,
        )


DEFAULTS = ExperimentConfig(
    levy=LevySpec(drift_b=0.0, sigma=0.0, atoms=((0.3, 2.0), (-0.2, 1.0)), compensated=False),
    grid=TimeGrid(horizon=1.0, n_steps=100),
    problem_name="example51",
    problem_params=(),
    theta=1.0,
    x0=0.0,
    sigma_x_kind="constant",
    sigma_x_params=(1.0,),
    a_mode="local-time",
    n_paths=4000,
    penalization=None,
    degree=4,
    boundary_layer=None,
    outer_b_samples=1,
    seed=12345,
    n_schedule=(4.0, 16.0, 64.0, 256.0),
    fd_space=100,
    fd_time=200,
    checks=SUITE_NAMES,
    out_dir=None,
)


def _scan(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    """Sections -> {key: (raw value, line number)}, strict on shape."""
    out: dict[str, dict[str, tuple[str, int]]] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigParseError(f"unknown section [{section}]", lineno)
            out.setdefault(section, {})
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected key = value, got {line!r}", lineno)
        if section is None:
            raise ConfigParseError("key outside of any [section]", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        known = _SCHEMA[section]
        if key not in known and not (section == "problem" and key.startswith("param.")):
            raise ConfigParseError(f"unknown key {key!r} in section [{section}]", lineno)
        if key in out[section]:
            raise ConfigParseError(f"duplicate key {key!r} in section [{section}]", lineno)
        out[section][key] = (value, lineno)
    return out


def _take(sections, section, key, default):
    entry = sections.get(section, {}).get(key)
    if entry is None:
        return default, None
    return entry


def _parse_float(value: str, line: int, key: str) -> float:
    try:
        v = float(value)
    except ValueError as exc:
        raise ConfigParseError(f"{key}: not a number: {value!r}", line) from exc
    if not np.isfinite(v):
        raise ConfigParseError(f"{key}: must be finite", line)
    return v


def _parse_int(value: str, line: int, key: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigParseError(f"{key}: not an integer: {value!r}", line) from exc


def _parse_bool(value: str, line: int, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigParseError(f"{key}: expected true/false, got {value!r}", line)


def _parse_atoms(value: str, line: int) -> tuple[tuple[float, float], ...]:
    if value.lower() in ("none", ""):
        return ()
    atoms = []
    for chunk in value.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 2:
            raise ConfigParseError(f"atoms: expected jump:intensity, got {chunk.strip()!r}", line)
        atoms.append((_parse_float(parts[0], line, "atoms"), _parse_float(parts[1], line, "atoms")))
    return tuple(atoms)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config file; see the module docstring for the format."""
    sections = _scan(text)
    d = DEFAULTS

    value, line = _take(sections, "levy", "atoms", None)
    atoms = _parse_atoms(value, line) if value is not None else d.levy.atoms
    atoms_line = line
    value, line = _take(sections, "levy", "drift_b", None)
    drift = _parse_float(value, line, "drift_b") if value is not None else d.levy.drift_b
    value, line = _take(sections, "levy", "sigma", None)
    sigma = _parse_float(value, line, "sigma") if value is not None else d.levy.sigma
    value, line = _take(sections, "levy", "compensated", None)
    compensated = _parse_bool(value, line, "compensated") if value is not None else d.levy.compensated
    levy = LevySpec(drift_b=drift, sigma=sigma, atoms=atoms, compensated=compensated)
    try:
        validate_levy_spec(levy)
    except Exception as exc:
        raise ConfigParseError(f"invalid driver spec: {exc}", atoms_line) from exc

    value, line = _take(sections, "grid", "horizon", None)
    horizon = _parse_float(value, line, "horizon") if value is not None else d.grid.horizon
    value, line = _take(sections, "grid", "n_steps", None)
    n_steps = _parse_int(value, line, "n_steps") if value is not None else d.grid.n_steps
    steps_line = line
    try:
        grid = TimeGrid(horizon=horizon, n_steps=n_steps)
    except ValueError as exc:
        raise ConfigParseError(str(exc), steps_line) from exc

    value, line = _take(sections, "problem", "name", None)
    name = value if value is not None else d.problem_name
    if name not in REGISTRY:
        raise UnknownCoefficientName(
            f"unknown coefficient name {name!r}; known: {sorted(REGISTRY)}"
        )
    params = []
    for key, (value, line) in sections.get("problem", {}).items():
        if key.startswith("param."):
            params.append((key[len("param.") :], _parse_float(value, line, key)))
    params.sort()
    value, line = _take(sections, "problem", "theta", None)
    theta = _parse_float(value, line, "theta") if value is not None else d.theta
    if theta <= 0:
        raise ConfigParseError("theta must be positive", line)
    value, line = _take(sections, "problem", "x0", None)
    x0 = _parse_float(value, line, "x0") if value is not None else d.x0
    if not (-theta <= x0 <= theta):
        raise ConfigParseError(f"x0 must lie in [-theta, theta] = [{-theta}, {theta}]", line)
    try:
        build_problem(name, dict(params), theta)
    except UnknownCoefficientName:
        raise
    except ValueError as exc:
        raise ConfigParseError(f"invalid problem parameters for {name!r}: {exc}") from exc

    value, line = _take(sections, "forward", "sigma_x", None)
    if value is None:
        sx_kind, sx_params = d.sigma_x_kind, d.sigma_x_params
    else:
        parts = value.split(":")
        sx_kind = parts[0].strip()
        if sx_kind == "constant" and len(parts) == 2:
            sx_params = (_parse_float(parts[1], line, "sigma_x"),)
        elif sx_kind == "affine" and len(parts) == 3:
            sx_params = (
                _parse_float(parts[1], line, "sigma_x"),
                _parse_float(parts[2], line, "sigma_x"),
            )
        else:
            raise ConfigParseError(
                f"sigma_x: expected constant:v or affine:a:b, got {value!r}", line
            )
    value, line = _take(sections, "forward", "a_mode", None)
    a_mode = value if value is not None else d.a_mode
    if a_mode not in ("identity-time", "local-time"):
        raise ConfigParseError(f"a_mode must be one of identity-time, local-time", line)

    value, line = _take(sections, "solver", "n_paths", None)
    n_paths = _parse_int(value, line, "n_paths") if value is not None else d.n_paths
    if n_paths < 1:
        raise ConfigParseError("n_paths must be >= 1", line)
    value, line = _take(sections, "solver", "penalization", None)
    if value is None:
        penalization = d.penalization
    elif value.lower() == "projection":
        penalization = None
    else:
        penalization = _parse_float(value, line, "penalization")
        if penalization <= 0:
            raise ConfigParseError("penalization must be positive or 'projection'", line)
    value, line = _take(sections, "solver", "degree", None)
    degree = _parse_int(value, line, "degree") if value is not None else d.degree
    if degree < 0:
        raise ConfigParseError("degree must be >= 0", line)
    value, line = _take(sections, "solver", "boundary_layer", None)
    if value is None or value.lower() == "auto":
        boundary_layer = d.boundary_layer
    else:
        boundary_layer = _parse_float(value, line, "boundary_layer")
        if boundary_layer <= 0:
            raise ConfigParseError("boundary_layer must be positive or 'auto'", line)
    value, line = _take(sections, "solver", "outer_b_samples", None)
    outer = _parse_int(value, line, "outer_b_samples") if value is not None else d.outer_b_samples
    if outer < 1:
        raise ConfigParseError("outer_b_samples must be >= 1", line)
    value, line = _take(sections, "solver", "seed", None)
    seed = _parse_int(value, line, "seed") if value is not None else d.seed
    if seed < 0:
        raise ConfigParseError("seed must be a nonnegative integer", line)
    value, line = _take(sections, "solver", "n_schedule", None)
    if value is None:
        schedule = d.n_schedule
    else:
        schedule = tuple(_parse_float(v.strip(), line, "n_schedule") for v in value.split(","))
        if any(v <= 0 for v in schedule) or list(schedule) != sorted(schedule):
            raise ConfigParseError("n_schedule must be increasing positive numbers", line)

    value, line = _take(sections, "fd", "n_space", None)
    fd_space = _parse_int(value, line, "n_space") if value is not None else d.fd_space
    if fd_space < 2:
        raise ConfigParseError("n_space must be >= 2", line)
    value, line = _take(sections, "fd", "n_time", None)
    fd_time = _parse_int(value, line, "n_time") if value is not None else d.fd_time
    if fd_time < 1:
        raise ConfigParseError("n_time must be >= 1", line)

    value, line = _take(sections, "suite", "checks", None)
    if value is None:
        checks = d.checks
    elif value.strip().lower() == "all":
        checks = SUITE_NAMES
    else:
        checks = tuple(v.strip() for v in value.split(","))
        for chk in checks:
            if chk not in SUITE_NAMES:
                raise ConfigParseError(
                    f"unknown suite {chk!r}; known: {', '.join(SUITE_NAMES)}", line
                )
    value, line = _take(sections, "output", "dir", None)
    out_dir = value if value is not None else d.out_dir

    return ExperimentConfig(
        levy=levy,
        grid=grid,
        problem_name=name,
        problem_params=tuple(params),
        theta=theta,
        x0=x0,
        sigma_x_kind=sx_kind,
        sigma_x_params=sx_params,
        a_mode=a_mode,
        n_paths=n_paths,
        penalization=penalization,
        degree=degree,
        boundary_layer=boundary_layer,
        outer_b_samples=outer,
        seed=seed,
        n_schedule=schedule,
        fd_space=fd_space,
        fd_time=fd_time,
        checks=checks,
        out_dir=out_dir,
    )


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(parse(text))) == parse(text)."""
    lines = ["[levy]"]
    atoms = ", ".join(f"{b!r}:{a!r}" for b, a in cfg.levy.atoms) or "none"
    lines.append(f"atoms = {atoms}")
    lines.append(f"drift_b = {cfg.levy.drift_b!r}")
    lines.append(f"sigma = {cfg.levy.sigma!r}")
    lines.append(f"compensated = {'true' if cfg.levy.compensated else 'false'}")
    lines.append("")
    lines.append("[grid]")
    lines.append(f"horizon = {cfg.grid.horizon!r}")
    lines.append(f"n_steps = {cfg.grid.n_steps}")
    lines.append("")
    lines.append("[problem]")
    lines.append(f"name = {cfg.problem_name}")
    lines.append(f"theta = {cfg.theta!r}")
    lines.append(f"x0 = {cfg.x0!r}")
    for key, value in cfg.problem_params:
        lines.append(f"param.{key} = {value!r}")
    lines.append("")
    lines.append("[forward]")
    lines.append(f"sigma_x = {cfg.sigma_x_kind}:" + ":".join(repr(v) for v in cfg.sigma_x_params))
    lines.append(f"a_mode = {cfg.a_mode}")
    lines.append("")
    lines.append("[solver]")
    lines.append(f"n_paths = {cfg.n_paths}")
    pen = "projection" if cfg.penalization is None else repr(cfg.penalization)
    lines.append(f"penalization = {pen}")
    lines.append(f"degree = {cfg.degree}")
    lines.append(
        "boundary_layer = "
        + ("auto" if cfg.boundary_layer is None else repr(cfg.boundary_layer))
    )
    lines.append(f"outer_b_samples = {cfg.outer_b_samples}")
    lines.append(f"seed = {cfg.seed}")
    lines.append("n_schedule = " + ",".join(repr(v) for v in cfg.n_schedule))
    lines.append("")
    lines.append("[fd]")
    lines.append(f"n_space = {cfg.fd_space}")
    lines.append(f"n_time = {cfg.fd_time}")
    lines.append("")
    lines.append("[suite]")
    lines.append("checks = " + ", ".join(cfg.checks))
    lines.append("")
    lines.append("[output]")
    if cfg.out_dir is not None:
        lines.append(f"dir = {cfg.out_dir}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def with_overrides(
    cfg: ExperimentConfig,
    seed: int | None = None,
    out_dir: str | None = None,
    n_paths: int | None = None,
    n_steps: int | None = None,
    penalization: str | None = None,
) -> ExperimentConfig:
    """Apply command-line style overrides to a parsed config."""
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=out_dir)
    if n_paths is not None:
        cfg = replace(cfg, n_paths=n_paths)
    if n_steps is not None:
        cfg = replace(cfg, grid=TimeGrid(cfg.grid.horizon, n_steps))
    if penalization is not None:
        if penalization.lower() == "projection":
            cfg = replace(cfg, penalization=None)
        else:
            value = float(penalization)
            if value <= 0:
                raise ConfigParseError("penalization override must be positive or 'projection'")
            cfg = replace(cfg, penalization=value)
    return cfg
