"""Experiment configuration files.

Configs are INI-style text read with :mod:`configparser`. Every key is
optional except where noted; unknown sections or keys are rejected so that
typos fail loudly. Example::

    [run]
    seed = 7
    output_dir = out/sweep

    [problem]
    kind = synthetic          ; synthetic | eit | bundle

    [synthetic]
    family = smooth           ; smooth | random | zero
    m = 4
    d = 6
    n_steps = 40
    t_end = 1.0
    noise = 0.01              ; per-sample data perturbation norm
    drift = 0.3
    u0 = truth                ; truth | zero (smooth family only)

    [eit]
    subdivisions = 25
    time_samples = 51
    inclusion_radius = 0.08
    inclusion_contrast = 2.0
    path_center = 0.4, 0.5
    path_radius = 0.2
    noise_fraction = 0.0
    data = linearized         ; linearized | nonlinear
    data_subdivisions = 50
    initial_guess = tikhonov  ; tikhonov | zero
    center_times = 0, 0.25, 0.5, 0.75

    [bundle]
    path = problem.json       ; relative to the config file

    [solver]
    method = discrete         ; discrete | continuous | both
    alpha = 1e-1, 1e-2, 1e-3
    oracle = true
    refine = false            ; continuous self-convergence check

    [output]
    emit_frames = false

    [timing]
    n_steps = 50, 100, 200, 400
    repeats = 3
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..eit.forward import INITIAL_GUESSES, EITScenario
from ..errors import ConfigError, InvalidScenario

__all__ = ["SyntheticSpec", "EITSpec", "ExperimentConfig", "parse_config", "load_config"]

METHODS = ("discrete", "continuous", "both")
KINDS = ("synthetic", "eit", "bundle")
FAMILIES = ("smooth", "random", "zero")


@dataclass(frozen=True)
class SyntheticSpec:
    family: str = "smooth"
    m: int = 4
    d: int = 6
    n_steps: int = 40
    t_end: float = 1.0
    noise: float = 0.0
    drift: float = 0.3
    u0: str = "truth"


@dataclass(frozen=True)
class EITSpec:
    scenario: EITScenario = field(default_factory=EITScenario)
    data: str = "linearized"
    data_subdivisions: int | None = None
    initial_guess: str = "tikhonov"
    center_times: tuple = (0.0, 0.25, 0.5, 0.75)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see the module docstring for the file format."""

    problem: str = "synthetic"
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    eit: EITSpec = field(default_factory=EITSpec)
    bundle_path: Path | None = None
    method: str = "discrete"
    alpha: tuple = (1e-2,)
    seed: int = 0
    output_dir: Path = Path("out")
    oracle: bool = False
    refine: bool = False
    emit_frames: bool = False
    timing_n_steps: tuple = (50, 100, 200, 400)
    timing_repeats: int = 3

    def __post_init__(self):
        if self.problem not in KINDS:
            raise ConfigError("problem.kind", f"must be one of {KINDS}, got {self.problem!r}")
        if self.method not in METHODS:
            raise ConfigError("solver.method", f"must be one of {METHODS}, got {self.method!r}")
        alpha = tuple(float(a) for a in np.atleast_1d(self.alpha))
        if not alpha:
            raise ConfigError("solver.alpha", "needs at least one value")
        if not all(np.isfinite(a) and a > 0 for a in alpha):
            raise ConfigError("solver.alpha", f"entries must be positive and finite, got {alpha}")
        object.__setattr__(self, "alpha", alpha)
        if self.problem == "bundle" and self.bundle_path is None:
            raise ConfigError("bundle.path", "required when problem.kind = bundle")
        if self.timing_repeats < 1:
            raise ConfigError("timing.repeats", "must be >= 1")
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    @property
    def methods(self) -> tuple:
        return ("discrete", "continuous") if self.method == "both" else (self.method,)

    def with_overrides(self, seed: int | None = None, output_dir=None) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if output_dir is not None:
            changes["output_dir"] = Path(output_dir)
        return replace(self, **changes) if changes else self


_ALLOWED = {
    "run": {"seed", "output_dir"},
    "problem": {"kind"},
    "synthetic": {"family", "m", "d", "n_steps", "t_end", "noise", "drift", "u0"},
    "eit": {"subdivisions", "time_samples", "inclusion_radius", "inclusion_contrast",
            "path_center", "path_radius", "noise_fraction", "data", "data_subdivisions",
            "initial_guess", "center_times", "t_end"},
    "bundle": {"path"},
    "solver": {"method", "alpha", "oracle", "refine"},
    "output": {"emit_frames"},
    "timing": {"n_steps", "repeats"},
}


class _Section:
    """Typed accessors that turn parse failures into ConfigError."""

    def __init__(self, parser, name):
        self.name = name
        self.sec = parser[name] if parser.has_section(name) else {}

    def _raw(self, key):
        return self.sec.get(key) if key in self.sec else None

    def _fail(self, key, reason):
        raise ConfigError(f"{self.name}.{key}", reason)

    def str(self, key, default, choices=None):
        v = self._raw(key)
        v = default if v is None else v.strip()
        if choices is not None and v not in choices:
            self._fail(key, f"must be one of {tuple(choices)}, got {v!r}")
        return v

    def int(self, key, default, minimum=None):
        v = self._raw(key)
        if v is None:
            return default
        try:
            out = int(v)
        except ValueError:
            self._fail(key, f"not an integer: {v!r}")
        if minimum is not None and out < minimum:
            self._fail(key, f"must be >= {minimum}, got {out}")
        return out

    def float(self, key, default):
        v = self._raw(key)
        if v is None:
            return default
        try:
            out = float(v)
        except ValueError:
            self._fail(key, f"not a number: {v!r}")
        if not np.isfinite(out):
            self._fail(key, f"must be finite, got {v!r}")
        return out

    def floats(self, key, default):
        v = self._raw(key)
        if v is None:
            return default
        try:
            out = tuple(float(x) for x in v.replace(";", ",").split(",") if x.strip())
        except ValueError:
            self._fail(key, f"not a comma-separated list of numbers: {v!r}")
        if not out or not all(np.isfinite(out)):
            self._fail(key, f"needs at least one finite number, got {v!r}")
        return out

    def bool(self, key, default):
        v = self._raw(key)
        if v is None:
            return default
        v = v.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        self._fail(key, f"not a boolean: {v!r}")


def _ints(values, field_name):
    out = tuple(int(v) for v in values)
    if any(o != v for o, v in zip(out, values)):
        raise ConfigError(field_name, f"entries must be integers, got {values}")
    return out


def parse_config(text: str, base_dir: Path | str = ".") -> ExperimentConfig:
    """Parse config text; relative paths resolve against ``base_dir``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", f"unreadable config: {exc}") from exc
    for name in parser.sections():
        if name not in _ALLOWED:
            raise ConfigError(name, "unknown section")
        extra = set(parser[name]) - _ALLOWED[name]
        if extra:
            raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown key")

    base_dir = Path(base_dir)
    run = _Section(parser, "run")
    prob = _Section(parser, "problem")
    syn = _Section(parser, "synthetic")
    eit = _Section(parser, "eit")
    bundle = _Section(parser, "bundle")
    solver = _Section(parser, "solver")
    output = _Section(parser, "output")
    timing = _Section(parser, "timing")

    d = SyntheticSpec()
    synthetic = SyntheticSpec(
        family=syn.str("family", d.family, FAMILIES),
        m=syn.int("m", d.m, 1),
        d=syn.int("d", d.d, 1),
        n_steps=syn.int("n_steps", d.n_steps, 1),
        t_end=syn.float("t_end", d.t_end),
        noise=syn.float("noise", d.noise),
        drift=syn.float("drift", d.drift),
        u0=syn.str("u0", d.u0, ("truth", "zero")),
    )
    if synthetic.t_end <= 0:
        raise ConfigError("synthetic.t_end", "must be positive")
    if synthetic.noise < 0:
        raise ConfigError("synthetic.noise", "must be non-negative")

    s0 = EITScenario()
    center = eit.floats("path_center", s0.path_center)
    if len(center) != 2:
        raise ConfigError("eit.path_center", f"needs two coordinates, got {center}")
    try:
        scenario = EITScenario(
            grid_subdivisions=eit.int("subdivisions", s0.grid_subdivisions),
            time_samples=eit.int("time_samples", s0.time_samples),
            inclusion_radius=eit.float("inclusion_radius", s0.inclusion_radius),
            inclusion_contrast=eit.float("inclusion_contrast", s0.inclusion_contrast),
            path_center=center,
            path_radius=eit.float("path_radius", s0.path_radius),
            noise_fraction=eit.float("noise_fraction", s0.noise_fraction),
            t_end=eit.float("t_end", s0.t_end),
        )
    except InvalidScenario as exc:
        raise ConfigError("eit", str(exc)) from exc
    e0 = EITSpec()
    data_sub = eit.int("data_subdivisions", 0, 2) or None
    eit_spec = EITSpec(
        scenario=scenario,
        data=eit.str("data", e0.data, ("linearized", "nonlinear")),
        data_subdivisions=data_sub,
        initial_guess=eit.str("initial_guess", e0.initial_guess, INITIAL_GUESSES),
        center_times=eit.floats("center_times", e0.center_times),
    )

    path = bundle.str("path", "")
    bundle_path = (base_dir / path) if path else None

    nt = timing.floats("n_steps", ExperimentConfig.timing_n_steps)
    c0 = ExperimentConfig
    return ExperimentConfig(
        problem=prob.str("kind", c0.problem, KINDS),
        synthetic=synthetic,
        eit=eit_spec,
        bundle_path=bundle_path,
        method=solver.str("method", c0.method, METHODS),
        alpha=solver.floats("alpha", c0.alpha),
        seed=run.int("seed", c0.seed, 0),
        output_dir=base_dir / run.str("output_dir", str(c0.output_dir)),
        oracle=solver.bool("oracle", c0.oracle),
        refine=solver.bool("refine", c0.refine),
        emit_frames=output.bool("emit_frames", c0.emit_frames),
        timing_n_steps=_ints(nt, "timing.n_steps"),
        timing_repeats=timing.int("repeats", c0.timing_repeats, 1),
    )


def load_config(path, seed: int | None = None, output_dir=None) -> ExperimentConfig:
    """Read a config file; ``seed`` and ``output_dir`` override the file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("file", f"cannot read {path}: {exc}") from exc
    return parse_config(text, path.parent).with_overrides(seed, output_dir)
