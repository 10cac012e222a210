"""Batch front end.

Usage::

    nlacoustics SUBCOMMAND [CONFIG] [--out DIR] [--seed N] [--strict]

``CONFIG`` is a TOML file; every key has a default, so it may be omitted.
Each subcommand prints a JSON summary, writes it to ``DIR/summary.json``
together with its CSV artifacts, and exits with 0 (contracts hold),
1 (a contract failed or a run aborted) or 2 (usage or configuration error).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import re
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analysis import (
    ENERGY_COLUMNS,
    EnergyObserver,
    alpha_bounds,
    derived_constants,
    estimate_constants,
    initial_energy_bounds,
    smallness_M,
)
from .exceptions import ConfigError, DomainError
from .grid import Grid
from .manufactured import ManufacturedSolution, cosine_profile, polynomial_profile
from .models import State2, State3, residual_F, residual_F_scale
from .params import MODELS, PhysicalParams, betas_for, get_model
from .study import (
    hierarchy_compare,
    limit_study,
    mms_convergence,
    small_data_preset,
    consistency_complete,
)
from .timestep import StepperConfig, run

__all__ = [
    "RunConfig",
    "parse_config",
    "render_config",
    "load_config",
    "read_field_csv",
    "write_field_csv",
    "main",
]

SCHEMA_VERSION = 1
DEFAULT_A = 0.05
PROFILES = ("preset", "sine", "bump", "zero", "file")
EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


# configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class PhysicsSection:
    c0: float = 1.0
    nu_lambda: float = 0.1
    b_over_a: float = 0.5
    a: float | None = None  # None: 0 for K and W, DEFAULT_A otherwise


@dataclass(frozen=True)
class GridSection:
    dim: int = 1
    n: int = 64
    length: float = 4.0


@dataclass(frozen=True)
class StepperSection:
    dt: float = 0.01
    t_end: float = 1.0
    theta: float = 0.5
    linear_solver_tol: float = 1e-10
    max_linear_iters: int = 2000


@dataclass(frozen=True)
class InitialSection:
    psi0: str = "preset"
    psi0_amplitude: float = 0.01
    psi0_file: str | None = None
    psi1: str = "zero"
    psi1_amplitude: float = 0.0
    psi1_file: str | None = None
    psi2: str = "consistent"
    smallness_target: float = 1.0 / 24.0


@dataclass(frozen=True)
class ObserverSection:
    stride: int = 1
    energy: bool = True
    snapshots: bool = False


@dataclass(frozen=True)
class LimitStudySection:
    a_values: tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)
    pairs: tuple[tuple[str, str], ...] = (("BJK", "K"), ("BJW", "W"))
    reference_refinement: int = 4
    min_reduction: float = 4.0


@dataclass(frozen=True)
class MMSSection:
    models: tuple[str, ...] = ("BJK", "K")
    levels: tuple[tuple[int, float], ...] = ((64, 0.02), (128, 0.01), (256, 0.005))
    refine: str = "both"
    profile: str = "polynomial"
    amplitude: float = 0.1
    omega: float = 2.0 * math.pi
    t_end: float = 1.0
    length: float = 1.0
    order_min: float = 1.8
    order_max: float = 2.2


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration shared by all subcommands."""

    model: str = "BJK"
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    grid: GridSection = field(default_factory=GridSection)
    stepper: StepperSection = field(default_factory=StepperSection)
    initial: InitialSection = field(default_factory=InitialSection)
    observers: ObserverSection = field(default_factory=ObserverSection)
    limit_study: LimitStudySection = field(default_factory=LimitStudySection)
    mms: MMSSection = field(default_factory=MMSSection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def a(self) -> float:
        if self.physics.a is not None:
            return self.physics.a
        return 0.0 if get_model(self.model).requires_a_zero else DEFAULT_A

    @property
    def params(self) -> PhysicalParams:
        ph = self.physics
        return PhysicalParams(ph.c0, ph.nu_lambda, ph.b_over_a, self.a)

    def make_grid(self) -> Grid:
        return Grid(self.grid.dim, self.grid.n, self.grid.length)

    def stepper_config(self) -> StepperConfig:
        s = self.stepper
        return StepperConfig(s.dt, s.t_end, s.theta, s.linear_solver_tol, s.max_linear_iters)


_OPTIONAL_NUMBERS = {"physics.a"}
_SECTION_TYPES = {
    "physics": PhysicsSection, "grid": GridSection, "stepper": StepperSection,
    "initial": InitialSection, "observers": ObserverSection,
    "limit_study": LimitStudySection, "mms": MMSSection, "output": OutputSection,
}


def _line_of(text: str, key: str) -> int | None:
    leaf = key.rsplit(".", 1)[-1]
    pattern = re.compile(rf"^\s*(\[{re.escape(leaf)}\]|{re.escape(leaf)}\s*=)")
    for i, line in enumerate(text.splitlines(), 1):
        if pattern.match(line):
            return i
    return None


def _coerce(value, default, key):
    """Convert a TOML value to the type of the dataclass default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected a boolean, got {value!r}", key)
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key)
        return value
    if isinstance(default, float) or key in _OPTIONAL_NUMBERS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key)
        return float(value)
    if isinstance(default, str) or default is None:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key)
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigError(f"expected an array, got {value!r}", key)
        return _coerce_tuple(value, default, key)
    raise ConfigError(f"unsupported value {value!r}", key)


def _coerce_tuple(value, default, key):
    sample = default[0] if default else None
    out = []
    for item in value:
        if isinstance(sample, tuple):
            if not isinstance(item, list) or len(item) != len(sample):
                raise ConfigError(f"expected arrays of length {len(sample)}, got {item!r}", key)
            out.append(tuple(_coerce(v, s, key) for v, s in zip(item, sample)))
        else:
            out.append(_coerce(item, sample, key))
    return tuple(out)


def _build_section(cls, data, prefix, strict, unknown):
    if not isinstance(data, dict):
        raise ConfigError("expected a table", prefix)
    defaults = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        full = f"{prefix}.{key}"
        if key not in names:
            unknown.append(full)
            continue
        kwargs[key] = _coerce(value, getattr(defaults, key), full)
    return cls(**kwargs)


def parse_config(text: str, strict: bool = True, base_dir: str | Path | None = None,
                 unknown: list | None = None) -> RunConfig:
    """Parse and validate a TOML configuration.

    With ``strict`` unknown keys raise :class:`ConfigError`; otherwise they
    are appended to ``unknown`` (if given) and ignored.  Relative file paths
    are resolved against ``base_dir`` for the existence check.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        m = re.search(r"line (\d+)", str(err))
        raise ConfigError(f"parse error: {err}", None, int(m.group(1)) if m else None) from err

    found = [] if unknown is None else unknown
    kwargs = {}
    for key, value in data.items():
        if key == "model":
            if not isinstance(value, str):
                raise ConfigError(f"expected a string, got {value!r}", "model", _line_of(text, key))
            kwargs["model"] = value
        elif key in _SECTION_TYPES:
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key, strict, found)
        else:
            found.append(key)
    if strict and found:
        raise ConfigError(f"unknown key {found[0]!r}", found[0], _line_of(text, found[0]))
    cfg = RunConfig(**kwargs)
    try:
        validate_config(cfg, base_dir)
    except ConfigError as err:
        if err.line is None and err.key:
            raise ConfigError(err.message, err.key, _line_of(text, err.key)) from err
        raise
    return cfg


def validate_config(cfg: RunConfig, base_dir=None) -> None:
    def check(key, fn):
        try:
            fn()
        except (DomainError, ValueError, KeyError) as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(str(err).strip("'\""), key) from err

    if cfg.model not in MODELS:
        raise ConfigError(f"unknown model {cfg.model!r}; choose from {sorted(MODELS)}", "model")
    model = get_model(cfg.model)
    if model.requires_a_zero and cfg.physics.a not in (None, 0.0):
        raise ConfigError(f"{cfg.model} requires a = 0", "physics.a")
    check("physics", lambda: cfg.params)
    check("grid", cfg.make_grid)
    check("stepper", cfg.stepper_config)

    ini = cfg.initial
    for slot in ("psi0", "psi1"):
        profile = getattr(ini, slot)
        if profile not in PROFILES or (slot == "psi1" and profile == "preset"):
            raise ConfigError(f"unknown profile {profile!r}", f"initial.{slot}")
        if profile == "file":
            path = getattr(ini, f"{slot}_file")
            if path is None:
                raise ConfigError(f"{slot} = 'file' needs {slot}_file", f"initial.{slot}_file")
            full = Path(base_dir or ".") / path
            if not full.is_file():
                raise ConfigError(f"file not found: {full}", f"initial.{slot}_file")
    if ini.psi2 not in ("consistent", "zero"):
        raise ConfigError(f"psi2 must be 'consistent' or 'zero', got {ini.psi2!r}", "initial.psi2")
    if not ini.smallness_target > 0:
        raise ConfigError("must be > 0", "initial.smallness_target")
    if cfg.observers.stride < 1:
        raise ConfigError("must be >= 1", "observers.stride")

    ls = cfg.limit_study
    a = ls.a_values
    if not a or any(x < 0 for x in a) or any(x <= y for x, y in zip(a[:-1], a[1:])):
        raise ConfigError("a_values must be non-negative and strictly decreasing", "limit_study.a_values")
    for g_name, l_name in ls.pairs:
        if g_name not in MODELS or l_name not in MODELS:
            raise ConfigError(f"unknown model in pair {(g_name, l_name)}", "limit_study.pairs")
        if not get_model(g_name).third_order or get_model(l_name).third_order:
            raise ConfigError(f"pair {(g_name, l_name)} must be (third-order, limit)", "limit_study.pairs")
    if ls.reference_refinement < 1:
        raise ConfigError("must be >= 1", "limit_study.reference_refinement")

    mm = cfg.mms
    for name in mm.models:
        if name not in MODELS:
            raise ConfigError(f"unknown model {name!r}", "mms.models")
    if len(mm.levels) < 2:
        raise ConfigError("need at least 2 refinement levels", "mms.levels")
    for n, dt in mm.levels:
        check("mms.levels", lambda n=n, dt=dt: (Grid(cfg.grid.dim, n, mm.length),
                                               StepperConfig(dt, mm.t_end)))
    if mm.refine not in ("both", "time", "space"):
        raise ConfigError(f"unknown refinement {mm.refine!r}", "mms.refine")
    if mm.profile not in ("polynomial", "cosine"):
        raise ConfigError(f"unknown profile {mm.profile!r}", "mms.profile")


def _to_toml(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_toml(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if getattr(obj, f.name) is not None}
    if isinstance(obj, tuple):
        return [_to_toml(x) for x in obj]
    return obj


def render_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(_to_toml(cfg))


def load_config(path: str | Path | None, strict: bool = True, unknown: list | None = None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    return parse_config(text, strict=strict, base_dir=path.parent, unknown=unknown)


# field files ------------------------------------------------------------------

def write_field_csv(path, grid: Grid, values) -> None:
    values = np.asarray(values, dtype=float)
    lines = ["# field v1", "i,value" if grid.dim == 1 else "i,j,value"]
    if grid.dim == 1:
        lines += [f"{i},{v!r}" for i, v in enumerate(values.tolist())]
    else:
        n = grid.n
        lines += [f"{k % n},{k // n},{v!r}" for k, v in enumerate(values.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path, grid: Grid) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "# field v1":
        raise ConfigError(f"{path}: missing '# field v1' header")
    expected = "i,value" if grid.dim == 1 else "i,j,value"
    if len(lines) < 2 or lines[1].replace(" ", "") != expected:
        raise ConfigError(f"{path}: expected column header {expected!r}")
    values = np.full(grid.size, np.nan)
    for lineno, line in enumerate(lines[2:], 3):
        parts = line.split(",")
        try:
            if grid.dim == 1:
                idx = int(parts[0])
            else:
                i, j = int(parts[0]), int(parts[1])
                if not (0 <= i < grid.n and 0 <= j < grid.n):
                    raise IndexError
                idx = j * grid.n + i
            if not 0 <= idx < grid.size or len(parts) != grid.dim + 1:
                raise IndexError
            values[idx] = float(parts[-1])
        except (ValueError, IndexError) as err:
            raise ConfigError(f"{path}: bad row {line!r}", None, lineno) from err
    if np.isnan(values).any():
        raise ConfigError(f"{path}: expected {grid.size} values for the configured grid")
    return values


# initial data -------------------------------------------------------------------

def _profile(grid: Grid, name: str, amplitude: float, path: str | None, base_dir):
    if name == "zero":
        return grid.zeros()
    if name == "sine":
        k = math.pi / grid.length
        return amplitude * np.prod([np.sin(k * c) for c in grid.coords], axis=0)
    if name == "bump":
        centre, radius = 0.5 * grid.length, 0.25 * grid.length
        r2 = sum((c - centre) ** 2 for c in grid.coords) / radius**2
        return amplitude * np.where(r2 < 1.0, (1.0 - r2) ** 4, 0.0)
    if name == "file":
        return read_field_csv(Path(base_dir or ".") / path, grid)
    raise ConfigError(f"unknown profile {name!r}")


def initial_data(cfg: RunConfig, model_name: str, base_dir=None):
    """``(psi0, psi1, psi2)`` for ``model_name``; ``psi2`` is completed at ``a = 0``."""
    grid = cfg.make_grid()
    ini = cfg.initial
    p = cfg.params if not get_model(model_name).requires_a_zero else cfg.params.with_a(0.0)
    if ini.psi0 == "preset":
        sd = small_data_preset(grid, p, model_name, ini.smallness_target)
        return sd.psi0, sd.psi1, sd.psi2
    psi0 = _profile(grid, ini.psi0, ini.psi0_amplitude, ini.psi0_file, base_dir)
    psi1 = _profile(grid, ini.psi1, ini.psi1_amplitude, ini.psi1_file, base_dir)
    if ini.psi2 == "zero":
        return psi0, psi1, grid.zeros()
    b0 = betas_for(get_model(model_name), p.with_a(0.0))
    return psi0, psi1, consistency_complete(psi0, psi1, b0, grid)


def _initial_state(cfg, model_name, base_dir):
    grid = cfg.make_grid()
    psi0, psi1, psi2 = initial_data(cfg, model_name, base_dir)
    if get_model(model_name).third_order:
        return State3(grid, psi0, psi1, psi2)
    return State2(grid, psi0, psi1)


# output helpers -----------------------------------------------------------------

def _fmt(x) -> str:
    return "%.17g" % x


def write_csv(path, header: str, columns, rows) -> None:
    lines = [header, ",".join(columns)]
    for row in rows:
        lines.append(",".join(x if isinstance(x, str) else _fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _clean(obj):
    """JSON-safe copy: NaN and infinities become None, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _betas_dict(b):
    return {k: getattr(b, k) for k in ("beta0", "beta1", "beta2", "beta3", "beta4", "beta5",
                                        "beta6", "beta1_0")}


# subcommands --------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: Path, ctx) -> dict:
    model = get_model(cfg.model)
    b = betas_for(model, cfg.params)
    init = _initial_state(cfg, cfg.model, ctx["base_dir"])
    observers = []
    energy = EnergyObserver(b) if cfg.observers.energy else None
    if energy is not None:
        observers.append(energy)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        traj = run(init, model, cfg.params, cfg.stepper_config(), observers,
                   stride=cfg.observers.stride, raise_on_failure=False)
    files = []
    if energy is not None:
        write_csv(out / "energy.csv", "# energy v1", ENERGY_COLUMNS, energy.rows())
        files.append("energy.csv")
    if cfg.observers.snapshots:
        write_field_csv(out / "psi_final.csv", traj.grid, traj.psi[-1])
        files.append("psi_final.csv")
    amin, amax, apass = alpha_bounds(traj)
    finite = all(np.isfinite(x).all() for x in traj.psi)
    completed = traj.failure is None
    return {
        "pass": bool(completed and finite),
        "model": model.name,
        "a": cfg.a,
        "betas": _betas_dict(b),
        "steps": cfg.stepper_config().n_steps,
        "samples": len(traj),
        "t_final": traj.times[-1],
        "alpha_min": amin,
        "alpha_max": amax,
        "alpha_within_bounds": apass,
        "completed": completed,
        "failure": traj.failure,
        "warnings": list(traj.warnings),
        "files": files,
    }


def cmd_limit_study(cfg: RunConfig, out: Path, ctx) -> dict:
    ls = cfg.limit_study
    grid = cfg.make_grid()
    rows, results = [], []
    ok = True
    for g_name, l_name in ls.pairs:
        psi0, psi1, _ = initial_data(cfg, g_name, ctx["base_dir"])
        res = limit_study(psi0, psi1, (g_name, l_name), ls.a_values, cfg.params.with_a(DEFAULT_A),
                          cfg.stepper_config(), grid=grid,
                          reference_refinement=ls.reference_refinement, keep_trajectories=True)
        bounds = [alpha_bounds(t) for t in res.trajectories.values()]
        alpha_ok = all(p for _, _, p in bounds)
        pair_ok = res.monotone and res.reduction >= ls.min_reduction and alpha_ok
        ok &= pair_ok
        for a, e_psi, e_h1, e_t, order in res.rows():
            rows.append((f"{g_name}->{l_name}", a, e_psi, e_h1, e_t, order))
        results.append({
            "pair": [g_name, l_name],
            "a_values": res.a_values,
            "error_psi": res.error_psi,
            "error_psi_h1": res.error_psi_h1,
            "error_psi_t": res.error_psi_t,
            "observed_orders": res.observed_orders,
            "monotone": res.monotone,
            "reduction": res.reduction,
            "alpha_min": min(b[0] for b in bounds),
            "alpha_max": max(b[1] for b in bounds),
            "pass": pair_ok,
        })
    write_csv(out / "limit_study.csv", "# limit v1",
              ("pair", "a", "error_psi", "error_psi_h1", "error_psi_t", "observed_order"), rows)
    return {"pass": bool(ok), "min_reduction": ls.min_reduction, "pairs": results,
            "files": ["limit_study.csv"]}


def cmd_hierarchy(cfg: RunConfig, out: Path, ctx) -> dict:
    psi0, psi1, psi2 = initial_data(cfg, "BJK", ctx["base_dir"])
    p = cfg.params.with_a(cfg.a if cfg.a > 0 else DEFAULT_A)
    res = hierarchy_compare(psi0, psi1, psi2, p, cfg.stepper_config(), grid=cfg.make_grid())
    rows = [(a, b, d) for (a, b), d in res.distances.items()]
    write_csv(out / "hierarchy.csv", "# hierarchy v1", ("model_a", "model_b", "distance"), rows)
    finite = all(math.isfinite(d) for d in res.distances.values())
    return {
        "pass": bool(finite),
        "a": p.a,
        "distances": [{"pair": [a, b], "distance": d} for a, b, d in rows],
        "files": ["hierarchy.csv"],
    }


def cmd_constants(cfg: RunConfig, out: Path, ctx) -> dict:
    grid = cfg.make_grid()
    model = get_model(cfg.model)
    b = betas_for(model, cfg.params)
    est = estimate_constants(grid, seed=ctx["seed"])
    init = _initial_state(cfg, cfg.model, ctx["base_dir"])
    if isinstance(init, State2):
        from .models import accel_limit

        init = State3(grid, init.psi, init.psi_t, accel_limit(init, b))
    e0, e1 = initial_energy_bounds(init, b)
    T = cfg.stepper.t_end
    energy = EnergyObserver(b)
    traj_init = init if model.third_order else State2(grid, init.psi, init.psi_t)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        run(traj_init, model, cfg.params, cfg.stepper_config(), [energy], raise_on_failure=False)
    Ebar0 = max(r.E0 for r in energy.reports)
    Ebar1 = max(r.E1 for r in energy.reports)
    Ebar2 = energy.reports[-1].E2_accum
    derived = {}
    M = None
    if b.beta0 > 0 and b.beta2 > 0:
        derived = derived_constants(est, b, T)
        norms = (grid.norm(grid.lap(init.psi)), grid.norm_grad(grid.grad_fwd(grid.lap(init.psi))))
        M = smallness_M(est, b, norms, e0, e1, T)
    else:
        derived = {"C0": (est.C_Delta * est.C_Linf * b.beta5) ** 2 / b.beta3}
    full = dataclasses.replace(est, M=M, Ebar0=Ebar0, Ebar1=Ebar1, Ebar2=Ebar2, **derived)
    values = [v for k, v in full.as_dict().items() if v is not None and k not in ("Ebar0", "Ebar1", "Ebar2", "M")]
    positive = all(math.isfinite(v) and v > 0 for v in values)
    smallness = derived["C0"] * Ebar1
    write_csv(out / "constants.csv", "# constants v1", ("name", "value"),
              [(k, v) for k, v in full.as_dict().items() if v is not None])
    return {
        "pass": bool(positive),
        "model": model.name,
        "seed": ctx["seed"],
        "constants": full.as_dict(),
        "ebar0": e0,
        "ebar1": e1,
        "C0_Ebar1": smallness,
        "smallness_ok": smallness <= 1.0 / 12.0,
        "files": ["constants.csv"],
    }


def cmd_mms(cfg: RunConfig, out: Path, ctx) -> dict:
    mm = cfg.mms
    profile = polynomial_profile if mm.profile == "polynomial" else cosine_profile(mm.omega)
    ms = ManufacturedSolution(mm.amplitude, 1, profile, discrete=(mm.refine == "time"))
    rows, results = [], []
    ok = True
    for name in mm.models:
        p = cfg.params.with_a(0.0) if get_model(name).requires_a_zero else cfg.params
        res = mms_convergence(name, ms, p, mm.levels, mm.t_end, cfg.grid.dim, mm.refine,
                              cfg.stepper.theta, mm.length)
        in_range = all(mm.order_min <= o <= mm.order_max for o in res.orders)
        model_ok = res.ok and in_range
        ok &= model_ok
        for i, ((n, dt), e, et) in enumerate(zip(res.levels, res.errors, res.errors_psi_t)):
            rows.append((name, n, dt, e, et, res.orders[i - 1] if i else float("nan")))
        results.append({"model": name, "levels": res.levels, "errors": res.errors,
                        "errors_psi_t": res.errors_psi_t, "orders": res.orders,
                        "flags": res.flags, "pass": model_ok})
    write_csv(out / "mms.csv", "# mms v1", ("model", "n", "dt", "error_psi", "error_psi_t", "order"),
              [(m, str(n), dt, e, et, o) for m, n, dt, e, et, o in rows])
    return {"pass": bool(ok), "refine": mm.refine, "models": results, "files": ["mms.csv"]}


def cmd_check_consistency(cfg: RunConfig, out: Path, ctx) -> dict:
    grid = cfg.make_grid()
    model = get_model(cfg.model)
    b0 = betas_for(model, cfg.params.with_a(0.0))
    ini = cfg.initial
    if ini.psi0 == "preset":
        psi0, psi1, _ = initial_data(cfg, cfg.model, ctx["base_dir"])
    else:
        psi0 = _profile(grid, ini.psi0, ini.psi0_amplitude, ini.psi0_file, ctx["base_dir"])
        psi1 = _profile(grid, ini.psi1, ini.psi1_amplitude, ini.psi1_file, ctx["base_dir"])
    psi2 = consistency_complete(psi0, psi1, b0, grid)
    s = State3(grid, psi0, psi1, psi2)
    res = float(np.max(np.abs(residual_F(s, b0))))
    scale = residual_F_scale(s, b0)
    tol = 1e-12 * max(scale, np.finfo(float).tiny)
    write_field_csv(out / "psi2.csv", grid, psi2)
    return {
        "pass": bool(res <= tol),
        "model": model.name,
        "residual_max": res,
        "scale": scale,
        "tolerance": tol,
        "files": ["psi2.csv"],
    }


COMMANDS = {
    "simulate": cmd_simulate,
    "limit-study": cmd_limit_study,
    "hierarchy": cmd_hierarchy,
    "constants": cmd_constants,
    "mms": cmd_mms,
    "check-consistency": cmd_check_consistency,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlacoustics", description="Nonlinear acoustics model hierarchy.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="TOML configuration file")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, default=0, help="seed for randomized constant estimation")
        sp.add_argument("--strict", action="store_true", help="reject unknown configuration keys")
    return parser


def _emit(summary: dict, out: Path | None, name: str) -> None:
    text = json.dumps(_clean(summary), indent=2, sort_keys=True, allow_nan=False)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / name).write_text(text + "\n")
        except OSError:
            pass
    print(text)


def _error_summary(command, err, kind):
    info = {"type": type(err).__name__, "message": str(err)}
    for attr in ("key", "line", "field", "constraint", "value"):
        if getattr(err, attr, None) is not None:
            info[attr] = getattr(err, attr)
    return {"schema_version": SCHEMA_VERSION, "command": command, "status": kind,
            "pass": False, "error": info}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    unknown: list[str] = []
    out = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config, strict=args.strict, unknown=unknown)
    except ConfigError as err:
        _emit(_error_summary(args.command, err, "config_error"), out, "error.json")
        return EXIT_USAGE
    out = out or Path(cfg.output.dir)
    base_dir = Path(args.config).parent if args.config else Path(".")
    ctx = {"seed": args.seed, "base_dir": base_dir}
    try:
        out.mkdir(parents=True, exist_ok=True)
        body = COMMANDS[args.command](cfg, out, ctx)
    except (ConfigError, DomainError) as err:
        _emit(_error_summary(args.command, err, "config_error"), out, "error.json")
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError, ValueError) as err:
        _emit(_error_summary(args.command, err, "run_error"), out, "error.json")
        return EXIT_FAIL
    warns = [f"unknown key ignored: {k}" for k in unknown]
    summary = {"schema_version": SCHEMA_VERSION, "command": args.command, "status": "ok",
               "config": _to_toml(cfg), **body}
    summary["warnings"] = warns + list(body.get("warnings", []))
    _emit(summary, out, "summary.json")
    return EXIT_PASS if body["pass"] else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
