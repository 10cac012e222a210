"""Experiment drivers: consistent data, the vanishing-conductivity limit,
hierarchy comparisons and manufactured-solution convergence.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .analysis import derived_constants, estimate_constants, initial_energy_bounds
from .exceptions import DomainError, InsufficientSamplesError
from .grid import Field, Grid
from .manufactured import ManufacturedSolution
from .models import DEGENERACY_FLOOR, State2, State3, check_alpha, limit_nonlinearity
from .params import Betas, ModelId, PhysicalParams, betas_for, get_model
from .timestep import StepperConfig, Trajectory, run

__all__ = [
    "consistency_complete",
    "SmallData",
    "small_data_preset",
    "LimitStudyResult",
    "limit_study",
    "HIERARCHY_PAIRS",
    "HierarchyResult",
    "hierarchy_compare",
    "MMSResult",
    "mms_convergence",
    "sup_distance",
    "observed_orders",
]


def consistency_complete(psi0, psi1, b: Betas, grid: Grid | None = None,
                         floor: float = DEGENERACY_FLOOR):
    """``psi2`` solving the consistency condition ``F(psi0, psi1, psi2) = 0``.

    Accepts :class:`Field` inputs, or plain arrays together with ``grid``;
    the return type follows the input.
    """
    as_field = grid is None
    if as_field:
        grid = psi0.grid
        psi0, psi1 = psi0.values, psi1.values
    denom = 1.0 + b.beta5 * psi1
    check_alpha(denom, floor, 0.0)
    num = b.beta1_0 * grid.lap(psi1) + b.beta3 * grid.lap(psi0) - limit_nonlinearity(grid, b, psi0, psi1)
    psi2 = num / denom
    return Field(grid, psi2) if as_field else psi2


def sine_profile(grid: Grid, mode: int = 1) -> np.ndarray:
    k = mode * math.pi / grid.length
    return np.prod([np.sin(k * c) for c in grid.coords], axis=0)


@dataclass(frozen=True, eq=False)
class SmallData:
    """Shared consistent initial data and the smallness diagnostics behind it."""

    grid: Grid
    psi0: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    amplitude: float
    C0: float
    ebar1: float

    @property
    def smallness(self) -> float:
        return self.C0 * self.ebar1

    def state3(self) -> State3:
        return State3(self.grid, self.psi0, self.psi1, self.psi2, 0.0)

    def state2(self) -> State2:
        return State2(self.grid, self.psi0, self.psi1, 0.0)


def small_data_preset(grid: Grid, p: PhysicalParams, model: ModelId | str = "BJK",
                      target: float = 1.0 / 24.0, seed: int = 0) -> SmallData:
    """Sine data ``(A sin(pi x), A sin(2 pi x), psi2)`` scaled so that ``C0 * e1 <= target``.

    ``C0`` uses the estimated embedding constants of ``grid`` and the coefficients
    of ``model`` at ``p``; ``e1`` is the initial-data energy bound, and ``psi2``
    is the consistent completion at ``a = 0``.
    """
    model = get_model(model) if isinstance(model, str) else model
    b = betas_for(model, p)
    b0 = betas_for(model, p.with_a(0.0))
    C0 = derived_constants(estimate_constants(grid, seed=seed), b, 1.0)["C0"]
    s1, s2 = sine_profile(grid, 1), sine_profile(grid, 2)

    def build(A):
        psi0, psi1 = A * s1, A * s2
        psi2 = consistency_complete(psi0, psi1, b0, grid)
        e1 = initial_energy_bounds(State3(grid, psi0, psi1, psi2), b)[1]
        return psi0, psi1, psi2, e1

    A = 1e-4
    for _ in range(8):
        e1 = build(A)[3]
        A *= math.sqrt(target / (C0 * e1))
    A *= 0.99
    psi0, psi1, psi2, e1 = build(A)
    if C0 * e1 > target:
        raise DomainError("amplitude", A, f"C0 * e1 <= {target}")
    return SmallData(grid, psi0, psi1, psi2, A, C0, e1)


def sup_distance(grid: Grid, a: Sequence[np.ndarray], b: Sequence[np.ndarray], norm: str = "l2") -> float:
    if len(a) != len(b):
        raise DomainError("samples", (len(a), len(b)), "equal lengths")
    if norm == "l2":
        return max((grid.norm(x - y) for x, y in zip(a, b)), default=0.0)
    if norm == "h1":
        return max((grid.norm_grad(grid.grad_fwd(x - y)) for x, y in zip(a, b)), default=0.0)
    raise ValueError(f"unknown norm {norm!r}")


def observed_orders(errors: Sequence[float], ratios: Sequence[float] | float = 2.0) -> list[float]:
    """``log(e_k / e_{k+1}) / log(ratio_k)``; NaN where undefined."""
    errors = list(errors)
    if isinstance(ratios, (int, float)):
        ratios = [float(ratios)] * (len(errors) - 1)
    out = []
    for e0, e1, r in zip(errors[:-1], errors[1:], ratios):
        if e0 > 0 and e1 > 0 and math.isfinite(e0) and math.isfinite(e1):
            out.append(math.log(e0 / e1) / math.log(r))
        else:
            out.append(float("nan"))
    return out


@dataclass
class LimitStudyResult:
    pair: tuple[str, str]
    a_values: list[float]
    error_psi: list[float]
    error_psi_h1: list[float]
    error_psi_t: list[float]
    observed_orders: dict[str, list[float]]
    trajectories: dict = field(default_factory=dict, repr=False)
    reference: Trajectory | None = field(default=None, repr=False)

    @property
    def monotone(self) -> bool:
        def strict(e):
            return all(x > y for x, y in zip(e[:-1], e[1:]))

        return strict(self.error_psi) and strict(self.error_psi_t)

    @property
    def reduction(self) -> float:
        """Smallest ratio first/last error over the recorded quantities."""
        ratios = []
        for e in (self.error_psi, self.error_psi_t):
            ratios.append(e[0] / e[-1] if e[-1] > 0 else math.inf)
        return min(ratios)

    def rows(self):
        for i, a in enumerate(self.a_values):
            order = self.observed_orders["psi"][i - 1] if i else float("nan")
            yield (a, self.error_psi[i], self.error_psi_h1[i], self.error_psi_t[i], order)


def limit_study(psi0, psi1, pair: tuple[str, str], a_values: Sequence[float], p_base: PhysicalParams,
                cfg: StepperConfig, grid: Grid | None = None, reference_refinement: int = 4,
                keep_trajectories: bool = False) -> LimitStudyResult:
    """Compare the general model at each ``a`` against its limit model.

    ``psi2`` is the consistent completion at ``a = 0`` and is shared by every
    run.  The limit reference is integrated with ``dt / reference_refinement``
    and sampled at the coarse times.  ``a = 0`` entries run the general model
    with vanishing conductivity.
    """
    if grid is None:
        grid = psi0.grid
        psi0, psi1 = psi0.values, psi1.values
    general, limit = (get_model(m) for m in pair)
    if not general.third_order or limit.third_order:
        raise DomainError("pair", pair, "(third-order model, limit model)")
    a_values = [float(a) for a in a_values]
    if any(a < 0 for a in a_values) or any(x <= y for x, y in zip(a_values[:-1], a_values[1:])):
        raise DomainError("a_values", a_values, "non-negative and strictly decreasing")

    b_zero = betas_for(general, p_base.with_a(0.0))
    psi2 = consistency_complete(psi0, psi1, b_zero, grid)

    ref_cfg = StepperConfig(cfg.dt / reference_refinement, cfg.t_end, cfg.theta,
                            cfg.linear_solver_tol, cfg.max_linear_iters)
    ref = run(State2(grid, psi0, psi1), limit, p_base.with_a(0.0), ref_cfg, stride=reference_refinement)

    e_psi, e_h1, e_t, trajs = [], [], [], {}
    for a in a_values:
        try:
            traj = run(State3(grid, psi0, psi1, psi2), general, p_base.with_a(a), cfg)
        except (ArithmeticError, RuntimeError) as err:
            raise type(err)(f"limit study run failed at a={a}: {err}") from err
        e_psi.append(sup_distance(grid, traj.psi, ref.psi))
        e_h1.append(sup_distance(grid, traj.psi, ref.psi, "h1"))
        e_t.append(sup_distance(grid, traj.psi_t, ref.psi_t))
        if keep_trajectories:
            trajs[a] = traj

    ratios = [x / y if y > 0 else float("nan") for x, y in zip(a_values[:-1], a_values[1:])]
    orders = {name: observed_orders(e, ratios) if len(e) > 1 else []
              for name, e in (("psi", e_psi), ("psi_h1", e_h1), ("psi_t", e_t))}
    return LimitStudyResult(tuple(pair), a_values, e_psi, e_h1, e_t, orders, trajs,
                            ref if keep_trajectories else None)


HIERARCHY_PAIRS = (
    ("BJK", "BJW"),
    ("BJK", "BCK"),
    ("BJW", "BCW"),
    ("BCK", "BCW"),
    ("BCK", "K"),
    ("BCW", "W"),
    ("K", "W"),
)


@dataclass
class HierarchyResult:
    distances: dict[tuple[str, str], float]
    trajectories: dict[str, Trajectory] = field(repr=False)


def hierarchy_compare(psi0, psi1, psi2, p: PhysicalParams, cfg: StepperConfig,
                      grid: Grid | None = None, models: Sequence[str] | None = None) -> HierarchyResult:
    """Run every model on shared data; sup-in-time L2 distances of adjacent pairs."""
    if grid is None:
        grid = psi0.grid
        psi0, psi1, psi2 = psi0.values, psi1.values, psi2.values
    names = sorted({m for pair in HIERARCHY_PAIRS for m in pair}) if models is None else list(models)
    trajs = {}
    for name in names:
        model = get_model(name)
        init = State3(grid, psi0, psi1, psi2) if model.third_order else State2(grid, psi0, psi1)
        trajs[name] = run(init, model, p, cfg)
    distances = {
        pair: sup_distance(grid, trajs[pair[0]].psi, trajs[pair[1]].psi)
        for pair in HIERARCHY_PAIRS
        if pair[0] in trajs and pair[1] in trajs
    }
    return HierarchyResult(distances, trajs)


@dataclass
class MMSResult:
    model: str
    refine: str
    levels: list[tuple[int, float]]
    errors: list[float]
    errors_psi_t: list[float]
    orders: list[float]
    flags: list[str]

    @property
    def ok(self) -> bool:
        return not self.flags


class _ErrorObserver:
    def __init__(self, ms: ManufacturedSolution, grid: Grid):
        self.ms, self.grid = ms, grid
        self.err = 0.0
        self.err_t = 0.0

    def __call__(self, s, k):
        psi, v, _, _ = self.ms.values(self.grid, s.time)
        self.err = max(self.err, self.grid.norm(s.psi - psi))
        self.err_t = max(self.err_t, self.grid.norm(s.psi_t - v))


def mms_convergence(model: ModelId | str, ms: ManufacturedSolution, p: PhysicalParams,
                    levels: Sequence[tuple[int, float]], t_end: float, dim: int = 1,
                    refine: str = "both", theta: float = 0.5, length: float = 1.0) -> MMSResult:
    """Manufactured-solution errors over refinement ``levels`` of ``(n, dt)``.

    ``refine`` selects the ratio used for the orders: ``"time"`` and
    ``"both"`` use successive ``dt`` ratios, ``"space"`` the ``h`` ratios.
    For ``"time"`` pass a solution with ``discrete=True`` so that no spatial
    error is present.  Errors are sup-in-time discrete L2 norms of ``psi``.
    """
    model = get_model(model) if isinstance(model, str) else model
    if refine not in ("both", "time", "space"):
        raise ValueError(f"refine must be 'both', 'time' or 'space', got {refine!r}")
    levels = [(int(n), float(dt)) for n, dt in levels]
    if len(levels) < 2:
        raise InsufficientSamplesError(f"need at least 2 refinement levels, got {len(levels)}")
    b = betas_for(model, p)
    errors, errors_t = [], []
    for n, dt in levels:
        grid = Grid(dim, n, length)
        obs = _ErrorObserver(ms, grid)
        if model.third_order:
            init, src = ms.state3(grid), ms.source_general(grid, b)
        else:
            init, src = ms.state2(grid), ms.source_limit(grid, b)
        run(init, model, None, StepperConfig(dt, t_end, theta), [obs], betas=b, source=src,
            verification=True)
        errors.append(obs.err)
        errors_t.append(obs.err_t)

    if refine == "space":
        ratios = [(n1 + 1) / (n0 + 1) for (n0, _), (n1, _) in zip(levels[:-1], levels[1:])]
    else:
        ratios = [dt0 / dt1 for (_, dt0), (_, dt1) in zip(levels[:-1], levels[1:])]
    orders = observed_orders(errors, ratios)
    flags = []
    if any(e == 0.0 or not math.isfinite(e) for e in errors):
        flags.append("zero or non-finite error: order undefined")
    elif any(e1 >= e0 for e0, e1 in zip(errors[:-1], errors[1:])):
        flags.append("non-monotone errors")
    return MMSResult(model.name, refine, levels, errors, errors_t, orders, flags)
