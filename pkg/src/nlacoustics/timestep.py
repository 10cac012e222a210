"""Linearly implicit theta-method for the third-order and limit models.

Both systems are written in first-order form.  The stiff linear terms are
treated by the theta-method; the leading coefficient ``alpha`` and the
nonlinearity are frozen at the extrapolated midpoint state
``1.5 u^n - 0.5 u^{n-1}`` (``u^0`` on the first step), so each step costs a
single sparse linear solve and no Newton iteration.

Eliminating the lower components yields one system for the increment of the
highest derivative.  For the third-order model, with ``L`` the Dirichlet
Laplacian,

    [diag(alpha*) - dt th b1 L - dt^2 th^2 (b3 L - b2 L^2) + dt^3 th^3 b4 L^2] dw = rhs,

which is symmetric positive definite whenever ``alpha* > 0``.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import DomainError, LinearSolverError
from .grid import Grid
from .models import (
    DEGENERACY_FLOOR,
    State2,
    State3,
    check_alpha,
    limit_nonlinearity,
    linear_part_general,
    nonlinear_terms,
)
from .params import Betas, ModelId, PhysicalParams, betas_for, get_model

__all__ = [
    "StepperConfig",
    "Trajectory",
    "GeneralStepper",
    "LimitStepper",
    "step_general",
    "step_limit",
    "run",
    "explicit_rate_estimate",
]

logger = logging.getLogger(__name__)

DIRECT_SOLVE_LIMIT = 20000


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    t_end: float
    theta: float = 0.5
    linear_solver_tol: float = 1e-10
    max_linear_iters: int = 2000

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt", self.dt, "> 0")
        if not self.t_end >= 0:
            raise DomainError("t_end", self.t_end, ">= 0")
        if not 0.5 <= self.theta <= 1.0:
            raise DomainError("theta", self.theta, "in [0.5, 1]")
        if not self.linear_solver_tol > 0:
            raise DomainError("linear_solver_tol", self.linear_solver_tol, "> 0")
        if self.max_linear_iters < 1:
            raise DomainError("max_linear_iters", self.max_linear_iters, ">= 1")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
            raise DomainError("t_end", self.t_end, f"an integer multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def _solve(matrix, rhs, cfg: StepperConfig):
    if matrix.shape[0] <= DIRECT_SOLVE_LIMIT:
        return spla.splu(matrix.tocsc()).solve(rhs)
    diag = matrix.diagonal()
    precond = spla.LinearOperator(matrix.shape, matvec=lambda x: x / diag)
    sol, info = spla.cg(
        matrix, rhs, rtol=cfg.linear_solver_tol, maxiter=cfg.max_linear_iters, M=precond
    )
    res = np.linalg.norm(matrix @ sol - rhs) / max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if info != 0 and res > cfg.linear_solver_tol:
        raise LinearSolverError(res, cfg.linear_solver_tol, cfg.max_linear_iters)
    return sol


def _theta_source(source, t, dt, theta):
    if source is None:
        return None
    return theta * source(t + dt) + (1.0 - theta) * source(t)


class GeneralStepper:
    """Stepper for ``alpha psi_ttt = linear part - r (+ source)``."""

    def __init__(self, grid: Grid, b: Betas, cfg: StepperConfig, source=None,
                 floor: float = DEGENERACY_FLOOR):
        self.grid, self.b, self.cfg, self.source, self.floor = grid, b, cfg, source, floor
        dt, th = cfg.dt, cfg.theta
        L = grid.lap_matrix
        K = -(dt * th * b.beta1 + dt**2 * th**2 * b.beta3) * L
        if b.beta2 or b.beta4:
            K = K + (dt**2 * th**2 * b.beta2 + dt**3 * th**3 * b.beta4) * grid.bilap_matrix
        self._stiff = K.tocsr()

    def step(self, s: State3, prev: State3 | None = None) -> State3:
        g, b, dt, th = self.grid, self.b, self.cfg.dt, self.cfg.theta
        psi, v, w = s.psi, s.psi_t, s.psi_tt
        if prev is None:
            pred = s
        else:
            pred = State3(g, 1.5 * psi - 0.5 * prev.psi, 1.5 * v - 0.5 * prev.psi_t,
                          1.5 * w - 0.5 * prev.psi_tt, s.time + 0.5 * dt)
        nl = nonlinear_terms(pred, b)
        check_alpha(nl.alpha, self.floor, s.time)

        rhs = dt * (linear_part_general(g, b, psi, v, w) - nl.r)
        coupled = b.beta3 * g.lap(dt * w)
        if b.beta2:
            coupled = coupled - b.beta2 * g.bilap(dt * w)
        if b.beta4:
            coupled = coupled - b.beta4 * g.bilap(dt * v + dt * dt * th * w)
        rhs = rhs + dt * th * coupled
        f = _theta_source(self.source, s.time, dt, th)
        if f is not None:
            rhs = rhs + dt * f

        matrix = self._stiff + sp.diags(nl.alpha, format="csr")
        dw = _solve(matrix, rhs, self.cfg)
        dv = dt * w + dt * th * dw
        dpsi = dt * v + dt * dt * th * w + (dt * th) ** 2 * dw
        return State3(g, psi + dpsi, v + dv, w + dw, s.time + dt)


class LimitStepper:
    """Stepper for ``(1 + beta5 psi_t) psi_tt = beta1_0 lap psi_t + beta3 lap psi - n``."""

    def __init__(self, grid: Grid, b: Betas, cfg: StepperConfig, source=None,
                 floor: float = DEGENERACY_FLOOR):
        self.grid, self.b, self.cfg, self.source, self.floor = grid, b, cfg, source, floor
        dt, th = cfg.dt, cfg.theta
        L = grid.lap_matrix
        self._stiff = (-(dt * th * b.beta1_0 + dt**2 * th**2 * b.beta3) * L).tocsr()

    def step(self, s: State2, prev: State2 | None = None) -> State2:
        g, b, dt, th = self.grid, self.b, self.cfg.dt, self.cfg.theta
        psi, v = s.psi, s.psi_t
        if prev is None:
            psi_p, v_p = psi, v
        else:
            psi_p, v_p = 1.5 * psi - 0.5 * prev.psi, 1.5 * v - 0.5 * prev.psi_t
        alpha = 1.0 + b.beta5 * v_p
        check_alpha(alpha, self.floor, s.time)

        rhs = dt * (b.beta1_0 * g.lap(v) + b.beta3 * g.lap(psi) - limit_nonlinearity(g, b, psi_p, v_p))
        rhs = rhs + dt * dt * th * b.beta3 * g.lap(v)
        f = _theta_source(self.source, s.time, dt, th)
        if f is not None:
            rhs = rhs + dt * f

        matrix = self._stiff + sp.diags(alpha, format="csr")
        dv = _solve(matrix, rhs, self.cfg)
        dpsi = dt * v + dt * th * dv
        return State2(g, psi + dpsi, v + dv, s.time + dt)


def step_general(s: State3, b: Betas, cfg: StepperConfig, prev: State3 | None = None,
                 source=None) -> State3:
    """One step of the third-order scheme (assembles the stiff part afresh)."""
    return GeneralStepper(s.grid, b, cfg, source).step(s, prev)


def step_limit(s: State2, b: Betas, cfg: StepperConfig, prev: State2 | None = None,
               source=None) -> State2:
    return LimitStepper(s.grid, b, cfg, source).step(s, prev)


def explicit_rate_estimate(s: State3 | State2, b: Betas, iters: int = 30) -> float:
    """Power-iteration estimate of the largest rate of the frozen explicit terms.

    Linearises the nonlinearity with respect to the highest derivative,
    divided by ``alpha``.
    """
    g = s.grid
    alpha = 1.0 + b.beta5 * s.psi_t
    if not np.min(alpha) > DEGENERACY_FLOOR:
        # the first step reports the degeneracy
        return 0.0
    if isinstance(s, State3):
        top, gpsi = s.psi_tt, g.grad(s.psi)

        def apply(x):
            out = 2.0 * b.beta5 * top * x
            if b.beta6:
                out = out + 2.0 * b.beta6 * sum(gx * gp for gx, gp in zip(g.grad(x), gpsi))
            return out / alpha
    else:
        gpsi = g.grad(s.psi)

        def apply(x):
            if not b.beta6:
                return np.zeros_like(x)
            return 2.0 * b.beta6 * sum(gx * gp for gx, gp in zip(g.grad(x), gpsi)) / alpha

    x = np.random.default_rng(0).standard_normal(g.size)
    x /= np.linalg.norm(x)
    rate = 0.0
    for _ in range(iters):
        y = apply(x)
        rate = float(np.linalg.norm(y))
        if rate == 0.0:
            return 0.0
        x = y / rate
    return rate


@dataclass
class Trajectory:
    """Recorded states of one run (every ``stride`` steps plus the final one)."""

    model: str
    grid: Grid
    betas: Betas
    dt: float
    stride: int
    times: list[float] = field(default_factory=list)
    psi: list[np.ndarray] = field(default_factory=list)
    psi_t: list[np.ndarray] = field(default_factory=list)
    psi_tt: list[np.ndarray] | None = field(default_factory=list)
    alpha_min: list[float] = field(default_factory=list)
    alpha_max: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    failure: dict | None = None

    @property
    def third_order(self) -> bool:
        return self.psi_tt is not None

    def record(self, s):
        self.times.append(float(s.time))
        self.psi.append(s.psi)
        self.psi_t.append(s.psi_t)
        if self.psi_tt is not None:
            self.psi_tt.append(s.psi_tt)
        alpha = 1.0 + self.betas.beta5 * s.psi_t
        self.alpha_min.append(float(np.min(alpha)))
        self.alpha_max.append(float(np.max(alpha)))

    def __len__(self):
        return len(self.times)

    def state(self, k: int):
        if self.third_order:
            return State3(self.grid, self.psi[k], self.psi_t[k], self.psi_tt[k], self.times[k])
        return State2(self.grid, self.psi[k], self.psi_t[k], self.times[k])

    def states(self):
        return [self.state(k) for k in range(len(self))]

    @property
    def sample_dt(self) -> float:
        return self.dt * self.stride


Observer = Callable[[object, int], None]


def run(
    initial: State3 | State2,
    model: ModelId | str,
    p: PhysicalParams | None,
    cfg: StepperConfig,
    observers: Sequence[Observer] = (),
    stride: int = 1,
    *,
    betas: Betas | None = None,
    source=None,
    verification: bool = False,
    raise_on_failure: bool = True,
) -> Trajectory:
    """Integrate ``initial`` to ``cfg.t_end``.

    ``betas`` overrides the coefficients derived from ``p``; overridden
    coefficients and manufactured sources are only accepted with
    ``verification=True``.
    """
    if isinstance(model, str):
        model = get_model(model)
    if betas is None:
        if p is None:
            raise ValueError("either p or betas is required")
        betas = betas_for(model, p)
    if (betas.override or source is not None) and not verification:
        raise ValueError("coefficient overrides and sources require verification=True")
    if not verification and not betas.beta5 > 0:
        raise DomainError("beta5", betas.beta5, "> 0")
    if stride < 1:
        raise DomainError("stride", stride, ">= 1")

    third = model.third_order
    if third and not isinstance(initial, State3):
        raise TypeError(f"{model.name} evolves State3, got {type(initial).__name__}")
    if not third and not isinstance(initial, State2):
        raise TypeError(f"{model.name} evolves State2, got {type(initial).__name__}")

    grid = initial.grid
    stepper_cls = GeneralStepper if third else LimitStepper
    stepper = stepper_cls(grid, betas, cfg, source)
    traj = Trajectory(model.name, grid, betas, cfg.dt, stride, psi_tt=[] if third else None)

    rate = explicit_rate_estimate(initial, betas)
    if cfg.dt * rate > 2.0:
        msg = f"dt * explicit rate estimate = {cfg.dt * rate:.3g} exceeds 2"
        traj.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    def notify(s, k):
        traj.record(s)
        for obs in observers:
            obs(s, k)

    s, prev = initial, None
    notify(s, 0)
    n = cfg.n_steps
    for k in range(1, n + 1):
        try:
            new = stepper.step(s, prev)
        except (ArithmeticError, LinearSolverError) as err:
            traj.failure = {"time": float(s.time), "error": str(err), "type": type(err).__name__}
            logger.warning("run aborted at t=%g: %s", s.time, err)
            if raise_on_failure:
                err.trajectory = traj
                raise
            return traj
        # exact step times, independent of accumulated round-off
        new = type(new)(grid, *new.arrays(), k * cfg.dt)
        prev, s = s, new
        if k % stride == 0 or k == n:
            notify(s, k)
    return traj
