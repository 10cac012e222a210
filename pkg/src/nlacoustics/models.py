"""Semi-discrete right-hand sides of the model hierarchy.

The third-order models are evolved in the differentiated form

    alpha * psi_ttt = beta1 lap psi_tt - beta2 bilap psi_t + beta3 lap psi_t
                      - beta4 bilap psi - r

with ``alpha = 1 + beta5 psi_t`` and
``r = beta5 psi_tt**2 + 2 beta6 (grad psi_tt . grad psi + |grad psi_t|**2)``.
The limit models (K, W) are evolved as

    (1 + beta5 psi_t) psi_tt = beta1_0 lap psi_t + beta3 lap psi
                               - 2 beta6 grad psi_t . grad psi.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateAlphaError, InsufficientSamplesError, UnsupportedModelError
from .grid import Grid
from .params import Betas

__all__ = [
    "DEGENERACY_FLOOR",
    "State3",
    "State2",
    "NonlinearTerms",
    "nonlinear_terms",
    "linear_part_general",
    "accel_general",
    "accel_limit",
    "residual_F",
    "residual_F_scale",
    "dF_rhs",
    "dF_identity_residual",
    "factorization_check",
    "check_alpha",
]

DEGENERACY_FLOOR = 1e-6

Source = Callable[[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class State3:
    """Snapshot ``(psi, psi_t, psi_tt)`` of a third-order model."""

    grid: Grid
    psi: np.ndarray
    psi_t: np.ndarray
    psi_tt: np.ndarray
    time: float = 0.0

    def arrays(self):
        return (self.psi, self.psi_t, self.psi_tt)


@dataclass(frozen=True, eq=False)
class State2:
    """Snapshot ``(psi, psi_t)`` of a limit model."""

    grid: Grid
    psi: np.ndarray
    psi_t: np.ndarray
    time: float = 0.0

    def arrays(self):
        return (self.psi, self.psi_t)


@dataclass(frozen=True, eq=False)
class NonlinearTerms:
    alpha: np.ndarray
    r: np.ndarray


def _grad_dot(grid, u, v):
    return sum(gu * gv for gu, gv in zip(grid.grad(u), grid.grad(v)))


def check_alpha(alpha, floor=DEGENERACY_FLOOR, time=None):
    amin = float(np.min(alpha))
    if not amin > floor:
        raise DegenerateAlphaError(amin, floor, time)
    return amin


def nonlinear_terms(s: State3, b: Betas) -> NonlinearTerms:
    g = s.grid
    alpha = 1.0 + b.beta5 * s.psi_t
    r = b.beta5 * s.psi_tt**2
    if b.beta6:
        r = r + 2.0 * b.beta6 * (_grad_dot(g, s.psi_tt, s.psi) + _grad_dot(g, s.psi_t, s.psi_t))
    return NonlinearTerms(alpha=alpha, r=r)


def linear_part_general(grid: Grid, b: Betas, psi, psi_t, psi_tt) -> np.ndarray:
    """``beta1 lap psi_tt - beta2 bilap psi_t + beta3 lap psi_t - beta4 bilap psi``."""
    out = b.beta1 * grid.lap(psi_tt) + b.beta3 * grid.lap(psi_t)
    if b.beta2:
        out = out - b.beta2 * grid.bilap(psi_t)
    if b.beta4:
        out = out - b.beta4 * grid.bilap(psi)
    return out


def accel_general(
    s: State3, b: Betas, source: Source | None = None, floor: float = DEGENERACY_FLOOR
) -> np.ndarray:
    """Third time derivative ``psi_ttt`` of a third-order model."""
    nl = nonlinear_terms(s, b)
    check_alpha(nl.alpha, floor, s.time)
    rhs = linear_part_general(s.grid, b, s.psi, s.psi_t, s.psi_tt) - nl.r
    if source is not None:
        rhs = rhs + source(s.time)
    return rhs / nl.alpha


def limit_nonlinearity(grid: Grid, b: Betas, psi, psi_t) -> np.ndarray:
    if not b.beta6:
        return np.zeros_like(psi)
    return 2.0 * b.beta6 * _grad_dot(grid, psi_t, psi)


def accel_limit(
    s: State2, b: Betas, source: Source | None = None, floor: float = DEGENERACY_FLOOR
) -> np.ndarray:
    """Second time derivative ``psi_tt`` of a limit model (uses ``beta1_0``)."""
    g = s.grid
    alpha = 1.0 + b.beta5 * s.psi_t
    check_alpha(alpha, floor, s.time)
    num = b.beta1_0 * g.lap(s.psi_t) + b.beta3 * g.lap(s.psi) - limit_nonlinearity(g, b, s.psi, s.psi_t)
    if source is not None:
        num = num + source(s.time)
    return num / alpha


def residual_F(s: State3, b: Betas) -> np.ndarray:
    """Pointwise value of the integrated-form residual F(psi)."""
    g = s.grid
    out = s.psi_tt - b.beta1_0 * g.lap(s.psi_t) - b.beta3 * g.lap(s.psi)
    out = out + b.beta5 * s.psi_tt * s.psi_t
    return out + limit_nonlinearity(g, b, s.psi, s.psi_t)


def residual_F_scale(s: State3, b: Betas) -> float:
    """Sum of the sup norms of the individual terms of F, the round-off scale."""
    g = s.grid
    terms = [
        s.psi_tt,
        b.beta1_0 * g.lap(s.psi_t),
        b.beta3 * g.lap(s.psi),
        b.beta5 * s.psi_tt * s.psi_t,
        limit_nonlinearity(g, b, s.psi, s.psi_t),
    ]
    return float(sum(np.max(np.abs(t)) for t in terms))


def dF_rhs(s: State3, b: Betas) -> np.ndarray:
    """Right-hand side of the evolution law for F along a general-model solution."""
    g = s.grid
    out = (b.beta1 - b.beta1_0) * g.lap(s.psi_tt)
    if b.beta2:
        out = out - b.beta2 * g.bilap(s.psi_t)
    if b.beta4:
        out = out - b.beta4 * g.bilap(s.psi)
    return out


def dF_identity_residual(samples: Sequence[State3], b: Betas) -> float:
    """Max L2 defect of the central-difference time derivative of F.

    ``samples`` must be equispaced in time.
    """
    if len(samples) < 3:
        raise InsufficientSamplesError(f"need at least 3 samples, got {len(samples)}")
    F = [residual_F(s, b) for s in samples]
    worst = 0.0
    for k in range(1, len(samples) - 1):
        step = samples[k + 1].time - samples[k - 1].time
        if step == 0:
            # a frozen trajectory: dF/dt is zero by construction
            dF = np.zeros_like(F[k])
        else:
            dF = (F[k + 1] - F[k - 1]) / step
        worst = max(worst, samples[k].grid.norm(dF - dF_rhs(samples[k], b)))
    return worst


def factorization_check(b: Betas, psi, psi_t, psi_tt, psi_ttt, grid: Grid | None = None) -> float:
    """Relative gap between the expanded linear operator and heat o wave.

    The four arrays stand for psi and its first three time derivatives; time
    differentiation acts by shifting between slots.  Only the
    Brunnhuber-Jordan family (``sigma0 = 1``) factorises with these inner
    coefficients.
    """
    if b.sigma0 != 1:
        raise UnsupportedModelError("factorization_check is defined for sigma0 = 1 only")
    if grid is None:
        grid = psi.grid
        psi, psi_t, psi_tt, psi_ttt = (f.values for f in (psi, psi_t, psi_tt, psi_ttt))
    lap = grid.lap
    nu_lambda = b.beta0 * b.beta3
    kappa = b.beta1 - nu_lambda
    c0_sq = b.beta3

    expanded_terms = [
        psi_ttt,
        -b.beta1 * lap(psi_tt),
        b.beta2 * grid.bilap(psi_t),
        -b.beta3 * lap(psi_t),
        b.beta4 * grid.bilap(psi),
    ]
    expanded = sum(expanded_terms)

    # wave operator W(psi) and its time derivative, then (d/dt - kappa lap) W
    wave = psi_tt - nu_lambda * lap(psi_t) - c0_sq * lap(psi)
    wave_t = psi_ttt - nu_lambda * lap(psi_tt) - c0_sq * lap(psi_t)
    composed = wave_t - kappa * lap(wave)

    scale = sum(grid.norm(t) for t in expanded_terms)
    if scale == 0.0:
        return 0.0
    return grid.norm(expanded - composed) / scale
