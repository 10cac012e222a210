"""Separable manufactured solutions ``psi = A * X(x) * T(t)`` and their sources.

``X`` is a product of ``sin(k pi x_j / L)``, so ``lap X = -mu X`` with
``mu = dim * (k pi / L)**2`` and the boundary conditions hold exactly.  The
source can be built from the continuous operators (the usual MMS, error
``O(h^2 + dt^2)``) or from the grid operators, in which case the sampled
exact solution solves the semi-discrete system exactly and only the time
discretisation error remains.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .models import State2, State3
from .params import Betas

__all__ = ["TimeProfile", "polynomial_profile", "cosine_profile", "ManufacturedSolution"]

TimeProfile = Callable[[float], tuple[float, float, float, float]]


def polynomial_profile(t: float):
    """``1 + t**2 / 2`` and its first three derivatives."""
    return (1.0 + 0.5 * t * t, t, 1.0, 0.0)


def cosine_profile(omega: float = 2.0 * np.pi) -> TimeProfile:
    def profile(t):
        c, s = np.cos(omega * t), np.sin(omega * t)
        return (c, -omega * s, -omega**2 * c, omega**3 * s)

    return profile


@dataclass(frozen=True)
class ManufacturedSolution:
    amplitude: float = 0.1
    mode: int = 1
    profile: TimeProfile = polynomial_profile
    discrete: bool = False

    def _spatial(self, grid: Grid):
        k = self.mode * np.pi / grid.length
        sines = [np.sin(k * c) for c in grid.coords]
        cosines = [np.cos(k * c) for c in grid.coords]
        X = np.prod(sines, axis=0)
        if self.discrete:
            lapX = grid.lap(X)
            bilapX = grid.bilap(X)
            grads = grid.grad(X)
        else:
            mu = grid.dim * k * k
            lapX = -mu * X
            bilapX = mu * mu * X
            grads = []
            for j in range(grid.dim):
                comp = k * cosines[j]
                for i in range(grid.dim):
                    if i != j:
                        comp = comp * sines[i]
                grads.append(comp)
        grad_sq = sum(gc * gc for gc in grads)
        return X, lapX, bilapX, grad_sq

    def values(self, grid: Grid, t: float):
        """``(psi, psi_t, psi_tt, psi_ttt)`` sampled on the grid."""
        X = self._spatial(grid)[0]
        return tuple(self.amplitude * d * X for d in self.profile(t))

    def state3(self, grid: Grid, t: float = 0.0) -> State3:
        psi, v, w, _ = self.values(grid, t)
        return State3(grid, psi, v, w, t)

    def state2(self, grid: Grid, t: float = 0.0) -> State2:
        psi, v, _, _ = self.values(grid, t)
        return State2(grid, psi, v, t)

    def source_general(self, grid: Grid, b: Betas):
        X, lapX, bilapX, grad_sq = self._spatial(grid)
        A = self.amplitude

        def source(t):
            T0, T1, T2, T3 = self.profile(t)
            alpha = 1.0 + b.beta5 * A * T1 * X
            out = alpha * A * T3 * X
            out = out - b.beta1 * A * T2 * lapX + b.beta2 * A * T1 * bilapX
            out = out - b.beta3 * A * T1 * lapX + b.beta4 * A * T0 * bilapX
            r = b.beta5 * (A * T2 * X) ** 2 + 2.0 * b.beta6 * A * A * (T2 * T0 + T1 * T1) * grad_sq
            return out + r

        return source

    def source_limit(self, grid: Grid, b: Betas):
        X, lapX, _, grad_sq = self._spatial(grid)
        A = self.amplitude

        def source(t):
            T0, T1, T2, _ = self.profile(t)
            alpha = 1.0 + b.beta5 * A * T1 * X
            out = alpha * A * T2 * X - b.beta1_0 * A * T1 * lapX - b.beta3 * A * T0 * lapX
            return out + 2.0 * b.beta6 * A * A * T1 * T0 * grad_sq

        return source
