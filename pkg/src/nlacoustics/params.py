"""Physical constants, model selection and the unified coefficient set.

Every model of the hierarchy (BJK, BCK, BJW, BCW and the limits K, W) is the
same equation with different values of seven scalar coefficients
``beta0 ... beta6``.  The coefficients depend on the fluid only through the
speed of sound ``c0``, the combined diffusivity ``nu_lambda``, the
nonlinearity parameter ``b_over_a`` and the thermal conductivity ``a``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction

from .exceptions import DomainError

__all__ = [
    "PhysicalParams",
    "ModelId",
    "MODELS",
    "Betas",
    "from_fluid",
    "compute_betas",
    "get_model",
    "betas_for",
]


@dataclass(frozen=True)
class PhysicalParams:
    """Fluid constants entering the coefficient set.

    Parameters
    ----------
    c0 : float
        Speed of sound, > 0.
    nu_lambda : float
        Combined diffusivity nu * Lambda, > 0.
    b_over_a : float
        Parameter of nonlinearity B/A, > 0.
    a : float
        Thermal conductivity nu / Pr, >= 0.  Zero is admitted and encodes
        the limit models exactly.
    """

    c0: float
    nu_lambda: float
    b_over_a: float
    a: float

    def __post_init__(self):
        for name in ("c0", "nu_lambda", "b_over_a"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(name, value, "> 0")
        if not self.a >= 0:
            raise DomainError("a", self.a, ">= 0")

    def with_a(self, a: float) -> "PhysicalParams":
        return dataclasses.replace(self, a=a)


def from_fluid(mu, mu_b, rho0, pr, c0, b_over_a) -> PhysicalParams:
    """Build :class:`PhysicalParams` from raw fluid data.

    Uses the kinematic viscosity ``nu = mu / rho0``, ``Lambda = mu_b / mu + 4/3``
    and ``a = nu / pr``.
    """
    inputs = {"mu": mu, "mu_b": mu_b, "rho0": rho0, "pr": pr, "c0": c0, "b_over_a": b_over_a}
    for name, value in inputs.items():
        if not value > 0:
            raise DomainError(name, value, "> 0")
    nu = mu / rho0
    # Fraction(4, 3) keeps exact inputs exact and promotes to float otherwise
    lam = mu_b / mu + Fraction(4, 3)
    return PhysicalParams(c0=c0, nu_lambda=nu * lam, b_over_a=b_over_a, a=nu / pr)


@dataclass(frozen=True)
class ModelId:
    name: str
    sigma0: int
    sigma: int
    requires_a_zero: bool

    @property
    def third_order(self) -> bool:
        return not self.requires_a_zero


# K and W carry sigma0 = 1; at a = 0 none of the coefficients depend on it.
MODELS = {
    "BJK": ModelId("BJK", 1, 1, False),
    "BCK": ModelId("BCK", 0, 1, False),
    "BJW": ModelId("BJW", 1, 0, False),
    "BCW": ModelId("BCW", 0, 0, False),
    "K": ModelId("K", 1, 1, True),
    "W": ModelId("W", 1, 0, True),
}


def get_model(name: str) -> ModelId:
    try:
        return MODELS[name.upper()]
    except KeyError:
        raise DomainError("model", name, f"one of {sorted(MODELS)}") from None


@dataclass(frozen=True)
class Betas:
    """Coefficients of the unified model.

    ``beta1_0`` is the limiting value of ``beta1`` as ``a -> 0`` (that is
    ``nu_lambda``); it enters the integrated reformulation and the
    consistency condition.  ``override`` marks instances whose values were
    altered for verification runs (for instance ``beta5 = 0``).
    """

    beta0: float
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    beta5: float
    beta6: float
    beta1_0: float
    a: float
    sigma0: int
    sigma: int
    override: bool = False

    def linearized(self) -> "Betas":
        """Verification-only copy with the nonlinearity switched off."""
        return dataclasses.replace(self, beta5=0.0, beta6=0.0, override=True)

    def with_override(self, **changes) -> "Betas":
        return dataclasses.replace(self, override=True, **changes)

    def limit(self) -> "Betas":
        """Coefficients of the same (sigma0, sigma) family at a = 0."""
        nu_lambda = self.beta1_0
        c0_sq = self.beta3
        return dataclasses.replace(
            self,
            beta0=nu_lambda / c0_sq,
            beta1=nu_lambda,
            beta2=0.0,
            beta4=0.0,
            a=0.0,
        )


def compute_betas(p: PhysicalParams, sigma0: int, sigma: int) -> Betas:
    if sigma0 not in (0, 1):
        raise DomainError("sigma0", sigma0, "in {0, 1}")
    if sigma not in (0, 1):
        raise DomainError("sigma", sigma, "in {0, 1}")
    a, nl, ba, c0 = p.a, p.nu_lambda, p.b_over_a, p.c0
    c0_sq = c0 * c0
    return Betas(
        beta0=(nl + (1 - sigma0) * a * ba) / c0_sq,
        beta1=a * (1 + ba) + nl,
        # same value as a (nl + a ba + sigma0 ba (nl - a)) without the a*ba cancellation
        beta2=a * (nl * (1 + sigma0 * ba) + (1 - sigma0) * a * ba),
        beta3=c0_sq,
        beta4=a * (1 + sigma0 * ba) * c0_sq,
        beta5=(2 * (1 - sigma) + ba) / c0_sq,
        beta6=float(sigma),
        beta1_0=nl,
        a=a,
        sigma0=sigma0,
        sigma=sigma,
    )


def betas_for(model: ModelId | str, p: PhysicalParams) -> Betas:
    """Coefficients for a named model; K and W always use ``a = 0``."""
    if isinstance(model, str):
        model = get_model(model)
    if model.requires_a_zero:
        p = p.with_a(0.0)
    return compute_betas(p, model.sigma0, model.sigma)
