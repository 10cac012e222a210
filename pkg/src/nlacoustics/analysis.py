"""Discrete energy functionals, embedding constants and a priori bounds.

Norms of gradients use the forward (edge) gradient so that the discrete
integration-by-parts identities ``<lap f, f> = -|grad f|^2`` hold exactly;
weights ``1/alpha`` on edges are nodal averages with ``alpha = 1`` on the
boundary (``psi_t`` vanishes there).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, replace

import numpy as np

from .exceptions import DomainError, InsufficientSamplesError
from .grid import Grid
from .models import DEGENERACY_FLOOR, State2, State3, accel_limit, check_alpha, nonlinear_terms
from .params import Betas

__all__ = [
    "EnergyReport",
    "ENERGY_COLUMNS",
    "energy_report",
    "EnergyObserver",
    "alpha_bounds",
    "ConstantsEstimate",
    "estimate_constants",
    "derived_constants",
    "initial_energy_bounds",
    "smallness_M",
    "gronwall_check",
    "gronwall_margins",
    "energy_identity_terms",
    "energy_identity_residual",
    "energy_identity_residual_higher",
]

ENERGY_COLUMNS = (
    "t", "E0", "E1", "E2_accum", "alpha_min", "alpha_max",
    "E01", "E02", "E03", "E11", "E12", "E13", "E20",
)


@dataclass(frozen=True)
class EnergyReport:
    t: float
    E0: float
    E1: float
    E2_instant: float
    E2_accum: float
    E01: float
    E02: float
    E03: float
    E11: float
    E12: float
    E13: float
    E20: float
    alpha_min: float
    alpha_max: float

    def row(self):
        d = asdict(self)
        return [d[c] for c in ENERGY_COLUMNS]


def _weighted_edge_norm_sq(grid: Grid, u, inv_alpha):
    """``|| grad_fwd(u) / sqrt(alpha) ||^2`` with ``1/alpha`` averaged to edges."""
    weights = grid.to_edges(inv_alpha, ghost=1.0)
    return sum(grid.dot(w * gu, gu) for w, gu in zip(weights, grid.grad_fwd(u)))


def energy_report(s: State3, phi_t_for_alpha, b: Betas, E2_accum: float = 0.0) -> EnergyReport:
    g = s.grid
    alpha = 1.0 + b.beta5 * phi_t_for_alpha
    check_alpha(alpha, DEGENERACY_FLOOR, s.time)
    inv_alpha = 1.0 / alpha
    lap_v = g.lap(s.psi_t)
    lap_w = g.lap(s.psi_tt)

    E01 = g.dot(alpha * s.psi_tt, s.psi_tt)
    E02 = g.dot(lap_v, lap_v)
    E03 = g.norm_grad(g.grad_fwd(s.psi_t)) ** 2
    E11 = g.norm_grad(g.grad_fwd(s.psi_tt)) ** 2
    E12 = _weighted_edge_norm_sq(g, lap_v, inv_alpha)
    E13 = g.dot(inv_alpha * lap_v, lap_v)
    E20 = g.dot(inv_alpha * lap_w, lap_w)
    return EnergyReport(
        t=float(s.time),
        E0=0.5 * E01 + 0.25 * b.beta2 * E02 + 0.5 * b.beta3 * E03,
        E1=0.5 * E11 + 0.25 * b.beta2 * E12 + 0.5 * b.beta3 * E13,
        E2_instant=0.25 * b.beta1 * E20,
        E2_accum=E2_accum,
        E01=E01, E02=E02, E03=E03, E11=E11, E12=E12, E13=E13, E20=E20,
        alpha_min=float(np.min(alpha)),
        alpha_max=float(np.max(alpha)),
    )


class EnergyObserver:
    """Run observer that records self-consistent energy reports.

    Limit-model states are completed with ``psi_tt`` from the limit
    equation.  ``E2_accum`` is the trapezoid integral over recorded times.
    """

    def __init__(self, b: Betas, source=None):
        self.b = b
        self.source = source
        self.reports: list[EnergyReport] = []

    def __call__(self, s, k=None):
        if isinstance(s, State2):
            w = accel_limit(s, self.b, self.source)
            s = State3(s.grid, s.psi, s.psi_t, w, s.time)
        accum = 0.0
        rep = energy_report(s, s.psi_t, self.b)
        if self.reports:
            last = self.reports[-1]
            accum = last.E2_accum + 0.5 * (rep.t - last.t) * (rep.E2_instant + last.E2_instant)
        self.reports.append(replace(rep, E2_accum=accum))

    def rows(self):
        return [r.row() for r in self.reports]


def alpha_bounds(trajectory, lower: float = 0.5, upper: float = 1.5):
    """Extrema of ``alpha`` over all recorded times and nodes."""
    if len(trajectory) == 0:
        raise InsufficientSamplesError("empty trajectory")
    amin = min(trajectory.alpha_min)
    amax = max(trajectory.alpha_max)
    return amin, amax, bool(amin >= lower and amax <= upper)


@dataclass(frozen=True)
class ConstantsEstimate:
    """Discrete embedding constants and the derived abbreviations.

    ``C_L4``, ``C_L6``, ``C_Linf`` and ``C_Delta`` are suprema over a finite
    family of fields, hence lower estimates of the discrete constants.
    """

    C_PF: float
    C_L4: float
    C_L6: float
    C_Linf: float
    C_Delta: float
    lambda_min: float
    C0: float | None = None
    C1: float | None = None
    C2: float | None = None
    C3: float | None = None
    C4: float | None = None
    M: float | None = None
    Ebar0: float | None = None
    Ebar1: float | None = None
    Ebar2: float | None = None

    def as_dict(self):
        return asdict(self)


DENSE_LIMIT = 4096


def _candidate_ratios(grid: Grid, V: np.ndarray):
    """Column-wise norm ratios for candidate fields stored as columns of V."""
    h_d = grid.cell_volume
    l2 = np.sqrt(h_d * np.sum(V * V, axis=0))
    grad_sq = sum(h_d * np.sum((G @ V) ** 2, axis=0) for G in grid.grad_fwd_matrices)
    LV = grid.lap_matrix @ V
    lap = np.sqrt(h_d * np.sum(LV * LV, axis=0))
    h1 = np.sqrt(l2**2 + grad_sq)
    h2 = np.sqrt(l2**2 + grad_sq + lap**2)
    l4 = (h_d * np.sum(V**4, axis=0)) ** 0.25
    l6 = (h_d * np.sum(np.abs(V) ** 6, axis=0)) ** (1.0 / 6.0)
    linf = np.max(np.abs(V), axis=0)
    return {
        "C_L4": l4 / h1,
        "C_L6": l6 / h1,
        "C_Linf": linf / h2,
        "C_Delta": h2 / lap,
    }


def estimate_constants(grid: Grid, n_random: int = 100, seed: int = 0,
                       extra_fields: Sequence[np.ndarray] = ()) -> ConstantsEstimate:
    """Estimate the Poincare, embedding and elliptic constants on ``grid``.

    ``C_PF = sqrt(1 + 1/lambda_min)`` is exact for the discrete H1 norm.
    The other constants are maxima over the Dirichlet eigenbasis, ``n_random``
    random smooth fields and any ``extra_fields``.
    """
    if grid.size > DENSE_LIMIT:
        raise DomainError("grid.size", grid.size, f"<= {DENSE_LIMIT} for dense eigen-decomposition")
    neg_lap = -grid.lap_matrix.toarray()
    lam, vecs = np.linalg.eigh(neg_lap)
    lam_min = float(lam[0])
    vecs = vecs / math.sqrt(grid.cell_volume)

    rng = np.random.default_rng(seed)
    decay = lam_min / lam
    coeffs = rng.standard_normal((grid.size, n_random)) * decay[:, None]
    candidates = [vecs, vecs @ coeffs]
    if len(extra_fields):
        candidates.append(np.column_stack([np.asarray(f, dtype=float) for f in extra_fields]))
    V = np.hstack(candidates)
    ratios = _candidate_ratios(grid, V)
    return ConstantsEstimate(
        C_PF=math.sqrt(1.0 + 1.0 / lam_min),
        lambda_min=lam_min,
        **{k: float(np.max(v)) for k, v in ratios.items()},
    )


def derived_constants(c: ConstantsEstimate, b: Betas, T: float) -> dict:
    """``C0 ... C4`` for given coefficients and horizon ``T``."""
    pf4_l44 = c.C_PF**4 * c.C_L4**4
    C0 = (c.C_Delta * c.C_Linf * b.beta5) ** 2 / b.beta3
    C1 = 12.0 * pf4_l44 * (b.beta5**2 + 9.0 * b.beta6**2 / b.beta3**2)
    C2 = 54.0 * pf4_l44 * b.beta6**2 / b.beta1
    C3 = 3.0 / b.beta3
    C4 = (c.C_Delta * c.C_Linf * b.beta5 / math.sqrt(b.beta1)) * max(
        8.0 * math.sqrt(6.0),
        24.0 * math.sqrt(b.beta2) / b.beta0,
        24.0 * math.sqrt(6.0) / b.beta0 * math.sqrt(T),
    )
    return {"C0": C0, "C1": C1, "C2": C2, "C3": C3, "C4": C4}


def initial_energy_bounds(s0: State3, b: Betas):
    """The initial energies bounding the data: ``(e0, e1)``."""
    g = s0.grid
    lap1 = g.lap(s0.psi_t)
    e0 = g.norm(s0.psi_tt) ** 2 + b.beta2 * g.norm(lap1) ** 2 + g.norm_grad(g.grad_fwd(s0.psi_t)) ** 2
    e1 = (g.norm_grad(g.grad_fwd(s0.psi_tt)) ** 2
          + b.beta2 * g.norm_grad(g.grad_fwd(lap1)) ** 2 + g.norm(lap1) ** 2)
    return e0, e1


def smallness_M(c: ConstantsEstimate, b: Betas, norms, ebar0: float, ebar1: float, T: float) -> float:
    """Four-term smallness quantity of the existence result.

    ``norms`` holds ``(||lap psi0||, ||grad lap psi0||)``.
    """
    lap_psi0, grad_lap_psi0 = norms
    d = derived_constants(c, b, T)
    return (
        c.C_PF**2 * c.C_L4**2 * b.beta5 / b.beta1 * math.sqrt(ebar0)
        + d["C0"] * ebar1
        + d["C2"] / b.beta1 * (lap_psi0**2 + d["C3"] * T**2 * ebar1)
        + d["C4"] * (0.5 * grad_lap_psi0 + math.sqrt(ebar1))
    )


def _cumtrapz(values, dt):
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    if len(values) > 1:
        out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]))
    return out


def gronwall_margins(grid: Grid, phi: Sequence[np.ndarray], dt: float, T: float | None = None,
                     dphi: Sequence[np.ndarray] | None = None):
    """Right minus left side of ``|phi(t)|^2 <= 3|phi(0)|^2 + 3T int |phi_t|^2``.

    Returns ``(margins, slack)``.  Without ``dphi`` the time derivative is
    taken by second-order finite differences.  The slack is
    ``5 dt^2 max|phi_tt| max|phi|`` with ``phi_tt`` from second differences.
    """
    if len(phi) < 3:
        raise InsufficientSamplesError(f"need at least 3 samples, got {len(phi)}")
    P = np.asarray(phi, dtype=float)
    if T is None:
        T = dt * (len(P) - 1)
    D = np.gradient(P, dt, axis=0, edge_order=2) if dphi is None else np.asarray(dphi, dtype=float)
    sq = np.array([grid.dot(p, p) for p in P])
    dsq = np.array([grid.dot(d, d) for d in D])
    second = (P[2:] - 2.0 * P[1:-1] + P[:-2]) / dt**2
    max_second = max(grid.norm(s) for s in second)
    slack = 5.0 * dt**2 * max_second * float(np.sqrt(sq.max()))
    margins = 3.0 * sq[0] + 3.0 * T * _cumtrapz(dsq, dt) - sq
    return margins, slack


def gronwall_check(grid: Grid, phi, dt: float, T: float | None = None, dphi=None) -> bool:
    margins, slack = gronwall_margins(grid, phi, dt, T, dphi)
    return bool(np.all(margins + slack >= 0.0))


def _require_identity_trajectory(traj):
    if not traj.third_order:
        raise InsufficientSamplesError("energy identity needs a third-order trajectory")
    if traj.stride != 1:
        raise InsufficientSamplesError(f"energy identity needs stride 1, got {traj.stride}")
    if len(traj) < 2:
        raise InsufficientSamplesError("energy identity needs at least 2 samples")


def energy_identity_terms(traj, b: Betas | None = None, source=None):
    """Both sides of the integrated lower-order energy balance along ``traj``.

    The weight is self-consistent (``alpha = 1 + beta5 psi_t``).  Returns
    ``(times, lhs, rhs, E0_tilde)``.  ``source`` adds the work term of a
    manufactured forcing.
    """
    _require_identity_trajectory(traj)
    b = traj.betas if b is None else b
    g = traj.grid
    dt = traj.sample_dt
    e_tilde, diss, b4_cross, b4_work, nl_work = [], [], [], [], []
    for s in traj.states():
        psi, v, w = s.psi, s.psi_t, s.psi_tt
        alpha = 1.0 + b.beta5 * v
        lap_v = g.lap(v)
        e_tilde.append(0.5 * g.dot(alpha * w, w) + 0.5 * b.beta2 * g.dot(lap_v, lap_v)
                       + 0.5 * b.beta3 * g.norm_grad(g.grad_fwd(v)) ** 2)
        diss.append(g.norm_grad(g.grad_fwd(w)) ** 2)
        b4_cross.append(g.dot(lap_v, g.lap(psi)))
        b4_work.append(g.dot(lap_v, lap_v))
        r = nonlinear_terms(s, b).r
        work = g.dot(r - 0.5 * b.beta5 * w * w, w)
        if source is not None:
            work -= g.dot(source(s.time), w)
        nl_work.append(work)
    e_tilde = np.array(e_tilde)
    lhs = e_tilde + b.beta1 * _cumtrapz(diss, dt)
    rhs = (e_tilde[0] + b.beta4 * b4_cross[0] - b.beta4 * np.array(b4_cross)
           + b.beta4 * _cumtrapz(b4_work, dt) - _cumtrapz(nl_work, dt))
    return np.array(traj.times), lhs, rhs, e_tilde


def energy_identity_residual(traj, b: Betas | None = None, source=None) -> float:
    _, lhs, rhs, _ = energy_identity_terms(traj, b, source)
    return float(np.max(np.abs(lhs - rhs)))


def energy_identity_residual_higher(traj, b: Betas | None = None) -> float:
    """Diagnostic defect of the higher-order (``E1``) energy balance.

    Products of gradients are formed with the central gradient, norms with
    the forward one; the defect is therefore ``O(h^2)`` even for exact time
    integration and carries no contract.
    """
    _require_identity_trajectory(traj)
    b = traj.betas if b is None else b
    g = traj.grid
    dt = traj.sample_dt

    def gdot(u, v):
        return sum(a * c for a, c in zip(g.grad(u), g.grad(v)))

    e_tilde, diss, cross, b4_work, integrand = [], [], [], [], []
    for s in traj.states():
        psi, v, w = s.psi, s.psi_t, s.psi_tt
        alpha = 1.0 + b.beta5 * v
        ia, ia2 = 1.0 / alpha, 1.0 / alpha**2
        lap_psi, lap_v, lap_w = g.lap(psi), g.lap(v), g.lap(w)
        w12 = _weighted_edge_norm_sq(g, lap_v, ia)
        e_tilde.append(0.5 * g.norm_grad(g.grad_fwd(w)) ** 2 + 0.5 * b.beta2 * w12
                       + 0.5 * b.beta3 * g.dot(ia * lap_v, lap_v))
        diss.append(g.dot(ia * lap_w, lap_w))
        cross.append(g.dot(ia, gdot(lap_v, lap_psi)))
        b4_work.append(w12)
        r = nonlinear_terms(s, b).r
        grad_lv_sq = gdot(lap_v, lap_v)
        term = g.dot(ia * r, lap_w)
        term += b.beta2 * b.beta5 * g.dot(ia2, lap_w * gdot(lap_v, v))
        term -= 0.5 * b.beta2 * b.beta5 * g.dot(ia2, w * grad_lv_sq)
        term -= 0.5 * b.beta3 * b.beta5 * g.dot(ia2, w * lap_v**2)
        term += b.beta4 * b.beta5 * g.dot(ia2, lap_w * gdot(v, lap_psi))
        term -= b.beta4 * b.beta5 * g.dot(ia2, w * gdot(lap_v, lap_psi))
        integrand.append(term)
    e_tilde = np.array(e_tilde)
    lhs = e_tilde + b.beta1 * _cumtrapz(diss, dt)
    rhs = (e_tilde[0] + b.beta4 * cross[0] - b.beta4 * np.array(cross)
           + b.beta4 * _cumtrapz(b4_work, dt) + _cumtrapz(integrand, dt))
    return float(np.max(np.abs(lhs - rhs)))
