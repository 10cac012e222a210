"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""

import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import A_VALUES, DESK_DT, DESK_T
from oracles import (
    limit_values,
    linear_third_order_expm,
    smallness_M_by_hand,
    special_values,
    stencil_lambda_min,
)

from nlacoustics import cli
from nlacoustics.analysis import (
    ConstantsEstimate,
    alpha_bounds,
    energy_identity_terms,
    estimate_constants,
    gronwall_check,
    smallness_M,
)
from nlacoustics.grid import Field, Grid, bilaplacian, laplacian
from nlacoustics.manufactured import ManufacturedSolution
from nlacoustics.models import State3, factorization_check, residual_F
from nlacoustics.params import PhysicalParams, betas_for, compute_betas
from nlacoustics.study import limit_study, mms_convergence, small_data_preset, sup_distance
from nlacoustics.timestep import StepperConfig, run


# shared experiment runs --------------------------------------------------------------

@pytest.fixture(scope="module")
def limit_runs(desk_grid, desk_params):
    """Limit studies for both columns with the per-model small-data preset."""
    out = {}
    for pair in (("BJK", "K"), ("BJW", "W")):
        sd = small_data_preset(desk_grid, desk_params, pair[0])
        res = limit_study(sd.psi0, sd.psi1, pair, A_VALUES, desk_params,
                          StepperConfig(DESK_DT, DESK_T), grid=desk_grid, keep_trajectories=True)
        out[pair] = (sd, res)
    return out


@pytest.fixture(scope="module")
def equivalence_runs(desk_grid, desk_params):
    """Consistent data evolved by BJK with a = 0 coefficients and by K."""
    sd = small_data_preset(desk_grid, desk_params, "BJK")
    p0 = desk_params.with_a(0.0)
    cfg = StepperConfig(DESK_DT, DESK_T)
    general = run(sd.state3(), "BJK", p0, cfg)
    limit = run(sd.state2(), "K", p0, cfg)
    mms = mms_convergence("BJK", ManufacturedSolution(), desk_params,
                          [(desk_grid.n, DESK_DT), (2 * desk_grid.n, DESK_DT / 2)], DESK_T,
                          length=desk_grid.length)
    return sd, general, limit, mms.errors[0]


def _all_trajectories(limit_runs, equivalence_runs):
    trajs = []
    for _, res in limit_runs.values():
        trajs.extend(res.trajectories.values())
        trajs.append(res.reference)
    trajs.extend(equivalence_runs[1:3])
    return trajs


# 1 ------------------------------------------------------------------------------------

def test_criterion_01_coefficient_algebra(report):
    failures = []
    tuples = [
        (Fraction(1), Fraction(1, 10), Fraction(4), Fraction(1, 100)),
        (Fraction(2), Fraction(1, 10), Fraction(4), Fraction(1, 100)),
        (Fraction(3, 2), Fraction(7, 3), Fraction(5), Fraction(2)),
        (Fraction(343), Fraction(1, 40000), Fraction(2, 5), Fraction(3, 100000)),
        (Fraction(1500), Fraction(1, 1000000), Fraction(5), Fraction(1, 10**7)),
    ]
    for c0, nl, ba, a in tuples:
        p = PhysicalParams(c0, nl, ba, a)
        exp = special_values(c0, nl, ba, a)
        for s0 in (0, 1):
            for s in (0, 1):
                b = compute_betas(p, s0, s)
                got = {
                    f"beta0({s0})": b.beta0, f"beta2({s0})": b.beta2, f"beta4({s0})": b.beta4,
                    f"beta5({s})": b.beta5, f"beta6({s})": b.beta6, "beta1": b.beta1, "beta3": b.beta3,
                }
                failures += [(k, v, exp[k]) for k, v in got.items() if v != exp[k]]
                b0 = compute_betas(p.with_a(Fraction(0)), s0, s)
                for k, v in limit_values(c0, nl).items():
                    if getattr(b0, k) != v:
                        failures.append((f"{k} at a=0", getattr(b0, k), v))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        c0, nl, ba, a = 10.0 ** rng.uniform(-3, 3, size=4)
        for s0 in (0, 1):
            b = compute_betas(PhysicalParams(c0, nl, ba, a), s0, 1)
            worst = max(worst, abs(b.beta0 * b.beta4 - b.beta2) / abs(b.beta2))
    ok = not failures and worst <= 1e-14
    assert report(1, ok, f"exact mismatches={len(failures)}, max rel |b0*b4-b2|/b2={worst:.2e} <= 1e-14")


# 2 ------------------------------------------------------------------------------------

def test_criterion_02_operator_identities(report):
    rng = np.random.default_rng(7)
    bitwise = True
    for g in (Grid(1, 31), Grid(1, 200), Grid(2, 17)):
        u = rng.standard_normal(g.size)
        f = Field(g, u)
        bitwise &= np.array_equal(g.bilap(u), g.lap(g.lap(u)))
        bitwise &= np.array_equal(bilaplacian(f).values, laplacian(laplacian(f)).values)
    worst = 0.0
    for k in range(100):
        g = Grid(1 + k % 2, 24 if k % 2 else 60)
        p = PhysicalParams(*(10.0 ** rng.uniform(-1, 1, size=3)), a=10.0 ** rng.uniform(-3, 0))
        b = betas_for("BJK" if k % 3 else "BJW", p)
        fields = [Field(g, rng.standard_normal(g.size)) for _ in range(4)]
        worst = max(worst, factorization_check(b, *fields))
    ok = bitwise and worst <= 1e-12
    assert report(2, ok, f"bilap bitwise={bitwise}, max factorization gap={worst:.2e} <= 1e-12")


# 3 ------------------------------------------------------------------------------------

def test_criterion_03_scheme_verification(report, desk_params):
    ms = ManufacturedSolution(0.1)
    ns = (64, 128, 256)
    orders = {}
    for model in ("BJK", "K"):
        both = mms_convergence(model, ms, desk_params, [(n, 0.02 * 64 / n) for n in ns], 1.0)
        space = mms_convergence(model, ms, desk_params, [(n, 0.001) for n in ns], 1.0, refine="space")
        ms_d = ManufacturedSolution(0.1, discrete=True)
        time_ = mms_convergence(model, ms_d, desk_params, [(64, 0.02), (64, 0.01), (64, 0.005)], 1.0,
                                refine="time")
        orders[model] = {"both": both.orders, "space": space.orders, "time": time_.orders}
    mms_ok = all(1.8 <= o <= 2.2 for d in orders.values() for v in d.values() for o in v)

    # linear third-order runs against the dense matrix exponential
    n = 32
    g = Grid(1, n)
    b = betas_for("BJK", PhysicalParams(1.0, 0.1, 0.5, 0.05)).linearized()
    x = g.nodes_1d
    psi0, psi1, psi2 = 0.01 * np.sin(np.pi * x), 0.01 * np.sin(2 * np.pi * x), np.zeros(n)
    exact = linear_third_order_expm(n, {k: getattr(b, k) for k in ("beta1", "beta2", "beta3", "beta4")},
                                    psi0, psi1, psi2, [1.0])[0][0]
    scaled = []
    for dt in (0.04, 0.02, 0.01, 0.005):
        traj = run(State3(g, psi0, psi1, psi2), "BJK", None, StepperConfig(dt, 1.0), betas=b,
                   verification=True)
        scaled.append(g.norm(traj.psi[-1] - exact) / dt**2)
    fit_ok = max(scaled) / min(scaled) <= 4.0
    ok = mms_ok and fit_ok
    summary = "; ".join(f"{m}: " + ", ".join(f"{k}={[round(o, 3) for o in v]}" for k, v in d.items())
                        for m, d in orders.items())
    assert report(3, ok, f"{summary}; expm err/dt^2 spread={max(scaled) / min(scaled):.3f} <= 4")


# 4 ------------------------------------------------------------------------------------

def test_criterion_04_consistency_equivalence(report, equivalence_runs, desk_grid, desk_params):
    sd, general, limit, mms_error = equivalence_runs
    b0 = betas_for("BJK", desk_params.with_a(0.0))
    f_max = max(desk_grid.norm(residual_F(s, b0)) for s in general.states())
    dist = sup_distance(desk_grid, general.psi, limit.psi)
    bound = 10.0 * mms_error
    ok = f_max <= bound and dist <= bound
    assert report(4, ok, f"max|F|={f_max:.3e}, sup|BJK(a=0)-K|={dist:.3e}, bound 10*MMS={bound:.3e}")


# 5 ------------------------------------------------------------------------------------

def test_criterion_05_limit_theorem(report, limit_runs):
    ok = True
    parts = []
    for (g_name, l_name), (_, res) in limit_runs.items():
        ok &= res.monotone and res.reduction >= 4.0
        parts.append(f"{g_name}->{l_name}: strictly decreasing={res.monotone}, "
                     f"reduction={res.reduction:.2f}, orders psi={[round(o, 2) for o in res.observed_orders['psi']]}")
    assert report(5, ok, "; ".join(parts))


# 6 ------------------------------------------------------------------------------------

def test_criterion_06_nondegeneracy(report, limit_runs, equivalence_runs):
    presets = [sd for sd, _ in limit_runs.values()] + [equivalence_runs[0]]
    small = max(sd.smallness for sd in presets)
    trajs = _all_trajectories(limit_runs, equivalence_runs)
    bounds = [alpha_bounds(t) for t in trajs]
    amin = min(b[0] for b in bounds)
    amax = max(b[1] for b in bounds)
    ok = small <= 1.0 / 24.0 and all(b[2] for b in bounds)
    assert report(6, ok, f"max C0*E1={small:.4f} <= 1/24, alpha in [{amin:.4f}, {amax:.4f}] "
                         f"over {len(trajs)} runs")


# 7 ------------------------------------------------------------------------------------

def test_criterion_07_energy_identity(report, desk_grid, desk_params):
    sd = small_data_preset(desk_grid, desk_params, "BJK")
    b = betas_for("BJK", desk_params)
    dts = (0.02, 0.01, 0.005, 0.0025)
    results = {}
    for label, bb in (("linear", b.linearized()), ("nonlinear", b)):
        res = []
        for dt in dts:
            traj = run(sd.state3(), "BJK", None, StepperConfig(dt, 1.0), betas=bb, verification=True)
            _, lhs, rhs, e = energy_identity_terms(traj)
            res.append((float(np.max(np.abs(lhs - rhs))), float(e.max())))
        results[label] = res
    lin = [r for r, _ in results["linear"]]
    orders = [math.log2(x / y) for x, y in zip(lin[:-1], lin[1:])]
    rel = results["nonlinear"][-1][0] / results["nonlinear"][-1][1]
    ok = min(orders) >= 1.8 and rel <= 1e-4 and lin[0] > 0
    assert report(7, ok, f"linear orders={[round(o, 3) for o in orders]} >= 1.8, "
                         f"nonlinear relative residual={rel:.2e} <= 1e-4")


# 8 ------------------------------------------------------------------------------------

def test_criterion_08_gronwall(report, limit_runs, equivalence_runs):
    trajs = _all_trajectories(limit_runs, equivalence_runs)
    held = 0
    total = 0
    for t in trajs:
        for series in (t.psi, t.psi_t):
            total += 1
            held += gronwall_check(t.grid, series, t.sample_dt, T=t.times[-1])
    g = Grid(1, 32)
    f0 = np.sin(np.pi * g.nodes_1d)
    dt = 0.01
    ts = np.arange(101) * dt
    # phi(0) = 0 and the derivative samples withheld: the check must fail
    violation = gronwall_check(g, [t * f0 for t in ts], dt, dphi=[0.0 * f0 for _ in ts])
    ok = held == total and not violation
    assert report(8, ok, f"envelope held on {held}/{total} fields, constructed violation detected={not violation}")


# 9 ------------------------------------------------------------------------------------

def test_criterion_09_constants(report):
    g = Grid(1, 512)
    est = estimate_constants(g)
    target_pf = math.sqrt(1.0 + 1.0 / math.pi**2)
    pf_err = abs(est.C_PF / target_pf - 1.0)
    lam_ok = abs(est.lambda_min / stencil_lambda_min(512) - 1.0) <= 1e-10
    f = np.sin(np.pi * g.nodes_1d)
    lap = g.lap(f)
    h2 = math.sqrt(g.norm(f) ** 2 + g.norm_grad(g.grad_fwd(f)) ** 2 + g.norm(lap) ** 2)
    target_delta = math.sqrt(1 + math.pi**2 + math.pi**4) / math.pi**2
    delta_err = max(abs(h2 / g.norm(lap) / target_delta - 1.0), abs(est.C_Delta / target_delta - 1.0))

    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(10):
        c = ConstantsEstimate(*rng.uniform(0.5, 2.0, size=5), lambda_min=1.0)
        p = PhysicalParams(*rng.uniform(0.2, 3.0, size=4))
        b = betas_for(["BJK", "BCK", "BJW", "BCW"][rng.integers(4)], p)
        e0, e1, T, n1, n2 = rng.uniform(0.001, 0.1, size=5)
        got = smallness_M(c, b, (n1, n2), e0, e1, T)
        want = smallness_M_by_hand(c.C_PF, c.C_L4, c.C_Delta, c.C_Linf, b.beta1, b.beta2, b.beta3,
                                   b.beta5, b.beta6, b.beta0, e0, e1, T, n1, n2)
        worst = max(worst, abs(got - want) / abs(want))
    ok = pf_err <= 0.01 and delta_err <= 0.01 and lam_ok and worst <= 1e-12
    assert report(9, ok, f"C_PF rel err={pf_err:.2e}, C_Delta rel err={delta_err:.2e}, "
                         f"M vs hand oracle max rel={worst:.1e}")


# 10 -----------------------------------------------------------------------------------

def test_criterion_10_determinism(report, tmp_path):
    config = tmp_path / "run.toml"
    config.write_text(
        'model = "BJK"\n[grid]\nn = 48\n[stepper]\ndt = 0.02\nt_end = 0.5\n'
        '[observers]\nsnapshots = true\n'
    )
    outs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        for command in ("simulate", "hierarchy", "check-consistency"):
            code = cli.main([command, str(config), "--out", str(out / command)])
            assert code == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*.csv"))
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    ok = same and len(files) >= 4
    assert report(10, ok, f"{len(files)} CSV files bit-identical across two runs={same}")
