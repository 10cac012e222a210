import numpy as np
import pytest

from nlacoustics.analysis import alpha_bounds
from nlacoustics.exceptions import DomainError
from nlacoustics.grid import Grid
from nlacoustics.models import State2, State3
from nlacoustics.params import PhysicalParams, compute_betas
from nlacoustics.study import consistency_complete, small_data_preset
from nlacoustics.timestep import StepperConfig, run, step_general, step_limit
from oracles import dirichlet_second_difference

P = PhysicalParams(c0=1.0, nu_lambda=0.1, b_over_a=2.0, a=0.05)


@pytest.mark.parametrize("kwargs", [dict(dt=0.0, t_end=1.0), dict(dt=0.1, t_end=-1.0),
                                    dict(dt=0.1, t_end=1.0, theta=0.4), dict(dt=0.3, t_end=1.0)])
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        StepperConfig(**kwargs)


def test_zero_state_is_fixed_point():
    g = Grid(1, 16)
    cfg = StepperConfig(0.05, 0.5)
    b = compute_betas(P, 1, 1)
    s = State3(g, g.zeros(), g.zeros(), g.zeros())
    for _ in range(3):
        s = step_general(s, b, cfg)
    assert all(np.all(a == 0) for a in s.arrays())
    s2 = step_limit(State2(g, g.zeros(), g.zeros()), b.limit(), cfg)
    assert all(np.all(a == 0) for a in s2.arrays())
    traj = run(State3(g, g.zeros(), g.zeros(), g.zeros()), "BJK", P, cfg)
    assert all(np.all(p == 0) for p in traj.psi)


def test_t_end_zero_and_large_stride():
    g = Grid(1, 16)
    init = State2(g, 0.01 * np.sin(np.pi * g.nodes_1d), g.zeros())
    traj = run(init, "K", P.with_a(0.0), StepperConfig(0.1, 0.0))
    assert traj.times == [0.0]
    traj = run(init, "K", P.with_a(0.0), StepperConfig(0.1, 0.5), stride=100)
    assert traj.times == [0.0, 0.5]


def test_observers_and_exact_times():
    g = Grid(1, 16)
    seen = []
    init = State2(g, 0.01 * np.sin(np.pi * g.nodes_1d), g.zeros())
    traj = run(init, "W", P, StepperConfig(0.1, 1.0), observers=[lambda s, k: seen.append(k)], stride=3)
    assert seen == [0, 3, 6, 9, 10]
    assert traj.times[-1] == 1.0 and traj.times[1] == 3 * 0.1


def test_type_and_override_checks():
    g = Grid(1, 8)
    s3 = State3(g, g.zeros(), g.zeros(), g.zeros())
    s2 = State2(g, g.zeros(), g.zeros())
    cfg = StepperConfig(0.1, 0.1)
    with pytest.raises(TypeError):
        run(s2, "BJK", P, cfg)
    with pytest.raises(TypeError):
        run(s3, "K", P, cfg)
    with pytest.raises(ValueError):
        run(s3, "BJK", None, cfg, betas=compute_betas(P, 1, 1).linearized())
    with pytest.raises(ValueError):
        run(s3, "BJK", P, cfg, source=lambda t: g.zeros())
    with pytest.raises(DomainError):
        run(s3, "BJK", P, cfg, stride=0)


def test_determinism_bitwise():
    g = Grid(2, 12)
    x, y = g.coords
    f = 0.02 * np.sin(np.pi * x) * np.sin(np.pi * y)
    b = compute_betas(P, 1, 1)
    init = State3(g, f, 0.5 * f, consistency_complete(f, 0.5 * f, b, grid=g))
    t1 = run(init, "BJK", P, StepperConfig(0.02, 0.2))
    t2 = run(init, "BJK", P, StepperConfig(0.02, 0.2))
    assert all(np.array_equal(a, c) for a, c in zip(t1.psi_tt, t2.psi_tt))


def test_linearized_matches_dense_expm_in_time():
    from oracles import linear_third_order_expm

    n = 24
    g = Grid(1, n)
    b = compute_betas(P, 1, 1).linearized()
    x = g.nodes_1d
    psi0, psi1, psi2 = 0.1 * np.sin(np.pi * x), 0.0 * x, -0.2 * np.sin(2 * np.pi * x)
    exact = linear_third_order_expm(n, vars(b), psi0, psi1, psi2, [0.5])[0][0]
    errs = []
    for dt in (0.05, 0.025, 0.0125):
        traj = run(State3(g, psi0, psi1, psi2), "BJK", None, StepperConfig(dt, 0.5), betas=b, verification=True)
        errs.append(g.norm(traj.psi[-1] - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.2), orders


def test_linearized_limit_matches_dense_expm():
    import scipy.linalg

    n = 24
    g = Grid(1, n)
    b = compute_betas(P.with_a(0.0), 1, 1).linearized()
    L = dirichlet_second_difference(n, g.h)
    A = np.block([[np.zeros((n, n)), np.eye(n)], [b.beta3 * L, b.beta1_0 * L]])
    x = g.nodes_1d
    u0 = np.concatenate([0.1 * np.sin(np.pi * x), 0.05 * np.sin(3 * np.pi * x)])
    exact = (scipy.linalg.expm(0.5 * A) @ u0)[:n]
    errs = []
    for dt in (0.05, 0.025, 0.0125):
        init = State2(g, u0[:n], u0[n:])
        traj = run(init, "K", None, StepperConfig(dt, 0.5), betas=b, verification=True)
        errs.append(g.norm(traj.psi[-1] - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.2), orders


def test_undamped_reduction_conserves_energy():
    g = Grid(1, 40)
    b = compute_betas(P, 1, 1).linearized().with_override(beta1=0.0, beta2=0.0, beta4=0.0)
    x = g.nodes_1d
    w0 = np.sin(np.pi * x) + 0.3 * np.sin(4 * np.pi * x)
    init = State3(g, g.zeros(), 0.1 * np.sin(2 * np.pi * x), 0.1 * w0)

    def energy(psi_t, psi_tt):
        return 0.5 * g.norm(psi_tt) ** 2 + 0.5 * b.beta3 * g.norm_grad(g.grad_fwd(psi_t)) ** 2

    traj = run(init, "BJK", None, StepperConfig(0.01, 2.0), betas=b, verification=True)
    e = np.array([energy(v, w) for v, w in zip(traj.psi_t, traj.psi_tt)])
    assert np.abs(e - e[0]).max() <= 1e-10 * e[0]


def test_small_data_keeps_alpha_bounded():
    g = Grid(1, 48, 4.0)
    data = small_data_preset(g, P, "BJK")
    traj = run(data.state3(), "BJK", P, StepperConfig(0.02, 1.0))
    amin, amax, ok = alpha_bounds(traj)
    assert ok and 0.5 <= amin <= amax <= 1.5


def test_failure_is_recorded():
    g = Grid(1, 10)
    b = compute_betas(P, 1, 1)
    init = State3(g, g.zeros(), np.full(g.size, -1.0 / b.beta5), g.zeros())
    traj = run(init, "BJK", P, StepperConfig(0.1, 0.5), raise_on_failure=False)
    assert traj.failure["type"] == "DegenerateAlphaError" and traj.failure["time"] == 0.0


def test_dt_warning():
    g = Grid(1, 16)
    b = compute_betas(P, 1, 1)
    init = State3(g, g.zeros(), g.zeros(), 50.0 * np.sin(np.pi * g.nodes_1d))
    with pytest.warns(RuntimeWarning):
        traj = run(init, "BJK", P, StepperConfig(0.1, 0.1), raise_on_failure=False)
    assert traj.warnings and b.beta5 > 0


def test_iterative_solver_path(monkeypatch):
    import nlacoustics.timestep as ts

    g = Grid(1, 40)
    x = g.nodes_1d
    init = State2(g, 0.05 * np.sin(np.pi * x), g.zeros())
    direct = run(init, "K", P.with_a(0.0), StepperConfig(0.05, 0.5))
    monkeypatch.setattr(ts, "DIRECT_SOLVE_LIMIT", 0)
    iterative = run(init, "K", P.with_a(0.0), StepperConfig(0.05, 0.5, linear_solver_tol=1e-12))
    assert g.norm(direct.psi[-1] - iterative.psi[-1]) <= 1e-9 * g.norm(direct.psi[-1])
