"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-rA`` to see the
printed lines for passing criteria too).  Criterion 5 follows the
documented three-seed protocol: the primary seed is tried first and two
alternates are consulted only if it fails; at least two of the three
must satisfy all ordering claims.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from mho import cli
from mho.cost import CostSpec
from mho.dynamics import van_der_pol
from mho.observer import MovingHorizonObserver
from mho.rate_adapter import (
    EPS_UNITY,
    RateState,
    TimingSpec,
    alpha_estimate,
    contraction_terms,
    efficiency_gradient,
    ell,
    gain_gradient,
    ideal_q_oracle,
    response_time_gradient,
    update_q,
)
from mho.scenario import ScenarioConfig, run_experiment, run_setting, simulate_plant
from mho.solver import SolveReport

PRIMARY_SEED = 230751
ALTERNATE_SEEDS = (101, 7)

REFERENCE_TIMING = TimingSpec(tau=0.002, tau_c=0.0005)
Q_MIN, Q_MAX, DELTA = 20, 1000, 10


def _report(num: int, ok: bool, elapsed: float, detail: str = "") -> None:
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s) {detail}")


def _solve_report(trace):
    trace = np.asarray(trace, dtype=float)
    return SolveReport(
        p_best=np.zeros(3),
        cost_trace=trace,
        J_star=float(trace[0]),
        J_best=float(trace[-1]),
        J_penultimate=float(trace[-2]),
        iterations_run=len(trace) - 1,
    )


def test_criterion_1_formula_oracles():
    t0 = time.perf_counter()
    ok = True
    try:
        assert ell(20, REFERENCE_TIMING) == 6
        assert ell(1000, REFERENCE_TIMING) == 251
        assert ell(1, REFERENCE_TIMING) == 1  # q tau_c < tau

        E, D, K = contraction_terms(_solve_report([1.2, 0.9, 0.6]), J_prev=1.0)
        assert E == pytest.approx(0.5, rel=1e-9)
        assert D == pytest.approx(1.2, rel=1e-9)
        assert K == pytest.approx(0.6, rel=1e-9)
        E1, _, _ = contraction_terms(_solve_report([2.0, 2.0, 2.0]), J_prev=1.0)
        assert E1 == 1.0
        _, D1, _ = contraction_terms(_solve_report([1.0, 0.8, 0.7]), J_prev=1.0)
        assert D1 == 1.0  # ideal noiseless exact-model case

        assert alpha_estimate(1.2, 1.0, 20) == pytest.approx(0.01, rel=1e-9)
        assert alpha_estimate(1.0, 1.0, 20) == 0.0
        assert alpha_estimate(0.9, 1.0, 10) < 0.0

        dE = efficiency_gradient(_solve_report([1.2, 0.60, 0.58]))
        assert dE == pytest.approx((0.58 - 0.60) / 1.2, rel=1e-9)
        assert efficiency_gradient(_solve_report([1.2, 0.9, 0.9])) == 0.0

        assert gain_gradient(0.5, 1.2, -1.0 / 60.0, 0.01) == pytest.approx(
            -0.015, abs=1e-9
        )
        assert gain_gradient(0.5, 1.2, 0.0, 0.0) == 0.0

        logK = math.log(0.6)
        exact_rt = (-logK + (20 / 0.6) * (-0.015)) / logK**2
        got_rt = response_time_gradient(0.6, 20, -0.015)
        assert got_rt == pytest.approx(exact_rt, rel=1e-9)
        assert got_rt == pytest.approx(0.04139, abs=1e-4)
        flat = response_time_gradient(0.6, 20, 0.0)
        assert flat == pytest.approx(-1.0 / logK, rel=1e-9)
        assert flat > 0.0

        state = RateState(q=20, q_min=20, q_max=1000, delta=10)
        assert update_q(state, 0.6, (-0.015, 0.041)).q == 20  # clamped
        state500 = RateState(q=500, q_min=20, q_max=1000, delta=10)
        assert update_q(state500, 0.6, (0.1, -0.5)).q == 510
        assert update_q(state500, 1.2, (0.0, None)).q == 500  # sign(0) = 0

        assert ideal_q_oracle(lambda q: 0.5, 2, 1000) == 2
        assert ideal_q_oracle(lambda q: 1.05 + 1e-5 * (q - 137) ** 2, 2, 1000) == 137
        assert ideal_q_oracle(lambda q: 0.5 * (1.0 + 0.01 * q), 2, 1000) == 100
    except AssertionError:
        ok = False
        raise
    finally:
        elapsed = time.perf_counter() - t0
        _report(1, ok and elapsed < 1.0, elapsed)
    assert elapsed < 1.0


SMOOTH_MODELS = [
    (0.2, 0.8, 50.0, 1e-4),
    (0.5, 0.5, 200.0, 5e-5),
    (0.1, 0.9, 30.0, 2e-4),
]


def _smooth_model(e_inf, e_amp, scale, alpha):
    def E(q):
        return e_inf + e_amp * math.exp(-q / scale)

    def dE(q):
        return -e_amp / scale * math.exp(-q / scale)

    def D(q):
        return 1.0 + alpha * q

    def K(q):
        return E(q) * D(q)

    def dK(q):
        return gain_gradient(E(q), D(q), dE(q), alpha)

    return E, dE, D, K, dK


def test_criterion_2_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(555)
    for e_inf, e_amp, scale, alpha in SMOOTH_MODELS:
        E, dE, D, K, dK = _smooth_model(e_inf, e_amp, scale, alpha)
        # sample away from stationary points, where a relative comparison
        # of near-zero slopes is numerically meaningless
        pts = []
        while len(pts) < 50:
            q = float(rng.uniform(5.0, 800.0))
            if K(q) <= 0.95 and abs(dK(q)) >= 1e-5:
                if abs(response_time_gradient(K(q), q, dK(q))) >= 1e-4:
                    pts.append(q)
        for q in pts:
            h = 1e-5 * max(1.0, q)
            fd_K = (K(q + h) - K(q - h)) / (2 * h)
            got_K = gain_gradient(E(q), D(q), dE(q), alpha)
            assert got_K == pytest.approx(fd_K, rel=1e-6)

            def rt(qq):
                return qq / abs(math.log(K(qq)))

            fd_rt = (rt(q + h) - rt(q - h)) / (2 * h)
            got_rt = response_time_gradient(K(q), q, dK(q))
            assert got_rt == pytest.approx(fd_rt, rel=1e-6)
    elapsed = time.perf_counter() - t0
    _report(2, elapsed < 1.0, elapsed, "3 models x 50 points, rel 1e-6")
    assert elapsed < 1.0


def _synthetic_unimodal_models(count, rng):
    """Unimodal gain models with analytic derivatives, both branches."""
    models = []
    grid = np.arange(Q_MIN, Q_MAX + 1)
    while len(models) < count:
        if len(models) % 2 == 0:
            e_inf = rng.uniform(0.05, 0.3)
            scale = rng.uniform(30.0, 200.0)
            alpha = rng.uniform(1e-5, 2e-4)
            E, dE, D, K, dK = _smooth_model(e_inf, 1.0 - e_inf, scale, alpha)
            if max(K(q) for q in grid) >= 0.97:
                continue
            objective = np.array([q / abs(math.log(K(q))) for q in grid])
        else:
            q_star = rng.uniform(100.0, 900.0)
            beta = rng.uniform(0.5, 3.0)
            span = float(Q_MAX - Q_MIN)

            def K(q, q_star=q_star, beta=beta, span=span):
                return 1.05 + beta * ((q - q_star) / span) ** 2

            def dK(q, q_star=q_star, beta=beta, span=span):
                return 2.0 * beta * (q - q_star) / span**2

            objective = np.array([K(q) for q in grid])
        idx = int(np.argmin(objective))
        decreasing = np.all(np.diff(objective[: idx + 1]) < 0.0)
        increasing = np.all(np.diff(objective[idx:]) > 0.0)
        if not (decreasing and increasing):
            continue
        models.append((K, dK))
    return models


def test_criterion_3_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2718)
    models = _synthetic_unimodal_models(10, rng)
    budget = (Q_MAX - Q_MIN) // DELTA + 5
    for K, dK in models:
        target = ideal_q_oracle(K, Q_MIN, Q_MAX)
        state = RateState(q=Q_MIN, q_min=Q_MIN, q_max=Q_MAX, delta=DELTA)
        for _ in range(budget):
            Kq = K(state.q)
            dKq = dK(state.q)
            if Kq < 1.0 and abs(Kq - 1.0) >= EPS_UNITY:
                rt_grad = response_time_gradient(Kq, state.q, dKq)
            else:
                rt_grad = None
            state = update_q(state, Kq, (dKq, rt_grad))
        assert abs(state.q - target) <= DELTA, (
            f"landed at q={state.q}, oracle={target}"
        )
    elapsed = time.perf_counter() - t0
    _report(3, elapsed < 5.0, elapsed, "10 unimodal models, both branches")
    assert elapsed < 5.0


def test_criterion_4_observer_sanity():
    t0 = time.perf_counter()
    cfg = replace(
        ScenarioConfig(),
        noise_variance=0.0,
        a_observer=10.0,
        N_s=1,
        master_seed=PRIMARY_SEED,
    )
    plant = simulate_plant(cfg, seed=4)
    x_exact = np.asarray(cfg.x0_true)

    model = van_der_pol(cfg.a_observer)
    obs = MovingHorizonObserver(
        model=model,
        box=cfg.box(),
        cost_spec=CostSpec(model=model, N=cfg.N, rho=cfg.rho, floor_c=cfg.floor_c),
        timing=cfg.timing(),
        rate=RateState(q=20, q_min=cfg.q_min, q_max=cfg.q_max, delta=0),
        x_hat0=x_exact,
    )
    for k in range(cfg.N_sim):
        if k == obs.next_update_index():
            obs.update_cycle(plant.log)
    assert len(obs.records) > 100
    worst_J = max(r.J_best for r in obs.records)
    assert worst_J <= 10.0 * cfg.floor_c

    result = run_setting(cfg, 1, x_exact, plant)
    worst_err = float(np.max(np.abs(result.estimate_errors)))
    assert worst_err < 1e-6

    elapsed = time.perf_counter() - t0
    _report(
        4,
        elapsed < 30.0,
        elapsed,
        f"max J(t_k)={worst_J:.3e}, max |err|={worst_err:.3e}",
    )
    assert elapsed < 30.0


@pytest.fixture(scope="module")
def desk_runner(tmp_path_factory):
    cache = {}

    def run(seed, a_observer, want_files=False):
        key = (seed, a_observer)
        if key not in cache:
            cfg = replace(
                ScenarioConfig(), N_s=10, master_seed=seed, a_observer=a_observer
            )
            out_dir = tmp_path_factory.mktemp(f"desk_{seed}_{int(a_observer)}")
            summary, _ = run_experiment(cfg, out_dir=out_dir, write_runs=False)
            cache[key] = (summary, out_dir)
        return cache[key]

    return run


def _ordering_verdict(summary_exact, summary_mismatch):
    m_e = [row["m"] for row in summary_exact["indicators"]]
    m_m = [row["m"] for row in summary_mismatch["indicators"]]
    fixed_e, fixed_m = m_e[:4], m_m[:4]
    a_ok = m_e[2] < m_e[0] and m_e[2] < m_e[3]
    b_ok = m_m[0] == min(fixed_m)
    c_exact = m_e[4] <= min(fixed_e) + 0.25 * abs(min(fixed_e))
    c_mism = m_m[4] <= min(fixed_m) + 0.25 * abs(min(fixed_m))
    detail = (
        f"exact m={['%.5f' % v for v in m_e]} "
        f"mismatch m={['%.5f' % v for v in m_m]} "
        f"a={a_ok} b={b_ok} c_exact={c_exact} c_mism={c_mism}"
    )
    return a_ok and b_ok and c_exact and c_mism, detail


def test_criterion_5_desk_scale_reproduction(desk_runner):
    t0 = time.perf_counter()
    verdicts = []
    seeds_tried = []
    for seed in (PRIMARY_SEED, *ALTERNATE_SEEDS):
        summary_exact, _ = desk_runner(seed, 10.0)
        summary_mismatch, _ = desk_runner(seed, 7.0)
        ok, detail = _ordering_verdict(summary_exact, summary_mismatch)
        verdicts.append(ok)
        seeds_tried.append(f"seed {seed}: {'pass' if ok else 'FAIL'} [{detail}]")
        if ok and len(verdicts) == 1:
            break  # primary seed suffices
    passed = (verdicts[0] if len(verdicts) == 1 else sum(verdicts) >= 2)
    elapsed = time.perf_counter() - t0
    _report(5, passed and elapsed < 900.0, elapsed, "; ".join(seeds_tried))
    assert elapsed < 900.0
    assert passed, "ordering claims not met:\n" + "\n".join(seeds_tried)


def test_criterion_6_invariant_suites(capsys):
    t0 = time.perf_counter()
    rc = cli.main(["check-invariants"])
    elapsed = time.perf_counter() - t0
    shown = capsys.readouterr().out
    with capsys.disabled():
        _report(6, rc == 0 and elapsed < 60.0, elapsed, f"exit={rc}")
    assert "all" in shown and "passed" in shown
    assert rc == 0
    assert elapsed < 60.0


def test_criterion_7_determinism(desk_runner, tmp_path):
    t0 = time.perf_counter()
    _, first_dir = desk_runner(PRIMARY_SEED, 10.0)
    cfg = replace(ScenarioConfig(), N_s=10, master_seed=PRIMARY_SEED, a_observer=10.0)
    run_experiment(cfg, out_dir=tmp_path, write_runs=False)
    first = (first_dir / "summary.json").read_bytes()
    second = (tmp_path / "summary.json").read_bytes()
    ok = first == second
    elapsed = time.perf_counter() - t0
    _report(7, ok, elapsed, f"{len(first)} bytes compared")
    assert ok
