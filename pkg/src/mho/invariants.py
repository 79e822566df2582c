"""Built-in property suites, runnable from the command line.

Each check returns ``(name, passed, detail)``.  The suites double as
regression guards for the library's core contracts: budget clamping,
ratio ranges, the cost floor, best-so-far monotonicity, feasibility of
every iterate, integrator order, conservation of the constant state,
and the shared-trials rule of the study harness.
"""

from __future__ import annotations

from dataclasses import replace
from typing import List, Tuple

import numpy as np

from .cost import CostSpec, WindowCost
from .dynamics import transition, van_der_pol
from .rate_adapter import RateState, update_q
from .scenario import ScenarioConfig, build_tasks, derive_seeds, sample_initial_states, simulate_plant
from .solver import minimize

Check = Tuple[str, bool, str]


def _tiny_config(**overrides) -> ScenarioConfig:
    base = dict(N=40, N_sim=120, N_s=3, master_seed=424242)
    base.update(overrides)
    return replace(ScenarioConfig(), **base)


def _random_problems(seed: int, n_problems: int):
    """Window cost problems on short noisy logs, with random feasible starts."""
    rng = np.random.default_rng(seed)
    config = _tiny_config()
    box = config.box()
    model = van_der_pol(config.a_true)
    spec = CostSpec(model=model, N=config.N, rho=config.rho, floor_c=config.floor_c)
    problems = []
    for i in range(n_problems):
        plant = simulate_plant(config, int(rng.integers(0, 2**32)))
        window = plant.log.extract_window(config.N_sim - 1, config.N)
        p_hat = plant.states[config.N_sim - 1 - config.N] + rng.normal(0.0, 0.5, 3)
        p0 = box.lower + rng.random(3) * (box.upper - box.lower)
        problems.append((WindowCost(spec, window, p_hat), p0, box))
    return problems


def check_q_clamping(n_updates: int = 10_000, seed: int = 7) -> Check:
    rng = np.random.default_rng(seed)
    state = RateState(q=20, q_min=20, q_max=1000, delta=10)
    ok = True
    for _ in range(n_updates):
        gamma = float(rng.normal())
        K = float(rng.uniform(0.2, 1.5))
        state = update_q(state, K, (gamma, gamma))
        if not state.q_min <= state.q <= state.q_max:
            ok = False
            break
    return ("q stays in [q_min, q_max] under random gradient streams", ok, f"{n_updates} updates")


def _solve_battery(n_solves: int = 100, seed: int = 11):
    problems = _random_problems(seed, 10)
    rng = np.random.default_rng(seed + 1)
    reports = []
    for i in range(n_solves):
        wc, _, box = problems[i % len(problems)]
        p0 = box.lower + rng.random(3) * (box.upper - box.lower)
        reports.append(
            minimize(wc.value, p0, box, q=25, value_and_grad=wc.value_and_grad,
                     record_iterates=True)
        )
    return reports, problems


def check_solve_properties(n_solves: int = 100, seed: int = 11) -> List[Check]:
    reports, problems = _solve_battery(n_solves, seed)
    box = problems[0][2]
    mono = all(np.all(np.diff(r.cost_trace) <= 0.0) for r in reports)
    eff = all(0.0 < r.J_best / r.J_star <= 1.0 for r in reports)
    feas = all(
        np.all(it >= box.lower) and np.all(it <= box.upper)
        for r in reports
        for it in r.iterates
    )
    floor = problems[0][0].spec.floor_c
    floored = all(np.all(r.cost_trace >= floor) for r in reports)
    return [
        ("cost trace is non-increasing (best-so-far)", mono, f"{n_solves} seeded solves"),
        ("efficiency ratio lies in (0, 1]", eff, f"{n_solves} seeded solves"),
        ("every iterate satisfies the box constraint", feas, f"{n_solves} seeded solves"),
        ("cost never drops below the floor", floored, f"{n_solves} seeded solves"),
    ]


def check_cost_floor(n_points: int = 200, seed: int = 13) -> Check:
    problems = _random_problems(seed, 5)
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(n_points):
        wc, _, _ = problems[int(rng.integers(0, len(problems)))]
        p = rng.normal(0.0, 5.0, 3)
        if wc.value(p) < wc.spec.floor_c:
            ok = False
            break
    return ("cost evaluation respects the positivity floor", ok, f"{n_points} random points")


def check_rk4_order(seed: int = 0) -> Check:
    model = van_der_pol(10.0)
    x0 = np.array([3.0, 1.0, 1.0])
    horizon = 1.0

    def endpoint(h: float) -> np.ndarray:
        n = int(round(horizon / h))
        return transition(model, n, x0, np.full(n, 1.0), h)

    ref = endpoint(0.002 / 64)
    e1 = np.linalg.norm(endpoint(0.002) - ref)
    e2 = np.linalg.norm(endpoint(0.001) - ref)
    order = np.log2(e1 / e2)
    ok = 3.5 <= order <= 4.5
    return ("integrator order is ~4 under step halving", ok, f"measured order {order:.2f}")


def check_constant_state_conserved(seed: int = 17) -> Check:
    rng = np.random.default_rng(seed)
    model = van_der_pol(10.0)
    ok = True
    for _ in range(50):
        x0 = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.1, 40.0)])
        us = rng.uniform(0.5, 1.5, 200)
        x = transition(model, 200, x0, us, 0.002)
        if x[2] != x0[2]:
            ok = False
            break
    return ("third state is conserved exactly", ok, "50 random propagations, 200 steps")


def check_shared_trials() -> Check:
    config = _tiny_config()
    tasks, _ = build_tasks(config)
    by_scenario = {}
    ok = True
    for (_, setting_id, scenario_id, x_hat0, plant) in tasks:
        key = scenario_id
        if key not in by_scenario:
            by_scenario[key] = (x_hat0, plant)
        else:
            x_ref, plant_ref = by_scenario[key]
            if not (
                np.array_equal(x_ref, x_hat0)
                and plant_ref.log.outputs == plant.log.outputs
            ):
                ok = False
    return ("all settings consume identical trials per scenario", ok, f"{config.N_s} scenarios")


def check_initial_state_box(seed: int = 23) -> Check:
    config = _tiny_config()
    init_seed, _ = derive_seeds(config.master_seed, config.N_s)
    starts = sample_initial_states(config, init_seed)
    x0 = np.asarray(config.x0_true)
    ok = bool(np.all(starts >= 0.2 * x0) and np.all(starts <= 2.0 * x0))
    return ("random initializations stay in [0.2 x0, 2 x0]", ok, f"{config.N_s} draws")


def run_all(verbose: bool = True) -> List[Check]:
    checks: List[Check] = []
    checks.append(check_q_clamping())
    checks.extend(check_solve_properties())
    checks.append(check_cost_floor())
    checks.append(check_rk4_order())
    checks.append(check_constant_state_conserved())
    checks.append(check_shared_trials())
    checks.append(check_initial_state_box())
    if verbose:
        for name, ok, detail in checks:
            print(f"{'PASS' if ok else 'FAIL'}  {name} ({detail})")
    return checks
