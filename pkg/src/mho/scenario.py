"""Validation study harness: noisy plant, randomized starts, five settings.

A study runs the same set of plant realizations and observer
initializations through five observer settings (four fixed budgets and
one adaptive), then aggregates relative-cost indicators against the
first setting.  Everything is reproducible from one master seed via a
splittable seed tree, so runs may execute in any order or in parallel.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, replace
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cost import CostSpec, evaluate
from .dynamics import transition, van_der_pol
from .measurement import MeasurementLog
from .observer import MovingHorizonObserver
from .rate_adapter import RateState, TimingSpec
from .solver import BoxConstraint


class AlignmentError(ValueError):
    """Run results do not share scenario ids or series lengths."""


@dataclass(frozen=True)
class ScenarioConfig:
    """All study constants; defaults run the reference case at full scale."""

    tau: float = 0.002
    tau_c: float = 0.0005
    N: int = 200
    N_sim: int = 2000
    N_s: int = 50
    noise_variance: float = 0.03
    rho: float = 0.01
    a_true: float = 10.0
    a_observer: float = 10.0
    x0_true: Tuple[float, float, float] = (3.0, 1.0, 1.0)
    box_lower: Tuple[float, float, float] = (-10.0, -10.0, 0.1)
    box_upper: Tuple[float, float, float] = (10.0, 10.0, 40.0)
    q_min: int = 20
    q_max: int = 1000
    delta: int = 10
    floor_c: float = 1e-8
    master_seed: int = 230751
    settings: Tuple[Tuple[int, bool], ...] = (
        (20, False),
        (50, False),
        (100, False),
        (300, False),
        (20, True),
    )

    def __post_init__(self):
        if self.N_sim <= self.N:
            raise ValueError("N_sim must exceed the window length N")
        if self.N_s < 1:
            raise ValueError("need at least one scenario")

    def timing(self) -> TimingSpec:
        return TimingSpec(tau=self.tau, tau_c=self.tau_c)

    def box(self) -> BoxConstraint:
        return BoxConstraint(lower=np.array(self.box_lower), upper=np.array(self.box_upper))


@dataclass(frozen=True)
class PlantData:
    """True state trajectory plus the noisy measurement log."""

    states: np.ndarray  # (N_sim, 3)
    log: MeasurementLog


@dataclass(frozen=True)
class RunResult:
    """Series recorded by one (setting, scenario) run.

    ``cost_series[j]`` is the cost at sample ``N + j``: the sliding
    window ending there, evaluated at the solution the observer is
    using at that instant (the last delivered one, propagated to the
    current window start).  Between updating instants this measures how
    the frozen solution ages against fresh data.  ``q_series`` is
    aligned with it; ``estimate_errors`` covers every sample.
    """

    setting_id: int
    scenario_id: int
    cost_series: np.ndarray
    q_series: np.ndarray
    estimate_errors: np.ndarray


def input_profile(t: float) -> float:
    """Exogenous input ``u(t) = 1 - 0.5 cos(2 t)``; range [0.5, 1.5]."""
    return 1.0 - 0.5 * math.cos(2.0 * t)


def derive_seeds(master_seed: int, n_scenarios: int) -> Tuple[int, List[int]]:
    """Split the master seed into the init-state seed and per-plant seeds."""
    children = np.random.SeedSequence(master_seed).spawn(n_scenarios + 1)
    ints = [int(c.generate_state(1, np.uint64)[0]) for c in children]
    return ints[0], ints[1:]


def sample_initial_states(config: ScenarioConfig, seed: int) -> np.ndarray:
    """Draw the shared observer initializations, one row per scenario.

    Component ``i`` is ``(0.2 + 1.8 r_i) * x0_i`` with ``r_i`` uniform on
    [0, 1], i.e. uniform on ``[0.2 x0_i, 2 x0_i]``.  The same array is
    reused by every setting to keep the comparison unbiased.
    """
    rng = np.random.default_rng(seed)
    r = rng.random((config.N_s, 3))
    return (0.2 + 1.8 * r) * np.asarray(config.x0_true)


def simulate_plant(config: ScenarioConfig, seed: int) -> PlantData:
    """Integrate the true plant and log noisy outputs, deterministically."""
    model = van_der_pol(config.a_true)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(config.noise_variance), size=config.N_sim)
    states = np.empty((config.N_sim, 3))
    log = MeasurementLog(tau=config.tau)
    x = np.asarray(config.x0_true, dtype=float)
    for k in range(config.N_sim):
        states[k] = x
        u = input_profile(k * config.tau)
        log.push(x[0] + noise[k], u)
        if k < config.N_sim - 1:
            x = transition(model, 1, x, np.array([u]), config.tau)
    return PlantData(states=states, log=log)


def _build_observer(config: ScenarioConfig, setting_id: int, x_hat0) -> MovingHorizonObserver:
    q_init, adaptive = config.settings[setting_id - 1]
    model = van_der_pol(config.a_observer)
    rate = RateState(
        q=q_init,
        q_min=config.q_min,
        q_max=config.q_max,
        delta=config.delta if adaptive else 0,
    )
    spec = CostSpec(model=model, N=config.N, rho=config.rho, floor_c=config.floor_c)
    return MovingHorizonObserver(
        model=model,
        box=config.box(),
        cost_spec=spec,
        timing=config.timing(),
        rate=rate,
        x_hat0=x_hat0,
    )


def run_setting(
    config: ScenarioConfig, setting_id: int, x_hat0, plant: PlantData
) -> RunResult:
    """Run one observer setting over one plant realization."""
    if len(plant.log) < config.N_sim:
        raise ValueError("plant log shorter than the simulation length")
    obs = _build_observer(config, setting_id, x_hat0)
    log = plant.log
    n_rec = config.N_sim - config.N
    cost_series = np.empty(n_rec)
    q_series = np.empty(n_rec, dtype=int)
    errors = np.empty((config.N_sim, 3))

    x_hat = obs.p_current.copy()
    for k in range(config.N_sim):
        if k > 0:
            x_hat = transition(
                obs.model, 1, x_hat, np.array([log.inputs[k - 1]]), config.tau
            )
        if k == obs.next_update_index():
            obs.update_cycle(log)
            x_hat = obs.estimate_at(log, k)
        errors[k] = x_hat - plant.states[k]
        if k >= config.N:
            p_now = obs.estimate_at(log, k - config.N)
            window = log.extract_window(k, config.N)
            cost_series[k - config.N] = evaluate(obs.cost_spec, p_now, window, p_now)
            q_series[k - config.N] = obs.rate.q
    return RunResult(
        setting_id=setting_id,
        scenario_id=-1,
        cost_series=cost_series,
        q_series=q_series,
        estimate_errors=errors,
    )


@dataclass(frozen=True)
class SettingIndicator:
    """Mean and variance of the cost relative to the first setting."""

    setting_id: int
    m: float
    sigma: float


def indicators(results: Sequence[RunResult], n_settings: int) -> List[SettingIndicator]:
    """Aggregate ``(J_s - J_1) / J_1`` over samples and scenarios.

    The mean and the (population) variance are taken over the flattened
    set of (sample, scenario) pairs; per-scenario series are aligned
    with the corresponding first-setting run of the same scenario.
    """
    by_key: Dict[Tuple[int, int], RunResult] = {}
    for r in results:
        by_key[(r.setting_id, r.scenario_id)] = r
    scenario_ids = sorted({r.scenario_id for r in results if r.setting_id == 1})
    out = []
    for s in range(1, n_settings + 1):
        ids = sorted({r.scenario_id for r in results if r.setting_id == s})
        if ids != scenario_ids:
            raise AlignmentError(f"setting {s} scenarios {ids} != {scenario_ids}")
        rel = []
        for i in scenario_ids:
            base = by_key[(1, i)].cost_series
            cur = by_key[(s, i)].cost_series
            if len(base) != len(cur):
                raise AlignmentError(
                    f"setting {s} scenario {i}: series length {len(cur)} != {len(base)}"
                )
            rel.append((cur - base) / base)
        flat = np.concatenate(rel)
        out.append(
            SettingIndicator(setting_id=s, m=float(np.mean(flat)), sigma=float(np.var(flat)))
        )
    return out


def _run_task(payload):
    config, setting_id, scenario_id, x_hat0, plant = payload
    result = run_setting(config, setting_id, x_hat0, plant)
    return replace(result, scenario_id=scenario_id)


def build_tasks(config: ScenarioConfig):
    """Materialize the full study plan: shared starts, shared plants."""
    init_seed, plant_seeds = derive_seeds(config.master_seed, config.N_s)
    starts = sample_initial_states(config, init_seed)
    plants = [simulate_plant(config, s) for s in plant_seeds]
    tasks = [
        (config, s, i, starts[i], plants[i])
        for s in range(1, len(config.settings) + 1)
        for i in range(config.N_s)
    ]
    return tasks, {"master": config.master_seed, "initial_states": init_seed, "plants": plant_seeds}


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_run_csv(path: Path, config: ScenarioConfig, result: RunResult) -> None:
    """Per-run series: ``k, J, q, err_x1, err_x2, err_x3`` for every sample.

    Before the first updating instant the cost column is ``nan`` and the
    budget column holds the initial value.
    """
    q_init = config.settings[result.setting_id - 1][0]
    lines = ["k,J,q,err_x1,err_x2,err_x3"]
    for k in range(config.N_sim):
        if k < config.N:
            j_val, q_val = math.nan, q_init
        else:
            j_val = float(result.cost_series[k - config.N])
            q_val = int(result.q_series[k - config.N])
        e = result.estimate_errors[k]
        lines.append(
            f"{k},{j_val!r},{q_val},{float(e[0])!r},{float(e[1])!r},{float(e[2])!r}"
        )
    _atomic_write_text(path, "\n".join(lines) + "\n")


def run_experiment(
    config: ScenarioConfig,
    out_dir: Optional[Path] = None,
    workers: int = 1,
    write_runs: bool = True,
):
    """Execute the full settings-by-scenarios study.

    Returns ``(summary, results)``; when ``out_dir`` is given, also
    writes one CSV per run, the summary JSON and the circle-chart data.
    All files are written atomically (temp file plus rename).
    """
    tasks, seeds = build_tasks(config)
    if workers > 1:
        with Pool(processes=workers) as pool:
            results = pool.map(_run_task, tasks)
    else:
        results = [_run_task(t) for t in tasks]

    inds = indicators(results, len(config.settings))
    summary = {
        "config": asdict(config),
        "seeds": seeds,
        "indicators": [
            {
                "setting": ind.setting_id,
                "q_init": config.settings[ind.setting_id - 1][0],
                "adaptive": config.settings[ind.setting_id - 1][1],
                "m": ind.m,
                "sigma": ind.sigma,
            }
            for ind in inds
        ],
    }

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if write_runs:
            for r in results:
                write_run_csv(
                    out_dir / f"run_s{r.setting_id}_c{r.scenario_id:03d}.csv", config, r
                )
        _atomic_write_text(out_dir / "summary.json", summary_json(summary))
        chart = ["setting,center_m,radius"]
        for ind in inds:
            chart.append(f"{ind.setting_id},{ind.m!r},{2.0 * ind.sigma!r}")
        _atomic_write_text(out_dir / "circle_chart.csv", "\n".join(chart) + "\n")

    return summary, results


def summary_json(summary: dict) -> str:
    """Canonical JSON encoding; identical runs give identical bytes."""
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"
