"""Moving-horizon observer with run-time adaptation of the iteration budget."""

from .cost import CostSpec, WindowCost, evaluate, gradient, value_and_gradient
from .dynamics import (
    IntegrationDivergenceError,
    SystemModel,
    integrate_step,
    predict_outputs,
    transition,
    van_der_pol,
    vdp_rhs,
)
from .measurement import MeasurementLog, ObservationWindow, WindowUnderflowError
from .observer import CycleRecord, MovingHorizonObserver, warm_start
from .rate_adapter import (
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
from .scenario import (
    RunResult,
    ScenarioConfig,
    indicators,
    input_profile,
    run_experiment,
    run_setting,
    sample_initial_states,
    simulate_plant,
)
from .solver import BoxConstraint, SolveReport, minimize, project

__version__ = "0.1.0"
