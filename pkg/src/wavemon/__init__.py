"""wavemon: monitoring a quantum particle's wave function from a continuous
noisy position record, in both a discrete collapse model and its
stochastic-differential-equation limit."""

from .grids import Grid, default_grid
from .state import (
    GaussianPacketSpec,
    WaveFunction,
    expectation_momentum,
    expectation_position,
    fidelity,
    make_gaussian_packet,
    norm,
    normalize,
    position_variance,
)
from .potentials import (
    FreeSpace,
    Harmonic,
    HenonHeiles,
    MexicanHat,
    QuarticDoubleWell,
    Tabulated,
    eval_potential,
)
from .propagation import Hamiltonian, SplitStepPropagator, apply_hamiltonian, unitary_step
from .measurement import (
    MeasurementOutcome,
    MonitorConfig,
    collapse,
    discrete_monitor_step,
    outcome_density,
    sample_outcome,
    update_estimate,
    validate_config,
)
from .sde import (
    MeasurementRecord,
    SdeScheme,
    coupled_step,
    generate_dq,
    replay_estimate,
    sse_step,
    weak_order_probe,
)
from .scenarios import (
    EnsembleResult,
    PerturbationEvent,
    ScenarioConfig,
    TrajectoryResult,
    builtin_scenario,
    momentum_kick,
    run_ensemble,
    run_trajectory,
    scenario_names,
    temperature_to_kick,
)
from .config import config_hash, parse_config, parse_config_text, serialize_config
from .formats import (
    read_record,
    read_snapshot,
    write_record,
    write_snapshot,
    write_wavefunction,
)

__version__ = "0.1.0"
