"""Controlled swap of two bosonic memories mediated by a three-level coupler."""

from .analytics import (
    concurrence_closed_form,
    concurrence_of_branch,
    concurrence_oracle,
    divergence_table,
    leakage_and_truncation,
    overlap_fidelity,
    state_fidelity,
)
from .dynamics import IntegratorConfig, evolve_lindblad, propagate_pure
from .errors import (
    ConfigError,
    DegenerateStateError,
    DimensionError,
    FredkinError,
    IntegratorDivergence,
    InvalidState,
    LayoutError,
    NonInvertibleError,
    TruncationError,
)
from .experiments import SweepRow, SweepSpec, read_results, sweep_detuning, sweep_inhomogeneity, write_results
from .fredkin import (
    ControlAmplitudes,
    InitialCase,
    ProtocolResult,
    TargetState,
    ideal_fredkin,
    initial_state,
    measure_control,
    physical_mask,
    run_protocol,
    scheme_unitary,
    simulate_swap_test,
    swap_test_infer,
    target_entangled_state,
)
from .hilbert import DensityOp, Ket, LinOp, SpaceLayout
from .model import PhysicalParams, derive, gate_hamiltonian, symmetric_params

__version__ = "0.1.0"
