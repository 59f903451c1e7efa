"""grwlab: a GRW spontaneous-collapse lab.

A Lindblad master-equation oracle for a particle on a periodic 1D lattice,
plus three stochastic unravelings (collapse jumps, unitary white noise and
repeated ancilla interactions) and the checks that their ensemble averages
agree with the oracle.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (  # noqa: E402
    CollapseBank,
    GridSpec,
    SystemModel,
    basis_state,
    build_collapse_bank,
    build_grid,
    build_hamiltonian,
    build_model,
    cat_state,
    gaussian_packet,
    projector,
    uniform_state,
)
from .lindblad import MasterTrajectory, decoherence_rate, evolve_master, stable_step  # noqa: E402
from .streams import RandomStream  # noqa: E402
from .traj_jump import JumpEvent, TrajectoryRecord, run_jump_trajectory  # noqa: E402
from .traj_diffusive import diffusive_mean_evolution, run_diffusive_trajectory  # noqa: E402
from .repeated import (  # noqa: E402
    Basis,
    FiniteSystem,
    KrausPair,
    build_kraus_pair,
    collision_round,
    deferred_outcome_distribution,
    run_repeated,
    sequential_outcome_distribution,
)
from .ensemble import (  # noqa: E402
    EnsembleRecord,
    Report,
    equivalence_report,
    gisin_mixture_test,
    mc_error,
    run_ensemble,
    trace_distance,
)
from .observables import branch_weights, expval, heating_rate  # noqa: E402
from .config import ScenarioConfig, load_config, parse_config  # noqa: E402
