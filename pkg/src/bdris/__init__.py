"""Graph-constrained BD-RIS architectures: optimal-class tests, susceptance reconstruction, experiments."""

from .channel import ChannelSet, ScenarioConfig, effective_channel, sample_channels, trial_rng
from .network import (
    Z0,
    ScatteringMatrix,
    SusceptanceMatrix,
    susceptance_from_theta,
    theta_from_susceptance,
)
from .optimize import (
    Beamformer,
    OptimizeOptions,
    equalize_by_reconstruction,
    gradient_free_params,
    optimize_architecture,
    sum_channel_gain,
    sum_rate,
)
from .reconstruct import Inconsistent, assemble_system, real_pair, reconstruct, verify_row_elimination
from .topology import (
    Architecture,
    SystemDims,
    complexity_count,
    effective_L,
    make_architecture,
    satisfies_theorem1,
)

__version__ = "0.1.0"
