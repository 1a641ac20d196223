"""Desk-scale emulator of a 32-neuron analog spiking substrate learning Pong.

The package couples an exactly-integrated LIF network with synapse-local
correlation sensors, a fixed-pattern/temporal noise model of the analog
substrate, a reward-modulated STDP rule with per-state reward baselines,
and a simplified Pong environment, all driven by a deterministic
closed-loop experiment runner.
"""

from neuroloop.network import (
    LifParams,
    SensorParams,
    SpikeTrain,
    Network,
    build_network,
    regular_train,
    measure_spiking_threshold,
)
from neuroloop.noise import (
    NoiseProfile,
    SubstrateNoise,
    make_profile,
    sample_substrate,
    apply_calibration,
    permute_neurons,
)
from neuroloop.plasticity import (
    LearningParams,
    RewardState,
    update_expected_reward,
    apply_weight_update,
    covariance_check,
)
from neuroloop.pong import (
    EnvParams,
    GameState,
    new_game,
    reset_ball,
    ball_column,
    compute_reward,
    step_environment,
)
from neuroloop.config import ExperimentConfig, ConfigError, default_config, PARAM_SETS
from neuroloop.loop import (
    Experiment,
    ExperimentResult,
    run_experiment,
    select_action,
    mean_expected_reward,
    performance,
)

__version__ = "0.1.0"
