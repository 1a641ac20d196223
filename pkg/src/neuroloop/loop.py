"""Closed-loop experiment runner: emulate, act, reward, update, advance.

One iteration runs the fixed pipeline: read the ball column, emulate the
network for one window with the standard spike train on that input row,
pick the action as the spike-count argmax (random tie-break), compute the
graded reward, update the per-state reward baseline, read and reset the
correlation traces, apply the weight update and advance the environment.

All randomness flows from three named seeds: seed_fp (substrate),
seed_temporal (membrane noise, tie-breaking, initial weights) and
seed_env (ball directions).
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass

import numpy as np

from neuroloop.config import ExperimentConfig
from neuroloop.network import Network, build_network, regular_train
from neuroloop.noise import N_NEURONS, SubstrateNoise, sample_substrate
from neuroloop.plasticity import RewardState, apply_weight_update, update_expected_reward
from neuroloop.pong import ball_column, compute_reward, new_game, step_environment
from neuroloop.rng import fast_stream, keyed_stream

# Substream ids under seed_temporal / seed_env.
STREAM_NOISE = 0
STREAM_TIES = 1
STREAM_WEIGHTS = 2
STREAM_ENV = 0


def select_action(rho: np.ndarray, rng: np.random.Generator) -> int:
    """Index of the maximal spike count; ties resolved uniformly at random."""
    rho = np.asarray(rho)
    if rho.shape != (N_NEURONS,):
        raise ValueError(f"rho must have length {N_NEURONS}")
    ties = np.flatnonzero(rho == rho.max())
    if ties.size == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


def mean_expected_reward(state: RewardState) -> float:
    """Average expected reward over all states; uninitialized states count 0."""
    return float(state.r_bar.sum()) / state.r_bar.size


def performance(state: RewardState) -> float:
    """Fraction of states whose most recent reward was nonzero (ceil semantics)."""
    if not state.initialized.any():
        return 0.0
    return float(np.ceil(state.last_reward[state.initialized]).sum()) / state.r_bar.size


def initial_weights(config: ExperimentConfig) -> np.ndarray:
    """Gaussian-initialized integer weight matrix, clamped to the 6-bit range."""
    rng = keyed_stream(config.seed_temporal, STREAM_WEIGHTS)
    w = np.rint(rng.normal(config.w_mean, config.w_sigma, (N_NEURONS, N_NEURONS)))
    return np.clip(w, 0, 63).astype(np.int64)


@dataclass
class IterationLogs:
    """Per-iteration record of the loop (append-only, preallocated)."""

    k: np.ndarray
    j: np.ndarray
    reward: np.ndarray
    r_bar_k: np.ndarray  # expected reward of the visited state, after its update
    mean_r: np.ndarray
    perf: np.ndarray
    rho: np.ndarray | None
    weights_crc: np.ndarray | None
    n: int = 0

    @classmethod
    def allocate(cls, capacity: int, record_rho: bool = True,
                 record_crc: bool = False) -> "IterationLogs":
        return cls(
            k=np.zeros(capacity, dtype=np.uint8),
            j=np.zeros(capacity, dtype=np.uint8),
            reward=np.zeros(capacity),
            r_bar_k=np.zeros(capacity),
            mean_r=np.zeros(capacity),
            perf=np.zeros(capacity),
            rho=np.zeros((capacity, N_NEURONS), dtype=np.uint8) if record_rho else None,
            weights_crc=np.zeros(capacity, dtype=np.uint32) if record_crc else None,
        )


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    logs: IterationLogs
    weights_initial: np.ndarray
    weights_final: np.ndarray
    r_bar: np.ndarray
    last_reward: np.ndarray
    final_mean_expected_reward: float
    final_performance: float
    resets: int
    runtime_s: float

    def summary(self) -> dict:
        return {
            "n_iterations": int(self.logs.n),
            "final_mean_expected_reward": self.final_mean_expected_reward,
            "final_performance": self.final_performance,
            "resets": int(self.resets),
            "runtime_s": self.runtime_s,
            "weights_crc32": int(zlib.crc32(np.ascontiguousarray(self.weights_final).tobytes())),
            "seed_fp": self.config.seed_fp,
            "seed_temporal": self.config.seed_temporal,
            "seed_env": self.config.seed_env,
        }


class Experiment:
    """One sequential experiment: a network, a reward state and a game.

    Construction resolves the config, samples (or accepts) the substrate
    and builds the network; :meth:`run` executes the iteration pipeline.
    """

    def __init__(self, config: ExperimentConfig, *, weights: np.ndarray | None = None,
                 substrate: SubstrateNoise | None = None, record_rho: bool = True,
                 record_crc: bool = False):
        self.cfg = config.resolved()
        if substrate is None:
            substrate = sample_substrate(self.cfg.seed_fp, self.cfg.profile,
                                         sigma_i=self.cfg.sigma_i)
        elif substrate.sigma_i != self.cfg.sigma_i:
            raise ValueError("substrate.sigma_i does not match the configured sigma_i")
        self.substrate = substrate
        self.weights_initial = initial_weights(self.cfg) if weights is None \
            else np.asarray(weights, dtype=np.int64).copy()
        self.net: Network = build_network(self.cfg.lif, self.weights_initial, substrate,
                                          self.cfg.dt, weight_scale=self.cfg.weight_scale,
                                          sensor=self.cfg.sensor)
        self.reward_state = RewardState.fresh()
        self.train = regular_train(self.cfg.n_spikes, self.cfg.t_isi)
        self.noise_rng = fast_stream(self.cfg.seed_temporal, STREAM_NOISE)
        self.tie_rng = fast_stream(self.cfg.seed_temporal, STREAM_TIES)
        self.env_rng = fast_stream(self.cfg.seed_env, STREAM_ENV)
        self.game = new_game(self.cfg.env, self.env_rng)
        self.logs = IterationLogs.allocate(self.cfg.n_iterations, record_rho, record_crc)
        self.phase_times: dict[str, list] | None = None

    def run_iteration(self):
        """Execute one loop iteration and append its log row."""
        cfg = self.cfg
        logs = self.logs
        i = logs.n
        if i >= logs.k.size:
            raise RuntimeError("log capacity exhausted; configure n_iterations accordingly")

        k = ball_column(self.game, cfg.env)
        rho = self.net.emulate_window(k, self.train, cfg.t_emu, rng=self.noise_rng)
        j = select_action(rho, self.tie_rng)
        r = compute_reward(j, k)
        modulator = update_expected_reward(self.reward_state, k, r, cfg.learning.gamma)
        a_plus = self.net.read_and_reset_correlations()
        apply_weight_update(self.net.weights, a_plus, modulator, cfg.learning, active_row=k)
        step_environment(self.game, j, cfg.env, self.env_rng)

        logs.k[i] = k
        logs.j[i] = j
        logs.reward[i] = r
        logs.r_bar_k[i] = self.reward_state.r_bar[k]
        logs.mean_r[i] = mean_expected_reward(self.reward_state)
        logs.perf[i] = performance(self.reward_state)
        if logs.rho is not None:
            np.clip(rho, 0, 255, out=rho)
            logs.rho[i] = rho
        if logs.weights_crc is not None:
            logs.weights_crc[i] = zlib.crc32(np.ascontiguousarray(self.net.weights).tobytes())
        logs.n = i + 1

    def _run_iteration_timed(self):
        cfg = self.cfg
        logs = self.logs
        i = logs.n
        pt = self.phase_times
        t0 = time.perf_counter()
        k = ball_column(self.game, cfg.env)
        rho = self.net.emulate_window(k, self.train, cfg.t_emu, rng=self.noise_rng)
        t1 = time.perf_counter()
        j = select_action(rho, self.tie_rng)
        r = compute_reward(j, k)
        modulator = update_expected_reward(self.reward_state, k, r, cfg.learning.gamma)
        a_plus = self.net.read_and_reset_correlations()
        apply_weight_update(self.net.weights, a_plus, modulator, cfg.learning, active_row=k)
        t2 = time.perf_counter()
        step_environment(self.game, j, cfg.env, self.env_rng)
        t3 = time.perf_counter()
        pt["emulation"].append(t1 - t0)
        pt["plasticity"].append(t2 - t1)
        pt["environment"].append(t3 - t2)
        logs.k[i] = k
        logs.j[i] = j
        logs.reward[i] = r
        logs.r_bar_k[i] = self.reward_state.r_bar[k]
        logs.mean_r[i] = mean_expected_reward(self.reward_state)
        logs.perf[i] = performance(self.reward_state)
        if logs.rho is not None:
            np.clip(rho, 0, 255, out=rho)
            logs.rho[i] = rho
        logs.n = i + 1

    def run(self, n_iterations: int | None = None, timing: bool = False) -> ExperimentResult:
        n = self.cfg.n_iterations if n_iterations is None else n_iterations
        t_start = time.perf_counter()
        if timing:
            self.phase_times = {"emulation": [], "plasticity": [], "environment": []}
            for _ in range(n):
                self._run_iteration_timed()
        else:
            for _ in range(n):
                self.run_iteration()
        runtime = time.perf_counter() - t_start
        return ExperimentResult(
            config=self.cfg,
            logs=self.logs,
            weights_initial=self.weights_initial.copy(),
            weights_final=self.net.weights.copy(),
            r_bar=self.reward_state.r_bar.copy(),
            last_reward=self.reward_state.last_reward.copy(),
            final_mean_expected_reward=mean_expected_reward(self.reward_state),
            final_performance=performance(self.reward_state),
            resets=self.game.resets,
            runtime_s=runtime,
        )

    def measure_states(self, n_reps: int = 1) -> np.ndarray:
        """Reward per state with learning off: emulate and act on every column.

        Returns the mean over ``n_reps`` repetitions of the reward the
        current weights earn in each of the 32 states. Weights, reward
        baselines and the game are left untouched.
        """
        rewards = np.zeros(N_NEURONS)
        for _ in range(n_reps):
            for k in range(N_NEURONS):
                rho = self.net.emulate_window(k, self.train, self.cfg.t_emu,
                                              rng=self.noise_rng)
                self.net.read_and_reset_correlations()
                j = select_action(rho, self.tie_rng)
                rewards[k] += compute_reward(j, k)
        return rewards / n_reps


def run_experiment(config: ExperimentConfig, **kwargs) -> ExperimentResult:
    """Build and run one experiment to completion."""
    return Experiment(config, **kwargs).run()
