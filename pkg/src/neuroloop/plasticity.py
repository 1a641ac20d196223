"""Reward-modulated weight updates with per-state baselines, in fixed point.

The three-factor rule scales the digitized causal eligibility A+ of each
synapse by the learning rate and the reward-prediction error R - Rbar_k.
Arithmetic mimics the embedded vector processor: the learning rate and
the modulator are quantized to 1/256 steps, the product is exact in
binary, and the integer weight increment is rounded to nearest with ties
away from zero before clamping to the 6-bit range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from neuroloop.network import ADC_MAX, WEIGHT_MAX
from neuroloop.noise import N_NEURONS

UPDATE_MODES = ("all-synapses", "active-row")

MOD_QUANT = 256  # fixed-point resolution of learning rate and modulator


@dataclass(frozen=True)
class LearningParams:
    beta: float = 0.125
    gamma: float = 0.5
    update_mode: str = "all-synapses"

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if self.update_mode not in UPDATE_MODES:
            raise ValueError(f"update_mode must be one of {UPDATE_MODES}")


@dataclass
class RewardState:
    """Per-state expected rewards and the most recent reward per state.

    A state's expected reward is initialized with the first reward it
    receives; before that it holds no value and contributes zero to the
    aggregate metrics.
    """

    r_bar: np.ndarray
    initialized: np.ndarray
    last_reward: np.ndarray

    @classmethod
    def fresh(cls, n: int = N_NEURONS) -> "RewardState":
        return cls(
            r_bar=np.zeros(n),
            initialized=np.zeros(n, dtype=bool),
            last_reward=np.full(n, np.nan),
        )


def quantize_q256(x: float) -> float:
    """Snap to the nearest multiple of 1/256, ties away from zero."""
    return math.copysign(math.floor(abs(x) * MOD_QUANT + 0.5), x) / MOD_QUANT


def _round_ties_away(x: np.ndarray) -> np.ndarray:
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def update_expected_reward(state: RewardState, k: int, reward: float, gamma: float) -> float:
    """Record a reward for state k and return the neuromodulator R - Rbar_k.

    The modulator uses Rbar_k from *before* the update; on the first visit
    the expected reward is initialized to the reward itself and the
    modulator is zero.
    """
    if not 0 <= k < state.r_bar.size:
        raise ValueError(f"state index {k} out of range")
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward {reward} outside [0, 1]")
    if state.initialized[k]:
        modulator = reward - state.r_bar[k]
        state.r_bar[k] += gamma * modulator
    else:
        modulator = 0.0
        state.r_bar[k] = reward
        state.initialized[k] = True
    state.last_reward[k] = reward
    return float(modulator)


def weight_deltas(a_plus: np.ndarray, modulator: float, beta: float) -> np.ndarray:
    """Integer weight increments of the three-factor rule (fixed point)."""
    raw = quantize_q256(beta) * quantize_q256(modulator) * a_plus
    return _round_ties_away(raw).astype(np.int64)


def apply_weight_update(weights: np.ndarray, a_plus: np.ndarray, modulator: float,
                        params: LearningParams, active_row: int) -> np.ndarray:
    """Apply the three-factor update in place; returns the integer deltas.

    In ``all-synapses`` mode every synapse is updated (hardware semantics,
    where residual traces are not guaranteed zero); in ``active-row`` mode
    only the row that transmitted spikes this iteration is touched.
    """
    a_plus = np.asarray(a_plus)
    if a_plus.min() < 0 or a_plus.max() > ADC_MAX // 2:
        raise ValueError(f"A+ entries must lie in [0, {ADC_MAX // 2}]")
    if params.update_mode == "active-row":
        delta = weight_deltas(a_plus[active_row], modulator, params.beta)
        weights[active_row] = np.clip(weights[active_row] + delta, 0, WEIGHT_MAX)
    else:
        delta = weight_deltas(a_plus, modulator, params.beta)
        np.clip(weights + delta, 0, WEIGHT_MAX, out=weights)
    return delta


def covariance_check(history) -> float:
    """Sample covariance of (reward, eligibility) pairs.

    Used to verify that baseline-subtracted updates track Cov(R, e) on
    average, the statistical-learning property of the rule.
    """
    pairs = np.asarray(history, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 2:
        raise ValueError("need at least two (reward, eligibility) pairs")
    return float(np.cov(pairs[:, 0], pairs[:, 1], ddof=1)[0, 1])
