"""Simplified Pong: a square field with three reflective walls and a paddle.

The ball moves with a constant L1-norm velocity and reflects elastically
off the left, right and top walls; the paddle tracks a commanded column
along the open baseline. A ball reaching the baseline is either caught
(reflected) or missed, which resets the ball to the field center with a
random direction. Rewards are graded by the distance between the
commanded column and the ball's column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_COLUMNS = 32

# Reward by |target - ball| column distance; zero outside the window.
REWARD_TABLE = (1.0, 0.7, 0.4, 0.1)
REWARD_WINDOW = len(REWARD_TABLE) - 1


@dataclass(frozen=True)
class EnvParams:
    L: float = 1.0  # field side length
    v_l1: float = 0.025  # L1 norm of ball velocity, per iteration
    v_p: float = 0.05  # paddle speed, per iteration
    r_b: float = 0.02  # ball radius
    r_p: float = 0.20  # paddle length
    n_cols: int = N_COLUMNS

    def __post_init__(self):
        if min(self.L, self.v_l1, self.v_p, self.r_b, self.r_p) <= 0:
            raise ValueError("all environment parameters must be positive")
        if self.r_p >= self.L or self.v_l1 >= self.L:
            raise ValueError("paddle length and ball speed must be smaller than the field")
        # The graded reward window must not exceed the catch width, otherwise
        # a converged agent with nonzero reward could still miss.
        if REWARD_WINDOW * self.L / self.n_cols > self.r_p / 2 + self.r_b:
            raise ValueError("reward window wider than the paddle catch width")

    @property
    def catch_halfwidth(self) -> float:
        return self.r_p / 2 + self.r_b

    @property
    def paddle_min(self) -> float:
        return self.r_p / 2

    @property
    def paddle_max(self) -> float:
        return self.L - self.r_p / 2


@dataclass
class GameState:
    ball_x: float
    ball_y: float
    vx: float
    vy: float
    paddle_x: float
    resets: int = 0


def reset_ball(state: GameState, params: EnvParams, rng: np.random.Generator):
    """Place the ball at the field center with a random direction.

    The vertical velocity fraction is uniform in [0.25, 0.75] (avoiding
    near-horizontal and near-vertical trajectories) and both signs are
    independent fair coin flips; the L1 speed is exactly v_l1.
    """
    f = rng.uniform(0.25, 0.75)
    sx = 1.0 if rng.integers(2) else -1.0
    sy = 1.0 if rng.integers(2) else -1.0
    vy_abs = f * params.v_l1
    vx_abs = params.v_l1 - vy_abs
    state.ball_x = params.L / 2
    state.ball_y = params.L / 2
    state.vx = sx * vx_abs
    state.vy = sy * vy_abs


def new_game(params: EnvParams, rng: np.random.Generator) -> GameState:
    state = GameState(ball_x=0.0, ball_y=0.0, vx=0.0, vy=0.0, paddle_x=params.L / 2)
    reset_ball(state, params, rng)
    return state


def ball_column(state: GameState, params: EnvParams) -> int:
    """Discretized ball position: k = floor(x / L * n_cols), clamped."""
    k = math.floor(state.ball_x / params.L * params.n_cols)
    return min(max(k, 0), params.n_cols - 1)


def compute_reward(j: int, k: int) -> float:
    """Graded reward for aiming at column j with the ball in column k."""
    d = abs(j - k)
    return REWARD_TABLE[d] if d <= REWARD_WINDOW else 0.0


def step_environment(state: GameState, j: int, params: EnvParams, rng: np.random.Generator):
    """Move the paddle toward column j, then advance and reflect the ball.

    At the baseline the ball is caught when it overlaps the paddle
    (|x - paddle| <= r_p/2 + r_b, evaluated at the end-of-step position);
    a miss resets the ball and counts one reset.
    """
    if not 0 <= j < params.n_cols:
        raise ValueError(f"target column {j} out of range")
    target = (j + 0.5) * params.L / params.n_cols
    dx = min(params.v_p, abs(target - state.paddle_x))
    state.paddle_x += math.copysign(dx, target - state.paddle_x) if dx else 0.0
    state.paddle_x = min(max(state.paddle_x, params.paddle_min), params.paddle_max)

    x = state.ball_x + state.vx
    y = state.ball_y + state.vy
    while x < 0.0 or x > params.L:
        x = -x if x < 0.0 else 2.0 * params.L - x
        state.vx = -state.vx
    if y > params.L:
        y = 2.0 * params.L - y
        state.vy = -state.vy
    if y <= 0.0:
        if abs(x - state.paddle_x) <= params.catch_halfwidth:
            y = -y
            state.vy = -state.vy
        else:
            state.resets += 1
            reset_ball(state, params, rng)
            return
    state.ball_x = x
    state.ball_y = y
