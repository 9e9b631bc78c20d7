"""Two-player v-trace over full episodes with policy-dependent rewards.

Episodes are alternating-turn and undiscounted.  The backward sweep runs from
the last step to the first with no bootstrapping: for the player to move it
produces a clipped off-policy value estimate and per-action state-action
values; for the other player it carries importance-weighted reward sums until
that player's previous decision point.

Rewards are transformed on the fly: the acting player pays
eta*log(pi/pi_reg) on its own action and the opponent collects the same
amount.  Near a regularization-policy switch the transform interpolates
between the previous and current policies: the scalar reward mixes the two
log terms with weight alpha, while the state-action values use the log of
the alpha-mixed policy directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class EstimatorConfig:
    rho_bar: float = 1.0
    c_bar: float = 1.0
    eta: float = 0.2

    def __post_init__(self):
        if not self.rho_bar >= self.c_bar > 0:
            raise ValueError("clips must satisfy rho_bar >= c_bar > 0")


@dataclass
class Step:
    """One decision: who moved, what was observed, sampled and received."""

    observation: Any
    legal_actions: tuple[int, ...]
    behavior: np.ndarray          # mu over legal_actions
    action_index: int             # position of the taken action in legal_actions
    rewards: tuple[float, float]  # raw environment rewards (player0, player1)
    mover: int                    # 0 or 1
    head: str = "selection"       # which policy head produced this decision

    @property
    def action(self) -> int:
        return self.legal_actions[self.action_index]


@dataclass
class Trajectory:
    """A full episode; steps beyond t_max never exist."""

    steps: list[Step]
    t_max: int = 3600
    truncated: bool = False

    @property
    def t_effective(self) -> int:
        return len(self.steps)

    def validate(self) -> None:
        if len(self.steps) > self.t_max:
            raise ValueError("trajectory longer than t_max")
        for t, step in enumerate(self.steps):
            if step.behavior[step.action_index] <= 0.0:
                raise ValueError(f"behavior probability of taken action is 0 at t={t}")
            if abs(float(np.sum(step.behavior)) - 1.0) > 1e-6:
                raise ValueError(f"behavior distribution at t={t} not normalized")


PolicyFn = Callable[[Step], np.ndarray]
ValueFn = Callable[[Step], float]


@dataclass
class RegInterpolation:
    """Current and previous regularization policies plus the mixing weight."""

    reg_now: PolicyFn
    reg_prev: PolicyFn
    alpha: float = 1.0

    def mixed(self, step: Step) -> np.ndarray:
        if self.alpha >= 1.0:
            return self.reg_now(step)
        return self.alpha * self.reg_now(step) + (1.0 - self.alpha) * self.reg_prev(step)


@dataclass
class RegularizationSchedule:
    """Steps per outer iteration and the transition-smoothing weight."""

    delta_m: int

    def alpha(self, n: int) -> float:
        return min(1.0, 2.0 * n / self.delta_m)


def transformed_step_reward(
    r: float, pi_prob: float, reg_prob: float, player: int, mover: int, eta: float
) -> float:
    """Single-policy reward transform for one player at one step."""
    if pi_prob <= 0.0 or reg_prob <= 0.0:
        raise ValueError("reward transform requires positive probabilities")
    sign = -1.0 if player == mover else 1.0
    return r + sign * eta * float(np.log(pi_prob / reg_prob))


def interpolated_step_reward(
    r: float,
    pi_prob: float,
    reg_now_prob: float,
    reg_prev_prob: float,
    alpha: float,
    player: int,
    mover: int,
    eta: float,
) -> float:
    """Alpha-weighted mixture of the previous and current reward transforms."""
    now = transformed_step_reward(r, pi_prob, reg_now_prob, player, mover, eta)
    if alpha >= 1.0:
        return now
    prev = transformed_step_reward(r, pi_prob, reg_prev_prob, player, mover, eta)
    return alpha * now + (1.0 - alpha) * prev


@dataclass
class VtraceResult:
    # values[t, i] is player i's estimate produced by the sweep at step t.
    values: np.ndarray
    # q_values[t] is the acting player's estimate per legal action at step t.
    q_values: list[np.ndarray] = field(default_factory=list)
    # transformed_rewards[t, i]: the interpolated reward actually used.
    transformed_rewards: np.ndarray | None = None


def vtrace_two_player(
    traj: Trajectory,
    policy_fn: PolicyFn,
    value_fn: ValueFn,
    reg: RegInterpolation,
    cfg: EstimatorConfig = EstimatorConfig(),
) -> VtraceResult:
    """Backward sweep over a full episode for both players at once."""
    steps = traj.steps
    if not steps:
        raise ValueError("empty trajectory")
    T = len(steps)
    values = np.zeros((T, 2))
    rewards_used = np.zeros((T, 2))
    q_values: list[np.ndarray | None] = [None] * T

    # Per-player sweep state, boundary values beyond the last step.
    v_hat = [0.0, 0.0]
    v_next = [0.0, 0.0]
    r_hat = [0.0, 0.0]
    xi = [1.0, 1.0]

    for t in range(T - 1, -1, -1):
        step = steps[t]
        mover = step.mover
        mu_a = float(step.behavior[step.action_index])
        if mu_a <= 0.0:
            raise ValueError(f"mu(a_t) = 0 at t={t}")
        pi_vec = np.asarray(policy_fn(step), dtype=float)
        pi_a = float(pi_vec[step.action_index])
        reg_now_a = float(reg.reg_now(step)[step.action_index])
        reg_prev_a = float(reg.reg_prev(step)[step.action_index])
        ratio = pi_a / mu_a
        v_obs = float(value_fn(step))

        for i in (0, 1):
            r_i = interpolated_step_reward(
                step.rewards[i], pi_a, reg_now_a, reg_prev_a, reg.alpha, i, mover, cfg.eta
            )
            rewards_used[t, i] = r_i
            if i != mover:
                r_hat[i] = r_i + ratio * r_hat[i]
                xi[i] = ratio * xi[i]
                values[t, i] = v_hat[i]
                continue

            rho_t = min(cfg.rho_bar, ratio * xi[i])
            c_t = min(cfg.c_bar, ratio * xi[i])
            # State-action values use the sweep state at t+1, so compute them
            # before overwriting it.
            mixed = np.maximum(np.asarray(reg.mixed(step), dtype=float), 1e-300)
            log_ratio = np.log(np.maximum(pi_vec, 1e-300) / mixed)
            q = -cfg.eta * log_ratio + v_obs
            correction = (
                r_i
                + cfg.eta * float(log_ratio[step.action_index])
                + ratio * (r_hat[i] + v_hat[i])
                - v_obs
            )
            q[step.action_index] += correction / mu_a
            q_values[t] = q

            delta = rho_t * (r_i + ratio * r_hat[i] + v_next[i] - v_obs)
            v_hat[i] = v_obs + delta + c_t * (v_hat[i] - v_next[i])
            v_next[i] = v_obs
            r_hat[i] = 0.0
            xi[i] = 1.0
            values[t, i] = v_hat[i]

    return VtraceResult(values, q_values, rewards_used)


def empirical_returns(
    transformed_rewards: Sequence[Sequence[float]],
) -> np.ndarray:
    """Suffix sums of per-player rewards: returns[t, i] = sum_{s>=t} r[s, i]."""
    r = np.asarray(transformed_rewards, dtype=float)
    return np.cumsum(r[::-1], axis=0)[::-1].copy()
