"""Zero-sum normal-form games and regularized Nash dynamics solved exactly.

The solver iterates three steps: transform the rewards with log-ratio terms
against a regularization policy, integrate the replicator dynamics of the
transformed game to its fixed point, then adopt that fixed point as the next
regularization policy.  The fixed-point sequence converges to a Nash
equilibrium of the original game.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Policies are clamped here before any log; the transformed reward diverges
# at the simplex boundary.
POLICY_FLOOR = 1e-12
SIMPLEX_ATOL = 1e-9


class ConvergenceError(RuntimeError):
    """Replicator integration hit the time cap without reaching tolerance."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class NormalFormGame:
    """Two-player zero-sum game; `payoff[a1, a2]` is player 1's reward."""

    payoff: np.ndarray

    def __post_init__(self):
        payoff = np.asarray(self.payoff, dtype=float)
        if payoff.ndim != 2:
            raise ValueError("payoff must be a 2-D matrix")
        if not np.all(np.isfinite(payoff)):
            raise ValueError("payoff must be finite everywhere")
        object.__setattr__(self, "payoff", payoff)

    @property
    def actions_p1(self) -> int:
        return self.payoff.shape[0]

    @property
    def actions_p2(self) -> int:
        return self.payoff.shape[1]

    def reward(self, a1: int, a2: int, player: int) -> float:
        """Reward of a joint action; player 2 receives the negation."""
        r = float(self.payoff[a1, a2])
        return r if player == 1 else -r


def _check_simplex(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if np.any(p < -SIMPLEX_ATOL):
        raise ValueError(f"{name} has negative entries")
    if abs(p.sum() - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"{name} does not sum to 1 (got {p.sum()})")
    return p


@dataclass(frozen=True)
class JointPolicy:
    """A pair of mixed strategies, one per player."""

    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p1", _check_simplex(self.p1, "p1"))
        object.__setattr__(self, "p2", _check_simplex(self.p2, "p2"))

    @staticmethod
    def uniform(game: NormalFormGame) -> "JointPolicy":
        return JointPolicy(
            np.full(game.actions_p1, 1.0 / game.actions_p1),
            np.full(game.actions_p2, 1.0 / game.actions_p2),
        )

    def of(self, player: int) -> np.ndarray:
        return self.p1 if player == 1 else self.p2

    def strictly_positive(self) -> bool:
        return bool(np.all(self.p1 > 0.0) and np.all(self.p2 > 0.0))


@dataclass(frozen=True)
class RNaDConfig:
    """Knobs for one inner replicator solve and the outer iteration count."""

    eta: float = 0.2
    integrator_step: float = 0.1
    fixed_point_tolerance: float = 1e-8
    max_integration_time: float = 1e4
    outer_iterations: int = 10

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.integrator_step <= 0:
            raise ValueError("integrator_step must be > 0")
        if self.fixed_point_tolerance <= 0:
            raise ValueError("fixed_point_tolerance must be > 0")


def _safe_log_ratio(num: np.ndarray | float, den: np.ndarray | float) -> np.ndarray:
    num = np.maximum(np.asarray(num, dtype=float), 0.0)
    den = np.asarray(den, dtype=float)
    if np.any(num <= 0.0) or np.any(den <= 0.0):
        raise ValueError("log-ratio requires strictly positive probabilities")
    return np.log(np.maximum(num, POLICY_FLOOR) / np.maximum(den, POLICY_FLOOR))


def transformed_reward(
    game: NormalFormGame,
    pi: JointPolicy,
    reg: JointPolicy,
    a1: int,
    a2: int,
    player: int,
    eta: float,
) -> float:
    """Policy-dependent reward of the transformed game at a joint action.

    The acting player's reward is penalized by eta*log(pi/reg) on its own
    action and credited with the opponent's penalty, so the transformed game
    stays zero-sum.
    """
    own, opp = (a1, a2) if player == 1 else (a2, a1)
    own_pi, opp_pi = (pi.p1, pi.p2) if player == 1 else (pi.p2, pi.p1)
    own_reg, opp_reg = (reg.p1, reg.p2) if player == 1 else (reg.p2, reg.p1)
    r = game.reward(a1, a2, player)
    r -= eta * float(_safe_log_ratio(own_pi[own], own_reg[own]))
    r += eta * float(_safe_log_ratio(opp_pi[opp], opp_reg[opp]))
    return r


def _fitness_vector(
    game: NormalFormGame, pi: JointPolicy, reg: JointPolicy, player: int, eta: float
) -> np.ndarray:
    """Expected transformed reward of each own action against pi's opponent."""
    if player == 1:
        own, opp = pi.p1, pi.p2
        own_reg, opp_reg = reg.p1, reg.p2
        base = game.payoff @ opp
    else:
        own, opp = pi.p2, pi.p1
        own_reg, opp_reg = reg.p2, reg.p1
        base = -(game.payoff.T @ opp)
    opp_bonus = float(np.dot(opp, _safe_log_ratio(opp, opp_reg)))
    return base - eta * _safe_log_ratio(own, own_reg) + eta * opp_bonus


def fitness(
    game: NormalFormGame,
    pi: JointPolicy,
    reg: JointPolicy,
    player: int,
    action: int,
    eta: float,
) -> float:
    """Quality of one action: expectation of transformed_reward over the opponent."""
    return float(_fitness_vector(game, pi, reg, player, eta)[action])


def _policy_derivative(
    game: NormalFormGame, pi: JointPolicy, reg: JointPolicy, eta: float
) -> tuple[np.ndarray, np.ndarray]:
    """dpi/dtau of the replicator dynamics on the transformed game."""
    q1 = _fitness_vector(game, pi, reg, 1, eta)
    q2 = _fitness_vector(game, pi, reg, 2, eta)
    d1 = pi.p1 * (q1 - np.dot(pi.p1, q1))
    d2 = pi.p2 * (q2 - np.dot(pi.p2, q2))
    return d1, d2


def _normalize_logits(y: np.ndarray) -> np.ndarray:
    z = y - y.max()
    p = np.exp(z)
    p /= p.sum()
    return np.maximum(p, POLICY_FLOOR)


@dataclass
class ReplicatorResult:
    """Fixed point of one inner solve plus integration diagnostics."""

    policy: JointPolicy
    tau: float
    residual: float
    # (tau, JointPolicy) samples, populated only when recording was requested.
    trajectory: list[tuple[float, JointPolicy]] = field(default_factory=list)


def integrate_replicator(
    game: NormalFormGame,
    reg: JointPolicy,
    pi0: JointPolicy,
    config: RNaDConfig,
    record_trajectory: bool = False,
) -> ReplicatorResult:
    """Integrate the transformed game's replicator dynamics to its fixed point.

    Classical fourth-order integration with a fixed step, applied to the log
    of the policy so the iterate can never leave the simplex interior; the
    logits are renormalized after every step.  Stops when max|dpi/dtau| drops
    below the tolerance, raises ConvergenceError at the time cap.
    """
    if not pi0.strictly_positive():
        raise ValueError("pi0 must be strictly positive")
    if not reg.strictly_positive():
        raise ValueError("regularization policy must be strictly positive")

    n1 = game.actions_p1
    y = np.concatenate([np.log(pi0.p1), np.log(pi0.p2)])
    h = config.integrator_step

    def policy_of(yv: np.ndarray) -> JointPolicy:
        return JointPolicy(_normalize_logits(yv[:n1]), _normalize_logits(yv[n1:]))

    def logit_derivative(yv: np.ndarray) -> np.ndarray:
        pi = policy_of(yv)
        q1 = _fitness_vector(game, pi, reg, 1, config.eta)
        q2 = _fitness_vector(game, pi, reg, 2, config.eta)
        return np.concatenate([q1 - np.dot(pi.p1, q1), q2 - np.dot(pi.p2, q2)])

    tau = 0.0
    pi = policy_of(y)
    trajectory: list[tuple[float, JointPolicy]] = []
    if record_trajectory:
        trajectory.append((tau, pi))
    while True:
        d1, d2 = _policy_derivative(game, pi, reg, config.eta)
        residual = max(np.abs(d1).max(), np.abs(d2).max())
        if residual < config.fixed_point_tolerance:
            return ReplicatorResult(pi, tau, residual, trajectory)
        if tau >= config.max_integration_time:
            raise ConvergenceError(
                f"replicator dynamics did not converge: residual {residual:.3e} "
                f"after tau={tau:.1f}"
            )
        k1 = logit_derivative(y)
        k2 = logit_derivative(y + 0.5 * h * k1)
        k3 = logit_derivative(y + 0.5 * h * k2)
        k4 = logit_derivative(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[:n1] -= y[:n1].max()
        y[n1:] -= y[n1:].max()
        tau += h
        pi = policy_of(y)
        if record_trajectory:
            trajectory.append((tau, pi))


def lyapunov(pi_fix: JointPolicy, pi: JointPolicy) -> float:
    """KL-type divergence to the fixed point; decreases along the dynamics."""
    total = 0.0
    for fix, cur in ((pi_fix.p1, pi.p1), (pi_fix.p2, pi.p2)):
        support = fix > 0.0
        if np.any(np.asarray(cur)[support] <= 0.0):
            raise ValueError("pi must be strictly positive on the support of pi_fix")
        total += float(np.sum(fix[support] * np.log(fix[support] / cur[support])))
    return total


def rnad_iterate(
    game: NormalFormGame, reg0: JointPolicy, config: RNaDConfig
) -> list[JointPolicy]:
    """Run the outer loop, returning the sequence of inner fixed points.

    Each fixed point becomes the regularization policy of the next iteration;
    the inner solve also starts from it.
    """
    if not reg0.strictly_positive():
        raise ValueError("reg0 must be strictly positive")
    reg = reg0
    fixed_points: list[JointPolicy] = []
    for n in range(config.outer_iterations):
        try:
            result = integrate_replicator(game, reg, reg, config)
        except ConvergenceError as err:
            raise ConvergenceError(f"iteration {n}: {err}", iteration=n) from err
        fixed_points.append(result.policy)
        reg = result.policy
    return fixed_points


def best_response_value(
    game: NormalFormGame, opponent_policy: np.ndarray, player: int
) -> float:
    """Best pure-action expected reward in the original game."""
    opponent_policy = _check_simplex(opponent_policy, "opponent_policy")
    if player == 1:
        return float(np.max(game.payoff @ opponent_policy))
    return float(np.max(-(game.payoff.T @ opponent_policy)))


def exploitability(game: NormalFormGame, pi: JointPolicy) -> float:
    """Mean best-response gain; zero exactly at a Nash equilibrium."""
    br1 = best_response_value(game, pi.p2, 1)
    br2 = best_response_value(game, pi.p1, 2)
    return 0.5 * (br1 + br2)


MATCHING_PENNIES = np.array([[1.0, -1.0], [-1.0, 1.0]])
RPS = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])

_NAMED_GAMES = {
    "matching_pennies": MATCHING_PENNIES,
    "rps": RPS,
}


def named_game(name: str) -> NormalFormGame:
    try:
        return NormalFormGame(_NAMED_GAMES[name].copy())
    except KeyError:
        raise KeyError(
            f"unknown game {name!r}; available: {sorted(_NAMED_GAMES)}"
        ) from None


def parse_game(text: str) -> NormalFormGame:
    """Parse the plain-text format: 'p1_actions p2_actions' then the matrix."""
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("game text must start with 'p1_actions p2_actions'")
    n1, n2 = int(tokens[0]), int(tokens[1])
    values = [float(tok) for tok in tokens[2:]]
    if len(values) != n1 * n2:
        raise ValueError(f"expected {n1 * n2} payoff entries, got {len(values)}")
    return NormalFormGame(np.array(values).reshape(n1, n2))


def load_game(source: str | Path) -> NormalFormGame:
    """Load a named game or a plain-text matrix file."""
    name = str(source)
    if name in _NAMED_GAMES:
        return named_game(name)
    return parse_game(Path(source).read_text())
