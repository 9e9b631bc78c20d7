"""The at-scale regularized-Nash-dynamics learner.

One learner step consumes a batch of full episodes: value and state-action
estimates are produced by the two-player backward sweep against the target
parameters, the critic regresses the value head with an absolute-deviation
loss, the policy heads follow the logit-gradient direction weighted by the
clipped state-action estimates (with per-action gating that drops updates
whose hypothetically-updated logit would leave [-beta, beta]), and the
combined direction is clipped and fed to Adam.  Target parameters track the
live ones by exponential averaging; every delta_m steps the target policy is
frozen as the next regularization policy.
"""

from __future__ import annotations

import json
import pickle
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .approximator import (
    AdamConfig,
    AdamState,
    Approximator,
    ConvApproximator,
    TabularApproximator,
    adam_step,
    clip_direction,
    target_update,
)
from .postprocess import TestTimeConfig, project_policy
from .vtrace import (
    EstimatorConfig,
    RegInterpolation,
    RegularizationSchedule,
    Trajectory,
    VtraceResult,
    vtrace_two_player,
)


@dataclass(frozen=True)
class LearnerConfig:
    eta: float = 0.2
    delta_m: int = 200
    # Optional (threshold, value) schedule: delta_m for m <= threshold, the
    # last entry (None, value) covers the tail.
    delta_m_schedule: tuple | None = None
    learning_rate: float = 0.00005
    # lr_n schedule: the rate is multiplied by this factor at every outer
    # iteration (1.0 keeps it constant, as in the full-scale run).
    lr_decay_per_iteration: float = 1.0
    gradient_clip: float = 10_000.0
    neurd_beta: float = 2.0
    neurd_clip: float = 10_000.0
    adam_b1: float = 0.0
    adam_b2: float = 0.999
    adam_eps: float = 1e-8
    gamma_averaging: float = 0.001
    batch_size: int = 16
    t_max: int = 3600
    rho_bar: float = 1.0
    c_bar: float = 1.0
    total_steps: int = 2000
    finetune_enabled: bool = False
    finetune_from_fraction: float = 0.75
    finetune_eps_tres: float = 0.03
    finetune_n_disc: int = 32
    chunk_length: int = 256
    buffer_capacity: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma_averaging < 1.0:
            raise ValueError("gamma_averaging must lie in (0, 1)")
        for name in (
            "eta", "learning_rate", "gradient_clip", "neurd_beta", "neurd_clip",
            "batch_size", "t_max", "chunk_length",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def delta_m_for(self, m: int) -> int:
        if self.delta_m_schedule is None:
            return self.delta_m
        for threshold, value in self.delta_m_schedule:
            if threshold is None or m <= threshold:
                return value
        return self.delta_m_schedule[-1][1]

    def adam(self, m: int = 0) -> AdamConfig:
        return AdamConfig(self.lr_at(m), self.adam_b1, self.adam_b2, self.adam_eps)

    def lr_at(self, m: int) -> float:
        return self.learning_rate * self.lr_decay_per_iteration**m

    def estimator(self) -> EstimatorConfig:
        return EstimatorConfig(self.rho_bar, self.c_bar, self.eta)


def paper_preset() -> LearnerConfig:
    """The published full-scale settings (schedule, budget, batch)."""
    return LearnerConfig(
        delta_m_schedule=((100, 10_000), (165, 100_000), (None, 35_000)),
        batch_size=768,
        total_steps=7_210_000,
        finetune_enabled=True,
    )


def desk_preset() -> LearnerConfig:
    """Laptop-scale settings used by the pipeline smoke tests."""
    return LearnerConfig(
        delta_m=100,
        learning_rate=0.1,
        batch_size=12,
        t_max=600,
        total_steps=600,
        chunk_length=128,
        buffer_capacity=36,
        finetune_enabled=False,
    )


@dataclass
class ParamSnapshot:
    """Immutable view of the learner published to actors and evaluators."""

    version: int
    approx: Approximator
    target: Approximator
    reg: Approximator
    reg_prev: Approximator
    m: int
    n: int
    finetune: tuple[float, int] | None = None  # (eps_tres, n_disc) when active

    def actor_policy(self, obs, head: str, legal_actions) -> np.ndarray:
        # Actors sample the target-parameter policy: it is the policy the
        # estimators evaluate, so self-play stays near on-policy and the
        # importance ratios keep their clips slack.
        policy = self.target.policy(obs, head, legal_actions)
        if self.finetune is not None:
            policy = project_policy(policy, *self.finetune)
        return policy


# -- loss terms and update direction ----------------------------------------


def critic_loss(
    batch: list[Trajectory],
    approx: Approximator,
    estimates: list[VtraceResult],
) -> tuple[float, dict]:
    """Absolute-deviation regression of the value head onto the acting
    player's estimate, averaged per trajectory by its effective length."""
    approx.zero_grad()
    total = 0.0
    for traj, est in zip(batch, estimates):
        weight = 1.0 / traj.t_effective
        for t, step in enumerate(traj.steps):
            v = approx.evaluate_value(step.observation)
            target = est.values[t, step.mover]
            total += weight * abs(v - target)
            approx.accumulate_value_grad(step.observation, weight * np.sign(v - target))
    return total, approx.take_gradient()


def neurd_policy_gradient(
    batch: list[Trajectory],
    approx: Approximator,
    estimates: list[VtraceResult],
    cfg: LearnerConfig,
    gated: bool = True,
) -> dict:
    """Gradient of sum over steps and legal actions of logit * Clip(Q).

    The clipped state-action values are centered per state by their
    live-policy-weighted mean before weighting the logit gradients: a
    constant shift across a state's actions is policy-neutral for a softmax,
    but only the centered form keeps it neutral under a per-coordinate
    optimizer, and it makes an advantage-free state contribute exactly zero.
    Each per-action term is dropped when the gate is on and the logit, after
    a hypothetical update of one learning-rate step along the term's own
    gradient, would land outside [-beta, beta].
    """
    approx.zero_grad()
    for traj, est in zip(batch, estimates):
        weight = 1.0 / traj.t_effective
        for t, step in enumerate(traj.steps):
            q = est.q_values[t]
            if q is None:
                continue
            head = step.head
            legal = step.legal_actions
            q_centered = centered_q(approx, step, q, cfg)
            coeffs = weight * q_centered
            if gated:
                logits = approx.logits(step.observation, head)[np.asarray(legal, int)]
                scale = approx.logit_step_scale(step.observation, head, legal)
                hypothetical = logits + cfg.learning_rate * q_centered * scale
                coeffs = np.where(
                    np.abs(hypothetical) <= cfg.neurd_beta, coeffs, 0.0
                )
            approx.accumulate_policy_grad(step.observation, head, legal, coeffs)
    return approx.take_gradient()


def centered_q(approx: Approximator, step, q: np.ndarray, cfg: LearnerConfig) -> np.ndarray:
    """Clip the state-action estimates, then subtract the live policy's mean."""
    q_clipped = np.clip(q, -cfg.neurd_clip, cfg.neurd_clip)
    pi = approx.policy_over_legal(step.observation, step.head, step.legal_actions)
    return q_clipped - float(pi @ q_clipped)


def combine_direction(critic_grad: dict, policy_grad: dict, cfg: LearnerConfig) -> dict:
    """Descent direction: down the critic loss, up the logit-value objective,
    scaled by the learning rate and clipped elementwise."""
    direction: dict = {}
    for key, g in critic_grad.items():
        direction[key] = cfg.learning_rate * g
    for key, g in policy_grad.items():
        if key in direction:
            direction[key] = direction[key] - cfg.learning_rate * g
        else:
            direction[key] = -cfg.learning_rate * g
    return clip_direction(direction, cfg.gradient_clip)


def neurd_update_direction(
    batch: list[Trajectory],
    approx: Approximator,
    estimates: list[VtraceResult],
    cfg: LearnerConfig,
) -> dict:
    critic_grad = critic_loss(batch, approx, estimates)[1]
    policy_grad = neurd_policy_gradient(batch, approx, estimates, cfg, gated=True)
    return combine_direction(critic_grad, policy_grad, cfg)


class Learner:
    """Owns the live parameters; single writer, snapshot-based publication."""

    def __init__(self, approx: Approximator, cfg: LearnerConfig):
        self.cfg = cfg
        self.approx = approx
        self.target = approx.clone()
        self.reg = approx.clone()
        self.reg_prev = approx.clone()
        self.opt_state = AdamState()
        self.m = 0
        self.n = 0
        self.version = 0
        self.steps_done = 0

    # -- snapshots -----------------------------------------------------------

    def finetune_active(self) -> bool:
        return (
            self.cfg.finetune_enabled
            and self.steps_done >= self.cfg.finetune_from_fraction * self.cfg.total_steps
        )

    def snapshot(self) -> ParamSnapshot:
        return ParamSnapshot(
            version=self.version,
            approx=self.approx.clone(),
            target=self.target.clone(),
            reg=self.reg.clone(),
            reg_prev=self.reg_prev.clone(),
            m=self.m,
            n=self.n,
            finetune=(
                (self.cfg.finetune_eps_tres, self.cfg.finetune_n_disc)
                if self.finetune_active()
                else None
            ),
        )

    # -- estimation ----------------------------------------------------------

    def _policy_evaluator(self, approx: Approximator, finetuned: bool) -> Callable:
        def policy_fn(step):
            head = step.head
            pi = approx.policy_over_legal(step.observation, head, step.legal_actions)
            if finetuned:
                pi = project_policy(
                    pi, self.cfg.finetune_eps_tres, self.cfg.finetune_n_disc
                )
            return pi

        return policy_fn

    def reg_interpolation(self) -> RegInterpolation:
        schedule = RegularizationSchedule(self.cfg.delta_m_for(self.m))
        return RegInterpolation(
            self._policy_evaluator(self.reg, False),
            self._policy_evaluator(self.reg_prev, False),
            schedule.alpha(self.n),
        )

    def compute_estimates(self, traj: Trajectory) -> VtraceResult:
        """Forward statistics pass: exact full-episode estimates, no grads."""
        return vtrace_two_player(
            traj,
            self._policy_evaluator(self.target, self.finetune_active()),
            lambda step: self.target.evaluate_value(step.observation),
            self.reg_interpolation(),
            self.cfg.estimator(),
        )

    # -- gradient accumulation (called per chunk, in reverse order) ----------

    def accumulate_chunk(
        self,
        traj: Trajectory,
        est: VtraceResult,
        start: int,
        stop: int,
        batch_size: int = 1,
    ) -> float:
        """Add this chunk's combined-gradient contributions; returns its loss.

        Contributions are averaged over the batch (1/batch_size) so gradient
        magnitudes do not scale with the batch.
        """
        cfg = self.cfg
        lr = cfg.lr_at(self.m)
        weight = 1.0 / (traj.t_effective * batch_size)
        loss = 0.0
        for t in range(start, min(stop, traj.t_effective)):
            step = traj.steps[t]
            v = self.approx.evaluate_value(step.observation)
            target = est.values[t, step.mover]
            loss += weight * abs(v - target)
            self.approx.accumulate_value_grad(
                step.observation, lr * weight * np.sign(v - target)
            )
            q = est.q_values[t]
            if q is None:
                continue
            head = step.head
            legal = step.legal_actions
            q_centered = centered_q(self.approx, step, q, cfg)
            logits = self.approx.logits(step.observation, head)[np.asarray(legal, int)]
            scale = self.approx.logit_step_scale(step.observation, head, legal)
            hypothetical = logits + lr * q_centered * scale
            coeffs = np.where(np.abs(hypothetical) <= cfg.neurd_beta, q_centered, 0.0)
            self.approx.accumulate_policy_grad(
                step.observation, head, legal, -lr * weight * coeffs
            )
        return loss

    # -- one full step --------------------------------------------------------

    def apply_gradients(self) -> dict:
        """Clip the accumulated direction, step Adam, update the target."""
        direction = clip_direction(self.approx.take_gradient(), self.cfg.gradient_clip)
        if isinstance(self.approx, TabularApproximator):
            self.approx.ensure_entries(direction)
        adam_step(self.approx.params, direction, self.opt_state, self.cfg.adam(self.m))
        target_update(self.target.params, self.approx.params, self.cfg.gamma_averaging)
        for model in (self.approx, self.target):
            memo = getattr(model, "_logit_memo", None)
            if memo is not None:
                memo.clear()
        self.n += 1
        self.steps_done += 1
        self.version += 1
        if self.n >= self.cfg.delta_m_for(self.m):
            self.advance_outer_iteration()
        return direction

    def step(self, batch: list[Trajectory]) -> dict:
        """Forward statistics pass, reverse chunked gradient pass, update."""
        estimates = [self.compute_estimates(traj) for traj in batch]
        longest = max(traj.t_effective for traj in batch)
        chunk = self.cfg.chunk_length
        boundaries = [(s, s + chunk) for s in range(0, longest, chunk)]
        self.approx.zero_grad()
        loss = 0.0
        for start, stop in reversed(boundaries):
            for traj, est in zip(batch, estimates):
                loss += self.accumulate_chunk(traj, est, start, stop, len(batch))
        self.apply_gradients()
        return {
            "critic_loss": loss,
            "m": self.m,
            "n": self.n,
            "version": self.version,
        }

    def advance_outer_iteration(self) -> None:
        """Freeze the target policy as the next regularization policy."""
        self.reg_prev = self.reg
        self.reg = self.target.clone()
        self.m += 1
        self.n = 0

    # -- checkpoints -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        payload = {
            "format": 1,
            "version": self.version,
            "m": self.m,
            "n": self.n,
            "steps_done": self.steps_done,
            "config": asdict(self.cfg),
            "approx_kind": type(self.approx).__name__,
            "approx_meta": _approx_meta(self.approx),
            "theta": self.approx.state_dict(),
            "theta_target": self.target.state_dict(),
            "reg": self.reg.state_dict(),
            "reg_prev": self.reg_prev.state_dict(),
            "optimizer": self.opt_state.snapshot(),
        }
        Path(path).write_bytes(pickle.dumps(payload))

    @staticmethod
    def load(path: str | Path, value_input_fn: Callable = None) -> "Learner":
        payload = pickle.loads(Path(path).read_bytes())
        cfg_fields = {
            k: v for k, v in payload["config"].items() if k in LearnerConfig.__dataclass_fields__
        }
        if cfg_fields.get("delta_m_schedule") is not None:
            cfg_fields["delta_m_schedule"] = tuple(
                tuple(item) for item in cfg_fields["delta_m_schedule"]
            )
        cfg = LearnerConfig(**cfg_fields)
        approx = _approx_from_meta(
            payload["approx_kind"], payload["approx_meta"], value_input_fn
        )
        learner = Learner(approx, cfg)
        learner.approx.load_state_dict(payload["theta"])
        learner.target.load_state_dict(payload["theta_target"])
        learner.reg.load_state_dict(payload["reg"])
        learner.reg_prev.load_state_dict(payload["reg_prev"])
        learner.opt_state.restore(payload["optimizer"])
        learner.version = payload["version"]
        learner.m = payload["m"]
        learner.n = payload["n"]
        learner.steps_done = payload["steps_done"]
        return learner


def _approx_meta(approx: Approximator) -> dict:
    if isinstance(approx, ConvApproximator):
        return {
            "board_size": approx.board_size,
            "planes": approx.planes,
            "kernel": approx.kernel,
            "heads": list(approx.heads),
        }
    return {"num_actions": approx.num_actions}


def _approx_from_meta(kind: str, meta: dict, value_input_fn: Callable) -> Approximator:
    if kind == "ConvApproximator":
        return ConvApproximator(
            board_size=meta["board_size"],
            planes=meta["planes"],
            kernel=meta["kernel"],
            heads=tuple(meta["heads"]),
            value_input_fn=value_input_fn,
        )
    return TabularApproximator(meta["num_actions"], value_input_fn)


# -- config file I/O ----------------------------------------------------------


def load_config(path: str | Path) -> tuple[LearnerConfig, TestTimeConfig]:
    """JSON config mirroring the LearnerConfig field names, with the test-time
    knobs under a "test_time" section."""
    data = json.loads(Path(path).read_text())
    test_time = data.pop("test_time", {})
    known = {k: v for k, v in data.items() if k in LearnerConfig.__dataclass_fields__}
    unknown = set(data) - set(known)
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    if known.get("delta_m_schedule") is not None:
        known["delta_m_schedule"] = tuple(tuple(x) for x in known["delta_m_schedule"])
    return LearnerConfig(**known), TestTimeConfig(**test_time)


def save_config(path: str | Path, cfg: LearnerConfig, tt: TestTimeConfig) -> None:
    data = asdict(cfg)
    data["test_time"] = asdict(tt)
    Path(path).write_text(json.dumps(data, indent=2))
