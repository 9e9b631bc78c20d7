"""Actor/learner pipeline: episode generation, replay queue, batch training.

Actors play complete self-play episodes with the latest published snapshot
and enqueue them; the single learner drains batches, runs the forward
statistics pass over full episodes, accumulates gradients chunk by chunk in
reverse order and applies one optimizer update per batch.  Evaluators play a
snapshot against scripted baseline bots with the test-time stack switched on.
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import dataclass, field
from typing import Callable, IO

import numpy as np

from .envs import Environment
from .learner import Learner, ParamSnapshot
from .vtrace import Step, Trajectory


class ReplayBuffer:
    """Bounded FIFO of complete episodes tagged with their snapshot version."""

    def __init__(self, capacity: int, on_full: str = "block"):
        if on_full not in ("block", "drop"):
            raise ValueError("on_full must be 'block' or 'drop'")
        self.capacity = capacity
        self.on_full = on_full
        self._queue: queue.Queue = queue.Queue(maxsize=capacity)

    def put(self, trajectory: Trajectory, version: int) -> bool:
        if self.on_full == "drop":
            try:
                self._queue.put_nowait((trajectory, version))
                return True
            except queue.Full:
                return False
        self._queue.put((trajectory, version))
        return True

    def get(self, timeout: float | None = None) -> tuple[Trajectory, int]:
        return self._queue.get(timeout=timeout)

    def __len__(self) -> int:
        return self._queue.qsize()


class SnapshotBox:
    """Atomic single-slot exchange point between the learner and actors."""

    def __init__(self, snapshot: ParamSnapshot):
        self._lock = threading.Lock()
        self._snapshot = snapshot

    def publish(self, snapshot: ParamSnapshot) -> None:
        with self._lock:
            if snapshot.version < self._snapshot.version:
                raise ValueError("snapshot versions must not go backwards")
            self._snapshot = snapshot

    def latest(self) -> ParamSnapshot:
        with self._lock:
            return self._snapshot


def play_episode(
    env: Environment,
    policy_fn: Callable,
    rng: np.random.Generator,
    t_max: int = 3600,
) -> Trajectory:
    """One complete episode; policy_fn(obs, head, legal) gives a full-length
    distribution whose restriction to the legal actions is the behavior mu."""
    state = env.initial(rng)
    steps: list[Step] = []
    truncated = False
    while not env.is_terminal(state):
        if len(steps) >= t_max:
            truncated = True
            break
        legal = env.legal_actions(state)
        obs = env.observe(state)
        head = env.head(state)
        mover = env.mover(state)
        full = policy_fn(obs, head, legal)
        mu = np.asarray(full, dtype=float)[np.asarray(legal, dtype=int)]
        mu = mu / mu.sum()
        idx = int(rng.choice(len(legal), p=mu))
        state, rewards = env.step(state, legal[idx], rng)
        steps.append(
            Step(
                observation=obs,
                legal_actions=tuple(legal),
                behavior=mu,
                action_index=idx,
                rewards=rewards,
                mover=mover,
                head=head,
            )
        )
    return Trajectory(steps, t_max=t_max, truncated=truncated)


def actor_loop(
    snapshot_source: Callable[[], ParamSnapshot],
    env: Environment,
    buffer: ReplayBuffer,
    stop: threading.Event,
    seed: int,
    t_max: int = 3600,
) -> None:
    """Runs until stopped; engine errors abort the episode without enqueueing."""
    rng = np.random.default_rng(seed)
    while not stop.is_set():
        snapshot = snapshot_source()
        try:
            traj = play_episode(env, snapshot.actor_policy, rng, t_max)
        except Exception:
            continue
        if not traj.steps:
            continue
        while not stop.is_set():
            try:
                buffer._queue.put((traj, snapshot.version), timeout=0.1)
                break
            except queue.Full:
                continue


@dataclass
class MetricsWriter:
    """Structured-text metrics, one JSON object per line."""

    stream: IO | None = None
    history: list[dict] = field(default_factory=list)

    def emit(self, record: dict) -> None:
        self.history.append(record)
        if self.stream is not None:
            self.stream.write(json.dumps(record) + "\n")
            self.stream.flush()


def run_training(
    env: Environment,
    learner: Learner,
    metrics: MetricsWriter | None = None,
    num_actor_threads: int = 0,
    seed: int = 0,
    progress_every: int = 50,
    on_step: Callable[[int, Learner], None] | None = None,
) -> MetricsWriter:
    """Run the learner for its configured number of steps.

    With num_actor_threads == 0 episodes are generated synchronously with the
    freshest snapshot (deterministic given the seed); otherwise actor threads
    feed the bounded replay queue while the learner consumes it.
    """
    metrics = metrics or MetricsWriter()
    cfg = learner.cfg
    if num_actor_threads <= 0:
        rng = np.random.default_rng(seed)
        for step_index in range(cfg.total_steps):
            snapshot = learner.snapshot()
            batch = [
                play_episode(env, snapshot.actor_policy, rng, cfg.t_max)
                for _ in range(cfg.batch_size)
            ]
            record = learner.step(batch)
            record["step"] = step_index
            if on_step is not None:
                on_step(step_index, learner)
            if step_index % progress_every == 0 or step_index == cfg.total_steps - 1:
                metrics.emit(record)
        return metrics

    buffer = ReplayBuffer(cfg.buffer_capacity, on_full="block")
    box = SnapshotBox(learner.snapshot())
    stop = threading.Event()
    threads = [
        threading.Thread(
            target=actor_loop,
            args=(box.latest, env, buffer, stop, seed + 1 + i, cfg.t_max),
            daemon=True,
        )
        for i in range(num_actor_threads)
    ]
    for t in threads:
        t.start()
    try:
        for step_index in range(cfg.total_steps):
            batch = [buffer.get()[0] for _ in range(cfg.batch_size)]
            record = learner.step(batch)
            record["step"] = step_index
            box.publish(learner.snapshot())
            if on_step is not None:
                on_step(step_index, learner)
            if step_index % progress_every == 0 or step_index == cfg.total_steps - 1:
                metrics.emit(record)
    finally:
        stop.set()
        for t in threads:
            t.join(timeout=5.0)
    return metrics


# -- baseline opponents -------------------------------------------------------


class RandomBot:
    """Uniform over legal actions; deterministic given its seed."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def reset(self) -> None:
        pass

    def act(self, env: Environment, state) -> int:
        legal = env.legal_actions(state)
        return int(legal[self.rng.integers(len(legal))])


# A sane fixed deployment, player-centric squares in deployment order:
# Flag tucked in the corner behind Bombs, Miners at the back, Scouts forward.
_GREEDY_DEPLOYMENT: tuple[int, ...] = tuple(
    r * 10 + c
    for r, c in [
        (9, 0),                                  # Flag
        (9, 1), (8, 0), (8, 1), (9, 6), (8, 4), (9, 3),   # Bombs
        (7, 4),                                  # Marshal
        (7, 6),                                  # General
        (7, 2), (7, 7),                          # Colonels
        (7, 1), (7, 8), (8, 5),                  # Majors
        (6, 2), (6, 7), (8, 2), (8, 7),          # Captains
        (6, 3), (6, 6), (8, 3), (8, 8),          # Lieutenants
        (6, 4), (6, 5), (7, 3), (7, 5),          # Sergeants
        (9, 2), (9, 4), (9, 5), (9, 7), (9, 8),  # Miners
        (6, 0), (6, 1), (6, 8), (6, 9), (7, 0), (7, 9), (8, 6), (9, 9),  # Scouts
        (8, 9),                                  # Spy
    ]
)
assert len(set(_GREEDY_DEPLOYMENT)) == 40


class GreedyMaterialBot:
    """Fixed deployment; takes any winning capture of a revealed piece, else
    a uniformly random move."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self._deploy_index = 0

    def reset(self) -> None:
        self._deploy_index = 0

    def act(self, env: Environment, state) -> int:
        from .stratego.board import beats, to_absolute, to_player_centric, unflat
        from .stratego.engine import DEPLOYMENT

        legal = env.legal_actions(state)
        if getattr(state, "phase", None) == DEPLOYMENT:
            action = _GREEDY_DEPLOYMENT[self._deploy_index]
            self._deploy_index += 1
            return action
        me = state.to_move
        if state.pending_selection is None:
            # Prefer selecting a piece with a winning capture of a revealed
            # enemy piece available.
            for action in legal:
                pid = state.piece_at(to_absolute(me, action))
                if self._winning_capture(state, pid) is not None:
                    return int(action)
            return int(legal[self.rng.integers(len(legal))])
        pid = state.piece_at(state.pending_selection)
        capture = self._winning_capture(state, pid)
        if capture is not None:
            return int(to_player_centric(me, capture))
        return int(legal[self.rng.integers(len(legal))])

    def _winning_capture(self, state, pid) -> int | None:
        from .stratego.board import beats

        me = state.owner_of(pid)
        for dst in state._destinations(pid):
            target = state.piece_at(dst)
            if target == -1 or state.owner_of(target) == me:
                continue
            if not state.type_known(target):
                continue
            if beats(int(state.ptype[pid]), int(state.ptype[target])) == "attacker_wins":
                return dst
        return None


@dataclass
class EvalReport:
    games: int
    wins: int
    draws: int
    losses: int
    as_red: tuple[int, int, int] = (0, 0, 0)
    as_blue: tuple[int, int, int] = (0, 0, 0)

    @property
    def win_rate(self) -> float:
        return self.wins / self.games if self.games else 0.0

    @property
    def score(self) -> float:
        """Mean game outcome in [-1, 1] from the agent's point of view."""
        return (self.wins - self.losses) / self.games if self.games else 0.0

    def to_dict(self) -> dict:
        return {
            "games": self.games,
            "wins": self.wins,
            "draws": self.draws,
            "losses": self.losses,
            "win_rate": self.win_rate,
            "score": self.score,
            "as_red": list(self.as_red),
            "as_blue": list(self.as_blue),
        }


def make_opponent(kind: str, seed: int):
    if kind == "random":
        return RandomBot(seed)
    if kind == "greedy":
        return GreedyMaterialBot(seed)
    raise ValueError(f"unknown opponent kind {kind!r}")


def evaluate(
    snapshot: ParamSnapshot,
    opponent: str,
    games: int,
    seed: int = 0,
    test_time: "TestTimeConfig | None" = None,
    rules=None,
) -> EvalReport:
    """Play an equal number of games as red and blue against a baseline bot
    (or a mirror of the agent when opponent == 'self'), with the test-time
    stack applied to the agent only."""
    from .agent import StrategoAgent
    from .envs import StrategoEnv
    from .postprocess import TestTimeConfig
    from .stratego.engine import RED_WINS, BLUE_WINS, Rules

    test_time = test_time or TestTimeConfig()
    rules = rules or Rules()
    env = StrategoEnv(rules)
    wins = draws = losses = 0
    side_tallies = {0: [0, 0, 0], 1: [0, 0, 0]}
    for g in range(games):
        agent_side = g % 2
        rng = np.random.default_rng((seed, g))
        agent = StrategoAgent(snapshot, agent_side, test_time)
        if opponent == "self":
            mirror = StrategoAgent(snapshot, 1 - agent_side, test_time)
            bot = None
        else:
            mirror = None
            bot = make_opponent(opponent, seed * 100_003 + g)
            bot.reset()
        state = env.initial(rng)
        while state.outcome is None:
            if state.to_move == agent_side:
                action = agent.act(state, rng)
            elif mirror is not None:
                action = mirror.act(state, rng)
            else:
                action = bot.act(env, state)
            before = state
            state = state.apply(action)
            if len(state.move_history) > len(before.move_history):
                record = state.move_history[-1]
                agent.observe_move(before, record, state)
                if mirror is not None:
                    mirror.observe_move(before, record, state)
        if state.outcome == RED_WINS:
            result = 0 if agent_side == 0 else 2
        elif state.outcome == BLUE_WINS:
            result = 0 if agent_side == 1 else 2
        else:
            result = 1
        wins += result == 0
        draws += result == 1
        losses += result == 2
        side_tallies[agent_side][result] += 1
    return EvalReport(
        games,
        wins,
        draws,
        losses,
        as_red=tuple(side_tallies[0]),
        as_blue=tuple(side_tallies[1]),
    )

