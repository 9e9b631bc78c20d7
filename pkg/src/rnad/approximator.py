"""Policy/value function approximators behind a single four-head contract.

Every backend answers the same calls: per-head action logits with a masked
softmax policy (illegal actions get probability exactly zero), a scalar value
with the auxiliary input zeroing applied, gradient accumulation keyed like the
parameters, cloning for target/regularization snapshots, and flat state
dictionaries for checkpoints.

Two backends are provided: a tabular store keyed by an exact digest of the
observation (the reference implementation, used by all gradient checks and
small-game training), and a single convolution layer per head over the board
planes for games whose observation space is far too large to revisit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

HEADS = ("deployment", "selection", "displacement")
DEFAULT_HEAD = "selection"

NEG_INF = float("-inf")


def masked_softmax(logits: np.ndarray, legal_actions) -> np.ndarray:
    """Full-length distribution; illegal entries are exactly zero."""
    legal = np.asarray(legal_actions, dtype=int)
    if legal.size == 0:
        raise ValueError("no legal actions to normalize over")
    z = logits[legal] - np.max(logits[legal])
    e = np.exp(z)
    out = np.zeros_like(logits, dtype=float)
    out[legal] = e / e.sum()
    return out


def obs_bytes(obs: Any) -> bytes:
    if isinstance(obs, bytes):
        return obs
    if isinstance(obs, str):
        return obs.encode()
    return np.ascontiguousarray(obs).tobytes()


class Approximator:
    """Interface; see module docstring for the contract."""

    num_actions: int
    params: dict

    def logits(self, obs, head: str) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, obs, head: str, legal_actions) -> tuple[np.ndarray, np.ndarray]:
        """(full logits, masked softmax policy)."""
        logit = self.logits(obs, head)
        return logit, masked_softmax(logit, legal_actions)

    def policy(self, obs, head: str, legal_actions) -> np.ndarray:
        return self.evaluate(obs, head, legal_actions)[1]

    def policy_over_legal(self, obs, head: str, legal_actions) -> np.ndarray:
        full = self.policy(obs, head, legal_actions)
        return full[np.asarray(legal_actions, dtype=int)]

    def evaluate_value(self, obs) -> float:
        raise NotImplementedError

    def zero_grad(self) -> None:
        self._grad: dict = {}

    def take_gradient(self) -> dict:
        grad = getattr(self, "_grad", {})
        self._grad = {}
        return grad

    def accumulate_policy_grad(self, obs, head: str, legal_actions, coeffs) -> None:
        """Add sum_j coeffs[j] * grad_theta logit(legal_actions[j], obs)."""
        raise NotImplementedError

    def accumulate_value_grad(self, obs, coef: float) -> None:
        """Add coef * grad_theta value(obs)."""
        raise NotImplementedError

    def logit_step_scale(self, obs, head: str, legal_actions) -> np.ndarray:
        """||grad_theta logit(a, obs)||^2 per legal action (for update gating)."""
        raise NotImplementedError

    def clone(self) -> "Approximator":
        raise NotImplementedError

    def state_dict(self) -> dict:
        return {k: np.array(v, copy=True) for k, v in self.params.items()}

    def load_state_dict(self, state: dict) -> None:
        self.params = {k: np.array(v, copy=True) for k, v in state.items()}


class TabularApproximator(Approximator):
    """Exact per-information-state logits and values.

    States are keyed by a byte digest of the encoded observation (plus the
    head for logits); unseen states read as zero logits, i.e. uniform over
    legal actions, and zero value.
    """

    def __init__(self, num_actions: int, value_input_fn: Callable = None):
        self.num_actions = num_actions
        self.value_input_fn = value_input_fn or (lambda obs: obs)
        self.params = {}
        self._grad = {}

    # parameter keys
    def _logit_key(self, obs, head: str):
        return ("logits", head, obs_bytes(obs))

    def _value_key(self, obs):
        return ("value", obs_bytes(self.value_input_fn(obs)))

    def logits(self, obs, head: str) -> np.ndarray:
        entry = self.params.get(self._logit_key(obs, head))
        if entry is None:
            return np.zeros(self.num_actions)
        return entry

    def evaluate_value(self, obs) -> float:
        entry = self.params.get(self._value_key(obs))
        return float(entry[0]) if entry is not None else 0.0

    def accumulate_policy_grad(self, obs, head, legal_actions, coeffs) -> None:
        key = self._logit_key(obs, head)
        buf = self._grad.get(key)
        if buf is None:
            buf = self._grad[key] = np.zeros(self.num_actions)
        buf[np.asarray(legal_actions, dtype=int)] += coeffs

    def accumulate_value_grad(self, obs, coef: float) -> None:
        key = self._value_key(obs)
        buf = self._grad.get(key)
        if buf is None:
            buf = self._grad[key] = np.zeros(1)
        buf[0] += coef

    def logit_step_scale(self, obs, head, legal_actions) -> np.ndarray:
        return np.ones(len(legal_actions))

    def ensure_entries(self, grad: dict) -> None:
        """Materialize parameter entries touched by a gradient."""
        for key in grad:
            if key not in self.params:
                size = 1 if key[0] == "value" else self.num_actions
                self.params[key] = np.zeros(size)

    def clone(self) -> "TabularApproximator":
        other = TabularApproximator(self.num_actions, self.value_input_fn)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other


# im2col results shared across model copies (live, target, regularization
# snapshots all see the same observation).  Identity-keyed and bounded; the
# stored reference keeps each key's identity from being recycled.
_PATCH_CACHE: dict = {}
_PATCH_CACHE_LIMIT = 8


def _shared_patches(obs, kernel: int, board_size: int) -> np.ndarray:
    key = (id(obs), kernel)
    hit = _PATCH_CACHE.get(key)
    if hit is not None and hit[0] is obs:
        return hit[1]
    arr = np.asarray(obs, dtype=np.float32)
    pad = kernel // 2
    padded = np.pad(arr, ((pad, pad), (pad, pad), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, (kernel, kernel), axis=(0, 1)
    )  # (n, n, planes, k, k)
    patches = np.ascontiguousarray(
        windows.transpose(0, 1, 3, 4, 2).reshape(board_size * board_size, -1)
    )
    if len(_PATCH_CACHE) >= _PATCH_CACHE_LIMIT:
        _PATCH_CACHE.pop(next(iter(_PATCH_CACHE)))
    _PATCH_CACHE[key] = (obs, patches)
    return patches


class ConvApproximator(Approximator):
    """One 2-D convolution per policy head over board planes, linear value.

    Observations must be (size, size, planes) arrays and actions index board
    squares row-major, so each head's logit map is a convolution of the
    observation with a learned kernel plus a per-square bias.  The value is an
    affine function of the flattened observation (auxiliary planes zeroed by
    value_input_fn).  Deliberately tiny: this is the generalizing stand-in,
    not a deep torso.
    """

    def __init__(
        self,
        board_size: int = 10,
        planes: int = 82,
        kernel: int = 5,
        value_input_fn: Callable = None,
        heads: tuple[str, ...] = HEADS,
        init_scale: float = 0.0,
        seed: int = 0,
    ):
        self.board_size = board_size
        self.planes = planes
        self.kernel = kernel
        self.num_actions = board_size * board_size
        self.value_input_fn = value_input_fn or (lambda obs: obs)
        self.heads = heads
        self.params = {}
        rng = np.random.default_rng(seed)
        patch_dim = planes * kernel * kernel
        # float32 end to end: the matmuls dominate the training hot path.
        for head in heads:
            self.params[f"k_{head}"] = (
                init_scale * rng.standard_normal(patch_dim)
            ).astype(np.float32)
            self.params[f"b_{head}"] = np.zeros(self.num_actions, dtype=np.float32)
        self.params["value_w"] = np.zeros(
            board_size * board_size * planes, dtype=np.float32
        )
        self.params["value_b"] = np.zeros(1, dtype=np.float32)
        self._grad = {}
        self._logit_memo: dict = {}

    def _patches(self, obs) -> np.ndarray:
        """(num_actions, planes*kernel*kernel) im2col of the padded board."""
        return _shared_patches(obs, self.kernel, self.board_size)

    def logits(self, obs, head: str) -> np.ndarray:
        memo = self._logit_memo.get(head)
        if memo is not None and memo[0] is obs:
            return memo[1]
        patches = self._patches(obs)
        out = patches @ self.params[f"k_{head}"] + self.params[f"b_{head}"]
        self._logit_memo[head] = (obs, out)
        return out

    def evaluate_value(self, obs) -> float:
        flat = np.asarray(self.value_input_fn(obs), dtype=np.float32).ravel()
        return float(flat @ self.params["value_w"] + self.params["value_b"][0])

    def accumulate_policy_grad(self, obs, head, legal_actions, coeffs) -> None:
        self._logit_memo.pop(head, None)  # parameters are about to change
        patches = self._patches(obs)
        legal = np.asarray(legal_actions, dtype=int)
        coeffs = np.asarray(coeffs, dtype=np.float32)
        kkey, bkey = f"k_{head}", f"b_{head}"
        if kkey not in self._grad:
            self._grad[kkey] = np.zeros_like(self.params[kkey])
            self._grad[bkey] = np.zeros_like(self.params[bkey])
        self._grad[kkey] += coeffs @ patches[legal]
        np.add.at(self._grad[bkey], legal, coeffs)

    def accumulate_value_grad(self, obs, coef: float) -> None:
        flat = np.asarray(self.value_input_fn(obs), dtype=float).ravel()
        if "value_w" not in self._grad:
            self._grad["value_w"] = np.zeros_like(self.params["value_w"])
            self._grad["value_b"] = np.zeros_like(self.params["value_b"])
        self._grad["value_w"] += coef * flat
        self._grad["value_b"][0] += coef

    def logit_step_scale(self, obs, head, legal_actions) -> np.ndarray:
        patches = self._patches(obs)
        legal = np.asarray(legal_actions, dtype=int)
        return np.einsum("ij,ij->i", patches[legal], patches[legal]) + 1.0

    def clone(self) -> "ConvApproximator":
        other = ConvApproximator(
            self.board_size, self.planes, self.kernel, self.value_input_fn, self.heads
        )
        other.params = {k: v.copy() for k, v in self.params.items()}
        other._logit_memo = {}
        return other

    def load_state_dict(self, state: dict) -> None:
        self.params = {
            k: np.array(v, copy=True, dtype=np.float32) for k, v in state.items()
        }
        self._logit_memo = {}


# -- optimizer and target averaging -----------------------------------------


@dataclass
class AdamConfig:
    learning_rate: float = 5e-5
    b1: float = 0.0
    b2: float = 0.999
    eps: float = 1e-8


class AdamState:
    """First/second moment per parameter key, created lazily."""

    def __init__(self):
        self.m: dict = {}
        self.v: dict = {}

    def snapshot(self) -> dict:
        return {
            "m": {k: v.copy() for k, v in self.m.items()},
            "v": {k: v.copy() for k, v in self.v.items()},
        }

    def restore(self, data: dict) -> None:
        self.m = {k: np.array(v, copy=True) for k, v in data["m"].items()}
        self.v = {k: np.array(v, copy=True) for k, v in data["v"].items()}


def adam_step(params: dict, direction: dict, state: AdamState, cfg: AdamConfig) -> None:
    """One optimizer step along a gradient-convention direction.

    The recursion is applied as written, with no bias correction: with b1 = 0
    the first moment is the direction itself, and the very first step along g
    is -lr * g / (sqrt((1-b2) g^2) + eps).  All-zero entries are skipped, so a
    null direction leaves parameters and moments untouched.
    """
    for key, g in direction.items():
        if not np.any(g):
            continue
        if key not in params:
            raise KeyError(f"direction for unknown parameter {key!r}")
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(g)
            state.v[key] = np.zeros_like(g)
        v = state.v[key]
        m *= cfg.b1
        m += (1.0 - cfg.b1) * g
        v *= cfg.b2
        v += (1.0 - cfg.b2) * np.square(g)
        params[key] -= cfg.learning_rate * m / (np.sqrt(v) + cfg.eps)


def target_update(target_params: dict, params: dict, gamma: float) -> None:
    """Exponential moving average towards the live parameters."""
    for key, value in params.items():
        tgt = target_params.get(key)
        if tgt is None:
            target_params[key] = gamma * value
        else:
            tgt *= 1.0 - gamma
            tgt += gamma * value


def clip_direction(direction: dict, limit: float) -> dict:
    return {k: np.clip(g, -limit, limit) for k, g in direction.items()}
