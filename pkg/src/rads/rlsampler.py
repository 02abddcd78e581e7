"""Sequential budgeted-selection engine.

The pool is presented one candidate at a time; the agent accepts or skips.
Accepting yields the candidate's prior-aware utility minus a weighted
redundancy penalty against the already-selected set; skipping yields zero.
A dueling Q-network trained with experience replay and a periodically
synced target network learns the accept/skip policy, which is then rolled
out greedily to produce the final selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nncore
from .acquisition import ClassWeights, redundancy, utility
from .errors import NumericError, ParameterError, ProtocolError, ShapeError
from .signals import SignalRecord

STATE_DIM = 5  # [l_bar_0, l_bar_1, pe, mi, consumed-budget fraction]


@dataclass
class EnvConfig:
    budget: int
    lam: float = 0.01            # redundancy penalty weight
    shuffle_seed: int = 0
    state_normalized_mi: bool = False  # feed mi_norm instead of raw mi to the state
    selection_order: str = "mi_desc"   # "mi_desc" | "pool": candidate order for greedy rollout
    train_shuffle: bool = True         # reshuffle the pool each training episode

    def __post_init__(self):
        if self.budget < 1:
            raise ParameterError(f"budget must be >= 1, got {self.budget}")
        if self.lam < 0:
            raise ParameterError("lam must be non-negative")
        if self.selection_order not in ("mi_desc", "pool"):
            raise ParameterError(f"unknown selection_order {self.selection_order!r}")


@dataclass
class AgentConfig:
    episodes: int = 300
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay: float = 0.995
    buffer_capacity: int = 10000
    batch_size: int = 64
    learning_rate: float = 1e-4
    gamma: float = 0.95
    target_sync_every: int = 10
    hidden_dim: int = 64

    def __post_init__(self):
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ParameterError("need 0 <= eps_end <= eps_start <= 1")
        if not 0.0 < self.eps_decay <= 1.0:
            raise ParameterError("eps_decay must be in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ParameterError("gamma must be in [0, 1)")
        if self.episodes < 0 or self.buffer_capacity < 1 or self.batch_size < 1:
            raise ParameterError("episodes, buffer_capacity, batch_size must be sane")


@dataclass
class SelectionResult:
    policy: str
    budget: int
    selected: list[str]
    rewards: list[float]                     # one entry per accepted step
    episodes_return: list[float] | None = None

    @property
    def budget_used(self) -> int:
        return len(self.selected)

    def to_json_dict(self) -> dict:
        out = {
            "policy": self.policy,
            "budget": self.budget,
            "selected": list(self.selected),
            "rewards": list(self.rewards),
        }
        if self.episodes_return is not None:
            out["episodes_return"] = list(self.episodes_return)
        return out


class SelectionEnv:
    """One pass over a fixed candidate ordering with a hard selection budget.

    ``reset(episode_seed)`` shuffles the pool per-episode for training;
    ``reset()`` uses the deterministic rollout ordering (descending
    normalized disagreement, ties by id) so strong candidates are seen
    before the budget fills.
    """

    def __init__(self, records: list[SignalRecord], weights: ClassWeights, cfg: EnvConfig):
        if not records:
            raise ParameterError("candidate pool is empty")
        if cfg.budget > len(records):
            raise ParameterError(f"budget {cfg.budget} exceeds pool size {len(records)}")
        if records[0].l_bar.shape != (2,):
            raise ShapeError("selection requires binary (C=2) signal records")
        self.records = records
        self.weights = weights
        self.cfg = cfg
        # static per-candidate state features; budget fraction is appended per step
        mi_feat = [r.mi_norm if cfg.state_normalized_mi else r.mi for r in records]
        self._features = np.array(
            [[r.l_bar[0], r.l_bar[1], r.pe, mi_feat[i]] for i, r in enumerate(records)])
        if cfg.selection_order == "mi_desc":
            order = sorted(range(len(records)), key=lambda i: (-records[i].mi_norm, records[i].id))
        else:
            order = list(range(len(records)))
        self._rollout_order = np.array(order)
        self._order: np.ndarray | None = None
        self.selected: list[int] = []
        self.cursor = 0
        self.done = True
        self._selected_lbars: list[np.ndarray] = []
        self._last_state: np.ndarray | None = None

    def _state(self) -> np.ndarray:
        idx = self._order[self.cursor]
        frac = len(self.selected) / self.cfg.budget
        return np.append(self._features[idx], frac)

    def reset(self, episode_seed: int | None = None) -> np.ndarray:
        if episode_seed is None or not self.cfg.train_shuffle:
            self._order = self._rollout_order
        else:
            rng = np.random.default_rng([self.cfg.shuffle_seed, episode_seed])
            self._order = rng.permutation(len(self.records))
        self.selected = []
        self._selected_lbars = []
        self.cursor = 0
        self.done = False
        self._last_state = self._state()
        return self._last_state

    def current_id(self) -> str:
        if self.done:
            raise ProtocolError("episode already finished")
        return self.records[self._order[self.cursor]].id

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        """Apply accept (1) or skip (0) to the current candidate; returns
        (next state, reward, done). The reward for accepting is computed
        against the selected set before the candidate joins it."""
        if self.done:
            raise ProtocolError("step called on a finished episode")
        if action not in (0, 1):
            raise ParameterError(f"action must be 0 or 1, got {action}")
        reward = 0.0
        idx = self._order[self.cursor]
        if action == 1 and len(self.selected) < self.cfg.budget:
            rec = self.records[idx]
            reward = utility(rec, self.weights) - self.cfg.lam * redundancy(
                rec.l_bar, self._selected_lbars)
            self.selected.append(int(idx))
            self._selected_lbars.append(rec.l_bar)
        self.cursor += 1
        self.done = len(self.selected) == self.cfg.budget or self.cursor == len(self.records)
        if not self.done:
            self._last_state = self._state()
        # on termination the last emitted state is returned again with done=True
        return self._last_state, reward, self.done


# ---------------------------------------------------------------------------
# Dueling Q-network: a shared trunk emits [V, A_0, A_1]; Q combines them with
# the mean-centered advantage rule.


@dataclass
class DuelingQNet:
    trunk: nncore.Mlp  # maps state -> [V, A_0, ..., A_{n-1}]
    n_actions: int = 2


def init_qnet(hidden_dim: int = 64, n_actions: int = 2,
              rng: np.random.Generator | None = None) -> DuelingQNet:
    trunk = nncore.init_mlp([STATE_DIM, hidden_dim, 1 + n_actions], dropout_rate=0.0, rng=rng)
    return DuelingQNet(trunk=trunk, n_actions=n_actions)


def clone_qnet(net: DuelingQNet) -> DuelingQNet:
    return DuelingQNet(trunk=nncore.clone_mlp(net.trunk), n_actions=net.n_actions)


def _combine(raw: np.ndarray) -> np.ndarray:
    value = raw[:, :1]
    adv = raw[:, 1:]
    return value + adv - adv.mean(axis=1, keepdims=True)


def _q_batch(net: DuelingQNet, states: np.ndarray) -> tuple[np.ndarray, np.ndarray, nncore.ForwardCache]:
    raw, cache = nncore._forward_batch(net.trunk, states)
    return _combine(raw), raw, cache


def q_forward(net: DuelingQNet, state: np.ndarray) -> np.ndarray:
    """Q-values for one state: V(s) + A(s, a) - mean_a' A(s, a')."""
    state = np.asarray(state, dtype=float)
    if state.shape != (STATE_DIM,):
        raise ShapeError(f"expected state of shape ({STATE_DIM},), got {state.shape}")
    q, _, _ = _q_batch(net, state[None, :])
    return q[0]


def td_update(online: DuelingQNet, target: DuelingQNet,
              batch: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray],
              gamma: float, opt: nncore.OptimizerState) -> float:
    """One squared-TD-error step on the online net; the target net provides
    the bootstrap values and is not touched."""
    states, actions, rewards, next_states, dones = batch
    n = len(states)
    if n == 0:
        raise ParameterError("empty transition batch")
    q, raw, cache = _q_batch(online, states)
    q_sa = q[np.arange(n), actions]
    target_next, _, _ = _q_batch(target, next_states)
    y = rewards + gamma * (1.0 - dones) * target_next.max(axis=1)
    err = q_sa - y
    loss = float(np.mean(err * err))
    if not np.isfinite(loss):
        raise NumericError("non-finite TD loss")

    dq = 2.0 * err / n
    dout = np.zeros_like(raw)
    dout[:, 0] = dq                                   # dQ/dV = 1
    dout[:, 1:] = (-1.0 / online.n_actions) * dq[:, None]  # mean-subtraction term
    dout[np.arange(n), 1 + actions] += dq
    grads_w, grads_b = nncore.backward(online.trunk, cache, dout)
    nncore.adam_step(online.trunk, opt, grads_w, grads_b)
    return loss


class ReplayBuffer:
    """Fixed-capacity FIFO ring of (s, a, r, s', done) transitions."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM):
        if capacity < 1:
            raise ParameterError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.size = 0
        self._pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s: np.ndarray, a: int, r: float, s2: np.ndarray, done: bool) -> None:
        p = self._pos
        self.states[p] = s
        self.actions[p] = a
        self.rewards[p] = r
        self.next_states[p] = s2
        self.dones[p] = float(done)
        self._pos = (p + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.dones[idx])


@dataclass
class TrainResult:
    net: DuelingQNet
    episode_returns: list[float]
    final_epsilon: float


def train(records: list[SignalRecord], weights: ClassWeights, env_cfg: EnvConfig,
          agent_cfg: AgentConfig, seed: int = 0) -> TrainResult:
    """Episodic Q-learning over the pool: epsilon-greedy exploration with a
    per-episode multiplicative decay, one gradient step per environment step
    once the replay buffer holds a full batch, and a target sync every
    ``target_sync_every`` episodes."""
    env = SelectionEnv(records, weights, env_cfg)
    rng_init = np.random.default_rng([seed, 0])
    rng_act = np.random.default_rng([seed, 1])
    rng_replay = np.random.default_rng([seed, 2])
    online = init_qnet(agent_cfg.hidden_dim, rng=rng_init)
    target = clone_qnet(online)
    opt = nncore.init_adam(online.trunk, agent_cfg.learning_rate)
    buffer = ReplayBuffer(agent_cfg.buffer_capacity)

    epsilon = agent_cfg.eps_start
    returns: list[float] = []
    for episode in range(1, agent_cfg.episodes + 1):
        state = env.reset(episode_seed=episode)
        total = 0.0
        done = False
        while not done:
            if rng_act.random() < epsilon:
                action = int(rng_act.integers(0, 2))
            else:
                action = int(np.argmax(q_forward(online, state)))
            next_state, reward, done = env.step(action)
            buffer.add(state, action, reward, next_state, done)
            total += reward
            if len(buffer) >= agent_cfg.batch_size:
                td_update(online, target, buffer.sample(rng_replay, agent_cfg.batch_size),
                          agent_cfg.gamma, opt)
            state = next_state
        if episode % agent_cfg.target_sync_every == 0:
            target = clone_qnet(online)
        epsilon = max(agent_cfg.eps_end, epsilon * agent_cfg.eps_decay)
        returns.append(total)
    return TrainResult(net=online, episode_returns=returns, final_epsilon=epsilon)


def select(net: DuelingQNet, records: list[SignalRecord], weights: ClassWeights,
           env_cfg: EnvConfig) -> SelectionResult:
    """Deterministic greedy rollout of the learned policy; may stop short of
    the budget if the policy skips every remaining candidate."""
    env = SelectionEnv(records, weights, env_cfg)
    state = env.reset()
    selected_ids: list[str] = []
    rewards: list[float] = []
    done = False
    while not done:
        current = env.current_id()
        action = int(np.argmax(q_forward(net, state)))
        state, reward, done = env.step(action)
        if action == 1:
            selected_ids.append(current)
            rewards.append(float(reward))
    return SelectionResult(policy="rads", budget=env_cfg.budget,
                           selected=selected_ids, rewards=rewards)
