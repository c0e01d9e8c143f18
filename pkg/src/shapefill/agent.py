"""Continuous-control agent that picks the generator seed for a partial cloud.

Single-step episodes: the state is the encoder output of the partial input,
the action is the generator's z-vector, the reward combines Chamfer, feature
and critic-score terms, and every episode terminates after one action. The
trainer is deterministic-policy-gradient with the usual stabilizer trio:
twin Q networks, target policy smoothing, and delayed actor updates.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import nn
from .autoencoder import GFV_DIM
from .geometry import as_cloud, chamfer_normalized, seed_sequence

ACTION_DIM = 1
ACTOR_WIDTHS = (400, 400, 300)
CRITIC_STATE_WIDTH = 400
CRITIC_TRUNK_WIDTHS = (432, 300, 300)


@dataclass
class RewardWeights:
    chamfer: float = 100.0
    gfv: float = 10.0
    disc: float = 0.01

    def __post_init__(self):
        if min(self.chamfer, self.gfv, self.disc) < 0:
            raise ValueError("reward weights must be non-negative")


@dataclass
class AgentConfig:
    max_steps: int = 4000          # 1e6 at paper scale
    start_steps: int = 1000        # uniform-random warm-up actions
    expl_noise: float = 0.1
    batch_size: int = 100
    gamma: float = 0.9             # inert under single-step episodes; kept for fidelity
    tau: float = 0.005
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    replay_capacity: int = 200_000
    eval_frequency: int = 500
    lr: float = 3e-4

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")


def combine_reward(l_ch: float, l_gfv: float, d_score: float, weights: RewardWeights) -> float:
    """r = -w_ch * L_CH - w_gfv * L_GFV + w_d * D(G(z))."""
    return -weights.chamfer * l_ch - weights.gfv * l_gfv + weights.disc * d_score


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool = True


class ReplayBuffer:
    """Ring buffer of transitions with seeded uniform sampling (replacement)."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.size = 0
        self._pos = 0
        self.states = np.zeros((capacity, GFV_DIM), dtype=np.float32)
        self.actions = np.zeros((capacity, ACTION_DIM), dtype=np.float32)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_states = np.zeros((capacity, GFV_DIM), dtype=np.float32)
        self.dones = np.zeros(capacity, dtype=np.float32)

    def __len__(self):
        return self.size

    def push(self, t: Transition):
        i = self._pos
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = 1.0 if t.done else 0.0
        self._pos = (self._pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng) -> dict:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=n)
        return {
            "state": self.states[idx],
            "action": self.actions[idx],
            "reward": self.rewards[idx],
            "next_state": self.next_states[idx],
            "done": self.dones[idx],
        }


class Actor:
    """Deterministic policy: 128 -> 400 -> 400 -> 300 ReLU, 300 -> 1 tanh head."""

    def __init__(self, seed=0, name="actor"):
        rng = np.random.default_rng(seed)
        self.net = nn.MLP(
            [GFV_DIM, *ACTOR_WIDTHS, ACTION_DIM], rng, hidden="relu", output="tanh", name=name
        )

    def act(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=np.float32)
        if s.shape != (GFV_DIM,):
            raise ValueError(f"expected a ({GFV_DIM},) state, got shape {s.shape}")
        return self.net.forward(s[None, :])[0]

    def state(self):
        return self.net.state()

    def load_state(self, state):
        self.net.load_state(state)
        return self


class QNetwork:
    """State through 128 -> 400 (ReLU), action concatenated, 401 -> 432 ->
    300 -> 300 (ReLU each), linear scalar head."""

    def __init__(self, seed=0, name="q"):
        rng = np.random.default_rng(seed)
        self.state_layer = nn.Dense(GFV_DIM, CRITIC_STATE_WIDTH, rng, name=f"{name}.state")
        self.state_act = nn.ReLU()
        self.trunk = nn.MLP(
            [CRITIC_STATE_WIDTH + ACTION_DIM, *CRITIC_TRUNK_WIDTHS, 1],
            rng,
            hidden="relu",
            output=None,
            name=f"{name}.trunk",
        )

    def forward(self, states, actions) -> np.ndarray:
        h = self.state_act.forward(self.state_layer.forward(states))
        return self.trunk.forward(np.concatenate([h, actions], axis=-1))

    def value(self, state, action) -> float:
        s = np.asarray(state, dtype=np.float32)[None, :]
        a = np.atleast_1d(np.asarray(action, dtype=np.float32))[None, :]
        return float(self.forward(s, a)[0, 0])

    def backward(self, dq):
        dx = self.trunk.backward(dq)
        dh = self.state_act.backward(dx[:, :CRITIC_STATE_WIDTH])
        self.state_layer.backward(dh)

    def grad_action(self, states, actions) -> np.ndarray:
        """dQ/da for a batch; no parameter gradients are accumulated."""
        out = self.forward(states, actions)
        dx = self.trunk.input_grad(np.ones((states.shape[0], 1), dtype=out.dtype))
        return dx[:, CRITIC_STATE_WIDTH:]

    def astype(self, dtype) -> "QNetwork":
        out = copy.copy(self)
        out.state_layer = self.state_layer.astype(dtype)
        out.state_act = nn.ReLU()
        out.trunk = self.trunk.astype(dtype)
        return out

    def params(self):
        return self.state_layer.params() + self.trunk.params()

    def zero_grad(self):
        for p in self.params():
            p.grad[...] = 0

    def state(self):
        return {p.name: p.values for p in self.params()}

    def load_state(self, state):
        for p in self.params():
            arr = state[p.name]
            if arr.shape != p.values.shape:
                raise ValueError(
                    f"shape mismatch for {p.name}: checkpoint {arr.shape} vs network {p.values.shape}"
                )
            p.values[...] = arr.astype(p.values.dtype)
        return self


def soft_update(target_params, online_params, tau: float):
    """theta_target <- tau * theta + (1 - tau) * theta_target, parameter-wise."""
    for pt, p in zip(target_params, online_params):
        if tau == 1.0:
            pt.values[...] = p.values
        else:
            pt.values *= 1.0 - tau
            pt.values += tau * p.values


class CompletionEnv:
    """Frozen autoencoder + generator + critic, reward per the weighted losses."""

    def __init__(self, ae, gen, critic, weights: RewardWeights = None):
        for net, label in ((ae, "autoencoder"), (gen.net, "generator"), (critic.net, "critic")):
            if not getattr(net, "frozen", False):
                raise ValueError(f"environment {label} must be frozen before agent training")
        self.ae = ae
        self.gen = gen
        self.critic = critic
        self.weights = weights if weights is not None else RewardWeights()

    def encode(self, points) -> np.ndarray:
        return self.ae.encode(points)

    def _evaluate(self, pts, state, action):
        gfv_c = self.gen.generate(action)
        p_out = self.ae.decode(gfv_c)
        l_ch = chamfer_normalized(pts, p_out)
        diff = gfv_c.astype(np.float64) - state.astype(np.float64)
        l_gfv = float(diff @ diff)
        d_score = self.critic.score(gfv_c)
        r = combine_reward(l_ch, l_gfv, d_score, self.weights)
        return r, {"l_ch": l_ch, "l_gfv": l_gfv, "d_score": d_score}, gfv_c, p_out

    def reward(self, points, z, state=None):
        """Reward of playing seed z against a partial input; returns
        (reward, components) with the raw loss terms for logging."""
        pts = as_cloud(points)
        s = self.encode(pts) if state is None else np.asarray(state, dtype=np.float32)
        r, components, _, _ = self._evaluate(pts, s, z)
        return r, components

    def step(self, points, action, state=None):
        """Single-step episode: returns (Transition, completed cloud, loss terms)."""
        pts = as_cloud(points)
        s = self.encode(pts) if state is None else np.asarray(state, dtype=np.float32)
        a = np.atleast_1d(np.asarray(action, dtype=np.float32))
        r, components, gfv_c, p_out = self._evaluate(pts, s, a)
        t = Transition(state=s, action=a, reward=r, next_state=gfv_c, done=True)
        return t, p_out, components


class TD3Agent:
    def __init__(self, config: AgentConfig, seed=0):
        self.config = config
        a_ss, q1_ss, q2_ss = seed_sequence(seed).spawn(3)
        self.actor = Actor(seed=a_ss, name="actor")
        self.q1 = QNetwork(seed=q1_ss, name="q1")
        self.q2 = QNetwork(seed=q2_ss, name="q2")
        self.actor_target = copy.deepcopy(self.actor)
        self.q1_target = copy.deepcopy(self.q1)
        self.q2_target = copy.deepcopy(self.q2)
        self.opt_actor = nn.Adam(self.actor.net.params(), lr=config.lr)
        self.opt_critic = nn.Adam(self.q1.params() + self.q2.params(), lr=config.lr)
        self.critic_updates = 0
        self.actor_updates = 0

    def select_action(self, state, step=0, explore=False, rng=None) -> np.ndarray:
        """Warm-up steps draw uniformly from [-1, 1]; exploration adds
        Gaussian noise to the policy output; evaluation is the raw policy."""
        if explore and step < self.config.start_steps:
            return rng.uniform(-1.0, 1.0, size=ACTION_DIM).astype(np.float32)
        a = self.actor.act(state)
        if explore and self.config.expl_noise > 0:
            a = a + rng.normal(0.0, self.config.expl_noise, size=ACTION_DIM).astype(np.float32)
        return np.clip(a, -1.0, 1.0).astype(np.float32)

    def critic_targets(self, batch, rng) -> np.ndarray:
        """Bootstrap targets; the done mask kills the gamma term, so for
        single-step episodes the target equals the stored reward."""
        cfg = self.config
        noise = rng.normal(0.0, cfg.policy_noise, size=(batch["action"].shape[0], ACTION_DIM))
        noise = np.clip(noise, -cfg.noise_clip, cfg.noise_clip).astype(np.float32)
        a_next = np.clip(self.actor_target.net.forward(batch["next_state"]) + noise, -1.0, 1.0)
        q_next = np.minimum(
            self.q1_target.forward(batch["next_state"], a_next),
            self.q2_target.forward(batch["next_state"], a_next),
        )[:, 0]
        return batch["reward"] + cfg.gamma * (1.0 - batch["done"]) * q_next

    def train_step(self, replay: ReplayBuffer, rng):
        cfg = self.config
        batch = replay.sample(cfg.batch_size, rng)
        y = self.critic_targets(batch, rng)[:, None]
        b = cfg.batch_size
        for q in (self.q1, self.q2):
            pred = q.forward(batch["state"], batch["action"])
            q.zero_grad()
            q.backward(2.0 * (pred - y) / b)
        self.opt_critic.step()
        self.critic_updates += 1
        if self.critic_updates % cfg.policy_delay == 0:
            a_pi = self.actor.net.forward(batch["state"])
            dq_da = self.q1.grad_action(batch["state"], a_pi)
            self.actor.net.zero_grad()
            self.actor.net.backward(-dq_da / b)
            self.opt_actor.step()
            self.actor_updates += 1
            soft_update(self.actor_target.net.params(), self.actor.net.params(), cfg.tau)
            soft_update(self.q1_target.params(), self.q1.params(), cfg.tau)
            soft_update(self.q2_target.params(), self.q2.params(), cfg.tau)

    def state(self) -> dict:
        out = {}
        for net in (self.actor.net, self.q1, self.q2):
            out.update(net.state())
        for prefix, net in (("t.", self.actor_target.net), ("t.", self.q1_target), ("t.", self.q2_target)):
            out.update({prefix + k: v for k, v in net.state().items()})
        return out

    def load_state(self, state: dict):
        self.actor.net.load_state(state)
        self.q1.load_state(state)
        self.q2.load_state(state)
        targets = {k[2:]: v for k, v in state.items() if k.startswith("t.")}
        self.actor_target.net.load_state(targets)
        self.q1_target.load_state(targets)
        self.q2_target.load_state(targets)
        return self


def evaluate_policy(agent: TD3Agent, env: CompletionEnv, clouds, states=None) -> float:
    """Mean reward of the deterministic policy over an evaluation set."""
    if states is None:
        states = [env.encode(c) for c in clouds]
    total = 0.0
    for cloud, s in zip(clouds, states):
        a = agent.select_action(s, explore=False)
        r, _ = env.reward(cloud, a, state=s)
        total += r
    return total / len(clouds)


def random_policy_reward(env: CompletionEnv, clouds, states=None, draws=8, seed=0) -> float:
    """Mean reward of uniform-random actions over the same evaluation set."""
    rng = np.random.default_rng(seed)
    if states is None:
        states = [env.encode(c) for c in clouds]
    total = 0.0
    for cloud, s in zip(clouds, states):
        for _ in range(draws):
            a = rng.uniform(-1.0, 1.0, size=ACTION_DIM).astype(np.float32)
            r, _ = env.reward(cloud, a, state=s)
            total += r
    return total / (len(clouds) * draws)


@dataclass
class AgentHistory:
    rows: list             # (step, reward, l_ch, l_gfv, d_score)
    evals: list             # (step, mean_eval_reward)


def train_agent(partial_clouds, env: CompletionEnv, config: AgentConfig, seed=0,
                eval_clouds=None, progress=None):
    """Run the single-step training loop: sample a partial cloud, act, store
    the transition, then update critics (and the actor every `policy_delay`
    critic updates) from replay batches. Returns (agent, history)."""
    if len(partial_clouds) == 0:
        raise ValueError("empty partial-cloud dataset")
    agent_ss, draw_ss = seed_sequence(seed).spawn(2)
    agent = TD3Agent(config, seed=agent_ss)
    rng = np.random.default_rng(draw_ss)
    replay = ReplayBuffer(config.replay_capacity)
    states = [env.encode(c) for c in partial_clouds]
    eval_states = None
    if eval_clouds is not None:
        eval_states = [env.encode(c) for c in eval_clouds]
    history = AgentHistory(rows=[], evals=[])
    for step in range(config.max_steps):
        i = int(rng.integers(len(partial_clouds)))
        s = states[i]
        a = agent.select_action(s, step=step, explore=True, rng=rng)
        transition, _, comp = env.step(partial_clouds[i], a, state=s)
        replay.push(transition)
        if len(replay) >= config.batch_size:
            agent.train_step(replay, rng)
        history.rows.append(
            (step, transition.reward, comp["l_ch"], comp["l_gfv"], comp["d_score"])
        )
        if eval_clouds is not None and (step + 1) % config.eval_frequency == 0:
            mean_r = evaluate_policy(agent, env, eval_clouds, eval_states)
            history.evals.append((step + 1, mean_r))
            if progress is not None:
                progress(step + 1, mean_r)
    return agent, history
