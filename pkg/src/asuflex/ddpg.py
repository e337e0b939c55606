"""Deep deterministic policy gradient, implemented from scratch on numpy.

Actor and critic are two-hidden-layer tanh MLPs with manually derived
backpropagation; a finite-difference property test in the suite guards
the gradient code. The actor output is squashed by tanh to [-1, 1] per
action dimension; physical scaling lives in the environment layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptFileError,
    DimensionMismatchError,
    EmptyBufferError,
    NonFiniteError,
    SchemaMismatchError,
)

CHECKPOINT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class DdpgHyper:
    """Training hyperparameters.

    ``reward_scale`` multiplies rewards as they enter the replay buffer so
    Q-values stay O(1); reported metrics always use raw rewards.
    ``noise_sigma`` decays linearly to ``noise_sigma_final`` over the
    step budget.
    """

    gamma: float = 0.99
    tau: float = 0.005
    lr_actor: float = 3e-4
    lr_critic: float = 1e-3
    batch: int = 128
    buffer_capacity: int = 20000
    warmup: int = 128
    noise_sigma: float = 0.2
    noise_sigma_final: float = 0.05
    hidden: tuple = (64, 64)
    reward_scale: float = 0.01
    updates_per_step: int = 1
    actor_l2: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        for name in ("lr_actor", "lr_critic", "batch", "buffer_capacity",
                     "reward_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.actor_l2 < 0:
            raise ValueError("actor_l2 must be non-negative")


class Mlp:
    """Fully connected network: tanh hidden layers, linear or tanh output."""

    def __init__(self, sizes, out_tanh: bool, rng: np.random.Generator,
                 final_init_scale: float = 3e-3):
        self.sizes = tuple(int(s) for s in sizes)
        self.out_tanh = out_tanh
        self.weights = []
        self.biases = []
        for i in range(len(self.sizes) - 1):
            fan_in, fan_out = self.sizes[i], self.sizes[i + 1]
            if i == len(self.sizes) - 2:
                bound = final_init_scale
            else:
                bound = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray):
        """Batched forward pass; returns (output, cache for backward)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.sizes[0]:
            raise DimensionMismatchError(
                f"input width {x.shape[1]}, expected {self.sizes[0]}"
            )
        acts = [x]
        h = x
        n_layers = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < n_layers - 1 or self.out_tanh:
                h = np.tanh(z)
            else:
                h = z
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts, dout: np.ndarray, dz_out: np.ndarray | None = None):
        """Gradients of a scalar loss given d(loss)/d(output).

        ``dz_out``, if given, is an extra gradient applied directly at the
        final pre-activation (before the output tanh), bypassing the
        vanishing tanh derivative for losses defined on that quantity.
        Returns (weight grads, bias grads, d(loss)/d(input)).
        """
        n_layers = len(self.weights)
        gw = [None] * n_layers
        gb = [None] * n_layers
        delta = np.asarray(dout, dtype=float)
        for i in range(n_layers - 1, -1, -1):
            if i < n_layers - 1 or self.out_tanh:
                delta = delta * (1.0 - acts[i + 1] ** 2)  # tanh'(z) = 1 - tanh(z)^2
            if i == n_layers - 1 and dz_out is not None:
                delta = delta + dz_out
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            delta = delta @ self.weights[i].T
        return gw, gb, delta

    # -- parameter bookkeeping ------------------------------------------

    def params(self):
        return self.weights + self.biases

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = self.sizes
        other.out_tanh = self.out_tanh
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def soft_update_from(self, online: "Mlp", tau: float) -> None:
        for tgt, src in zip(self.params(), online.params()):
            tgt *= 1.0 - tau
            tgt += tau * src


class Adam:
    """Per-parameter Adam state for one network."""

    def __init__(self, net: Mlp, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.params()]
        self.v = [np.zeros_like(p) for p in net.params()]

    def step(self, net: Mlp, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(net.params(), grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class ReplayBuffer:
    """Uniform-sampling ring buffer of transitions."""

    capacity: int
    obs_dim: int
    act_dim: int
    seed: int = 0

    def __post_init__(self):
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        self.obs = np.zeros((self.capacity, self.obs_dim))
        self.act = np.zeros((self.capacity, self.act_dim))
        self.rew = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, self.obs_dim))
        self.done = np.zeros(self.capacity)
        self.size = 0
        self._head = 0
        self.rng = np.random.default_rng(self.seed)

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self._head
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int):
        if self.size == 0:
            raise EmptyBufferError("sample before any push")
        idx = self.rng.integers(0, self.size, size=batch)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.done[idx])


@dataclass
class UpdateResult:
    critic_loss: float
    actor_loss: float


class DdpgAgent:
    """Actor-critic pair with target networks and Adam optimizers."""

    def __init__(self, obs_dim: int, act_dim: int, hyper: DdpgHyper = DdpgHyper(),
                 seed: int = 0, total_steps: int = 10000):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hyper = hyper
        self.total_steps = total_steps
        ss = np.random.SeedSequence(seed)
        init_seed, noise_seed, buf_seed = ss.spawn(3)
        rng = np.random.default_rng(init_seed)
        self.actor = Mlp((obs_dim, *hyper.hidden, act_dim), out_tanh=True, rng=rng)
        self.critic = Mlp((obs_dim + act_dim, *hyper.hidden, 1), out_tanh=False, rng=rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.opt_actor = Adam(self.actor, hyper.lr_actor)
        self.opt_critic = Adam(self.critic, hyper.lr_critic)
        self.noise_rng = np.random.default_rng(noise_seed)
        self.buffer = ReplayBuffer(hyper.buffer_capacity, obs_dim, act_dim)
        self.buffer.rng = np.random.default_rng(buf_seed)
        self.step_count = 0

    # -- acting ---------------------------------------------------------

    def act(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic policy action in [-1, 1]^m."""
        return self.actor(obs)[0]

    def sigma(self) -> float:
        """Current exploration scale under linear decay."""
        frac = min(1.0, self.step_count / max(1, self.total_steps))
        h = self.hyper
        return h.noise_sigma + frac * (h.noise_sigma_final - h.noise_sigma)

    def explore(self, obs: np.ndarray) -> np.ndarray:
        """Behavior policy: Gaussian noise on the actor output, clipped."""
        if self.step_count < self.hyper.warmup:
            return self.noise_rng.uniform(-1.0, 1.0, size=self.act_dim)
        a = self.act(obs)
        a = a + self.sigma() * self.noise_rng.standard_normal(self.act_dim)
        return np.clip(a, -1.0, 1.0)

    # -- learning -------------------------------------------------------

    def observe_transition(self, obs, action, reward, next_obs, done) -> None:
        self.buffer.push(obs, action, reward * self.hyper.reward_scale,
                         next_obs, done)
        self.step_count += 1

    def maybe_update(self) -> UpdateResult | None:
        """Run the configured number of gradient updates for one
        environment step; returns the last result."""
        if self.step_count < self.hyper.warmup or self.buffer.size < self.hyper.batch:
            return None
        result = None
        for _ in range(self.hyper.updates_per_step):
            result = self.update(self.buffer.sample(self.hyper.batch))
        return result

    def update(self, batch) -> UpdateResult:
        """One critic step, one actor step, one soft target update."""
        obs, act, rew, next_obs, done = batch
        h = self.hyper
        n = len(rew)

        # Critic: minimize mean squared TD error against the target nets.
        next_a = self.target_actor(next_obs)
        q_next = self.target_critic(np.hstack([next_obs, next_a]))[:, 0]
        y = rew + h.gamma * (1.0 - done) * q_next
        q, cache_c = self.critic.forward(np.hstack([obs, act]))
        td = q[:, 0] - y
        critic_loss = float(np.mean(td ** 2))
        if not np.isfinite(critic_loss):
            raise NonFiniteError(
                f"critic loss diverged at step {self.step_count}: "
                f"q range [{q.min():.3e}, {q.max():.3e}], "
                f"target range [{y.min():.3e}, {y.max():.3e}]"
            )
        dq = (2.0 / n) * td[:, None]
        gw, gb, _ = self.critic.backward(cache_c, dq)
        self.opt_critic.step(self.critic, gw + gb)

        # Actor: ascend Q(s, mu(s)) via the chain rule through the critic,
        # with an L2 penalty on the pre-tanh output that keeps the policy
        # away from saturated corners it could not re-learn its way out of.
        a_pi, cache_a = self.actor.forward(obs)
        q_pi, cache_q = self.critic.forward(np.hstack([obs, a_pi]))
        z_pi = np.arctanh(np.clip(a_pi, -1.0 + 1e-9, 1.0 - 1e-9))
        actor_loss = float(-np.mean(q_pi)
                           + h.actor_l2 * np.mean(z_pi ** 2))
        dq_pi = np.full((n, 1), -1.0 / n)
        _, _, dinput = self.critic.backward(cache_q, dq_pi)
        da = dinput[:, self.obs_dim:]
        dz = (2.0 * h.actor_l2 / z_pi.size) * z_pi
        gw_a, gb_a, _ = self.actor.backward(cache_a, da, dz_out=dz)
        self.opt_actor.step(self.actor, gw_a + gb_a)

        self.target_actor.soft_update_from(self.actor, h.tau)
        self.target_critic.soft_update_from(self.critic, h.tau)
        return UpdateResult(critic_loss=critic_loss, actor_loss=actor_loss)

    # -- persistence ----------------------------------------------------

    def checkpoint(self) -> dict:
        def dump(net: Mlp):
            return {
                "sizes": list(net.sizes),
                "out_tanh": net.out_tanh,
                "weights": [w.flatten().tolist() for w in net.weights],
                "biases": [b.tolist() for b in net.biases],
            }
        return {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "total_steps": self.total_steps,
            "step_count": self.step_count,
            "hyper": {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in vars(self.hyper).items()},
            "actor": dump(self.actor),
            "critic": dump(self.critic),
            "target_actor": dump(self.target_actor),
            "target_critic": dump(self.target_critic),
            "noise_rng": self.noise_rng.bit_generator.state,
            "buffer_rng": self.buffer.rng.bit_generator.state,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.checkpoint(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DdpgAgent":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CorruptFileError(f"{path}: {exc}") from exc
        if doc.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
            raise SchemaMismatchError(
                f"{path}: schema_version {doc.get('schema_version')!r}, "
                f"expected {CHECKPOINT_SCHEMA_VERSION}"
            )
        hyper_doc = dict(doc["hyper"])
        hyper_doc["hidden"] = tuple(hyper_doc["hidden"])
        hyper = DdpgHyper(**hyper_doc)
        agent = cls(doc["obs_dim"], doc["act_dim"], hyper=hyper,
                    total_steps=doc["total_steps"])

        def restore(net: Mlp, blob):
            net.sizes = tuple(blob["sizes"])
            net.out_tanh = blob["out_tanh"]
            net.weights = [
                np.array(w).reshape(net.sizes[i], net.sizes[i + 1])
                for i, w in enumerate(blob["weights"])
            ]
            net.biases = [np.array(b) for b in blob["biases"]]

        restore(agent.actor, doc["actor"])
        restore(agent.critic, doc["critic"])
        restore(agent.target_actor, doc["target_actor"])
        restore(agent.target_critic, doc["target_critic"])
        agent.opt_actor = Adam(agent.actor, hyper.lr_actor)
        agent.opt_critic = Adam(agent.critic, hyper.lr_critic)
        agent.step_count = doc["step_count"]
        agent.noise_rng.bit_generator.state = doc["noise_rng"]
        agent.buffer.rng.bit_generator.state = doc["buffer_rng"]
        return agent
