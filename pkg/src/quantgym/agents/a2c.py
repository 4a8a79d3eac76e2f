"""Synchronous advantage actor-critic trained with numpy backprop."""
from __future__ import annotations

import math

import numpy as np

from ..errors import TrainingError
from .policy import GaussianPolicy, TrainConfig

LOG_2PI = math.log(2.0 * math.pi)


def a2c_loss_and_grad(policy: GaussianPolicy, obs: np.ndarray,
                      actions: np.ndarray, returns: np.ndarray,
                      advantages: np.ndarray, entropy_coef: float,
                      vf_coef: float) -> tuple[float, np.ndarray]:
    """Loss and its analytic gradient w.r.t. the flat parameter vector.

    Policy term: -mean(log pi(a|s) * advantage) with the advantage held
    constant. Value term: mean squared error against the n-step returns.
    Entropy bonus is exact for a diagonal Gaussian (depends on log_std
    only).
    """
    B = obs.shape[0]
    mean, value, h = policy.forward(obs)
    std = policy.std()
    scaled_obs = np.atleast_2d(obs) / policy.obs_scale

    z = (actions - mean) / std
    logp = -0.5 * (z * z).sum(axis=1) - policy.log_std.sum() \
        - 0.5 * policy.action_dim * LOG_2PI
    entropy = policy.log_std.sum() + 0.5 * policy.action_dim * (LOG_2PI + 1.0)

    policy_loss = -(logp * advantages).mean()
    value_err = value - returns
    value_loss = (value_err * value_err).mean()
    loss = policy_loss + vf_coef * value_loss - entropy_coef * entropy

    # backward pass
    dmean = (-advantages[:, None] / B) * ((actions - mean) / (std * std))
    dlog_std = (-1.0 / B) * (advantages[:, None] * (z * z - 1.0)).sum(axis=0) \
        - entropy_coef
    dvalue = vf_coef * 2.0 * value_err / B

    dh = dmean @ policy.W2 + dvalue[:, None] * policy.wv
    dz1 = dh * (1.0 - h * h)
    dW2 = dmean.T @ h
    db2 = dmean.sum(axis=0)
    dwv = h.T @ dvalue
    dbv = dvalue.sum()
    dW1 = dz1.T @ scaled_obs
    db1 = dz1.sum(axis=0)

    grad = np.concatenate([dW1.reshape(-1), db1, dW2.reshape(-1), db2,
                           dlog_std, dwv, [dbv]])
    return float(loss), grad


class Adam:
    def __init__(self, size: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _clip_grad(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def train_a2c(env, config: TrainConfig) -> GaussianPolicy:
    """Train a Gaussian policy on a reset/step environment.

    Rolls out `rollout_steps` transitions (auto-resetting at episode
    ends), bootstraps n-step returns from the value head, normalizes
    advantages per rollout, and applies Adam with gradient-norm
    clipping. Fully reproducible from (seed, config, data).
    """
    rng = np.random.default_rng(config.seed)
    policy = GaussianPolicy(env.observation_dim, env.action_dim,
                            config.hidden, config.seed)
    if policy.action_dim != env.action_dim:
        raise TrainingError("policy/env action dimension mismatch")
    adam = Adam(policy.n_parameters, config.learning_rate)

    state = env.reset()
    obs = state.observation()
    # freeze a per-dimension observation scale from the first state
    policy.obs_scale = np.maximum(1.0, np.abs(obs))
    steps_done = 0
    while steps_done < config.steps:
        batch_obs, batch_act, batch_rew, batch_done, batch_val = [], [], [], [], []
        for _ in range(config.rollout_steps):
            action, value = policy.sample(obs, rng)
            transition = env.step(action)
            batch_obs.append(obs)
            batch_act.append(action)
            batch_rew.append(transition.reward)
            batch_done.append(transition.done)
            batch_val.append(value)
            steps_done += 1
            if transition.done:
                state = env.reset()
                obs = state.observation()
            else:
                obs = transition.next_state.observation()
        if batch_done[-1]:
            bootstrap = 0.0
        else:
            _, v_last, _ = policy.forward(obs)
            bootstrap = float(v_last[0])
        returns = np.empty(len(batch_rew))
        acc = bootstrap
        for i in range(len(batch_rew) - 1, -1, -1):
            if batch_done[i]:
                acc = 0.0
            acc = batch_rew[i] + config.gamma * acc
            returns[i] = acc
        values = np.asarray(batch_val)
        advantages = returns - values
        adv_std = advantages.std()
        if adv_std > 1e-12:
            advantages = (advantages - advantages.mean()) / adv_std
        loss, grad = a2c_loss_and_grad(
            policy, np.asarray(batch_obs), np.asarray(batch_act), returns,
            advantages, config.entropy_coef, config.vf_coef)
        if not math.isfinite(loss) or not np.isfinite(grad).all():
            raise TrainingError(
                f"non-finite loss/gradient at step {steps_done} "
                f"(loss={loss!r}); try a smaller learning rate")
        grad = _clip_grad(grad, config.grad_clip)
        policy.set_flat(adam.step(policy.get_flat(), grad))
    return policy
