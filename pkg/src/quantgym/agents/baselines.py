"""Classical baseline strategies: buy-and-hold, equal weight, zero action."""
from __future__ import annotations

import math

import numpy as np

from ..envs import PortfolioEnv, TradingEnv
from .policy import Policy


class ZeroPolicy(Policy):
    """Never trades (uniform weights in the portfolio environment)."""

    name = "zero"

    def __init__(self, n: int):
        super().__init__({"n": n})
        self.n = n

    def act(self, observation: np.ndarray) -> np.ndarray:
        return np.zeros(self.n)


class PassivePolicy(Policy):
    """Buy and hold: equal budget per ticker once, then no activity.

    Allocation happens whenever holdings read all-zero (normally only
    the first step): budget/ (price * (1 + cost_rate)) shares, floored
    to integers, remainder left as cash. Targets above h_max shares get
    truncated by the environment's action scale.
    """

    name = "passive"

    def __init__(self, n: int, h_max: int, cost_rate: float = 0.0):
        super().__init__({"n": n, "h_max": h_max, "cost_rate": cost_rate})
        self.n = n
        self.h_max = h_max
        self.cost_rate = cost_rate

    def target_shares(self, balance: float, prices: np.ndarray) -> np.ndarray:
        budget = balance / self.n
        return np.floor(budget / (prices * (1.0 + self.cost_rate)))

    def act(self, observation: np.ndarray) -> np.ndarray:
        balance = observation[0]
        prices = observation[1:1 + self.n]
        holdings = observation[-self.n:]
        if np.abs(holdings).max(initial=0.0) > 1e-9:
            return np.zeros(self.n)
        return self.target_shares(balance, prices) / self.h_max


class WeightRebalancePolicy(Policy):
    """Steers the account toward fixed target weights.

    Portfolio mode emits logits whose softmax is the target. Trading
    mode rebalances holdings toward the target dollar split every
    `rebalance_every` steps (infinity keeps the first allocation).
    """

    name = "weight_rebalance"

    def __init__(self, weights: np.ndarray, kind: str = "portfolio",
                 rebalance_every: float = 1, h_max: int = 100):
        weights = np.asarray(weights, dtype=float)
        super().__init__({"weights": weights.tolist(), "kind": kind,
                          "rebalance_every": rebalance_every, "h_max": h_max})
        if kind not in ("portfolio", "trading"):
            raise ValueError(f"unknown kind {kind!r}")
        if rebalance_every < 1:
            raise ValueError("rebalance_every must be >= 1")
        self.n = weights.size
        self.weights = weights / weights.sum()
        self._logits = np.log(np.maximum(self.weights, 1e-12))
        self.kind = kind
        self.rebalance_every = rebalance_every
        self.h_max = h_max
        self._step = 0

    def begin_episode(self) -> None:
        self._step = 0

    def act(self, observation: np.ndarray) -> np.ndarray:
        if self.kind == "portfolio":
            return self._logits.copy()
        step = self._step
        self._step += 1
        first = step == 0
        due = (not math.isinf(self.rebalance_every)
               and step % int(self.rebalance_every) == 0)
        if not (first or due):
            return np.zeros(self.n)
        balance = observation[0]
        prices = observation[1:1 + self.n]
        holdings = observation[-self.n:]
        value = balance + prices @ holdings
        target = np.floor(value * self.weights / prices)
        delta = target - holdings
        return np.clip(delta / self.h_max, -1.0, 1.0)


class EqualWeightPolicy(WeightRebalancePolicy):
    """Uniform capital split across all tickers."""

    name = "equal_weight"

    def __init__(self, n: int, kind: str = "portfolio",
                 rebalance_every: float = 1, h_max: int = 100):
        super().__init__(np.full(n, 1.0 / n), kind, rebalance_every, h_max)

    def act(self, observation: np.ndarray) -> np.ndarray:
        if self.kind == "portfolio":
            return np.zeros(self.n)  # softmax of zeros is uniform
        return super().act(observation)


def baseline_passive(env: TradingEnv) -> PassivePolicy:
    """Buy-and-hold policy shaped for a trading environment."""
    return PassivePolicy(env.n, env.config.h_max, env.config.cost_rate)


def baseline_equal(env, rebalance_every: float = 1) -> EqualWeightPolicy:
    """Equal-weight policy for either environment kind."""
    if isinstance(env, PortfolioEnv):
        return EqualWeightPolicy(env.n, "portfolio")
    if isinstance(env, TradingEnv):
        return EqualWeightPolicy(env.n, "trading", rebalance_every,
                                 env.config.h_max)
    raise TypeError(f"unsupported environment {type(env).__name__}")


def baseline_zero(env) -> ZeroPolicy:
    return ZeroPolicy(env.n)
