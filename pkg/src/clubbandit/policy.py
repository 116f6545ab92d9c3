"""Round interface shared by every policy.

The harness drives policies through :meth:`act` and :meth:`observe`, which
take an environment round. Linear policies read the round's context
matrix; featureless ones read its item ids.
"""

from __future__ import annotations

import numpy as np


class ConfigError(ValueError):
    """Inconsistent experiment or policy configuration."""


class LinearPolicy:
    needs_features = True
    name = "linear"

    def choose(self, user: int, contexts: np.ndarray) -> int:
        raise NotImplementedError

    def update(self, user: int, x: np.ndarray, payoff: float) -> None:
        raise NotImplementedError

    def learn(self, user: int, x: np.ndarray, payoff: float) -> None:
        self.update(user, x, payoff)

    def act(self, rnd) -> int:
        return self.choose(rnd.user, rnd.contexts)

    def observe(self, rnd, k: int, payoff: float) -> None:
        self.learn(rnd.user, rnd.contexts[k], payoff)


class ItemPolicy:
    needs_features = False
    name = "items"

    def choose(self, user: int, items: np.ndarray) -> int:
        raise NotImplementedError

    def update(self, user: int, item: int, payoff: float) -> None:
        raise NotImplementedError

    def act(self, rnd) -> int:
        if rnd.items is None:
            raise ConfigError(f"{self.name} needs item ids; this environment has none")
        return self.choose(rnd.user, rnd.items)

    def observe(self, rnd, k: int, payoff: float) -> None:
        self.update(rnd.user, int(rnd.items[k]), payoff)
