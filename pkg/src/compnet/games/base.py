"""Game interface shared by the steppers, metrics and checks.

Every gradient method is vectorised over the agents of one team: ``X`` holds
one row of ``x`` per agent and ``Y`` one row of ``y``, and row ``k`` of the
result is agent ``k``'s gradient at its own ``(x_k, y_k)``. ``xi`` is the
stacked sample returned by :meth:`Game.sample`; ``xi=None`` gives the mean
(noise-free) gradient.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..errors import CapabilityError
from ..topology import PerronWeights


class Game(ABC):
    M1: int
    M2: int
    K1: int
    K2: int
    weights: PerronWeights
    zero_sum: bool = False
    #: whether :meth:`grad_adversary` is available (partially observable gradients)
    has_adversary_oracle: bool = False
    #: whether :meth:`affine` returns ``(H, b)``
    is_affine: bool = False

    @abstractmethod
    def sample(self, rng: np.random.Generator, team: int):
        """Draw one sample per agent of ``team``. Must consume a fixed number of variates."""

    @abstractmethod
    def loss(self, team: int, X: np.ndarray, Y: np.ndarray, xi=None) -> np.ndarray:
        """Per-agent local loss, shape ``(K_team,)``."""

    @abstractmethod
    def grad_x(self, team: int, X: np.ndarray, Y: np.ndarray, xi=None) -> np.ndarray:
        ...

    @abstractmethod
    def grad_y(self, team: int, X: np.ndarray, Y: np.ndarray, xi=None) -> np.ndarray:
        ...

    def grad_own(self, team, X, Y, xi=None):
        return self.grad_x(team, X, Y, xi) if team == 1 else self.grad_y(team, X, Y, xi)

    def grad_other(self, team, X, Y, xi=None):
        return self.grad_y(team, X, Y, xi) if team == 1 else self.grad_x(team, X, Y, xi)

    def local_grad(self, team: int, agent: int, x, y, rng: np.random.Generator | None = None) -> np.ndarray:
        """Own-block gradient of one agent at ``(x, y)``; sampled if ``rng`` is given, else the mean."""
        n = self.team_size(team)
        if not 0 <= agent < n:
            raise IndexError(f"agent {agent} out of range for team {team} of size {n}")
        X = np.tile(np.asarray(x, float), (n, 1))
        Y = np.tile(np.asarray(y, float), (n, 1))
        xi = None if rng is None else self.sample(rng, team)
        return self.grad_own(team, X, Y, xi)[agent]

    def grad_adversary(self, team, X, Y, xi=None):
        """Agent-side estimate of the opponent team's gradient w.r.t. the opponent's block."""
        raise CapabilityError(f"{type(self).__name__} has no adversary-gradient oracle")

    def affine(self):
        raise CapabilityError(f"{type(self).__name__} is not an affine game")

    def team_size(self, team: int) -> int:
        return self.K1 if team == 1 else self.K2

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[: self.M1], z[self.M1 :]

    def F(self, z) -> np.ndarray:
        """Team operator ``[sum_k p_k grad_x J_k ; sum_k p_k grad_y J_k]`` at a common point."""
        x, y = self.split(z)
        fx = self.weights.p1 @ self.grad_x(1, np.tile(x, (self.K1, 1)), np.tile(y, (self.K1, 1)))
        fy = self.weights.p2 @ self.grad_y(2, np.tile(x, (self.K2, 1)), np.tile(y, (self.K2, 1)))
        return np.concatenate([fx, fy])

    def extra_metrics(self, state, x_c, y_c) -> dict:
        return {}

    extra_fields: tuple[str, ...] = ()
