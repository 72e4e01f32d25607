"""Two-team Cournot competition with noisy costs and price slope.

Firm ``l`` produces ``x(l)`` (Team 1) or ``y(l)`` (Team 2). Its sampled loss
is ``(c_l + v_l) q_l^2 - q_l (P - (w + z) S)`` with ``S`` the total output
of both teams and ``v``, ``z`` uniform on ``[-noise, noise]``.

One sample per agent is a full market draw: a cost shock for every firm
plus one price shock. The agent's own loss reads its own cost shock; the
adversary oracle reads the opposing firms' shocks from the same draw.
"""

from __future__ import annotations

import numpy as np

from ..errors import StructuralError
from ..topology import PerronWeights
from .base import Game


class CournotGame(Game):
    is_affine = True
    has_adversary_oracle = True

    def __init__(self, costs, P: float, w: float, noise: float, K1: int, weights: PerronWeights, oracle: str = "team"):
        costs = np.asarray(costs, dtype=float)
        if costs.ndim != 1 or not 0 < K1 < len(costs):
            raise StructuralError("costs must list one value per firm of both teams")
        if oracle not in ("team", "mirror"):
            raise ValueError(f"unknown oracle kind {oracle!r}")
        self.costs, self.P, self.w, self.noise = costs, float(P), float(w), float(noise)
        self.K1, self.K2 = K1, len(costs) - K1
        self.M1, self.M2 = self.K1, self.K2
        if len(weights.p1) != self.K1 or len(weights.p2) != self.K2:
            raise StructuralError("Perron weights do not match the team sizes")
        self.weights = weights
        self.oracle = oracle
        self.K = self.K1 + self.K2
        self._slices = {1: slice(0, self.K1), 2: slice(self.K1, self.K)}
        self._team_costs = {t: self.costs[sl] for t, sl in self._slices.items()}

    def _firms(self, team):
        return self._slices[team]

    def sample(self, rng, team):
        n = self.team_size(team)
        return rng.uniform(-self.noise, self.noise, size=(n, self.K + 1))

    def _shocks(self, team, xi):
        """Own cost shock, all cost shocks and price shock per agent (``None`` if noise-free)."""
        if xi is None:
            return None, None, None
        v_all = xi[:, : self.K]
        return v_all[:, self._firms(team)].diagonal(), v_all, xi[:, self.K]

    def loss(self, team, X, Y, xi=None):
        own_q = X if team == 1 else Y
        v, _, z = self._shocks(team, xi)
        q = own_q.diagonal()
        S = np.add.reduce(X, axis=1) + np.add.reduce(Y, axis=1)
        c = self._team_costs[team]
        if v is not None:
            c = c + v
        slope = self.w if z is None else self.w + z
        return c * q**2 - q * (self.P - slope * S)

    def _grad_own_block(self, team, X, Y, xi):
        own_q = X if team == 1 else Y
        v, _, z = self._shocks(team, xi)
        q = own_q.diagonal()
        S = np.add.reduce(X, axis=1) + np.add.reduce(Y, axis=1)
        slope = self.w if z is None else self.w + z
        c = self._team_costs[team]
        if v is not None:
            c = c + v
        g = np.empty_like(own_q)
        g[:] = (slope * q)[:, None]
        diag = np.einsum("ii->i", g)
        diag += 2 * c * q - self.P + slope * S
        return g

    def _grad_cross_block(self, team, X, Y, xi):
        own_q = X if team == 1 else Y
        other = Y if team == 1 else X
        _, _, z = self._shocks(team, xi)
        slope = self.w if z is None else self.w + z
        g = np.empty_like(other)
        g[:] = (slope * own_q.diagonal())[:, None]
        return g

    def grad_x(self, team, X, Y, xi=None):
        return self._grad_own_block(1, X, Y, xi) if team == 1 else self._grad_cross_block(2, X, Y, xi)

    def grad_y(self, team, X, Y, xi=None):
        return self._grad_cross_block(1, X, Y, xi) if team == 1 else self._grad_own_block(2, X, Y, xi)

    def grad_adversary(self, team, X, Y, xi=None):
        """Gradient of the opposing team's objective w.r.t. its own block.

        ``oracle="team"`` evaluates the Perron-weighted opposing objective
        with the opposing firms' cost shocks from the agent's draw.
        ``oracle="mirror"`` uses the single opposing firm with the same local
        index (modulo the opposing team size).
        """
        other = 2 if team == 1 else 1
        n = X.shape[0]
        _, v_all, z = self._shocks(team, xi)
        opp_q = Y if team == 1 else X
        c = self._team_costs[other]
        if v_all is not None:
            c = c + v_all[:, self._firms(other)]
        S = np.add.reduce(X, axis=1) + np.add.reduce(Y, axis=1)
        slope = np.full(n, self.w) if z is None else self.w + z
        marginal = 2 * c * opp_q - self.P + (slope * S)[:, None]
        if self.oracle == "team":
            p = self.weights.team(other)
            return p * marginal + (slope * (opp_q @ p))[:, None]
        Ko = opp_q.shape[1]
        j = np.arange(n) % Ko
        g = np.repeat((slope * opp_q[np.arange(n), j])[:, None], Ko, axis=1)
        g[np.arange(n), j] += marginal[np.arange(n), j]
        return g

    def affine(self):
        """``F(z) = H z + b`` assembled from costs, slope and Perron weights."""
        K = self.K
        p = np.concatenate([self.weights.p1, self.weights.p2])
        H = np.zeros((K, K))
        b = -self.P * p
        for team in (1, 2):
            rows = self._firms(team)
            pt = p[rows]
            H[rows, :] += self.w * pt[:, None]  # p_j w S
            H[rows, rows] += np.diag(2 * pt * self.costs[rows])
            H[rows, rows] += self.w * np.tile(pt, (pt.size, 1))  # w sum_l p_l q_l
        return H, b


def cournot_stochastic_grad(game: CournotGame, agent: int, x, y, rng=None) -> np.ndarray:
    """Gradient of firm ``agent`` (global index, Team 1 first) w.r.t. its own team's block."""
    team, local = (1, agent) if agent < game.K1 else (2, agent - game.K1)
    return game.local_grad(team, local, x, y, rng)
