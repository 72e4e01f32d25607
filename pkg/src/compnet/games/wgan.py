"""Toy Wasserstein GAN learning a one-dimensional Gaussian.

Generator ``G(x; z) = W2 . tanh(W1 z + b1) + b2`` with ``H`` hidden units,
packed as ``x = [W1, b1, W2, b2]``. Discriminator ``D(y; u) = y1 u + y2 u^2``.

Team 1 (generators) samples ``D(y; u) - D(y; G(x; z)) + lx|x|^2 - ly|y|^2``;
Team 2 (discriminators) samples its negative. Mean quantities integrate the
real samples in closed form and the latent ``z`` by Gauss-Hermite quadrature.
"""

from __future__ import annotations

import numpy as np

from ..topology import PerronWeights
from .base import Game


class WganGame(Game):
    zero_sum = True
    has_adversary_oracle = True
    extra_fields = ("pi_hat", "sigma_hat", "moment_err")

    def __init__(self, K1: int, K2: int, weights: PerronWeights, *, lam_x=1e-5, lam_y=1e-3,
                 pi=0.0, sigma=0.01, hidden=5, batch=32, quad_nodes=40):
        self.K1, self.K2 = K1, K2
        self.weights = weights
        self.lam_x, self.lam_y = float(lam_x), float(lam_y)
        self.pi, self.sigma = float(pi), float(sigma)
        self.hidden, self.batch = int(hidden), int(batch)
        self.M1, self.M2 = 3 * self.hidden + 1, 2
        nodes, w = np.polynomial.hermite_e.hermegauss(quad_nodes)
        self._gh_nodes, self._gh_weights = nodes, w / w.sum()

    # -- generator --------------------------------------------------------

    def unpack(self, X):
        H = self.hidden
        return X[..., :H], X[..., H : 2 * H], X[..., 2 * H : 3 * H], X[..., 3 * H]

    def generate(self, X, z):
        """Outputs ``(n, B)`` and hidden activations ``(n, B, H)`` for rows of ``X``."""
        W1, b1, W2, b2 = self.unpack(X)
        h = np.tanh(z[..., None] * W1[:, None, :] + b1[:, None, :])
        return np.einsum("nbh,nh->nb", h, W2) + b2[:, None], h

    def _jacobian(self, X, z, h):
        """``dG/dx`` with shape ``(n, B, M1)``."""
        W1, b1, W2, b2 = self.unpack(X)
        dpre = (1 - h**2) * W2[:, None, :]
        ones = np.ones(h.shape[:2] + (1,))
        return np.concatenate([dpre * z[..., None], dpre, h, ones], axis=2)

    def generator_moments(self, X):
        """Exact (quadrature) mean and std of ``G(x; z)`` for each row of ``X``."""
        X = np.atleast_2d(X)
        z = np.broadcast_to(self._gh_nodes, (X.shape[0], self._gh_nodes.size))
        g, _ = self.generate(X, z)
        m1 = g @ self._gh_weights
        m2 = (g**2) @ self._gh_weights
        return m1, np.sqrt(np.maximum(m2 - m1**2, 0.0))

    def estimate_mean_std(self, x, n_samples=10_000, rng=None):
        """Monte-Carlo mean and standard deviation of the generator output."""
        if n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        rng = np.random.default_rng() if rng is None else rng
        z = rng.standard_normal((1, n_samples))
        g, _ = self.generate(np.atleast_2d(np.asarray(x, float)), z)
        return float(g.mean()), float(g.std(ddof=1))

    # -- game interface ---------------------------------------------------

    def sample(self, rng, team):
        n = self.team_size(team)
        u = self.pi + self.sigma * rng.standard_normal((n, self.batch))
        z = rng.standard_normal((n, self.batch))
        return np.stack([u, z], axis=1)

    def _batch(self, n, xi):
        """Latent draws, their weights, and the real-data moments (E u, E u^2)."""
        if xi is None:
            z = np.broadcast_to(self._gh_nodes, (n, self._gh_nodes.size))
            wts = self._gh_weights
            ru1 = np.full(n, self.pi)
            ru2 = np.full(n, self.pi**2 + self.sigma**2)
        else:
            u, z = xi[:, 0], xi[:, 1]
            wts = np.full(z.shape[1], 1.0 / z.shape[1])
            ru1, ru2 = u @ wts, (u**2) @ wts
        return z, wts, ru1, ru2

    def _sign(self, team):
        return 1.0 if team == 1 else -1.0

    def loss(self, team, X, Y, xi=None):
        z, wts, ru1, ru2 = self._batch(X.shape[0], xi)
        g, _ = self.generate(X, z)
        gm1, gm2 = g @ wts, (g**2) @ wts
        val = Y[:, 0] * (ru1 - gm1) + Y[:, 1] * (ru2 - gm2)
        val += self.lam_x * np.sum(X**2, axis=1) - self.lam_y * np.sum(Y**2, axis=1)
        return self._sign(team) * val

    def grad_x(self, team, X, Y, xi=None):
        z, wts, _, _ = self._batch(X.shape[0], xi)
        g, h = self.generate(X, z)
        J = self._jacobian(X, z, h)
        dD = Y[:, :1] + 2 * Y[:, 1:2] * g  # dD(y; G)/dG
        grad = -np.einsum("nb,b,nbm->nm", dD, wts, J) + 2 * self.lam_x * X
        return self._sign(team) * grad

    def grad_y(self, team, X, Y, xi=None):
        z, wts, ru1, ru2 = self._batch(X.shape[0], xi)
        g, _ = self.generate(X, z)
        grad = np.stack([ru1 - g @ wts, ru2 - (g**2) @ wts], axis=1) - 2 * self.lam_y * Y
        return self._sign(team) * grad

    def grad_adversary(self, team, X, Y, xi=None):
        # zero-sum: the opponent's gradient is the negated own cross gradient
        return -self.grad_other(team, X, Y, xi)

    def extra_metrics(self, state, x_c, y_c):
        pi_hat, sigma_hat = self.generator_moments(x_c)
        gens = np.vstack([state.X1, state.X2])
        m, s = self.generator_moments(gens)
        err = np.mean((m - self.pi) ** 2 + (s - self.sigma) ** 2)
        return {"pi_hat": float(pi_hat[0]), "sigma_hat": float(sigma_hat[0]), "moment_err": float(err)}

    def initial_generator(self, rng, scale=0.5):
        """Random generator parameters for runs that must leave the symmetric zero point."""
        return scale * rng.standard_normal(self.M1)


def wgan_local_grads(game: WganGame, team: int, agent: int, x, y, rng=None) -> np.ndarray:
    """Own-block gradient of one generator (Team 1) or discriminator (Team 2) agent."""
    return game.local_grad(team, agent, x, y, rng)
