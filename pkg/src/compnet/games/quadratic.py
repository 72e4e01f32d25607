"""Synthetic quadratic games with a prescribed strong-monotonicity constant.

Each agent ``k`` holds a quadratic loss ``J_k(z) = 0.5 z^T S_k z + s_k^T z``
on the joint variable ``z = [x; y]``; the sampled loss adds ``xi^T z`` with
``xi ~ N(0, noise_std^2 I)``. Agent Hessians are a shared team Hessian plus
perturbations whose Perron-weighted sum is zero, so the team objectives are
exactly the designed ones while individual agents disagree.
"""

from __future__ import annotations

import numpy as np

from ..errors import StructuralError
from ..topology import PerronWeights
from .base import Game


def _random_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _random_psd(n, rng, lo=0.0, hi=1.0, pin_min=True):
    eig = rng.uniform(lo, hi, n)
    if pin_min:
        eig[0] = lo
    Q = _random_orthogonal(n, rng)
    return (Q * eig) @ Q.T


def _random_sym(n, rng, scale):
    A = rng.standard_normal((n, n)) * scale
    return (A + A.T) / 2


class QuadraticGame(Game):
    is_affine = True
    has_adversary_oracle = True

    def __init__(self, S, s, K1, M1, M2, weights: PerronWeights, noise_std=0.0, zero_sum=False):
        """``S``: ``(K, M, M)`` symmetric agent Hessians; ``s``: ``(K, M)`` linear terms."""
        S, s = np.asarray(S, float), np.asarray(s, float)
        M = M1 + M2
        if S.ndim != 3 or S.shape[1:] != (M, M) or s.shape != (S.shape[0], M):
            raise StructuralError("agent Hessians must be (K, M, M) and linear terms (K, M)")
        self.S, self.s = S, s
        self.K1, self.K2 = K1, S.shape[0] - K1
        self.M1, self.M2 = M1, M2
        self.weights = weights
        self.noise_std = float(noise_std)
        self.zero_sum = bool(zero_sum)

    @classmethod
    def random(cls, K1, K2, M1, M2, nu, weights, rng, *, zero_sum=True, heterogeneity=0.5,
               coupling=1.0, noise_std=0.1, z_star=None):
        """Draw a game whose operator has ``lambda_min(sym(H)) == nu``.

        ``H = Sym + [[0, B], [-B^T, 0]]`` with ``Sym = nu I + PSD`` (block
        diagonal when ``zero_sum``); the Nash point is ``z_star`` (random if
        not given).
        """
        M = M1 + M2
        if zero_sum:
            sym = np.zeros((M, M))
            sym[:M1, :M1] = _random_psd(M1, rng)
            sym[M1:, M1:] = _random_psd(M2, rng, pin_min=False)
            sym += nu * np.eye(M)
        else:
            sym = nu * np.eye(M) + _random_psd(M, rng)
        B = rng.standard_normal((M1, M2)) * coupling
        H = sym.copy()
        H[:M1, M1:] += B
        H[M1:, :M1] -= B.T
        z_star = rng.standard_normal(M) if z_star is None else np.asarray(z_star, float)
        b = -H @ z_star

        # Team-1 Hessian: x-rows follow H, y-block is free (or forced by zero-sum).
        S1 = np.zeros((M, M))
        S1[:M1, :M1] = H[:M1, :M1]
        S1[:M1, M1:] = H[:M1, M1:]
        S1[M1:, :M1] = H[:M1, M1:].T
        S2 = np.zeros((M, M))
        S2[M1:, M1:] = H[M1:, M1:]
        S2[M1:, :M1] = H[M1:, :M1]
        S2[:M1, M1:] = H[M1:, :M1].T
        s1, s2 = np.zeros(M), np.zeros(M)
        s1[:M1], s2[M1:] = b[:M1], b[M1:]
        if zero_sum:
            S1[M1:, M1:] = -H[M1:, M1:]
            S2[:M1, :M1] = -H[:M1, :M1]
            s1[M1:], s2[:M1] = -b[M1:], -b[:M1]
        else:
            S1[M1:, M1:] = _random_sym(M2, rng, 1.0)
            S2[:M1, :M1] = _random_sym(M1, rng, 1.0)
            s1[M1:], s2[:M1] = rng.standard_normal(M2), rng.standard_normal(M1)

        def spread(center, p, n):
            dev = np.stack([_random_sym(M, rng, heterogeneity) for _ in range(n)])
            dev -= np.tensordot(p, dev, axes=1)[None]
            return center[None] + dev

        def spread_vec(center, p, n):
            dev = rng.standard_normal((n, M)) * heterogeneity
            dev -= (p @ dev)[None]
            return center[None] + dev

        S = np.concatenate([spread(S1, weights.p1, K1), spread(S2, weights.p2, K2)])
        s = np.concatenate([spread_vec(s1, weights.p1, K1), spread_vec(s2, weights.p2, K2)])
        return cls(S, s, K1, M1, M2, weights, noise_std=noise_std, zero_sum=zero_sum)

    def _agents(self, team):
        return slice(0, self.K1) if team == 1 else slice(self.K1, self.K1 + self.K2)

    def sample(self, rng, team):
        return rng.normal(0.0, self.noise_std, size=(self.team_size(team), self.M1 + self.M2))

    def _grad_z(self, team, X, Y, xi):
        Z = np.concatenate([X, Y], axis=1)
        sl = self._agents(team)
        g = np.einsum("kij,kj->ki", self.S[sl], Z) + self.s[sl]
        return g if xi is None else g + xi

    def loss(self, team, X, Y, xi=None):
        Z = np.concatenate([X, Y], axis=1)
        sl = self._agents(team)
        val = 0.5 * np.einsum("ki,kij,kj->k", Z, self.S[sl], Z) + np.einsum("ki,ki->k", self.s[sl], Z)
        return val if xi is None else val + np.einsum("ki,ki->k", xi, Z)

    def grad_x(self, team, X, Y, xi=None):
        return self._grad_z(team, X, Y, xi)[:, : self.M1]

    def grad_y(self, team, X, Y, xi=None):
        return self._grad_z(team, X, Y, xi)[:, self.M1 :]

    def grad_adversary(self, team, X, Y, xi=None):
        """Zero-sum: the sign-flipped own cross gradient. Otherwise the mean
        opposing team gradient plus the agent's own noise on that block."""
        if self.zero_sum:
            return -self.grad_other(team, X, Y, xi)
        other = 2 if team == 1 else 1
        sl = self._agents(other)
        Z = np.concatenate([X, Y], axis=1)
        Sbar = np.tensordot(self.weights.team(other), self.S[sl], axes=1)
        sbar = self.weights.team(other) @ self.s[sl]
        g = Z @ Sbar.T + sbar
        if xi is not None:
            g = g + xi
        return g[:, self.M1 :] if team == 1 else g[:, : self.M1]

    def affine(self):
        M1 = self.M1
        S1 = np.tensordot(self.weights.p1, self.S[self._agents(1)], axes=1)
        S2 = np.tensordot(self.weights.p2, self.S[self._agents(2)], axes=1)
        s1 = self.weights.p1 @ self.s[self._agents(1)]
        s2 = self.weights.p2 @ self.s[self._agents(2)]
        H = np.vstack([S1[:M1], S2[M1:]])
        b = np.concatenate([s1[:M1], s2[M1:]])
        return H, b
