"""Checks and oracles on top of a :class:`Game`: affine extraction, the Nash
solve, finite-difference gradient checks and estimates of the game constants."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..errors import CapabilityError, MonotonicityError
from .base import Game


@dataclass(frozen=True)
class NashPoint:
    x_star: np.ndarray
    y_star: np.ndarray

    @property
    def z_star(self) -> np.ndarray:
        return np.concatenate([self.x_star, self.y_star])


def affine_operator(game: Game, probe_tol: float = 1e-9):
    """``(H, b)`` with ``F(z) = H z + b``, cross-checked at ``M + 1`` probes."""
    if not game.is_affine:
        raise CapabilityError(f"{type(game).__name__} is not affine")
    H, b = game.affine()
    M = game.M1 + game.M2
    probes = [np.zeros(M)] + list(np.eye(M))
    for z in probes:
        resid = np.max(np.abs(game.F(z) - (H @ z + b)))
        if resid > probe_tol * max(1.0, np.max(np.abs(H)), np.max(np.abs(b))):
            raise AssertionError(f"assembled affine operator disagrees with F by {resid:.3e}")
    return H, b


def monotonicity_constant(H) -> float:
    """Smallest eigenvalue of the symmetric part of ``H``."""
    H = np.asarray(H, dtype=float)
    return float(np.linalg.eigvalsh((H + H.T) / 2)[0])


def nash_oracle(H, b, M1: int | None = None) -> NashPoint:
    H, b = np.asarray(H, float), np.asarray(b, float)
    nu = monotonicity_constant(H)
    if nu <= 0:
        raise MonotonicityError(f"operator is not strongly monotone (lambda_min of sym part = {nu:.3e})")
    try:
        z = np.linalg.solve(H, -b)
    except np.linalg.LinAlgError as exc:
        raise MonotonicityError("operator matrix is singular") from exc
    resid = np.linalg.norm(H @ z + b)
    if resid > 1e-10 * max(1.0, np.linalg.norm(b)):
        raise MonotonicityError(f"Nash solve residual {resid:.2e} too large")
    M1 = len(z) // 2 if M1 is None else M1
    return NashPoint(z[:M1], z[M1:])


def game_nash(game: Game) -> NashPoint:
    H, b = affine_operator(game)
    return nash_oracle(H, b, game.M1)


def fd_gradient_check(game: Game, point, h: float = 1e-6, xi=None, rng=None) -> float:
    """Worst relative error between analytic and central-difference gradients.

    Every agent of both teams is evaluated at the common ``point = (x, y)``
    and at the frozen sample ``xi`` (a ``{team: sample}`` dict); if ``xi`` is
    ``None`` and ``rng`` is given, a sample is drawn, otherwise mean
    gradients are checked.
    """
    x, y = (np.asarray(v, float) for v in point)
    worst = 0.0
    for team in (1, 2):
        n = game.team_size(team)
        X, Y = np.tile(x, (n, 1)), np.tile(y, (n, 1))
        if xi is not None:
            sample = xi[team]
        elif rng is not None:
            sample = game.sample(rng, team)
        else:
            sample = None
        analytic = {"x": game.grad_x(team, X, Y, sample), "y": game.grad_y(team, X, Y, sample)}
        for block, dim in (("x", game.M1), ("y", game.M2)):
            fd = np.empty((n, dim))
            for j in range(dim):
                step = np.zeros(dim)
                step[j] = h
                if block == "x":
                    up, dn = game.loss(team, X + step, Y, sample), game.loss(team, X - step, Y, sample)
                else:
                    up, dn = game.loss(team, X, Y + step, sample), game.loss(team, X, Y - step, sample)
                fd[:, j] = (up - dn) / (2 * h)
            a = analytic[block]
            num = np.linalg.norm(a - fd, axis=1)
            den = np.maximum(np.maximum(np.linalg.norm(a, axis=1), np.linalg.norm(fd, axis=1)), 1e-300)
            rel = np.where(num == 0, 0.0, num / den)
            worst = max(worst, float(rel.max()))
    return worst


def disagreement_on_box(game: Game, half_width: float = 2.0, points_per_axis: int = 3) -> float:
    """Largest ``||grad_w J_k - grad_w J^(t)||`` over a grid on ``[-r, r]^M``.

    Global bounds do not exist for games with agent-specific affine terms, so
    the operating box stands in for the whole space.
    """
    M = game.M1 + game.M2
    axis = np.linspace(-half_width, half_width, points_per_axis)
    worst = 0.0
    for z in product(axis, repeat=M):
        x, y = game.split(np.array(z))
        for team in (1, 2):
            n = game.team_size(team)
            X, Y = np.tile(x, (n, 1)), np.tile(y, (n, 1))
            p = game.weights.team(team)
            for g in (game.grad_x(team, X, Y), game.grad_y(team, X, Y)):
                worst = max(worst, float(np.max(np.linalg.norm(g - p @ g, axis=1))))
    return worst


def lipschitz_constant(game: Game) -> float:
    """Largest spectral norm of an agent's gradient Jacobian (affine games)."""
    if not game.is_affine:
        raise CapabilityError("Lipschitz constant is only computed for affine games")
    M = game.M1 + game.M2
    worst = 0.0
    for team in (1, 2):
        n = game.team_size(team)
        zero = np.zeros((n, game.M1)), np.zeros((n, game.M2))
        base = np.hstack([game.grad_x(team, *zero), game.grad_y(team, *zero)])
        jac = np.empty((n, M, M))
        for j in range(M):
            e = np.zeros(M)
            e[j] = 1.0
            X, Y = np.tile(e[: game.M1], (n, 1)), np.tile(e[game.M1 :], (n, 1))
            jac[:, :, j] = np.hstack([game.grad_x(team, X, Y), game.grad_y(team, X, Y)]) - base
        for k in range(n):
            for rows in (slice(0, game.M1), slice(game.M1, M)):
                worst = max(worst, float(np.linalg.norm(jac[k, rows], 2)))
    return worst


def noise_std_estimate(game: Game, point, rng, n_draws: int = 2000) -> float:
    """Root mean squared gradient-noise norm at ``point``, worst agent and block."""
    x, y = (np.asarray(v, float) for v in point)
    worst = 0.0
    for team in (1, 2):
        n = game.team_size(team)
        X, Y = np.tile(x, (n, 1)), np.tile(y, (n, 1))
        for grad in (game.grad_x, game.grad_y):
            mean = grad(team, X, Y)
            sq = np.zeros(n)
            for _ in range(n_draws):
                sq += np.sum((grad(team, X, Y, game.sample(rng, team)) - mean) ** 2, axis=1)
            worst = max(worst, float(np.sqrt(sq.max() / n_draws)))
    return worst


def game_constants(game: Game, rng, box: float = 2.0, at=None) -> dict:
    """``nu``, ``L_f``, ``G`` (box maximum) and ``sigma`` for an affine game."""
    H, b = affine_operator(game)
    if at is None:
        at = game_nash(game).z_star
    return {
        "nu": monotonicity_constant(H),
        "L_f": lipschitz_constant(game),
        "G_box": disagreement_on_box(game, box),
        "box": box,
        "sigma": noise_std_estimate(game, game.split(at), rng),
    }
