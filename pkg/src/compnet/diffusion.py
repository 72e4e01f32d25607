"""Diffusion steppers for two competing teams and the iteration runner.

State layout (rows are agents):

* ``X1`` ``(K1, M1)`` Team-1 strategies, ``Y1`` ``(K1, M2)`` Team-1 estimates of ``y``
* ``X2`` ``(K2, M1)`` Team-2 estimates of ``x``, ``Y2`` ``(K2, M2)`` Team-2 strategies

Mixing with a left-stochastic matrix ``A`` is ``A.T @ rows``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import CapabilityError, DivergenceError, ValidationError
from .games.base import Game
from .metrics import Record, Trajectory, centroids, consensus_error, perturbation_diag
from .topology import (
    CombinationMatrix,
    InferenceMatrix,
    Mode,
    perron_weights,
    validate_combination_matrix,
    validate_inference_matrix,
)

DIVERGENCE_LIMIT = 1e12


class Algorithm(str, Enum):
    ATC_ITC = "atc_itc"
    ATC_C = "atc_c"
    CD = "cd"
    ATC_ITC_PO = "atc_itc_po"

    @property
    def required_mode(self) -> Mode:
        return Mode.STRONG if self is Algorithm.ATC_C else Mode.WEAK


@dataclass
class NetworkState:
    X1: np.ndarray
    Y1: np.ndarray
    X2: np.ndarray
    Y2: np.ndarray

    @classmethod
    def zeros(cls, K1, K2, M1, M2) -> "NetworkState":
        return cls(np.zeros((K1, M1)), np.zeros((K1, M2)), np.zeros((K2, M1)), np.zeros((K2, M2)))

    @classmethod
    def consensus(cls, x, y, K1, K2) -> "NetworkState":
        x, y = np.asarray(x, float), np.asarray(y, float)
        return cls(np.tile(x, (K1, 1)), np.tile(y, (K1, 1)), np.tile(x, (K2, 1)), np.tile(y, (K2, 1)))

    def copy(self) -> "NetworkState":
        return NetworkState(self.X1.copy(), self.Y1.copy(), self.X2.copy(), self.Y2.copy())

    def blocks(self):
        return self.X1, self.Y1, self.X2, self.Y2

    def is_finite(self, limit: float = DIVERGENCE_LIMIT) -> bool:
        # NaN compares false, so one max per block covers both failure modes
        return all(np.abs(b).max(initial=0.0) <= limit for b in self.blocks())


@dataclass(frozen=True)
class StepConfig:
    mu: float
    iterations: int
    seed: int = 0
    algorithm: Algorithm = Algorithm.ATC_ITC
    infer_cutoff: int | None = None
    record_every: int = 1

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))


class NoiseStreams:
    """Counter-based streams: iteration ``i`` of seed ``s`` reads Philox(key=s)
    starting at counter ``(0, i, 0, 0)``.

    Each iteration's noise depends only on the seed and the iteration index,
    so algorithms that sample identically see identical noise. One bit
    generator is reused and repositioned, which is much cheaper than
    constructing a new one per iteration.
    """

    INIT_WORD = 1
    EVAL_WORD = 2

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._bitgen = np.random.Philox(key=self.seed)
        self._gen = np.random.Generator(self._bitgen)

    def _seek(self, counter) -> np.random.Generator:
        state = self._bitgen.state
        state["state"]["counter"][:] = counter
        state["buffer_pos"] = 4  # empty output buffer
        state["has_uint32"] = 0
        self._bitgen.state = state
        return self._gen

    def at(self, iteration: int) -> np.random.Generator:
        """Generator positioned at the start of ``iteration`` (shared, repositioned on every call)."""
        return self._seek((0, iteration, 0, 0))

    def eval_stream(self, iteration: int) -> np.random.Generator:
        """Independent draw for sampled-gradient metrics recorded at ``iteration``."""
        return self._seek((0, iteration, self.EVAL_WORD, 0))

    def init_stream(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.seed, counter=[0, 0, self.INIT_WORD, 0]))


# -- steppers -----------------------------------------------------------------

def _E(M):
    return M.entries if isinstance(M, CombinationMatrix) else np.asarray(M)


def _draw(game: Game, rng):
    return game.sample(rng, 1), game.sample(rng, 2)


def _within_team(state, game, A1, A2, mu, xi1, xi2):
    G1x = game.grad_x(1, state.X1, state.Y1, xi1)
    G2y = game.grad_y(2, state.X2, state.Y2, xi2)
    X1 = _E(A1).T @ (state.X1 - mu * G1x)
    Y2 = _E(A2).T @ (state.Y2 - mu * G2y)
    return X1, Y2


def _check(state, iteration):
    if not state.is_finite():
        raise DivergenceError(iteration)
    return state


def _infer_then_combine(state, X1, Y2, C: InferenceMatrix, psi1, psi2):
    Y1 = C.C21.T @ Y2 + C.C1.T @ psi1
    X2 = C.C12.T @ X1 + C.C2.T @ psi2
    return NetworkState(X1, Y1, X2, Y2)


def step_atc_itc(state, game, A1, A2, C, mu, rng, *, iteration=0, infer_cutoff=None):
    """Within-team adapt-then-combine, cross-team infer-then-combine.

    The inference step moves each estimate along the agent's own sign-flipped
    cross gradient (the zero-sum surrogate for the opponent's gradient).
    After ``infer_cutoff`` iterations the estimate is forwarded unchanged.
    """
    xi1, xi2 = _draw(game, rng)
    X1, Y2 = _within_team(state, game, A1, A2, mu, xi1, xi2)
    if infer_cutoff is not None and iteration >= infer_cutoff:
        psi1, psi2 = state.Y1, state.X2
    else:
        G1y = -game.grad_y(1, state.X1, state.Y1, xi1)
        G2x = -game.grad_x(2, state.X2, state.Y2, xi2)
        psi1 = state.Y1 - mu * G1y
        psi2 = state.X2 - mu * G2x
    return _check(_infer_then_combine(state, X1, Y2, C, psi1, psi2), iteration)


def step_atc_itc_po(state, game, A1, A2, C, mu, rng, *, iteration=0, infer_cutoff=None):
    """ATC-ITC with the inference driven by the agents' estimates of the
    opponent's own gradient (partially observable gradients)."""
    if not game.has_adversary_oracle:
        raise CapabilityError(f"{type(game).__name__} provides no adversary-gradient oracle")
    xi1, xi2 = _draw(game, rng)
    X1, Y2 = _within_team(state, game, A1, A2, mu, xi1, xi2)
    if infer_cutoff is not None and iteration >= infer_cutoff:
        psi1, psi2 = state.Y1, state.X2
    else:
        G1y = game.grad_adversary(1, state.X1, state.Y1, xi1)
        G2x = game.grad_adversary(2, state.X2, state.Y2, xi2)
        psi1 = state.Y1 - mu * G1y
        psi2 = state.X2 - mu * G2x
    return _check(_infer_then_combine(state, X1, Y2, C, psi1, psi2), iteration)


def step_cd(state, game, A1, A2, C, mu, rng, *, iteration=0, infer_cutoff=None):
    """Competing-diffusion baseline: estimates are combined without an inference gradient."""
    xi1, xi2 = _draw(game, rng)
    X1, Y2 = _within_team(state, game, A1, A2, mu, xi1, xi2)
    return _check(_infer_then_combine(state, X1, Y2, C, state.Y1, state.X2), iteration)


def step_atc_c(state, game, A1, A2, C, mu, rng, *, iteration=0, infer_cutoff=None):
    """Within-team adapt-then-combine, then copy neighbouring opponents' fresh strategies."""
    xi1, xi2 = _draw(game, rng)
    X1, Y2 = _within_team(state, game, A1, A2, mu, xi1, xi2)
    return _check(NetworkState(X1, C.C21.T @ Y2, C.C12.T @ X1, Y2), iteration)


STEPPERS: dict[Algorithm, Callable] = {
    Algorithm.ATC_ITC: step_atc_itc,
    Algorithm.ATC_C: step_atc_c,
    Algorithm.CD: step_cd,
    Algorithm.ATC_ITC_PO: step_atc_itc_po,
}


# -- runner -------------------------------------------------------------------

def check_matrices(algorithm: Algorithm, A1, A2, C: InferenceMatrix) -> list:
    """Validation reports for the matrices, with ``C`` checked in the mode the algorithm needs."""
    mode = Algorithm(algorithm).required_mode
    return [
        validate_combination_matrix(A1),
        validate_combination_matrix(A2),
        validate_inference_matrix(C.with_mode(mode)),
    ]


def mean_grad_norm(game: Game, state: NetworkState, rng: np.random.Generator | None = None) -> float:
    """``(1/K) sum_k (||grad_x J_k|| + ||grad_y J_k||)`` at each agent's own pair.

    With ``rng`` the gradients are sampled (one fresh draw per team, as an
    agent would see them); without it the mean gradients are used.
    """
    total = 0.0
    xi = {1: None, 2: None} if rng is None else dict(zip((1, 2), _draw(game, rng)))
    for team, X, Y in ((1, state.X1, state.Y1), (2, state.X2, state.Y2)):
        total += np.linalg.norm(game.grad_x(team, X, Y, xi[team]), axis=1).sum()
        total += np.linalg.norm(game.grad_y(team, X, Y, xi[team]), axis=1).sum()
    return float(total / (game.K1 + game.K2))


def mean_operator(game: Game) -> Callable:
    """``F`` as a callable; affine games use the verified ``H z + b`` form."""
    if game.is_affine:
        from .games.analysis import affine_operator

        H, b = affine_operator(game)
        return lambda z: H @ z + b
    return game.F


def run(config: StepConfig, game: Game, A1, A2, C: InferenceMatrix, *, init: NetworkState | None = None,
        z_star=None) -> Trajectory:
    """Iterate the configured stepper from ``init`` (all zeros by default).

    A record is taken before the first step and after every
    ``record_every`` steps. ``grad_norm`` uses sampled gradients from a draw
    reserved for evaluation, so recording never perturbs the training noise. On divergence the partial trajectory rides on the
    raised :class:`DivergenceError`.
    """
    reports = check_matrices(config.algorithm, A1, A2, C)
    failed = [r for r in reports if not r.passed]
    if failed:
        raise ValidationError("; ".join(f"{r.subject}: {r.checks}" for r in failed))
    if config.algorithm is Algorithm.ATC_ITC_PO and not game.has_adversary_oracle:
        raise CapabilityError(f"{type(game).__name__} provides no adversary-gradient oracle")
    C = C.with_mode(config.algorithm.required_mode)
    p = perron_weights(A1, A2)
    state = init.copy() if init is not None else NetworkState.zeros(game.K1, game.K2, game.M1, game.M2)
    step = STEPPERS[config.algorithm]
    streams = NoiseStreams(config.seed)
    z_star = None if z_star is None else np.asarray(z_star, float)
    traj = Trajectory(M1=game.M1, M2=game.M2, extra_fields=game.extra_fields)
    F = mean_operator(game)

    def record(i, st, x_c, y_c, z_prev):
        z_c = np.concatenate([x_c, y_c])
        d = None if z_prev is None else perturbation_diag(z_prev, z_c, config.mu, F)
        mse = None if z_star is None else float(np.sum((z_c - z_star) ** 2))
        traj.append(Record(
            iteration=i, x_c=x_c, y_c=y_c,
            consensus_error=consensus_error(st, x_c, y_c),
            mse=mse, grad_norm=mean_grad_norm(game, st, streams.eval_stream(i)), d_norm_sq=d,
            extras=game.extra_metrics(st, x_c, y_c),
        ))

    x_c, y_c = centroids(state, p)
    record(0, state, x_c, y_c, None)
    for i in range(1, config.iterations + 1):
        z_prev = np.concatenate([x_c, y_c])
        try:
            state = step(state, game, A1, A2, C, config.mu, streams.at(i - 1),
                         iteration=i - 1, infer_cutoff=config.infer_cutoff)
        except DivergenceError as exc:
            raise DivergenceError(i, trajectory=traj) from exc
        x_c, y_c = centroids(state, p)
        if i % config.record_every == 0:
            record(i, state, x_c, y_c, z_prev)
    return traj


def with_algorithm(config: StepConfig, algorithm) -> StepConfig:
    return replace(config, algorithm=Algorithm(algorithm))
