from .analysis import (
    NashPoint,
    affine_operator,
    disagreement_on_box,
    fd_gradient_check,
    game_constants,
    game_nash,
    lipschitz_constant,
    monotonicity_constant,
    nash_oracle,
)
from .base import Game
from .cournot import CournotGame, cournot_stochastic_grad
from .quadratic import QuadraticGame
from .wgan import WganGame, wgan_local_grads

__all__ = [
    "Game",
    "CournotGame",
    "QuadraticGame",
    "WganGame",
    "NashPoint",
    "affine_operator",
    "disagreement_on_box",
    "fd_gradient_check",
    "game_constants",
    "game_nash",
    "lipschitz_constant",
    "monotonicity_constant",
    "nash_oracle",
    "cournot_stochastic_grad",
    "wgan_local_grads",
]
