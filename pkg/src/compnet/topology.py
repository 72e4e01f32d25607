"""Within-team combination matrices, the cross-team inference matrix, and
their validators.

Conventions: matrices are *left*-stochastic, so column ``k`` holds the
weights agent ``k`` assigns to the information arriving from every agent
``l`` (entry ``[l, k]``). Agents of Team 1 are indexed first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import StructuralError, ValidationError

STOCHASTIC_TOL = 1e-12
PERRON_TOL = 1e-10


class Mode(str, Enum):
    STRONG = "strong"
    WEAK = "weak"


@dataclass(frozen=True)
class TeamConfig:
    K1: int
    K2: int
    M1: int
    M2: int

    def __post_init__(self):
        for name in ("K1", "K2", "M1", "M2"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise StructuralError(f"{name} must be a positive integer, got {value!r}")

    @property
    def K(self) -> int:
        return self.K1 + self.K2

    def team_size(self, team: int) -> int:
        return self.K1 if team == 1 else self.K2


def _frozen_array(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CombinationMatrix:
    """Within-team mixing weights ``A^(t)``."""

    entries: np.ndarray
    team: int = 1

    def __post_init__(self):
        arr = _frozen_array(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise StructuralError(f"combination matrix must be square and non-empty, got shape {arr.shape}")
        if self.team not in (1, 2):
            raise StructuralError(f"team must be 1 or 2, got {self.team!r}")
        object.__setattr__(self, "entries", arr)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class InferenceMatrix:
    """Block partition ``[[C1, C12], [C21, C2]]`` of the cross-team matrix.

    ``C12`` is ``K1 x K2`` (links out of Team 1 into Team 2) and ``C21`` is
    ``K2 x K1``.
    """

    C1: np.ndarray
    C12: np.ndarray
    C21: np.ndarray
    C2: np.ndarray
    mode: Mode = Mode.WEAK

    def __post_init__(self):
        blocks = {name: _frozen_array(getattr(self, name)) for name in ("C1", "C12", "C21", "C2")}
        for name, arr in blocks.items():
            if arr.ndim != 2:
                raise StructuralError(f"block {name} must be 2-D, got shape {arr.shape}")
        K1, K2 = blocks["C1"].shape[0], blocks["C2"].shape[0]
        expected = {"C1": (K1, K1), "C12": (K1, K2), "C21": (K2, K1), "C2": (K2, K2)}
        for name, shape in expected.items():
            if blocks[name].shape != shape:
                raise StructuralError(f"block {name} has shape {blocks[name].shape}, expected {shape}")
        for name, arr in blocks.items():
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def from_full(cls, C, K1: int, mode: Mode | str = Mode.WEAK) -> "InferenceMatrix":
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1] or not 0 < K1 < C.shape[0]:
            raise StructuralError(f"cannot split a {C.shape} matrix at K1={K1}")
        return cls(C[:K1, :K1], C[:K1, K1:], C[K1:, :K1], C[K1:, K1:], Mode(mode))

    @property
    def K1(self) -> int:
        return self.C1.shape[0]

    @property
    def K2(self) -> int:
        return self.C2.shape[0]

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.C1, self.C12], [self.C21, self.C2]])

    def with_mode(self, mode: Mode | str) -> "InferenceMatrix":
        return InferenceMatrix(self.C1, self.C12, self.C21, self.C2, Mode(mode))


@dataclass(frozen=True)
class PerronWeights:
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p1", _frozen_array(self.p1))
        object.__setattr__(self, "p2", _frozen_array(self.p2))

    def team(self, team: int) -> np.ndarray:
        return self.p1 if team == 1 else self.p2


@dataclass
class ValidationReport:
    """Named pass/fail checks. ``passed`` is the conjunction of all of them."""

    subject: str
    checks: dict[str, bool] = field(default_factory=dict)
    details: dict[str, str] = field(default_factory=dict)

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks[name] = bool(ok)
        if detail:
            self.details[name] = detail

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {"subject": self.subject, "passed": self.passed, "checks": dict(self.checks), "details": dict(self.details)}


# -- structural predicates ---------------------------------------------------

def is_primitive(M: np.ndarray) -> bool:
    """Positivity of ``M^m`` for ``m = (n-1)^2 + 1`` (Wielandt's bound).

    Works on the zero pattern only, so no rounding is involved.
    """
    pattern = np.asarray(M) > 0
    n = pattern.shape[0]
    if n == 1:
        return bool(pattern[0, 0])
    power = pattern.copy()
    for _ in range((n - 1) ** 2):
        power = (power.astype(np.int64) @ pattern.astype(np.int64)) > 0
    return bool(power.all())


def is_irreducible(M: np.ndarray) -> bool:
    """Strong connectivity of the digraph with an edge ``l -> k`` when ``M[l, k] > 0``."""
    M = np.asarray(M)
    if M.shape[0] == 1:
        return True
    n_comp, _ = connected_components(M > 0, directed=True, connection="strong")
    return n_comp == 1


def _column_sums_ok(M: np.ndarray, tol: float = STOCHASTIC_TOL) -> tuple[bool, float]:
    dev = float(np.max(np.abs(M.sum(axis=0) - 1.0))) if M.size else 0.0
    return dev <= tol, dev


# -- validators ---------------------------------------------------------------

def validate_combination_matrix(A: CombinationMatrix, cfg: TeamConfig | None = None) -> ValidationReport:
    M = A.entries
    if cfg is not None and M.shape[0] != cfg.team_size(A.team):
        raise StructuralError(
            f"A^({A.team}) is {M.shape[0]}x{M.shape[0]} but team {A.team} has {cfg.team_size(A.team)} agents"
        )
    report = ValidationReport(f"A^({A.team})")
    report.add("nonnegative", bool(np.all(M >= 0)))
    ok, dev = _column_sums_ok(M)
    report.add("left_stochastic", ok, f"max |column sum - 1| = {dev:.3e}")
    report.add("primitive", is_primitive(M))
    return report


def validate_inference_matrix(C: InferenceMatrix, cfg: TeamConfig | None = None) -> ValidationReport:
    if cfg is not None and (C.K1, C.K2) != (cfg.K1, cfg.K2):
        raise StructuralError(f"inference blocks are sized for ({C.K1}, {C.K2}) agents, config has ({cfg.K1}, {cfg.K2})")
    report = ValidationReport(f"C ({C.mode.value})")
    report.add("nonnegative", bool(np.all(C.full >= 0)))
    if C.mode is Mode.STRONG:
        report.add("C1_zero", bool(np.all(np.abs(C.C1) <= STOCHASTIC_TOL)))
        report.add("C2_zero", bool(np.all(np.abs(C.C2) <= STOCHASTIC_TOL)))
        ok12, dev12 = _column_sums_ok(C.C12)
        ok21, dev21 = _column_sums_ok(C.C21)
        report.add("C12_left_stochastic", ok12, f"max |column sum - 1| = {dev12:.3e}")
        report.add("C21_left_stochastic", ok21, f"max |column sum - 1| = {dev21:.3e}")
    else:
        ok, dev = _column_sums_ok(C.full)
        report.add("left_stochastic", ok, f"max |column sum - 1| = {dev:.3e}")
        report.add("C1_irreducible", is_irreducible(C.C1))
        report.add("C2_irreducible", is_irreducible(C.C2))
        report.add("C12_has_link", bool(np.any(C.C12 > 0)))
        report.add("C21_has_link", bool(np.any(C.C21 > 0)))
    return report


def perron_weights(A1: CombinationMatrix, A2: CombinationMatrix) -> PerronWeights:
    return PerronWeights(perron_vector(A1), perron_vector(A2))


def perron_vector(A: CombinationMatrix) -> np.ndarray:
    """Positive right eigenvector of ``A`` at eigenvalue 1, summing to 1."""
    report = validate_combination_matrix(A)
    if not report.passed:
        raise ValidationError(f"{report.subject} fails validation: {report.checks}")
    M = A.entries
    vals, vecs = np.linalg.eig(M)
    idx = int(np.argmin(np.abs(vals - 1.0)))
    p = np.real(vecs[:, idx])
    p = p / p.sum()
    # one refinement sweep: A p = p is a fixed point of the power map
    for _ in range(3):
        p = M @ p
        p = p / p.sum()
    residual = float(np.max(np.abs(M @ p - p)))
    if residual > PERRON_TOL or np.any(p <= 0):
        raise ValidationError(f"Perron vector of {report.subject} not resolved (residual {residual:.2e})")
    return p


# -- constructions ------------------------------------------------------------

def build_averaging_matrix(adjacency, team: int = 1) -> CombinationMatrix:
    """Averaging rule: ``a[l, k] = 1 / |N_k|`` over the closed neighbourhood of ``k``."""
    adj = np.asarray(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise StructuralError(f"adjacency must be square, got {adj.shape}")
    if not np.all((adj == 0) | (adj == 1)):
        raise ValidationError("adjacency must be 0/1")
    if not np.array_equal(adj, adj.T):
        raise ValidationError("adjacency must be symmetric")
    if not np.all(np.diag(adj) == 1):
        raise ValidationError("adjacency must contain every self-loop")
    if not is_irreducible(adj):
        raise ValidationError("graph is disconnected")
    deg = adj.sum(axis=0)
    return CombinationMatrix(adj / deg[None, :], team)


def random_connected_adjacency(n: int, edge_prob: float, rng: np.random.Generator) -> np.ndarray:
    """Random spanning tree plus Bernoulli(edge_prob) extra edges, with self-loops."""
    adj = np.eye(n, dtype=int)
    order = rng.permutation(n)
    for i in range(1, n):
        j = order[rng.integers(i)]
        adj[order[i], j] = adj[j, order[i]] = 1
    extra = np.triu(rng.random((n, n)) < edge_prob, 1)
    adj |= extra | extra.T
    return adj


def strong_inference_matrix(K1: int, K2: int) -> InferenceMatrix:
    """Full bipartite cross graph with uniform weights, zero diagonal blocks."""
    return InferenceMatrix(
        np.zeros((K1, K1)), np.full((K1, K2), 1.0 / K1), np.full((K2, K1), 1.0 / K2), np.zeros((K2, K2)), Mode.STRONG
    )


def weak_inference_matrix(
    A1: CombinationMatrix,
    A2: CombinationMatrix,
    links_into_1: dict[int, list[int]],
    links_into_2: dict[int, list[int]],
    cross_weight: float = 0.1,
) -> InferenceMatrix:
    """Weak-mode ``C`` built on top of the within-team graphs.

    ``links_into_1[k]`` lists the Team-2 agents (0-based, within Team 2) that
    feed Team-1 agent ``k``; an agent with cross links puts ``cross_weight``
    on them (uniformly) and scales its within-team column by
    ``1 - cross_weight``. This reproduces the pattern of the Cournot example.
    """
    if not 0 < cross_weight < 1:
        raise ValidationError("cross_weight must lie in (0, 1)")
    K1, K2 = A1.size, A2.size
    C1, C2 = A1.entries.copy(), A2.entries.copy()
    C12, C21 = np.zeros((K1, K2)), np.zeros((K2, K1))
    for k, sources in links_into_1.items():
        if sources:
            C1[:, k] *= 1 - cross_weight
            C21[sources, k] = cross_weight / len(sources)
    for k, sources in links_into_2.items():
        if sources:
            C2[:, k] *= 1 - cross_weight
            C12[sources, k] = cross_weight / len(sources)
    return InferenceMatrix(C1, C12, C21, C2, Mode.WEAK)


def averaging_inference_matrix(
    adjacency1, adjacency2, links_into_1: dict[int, list[int]], links_into_2: dict[int, list[int]]
) -> InferenceMatrix:
    """Weak-mode ``C`` from the averaging rule on the union graph.

    Every agent weights its closed within-team neighbourhood and its cross
    sources uniformly, ``1 / (|N_k| + |cross_k|)`` each.
    """
    A1, A2 = build_averaging_matrix(adjacency1, 1), build_averaging_matrix(adjacency2, 2)
    K1, K2 = A1.size, A2.size
    adj1, adj2 = np.asarray(adjacency1, float), np.asarray(adjacency2, float)
    C12, C21 = np.zeros((K1, K2)), np.zeros((K2, K1))
    for k, sources in links_into_1.items():
        C21[list(sources), k] = 1.0
    for k, sources in links_into_2.items():
        C12[list(sources), k] = 1.0
    deg1 = adj1.sum(axis=0) + C21.sum(axis=0)
    deg2 = adj2.sum(axis=0) + C12.sum(axis=0)
    return InferenceMatrix(adj1 / deg1, C12 / deg2, C21 / deg1, adj2 / deg2, Mode.WEAK)


def ring_adjacency(n: int, chords=()) -> np.ndarray:
    """Cycle on ``n`` nodes with self-loops and optional extra undirected chords."""
    adj = np.eye(n, dtype=int)
    for i in range(n):
        adj[i, (i + 1) % n] = adj[(i + 1) % n, i] = 1
    for i, j in chords:
        adj[i, j] = adj[j, i] = 1
    return adj


def paper_cournot_matrices() -> tuple[CombinationMatrix, CombinationMatrix, InferenceMatrix, InferenceMatrix]:
    """Three-firm-per-team Cournot topology: ``(A1, A2, C_weak, C_strong)``."""
    A1 = CombinationMatrix([[1 / 3, 1 / 2, 1 / 2], [1 / 3, 1 / 2, 0], [1 / 3, 0, 1 / 2]], 1)
    A2 = CombinationMatrix([[1 / 2, 1 / 3, 0], [1 / 2, 1 / 3, 1 / 2], [0, 1 / 3, 1 / 2]], 2)
    C = np.array(
        [
            [3 / 10, 1 / 2, 1 / 2, 1 / 10, 0, 0],
            [3 / 10, 1 / 2, 0, 0, 0, 0],
            [3 / 10, 0, 1 / 2, 0, 0, 0],
            [1 / 10, 0, 0, 9 / 20, 1 / 3, 0],
            [0, 0, 0, 9 / 20, 1 / 3, 1 / 2],
            [0, 0, 0, 0, 1 / 3, 1 / 2],
        ]
    )
    return A1, A2, InferenceMatrix.from_full(C, 3, Mode.WEAK), strong_inference_matrix(3, 3)


def paper_wgan_matrices() -> tuple[CombinationMatrix, CombinationMatrix, InferenceMatrix, InferenceMatrix]:
    """Six-versus-four topology built with the averaging rule: ``(A1, A2, C_weak, C_strong)``.

    Half of each team hears one adversary in the weak cross graph; every
    agent hears every adversary in the strong one.
    """
    adj1, adj2 = ring_adjacency(6, [(0, 3)]), ring_adjacency(4, [(0, 2)])
    links1 = {0: [0], 2: [1], 4: [2]}
    links2 = {0: [1], 2: [3]}
    C_weak = averaging_inference_matrix(adj1, adj2, links1, links2)
    return build_averaging_matrix(adj1, 1), build_averaging_matrix(adj2, 2), C_weak, strong_inference_matrix(6, 4)


# -- file I/O -----------------------------------------------------------------

def load_matrix(path: str | Path) -> np.ndarray:
    """Read ``{"rows": [[...], ...]}``."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "rows" not in data:
        raise StructuralError(f"{path}: expected an object with a 'rows' key")
    rows = np.array(data["rows"], dtype=float)
    if rows.ndim != 2:
        raise StructuralError(f"{path}: 'rows' must be a rectangular list of lists")
    return rows


def dump_matrix(M: np.ndarray, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump({"rows": np.asarray(M, dtype=float).tolist()}, fh)
