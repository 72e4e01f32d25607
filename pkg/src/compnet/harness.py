"""Experiment configuration, orchestration and file output.

A config is a JSON object::

    {
      "preset": "cournot_paper",          # optional, deep-merged underneath
      "game": {"kind": "cournot" | "quadratic" | "wgan", ...},
      "topology": {"source": "preset" | "matrices" | "file" | "averaging", ...},
      "algorithm": "atc_itc" | "atc_c" | "cd" | "atc_itc_po",
      "mu": 0.05, "iterations": 10000, "seeds": [0, 1],
      "record_every": 1, "output_path": "out",
      "infer_cutoff": null, "init": {"kind": "zeros"},
      "window_fraction": 0.5, "mu_list": [...], "algorithms": [...]
    }

See ``README.md`` for the per-game and per-topology keys.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .diffusion import Algorithm, NetworkState, NoiseStreams, StepConfig, check_matrices, run
from .errors import (
    ConfigError,
    DivergenceError,
    MonotonicityError,
    StructuralError,
    ValidationError,
)
from .games import CournotGame, QuadraticGame, WganGame
from .games.analysis import affine_operator, monotonicity_constant, nash_oracle
from .metrics import SCALAR_FIELDS, Trajectory, steady_state
from .spectral import predict_transient, spectral_report
from .topology import (
    CombinationMatrix,
    InferenceMatrix,
    Mode,
    averaging_inference_matrix,
    build_averaging_matrix,
    load_matrix,
    paper_cournot_matrices,
    paper_wgan_matrices,
    perron_weights,
    strong_inference_matrix,
)

PRESETS = ("cournot_paper", "wgan_paper")
_TOP_LEVEL = {
    "preset", "game", "topology", "algorithm", "mu", "iterations", "seeds", "record_every", "output_path",
    "infer_cutoff", "init", "window_fraction", "mu_list", "algorithms", "threshold",
}


# -- config -------------------------------------------------------------------

def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("compnet.presets").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class ExperimentConfig:
    game: dict
    topology: dict
    algorithm: Algorithm
    mu: float
    iterations: int
    seeds: list[int]
    record_every: int = 1
    output_path: str = "out"
    infer_cutoff: int | None = None
    init: dict = field(default_factory=lambda: {"kind": "zeros"})
    window_fraction: float = 0.5
    mu_list: list[float] = field(default_factory=list)
    algorithms: list[str] = field(default_factory=list)
    threshold: dict | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        if "preset" in raw:
            raw = deep_merge(load_preset(raw["preset"]), {k: v for k, v in raw.items() if k != "preset"})
        unknown = set(raw) - _TOP_LEVEL
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("game", "topology", "algorithm", "mu", "iterations", "seeds"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        try:
            algorithm = Algorithm(raw["algorithm"])
        except ValueError:
            raise ConfigError(f"unknown algorithm {raw['algorithm']!r}") from None
        seeds = raw["seeds"]
        if isinstance(seeds, int):
            seeds = [seeds]
        if not isinstance(seeds, list) or not all(isinstance(s, int) and 0 <= s < 2**64 for s in seeds):
            raise ConfigError("seeds must be a list of 64-bit non-negative integers")
        cfg = cls(
            game=dict(raw["game"]),
            topology=dict(raw["topology"]),
            algorithm=algorithm,
            mu=float(raw["mu"]),
            iterations=int(raw["iterations"]),
            seeds=list(seeds),
            record_every=int(raw.get("record_every", 1)),
            output_path=str(raw.get("output_path", "out")),
            infer_cutoff=raw.get("infer_cutoff"),
            init=dict(raw.get("init") or {"kind": "zeros"}),
            window_fraction=float(raw.get("window_fraction", 0.5)),
            mu_list=[float(m) for m in raw.get("mu_list", [])],
            algorithms=list(raw.get("algorithms", [])),
            threshold=raw.get("threshold"),
            base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
        )
        try:
            cfg.step_config(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if cfg.game.get("kind") not in ("cournot", "quadratic", "wgan"):
            raise ConfigError(f"unknown game kind {cfg.game.get('kind')!r}")
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw, base_dir=path.parent)

    def step_config(self, seed: int, algorithm=None, mu=None) -> StepConfig:
        return StepConfig(
            mu=self.mu if mu is None else mu,
            iterations=self.iterations,
            seed=seed,
            algorithm=self.algorithm if algorithm is None else Algorithm(algorithm),
            infer_cutoff=self.infer_cutoff,
            record_every=self.record_every,
        )

    def to_dict(self) -> dict:
        return {
            "game": self.game, "topology": self.topology, "algorithm": self.algorithm.value, "mu": self.mu,
            "iterations": self.iterations, "seeds": self.seeds, "record_every": self.record_every,
            "output_path": self.output_path, "infer_cutoff": self.infer_cutoff, "init": self.init,
            "window_fraction": self.window_fraction, "mu_list": self.mu_list, "algorithms": self.algorithms,
            "threshold": self.threshold,
        }


# -- building blocks ----------------------------------------------------------

@dataclass
class Topology:
    A1: CombinationMatrix
    A2: CombinationMatrix
    C_weak: InferenceMatrix | None
    C_strong: InferenceMatrix | None
    # a single user-supplied C, used for every algorithm (validated per mode)
    C_fixed: InferenceMatrix | None = None

    def inference_for(self, algorithm) -> InferenceMatrix:
        if self.C_fixed is not None:
            return self.C_fixed
        mode = Algorithm(algorithm).required_mode
        C = self.C_strong if mode is Mode.STRONG else self.C_weak
        if C is None:
            raise ConfigError(f"topology provides no {mode.value}-mode inference matrix for {Algorithm(algorithm).value}")
        return C


def _resolve(cfg: ExperimentConfig, path) -> Path:
    p = Path(path)
    p = p if p.is_absolute() else cfg.base_dir / p
    if not p.is_file():
        raise ConfigError(f"matrix file not found: {p}")
    return p


def _int_keys(links: dict) -> dict[int, list[int]]:
    return {int(k): [int(v) for v in vals] for k, vals in (links or {}).items()}


def build_topology(cfg: ExperimentConfig) -> Topology:
    topo = cfg.topology
    source = topo.get("source")
    try:
        if source == "preset":
            name = topo.get("name")
            builders = {"cournot": paper_cournot_matrices, "wgan": paper_wgan_matrices}
            if name not in builders:
                raise ConfigError(f"unknown topology preset {name!r}")
            A1, A2, Cw, Cs = builders[name]()
            return Topology(A1, A2, Cw, Cs)
        if source == "matrices":
            A1 = CombinationMatrix(np.asarray(topo["A1"], float), 1)
            A2 = CombinationMatrix(np.asarray(topo["A2"], float), 2)
            return _with_inference(topo, A1, A2, lambda key: np.asarray(topo[key], float))
        if source == "file":
            A1 = CombinationMatrix(load_matrix(_resolve(cfg, topo["A1"])), 1)
            A2 = CombinationMatrix(load_matrix(_resolve(cfg, topo["A2"])), 2)
            return _with_inference(topo, A1, A2, lambda key: load_matrix(_resolve(cfg, topo[key])))
        if source == "averaging":
            adj1, adj2 = np.asarray(topo["adjacency1"]), np.asarray(topo["adjacency2"])
            A1, A2 = build_averaging_matrix(adj1, 1), build_averaging_matrix(adj2, 2)
            Cw = None
            if "links_into_1" in topo or "links_into_2" in topo:
                Cw = averaging_inference_matrix(adj1, adj2, _int_keys(topo.get("links_into_1")),
                                                _int_keys(topo.get("links_into_2")))
            Cs = strong_inference_matrix(A1.size, A2.size) if topo.get("C_strong") == "uniform" else None
            return Topology(A1, A2, Cw, Cs)
    except KeyError as exc:
        raise ConfigError(f"topology is missing key {exc}") from None
    except (StructuralError, ValidationError) as exc:
        raise ConfigError(f"topology: {exc}") from None
    raise ConfigError(f"unknown topology source {source!r}")


def _with_inference(topo: dict, A1, A2, fetch) -> Topology:
    K1 = A1.size
    if "C" in topo:
        return Topology(A1, A2, None, None, InferenceMatrix.from_full(fetch("C"), K1))
    Cw = InferenceMatrix.from_full(fetch("C_weak"), K1) if "C_weak" in topo else None
    if topo.get("C_strong") == "uniform":
        Cs = strong_inference_matrix(K1, A2.size)
    elif "C_strong" in topo:
        Cs = InferenceMatrix.from_full(fetch("C_strong"), K1, Mode.STRONG)
    else:
        Cs = None
    return Topology(A1, A2, Cw, Cs)


def build_game(cfg: ExperimentConfig, topo: Topology):
    spec = dict(cfg.game)
    kind = spec.pop("kind")
    weights = perron_weights(topo.A1, topo.A2)
    K1, K2 = topo.A1.size, topo.A2.size
    try:
        if kind == "cournot":
            game = CournotGame(spec["costs"], spec["P"], spec["w"], spec.get("noise", 0.1), spec.get("K1", K1),
                               weights, oracle=spec.get("oracle", "team"))
        elif kind == "quadratic":
            rng = np.random.default_rng(spec.pop("game_seed", 0))
            game = QuadraticGame.random(K1, K2, spec.pop("M1"), spec.pop("M2"), spec.pop("nu"), weights, rng, **spec)
        else:
            game = WganGame(K1, K2, weights, **spec)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"game parameters for {kind!r}: {exc}") from None
    if (game.K1, game.K2) != (K1, K2):
        raise ConfigError(f"game has teams {game.K1}+{game.K2} but topology has {K1}+{K2}")
    return game


def nash_point(game):
    """``z_star`` for affine games, ``None`` otherwise."""
    if not game.is_affine:
        return None
    H, b = affine_operator(game)
    return nash_oracle(H, b, game.M1).z_star


def initial_state(cfg: ExperimentConfig, game, seed: int) -> NetworkState | None:
    kind = cfg.init.get("kind", "zeros")
    if kind == "zeros":
        return None
    if kind == "consensus":
        return NetworkState.consensus(cfg.init["x"], cfg.init["y"], game.K1, game.K2)
    if kind == "random_generator":
        if not isinstance(game, WganGame):
            raise ConfigError("init kind 'random_generator' needs the wgan game")
        x0 = game.initial_generator(NoiseStreams(seed).init_stream(), cfg.init.get("scale", 0.5))
        return NetworkState.consensus(x0, np.zeros(game.M2), game.K1, game.K2)
    raise ConfigError(f"unknown init kind {kind!r}")


@dataclass
class Experiment:
    """Everything a run needs, built once from a config."""

    config: ExperimentConfig
    topology: Topology
    game: object
    z_star: np.ndarray | None

    @classmethod
    def prepare(cls, cfg: ExperimentConfig) -> "Experiment":
        topo = build_topology(cfg)
        game = build_game(cfg, topo)
        try:
            z_star = nash_point(game)
        except MonotonicityError:
            z_star = None
        return cls(cfg, topo, game, z_star)

    def run_seed(self, seed: int, algorithm=None, mu=None) -> "SeedResult":
        algorithm = Algorithm(algorithm or self.config.algorithm)
        C = self.topology.inference_for(algorithm)
        step_cfg = self.config.step_config(seed, algorithm, mu)
        init = initial_state(self.config, self.game, seed)
        try:
            traj = run(step_cfg, self.game, self.topology.A1, self.topology.A2, C, init=init, z_star=self.z_star)
            return SeedResult(seed, traj, None)
        except DivergenceError as exc:
            return SeedResult(seed, exc.trajectory, exc.iteration)


@dataclass
class SeedResult:
    seed: int
    trajectory: Trajectory
    failing_iteration: int | None

    @property
    def diverged(self) -> bool:
        return self.failing_iteration is not None

    def steady(self, window_fraction: float = 0.5) -> dict:
        fields = list(SCALAR_FIELDS) + list(self.trajectory.extra_fields)
        out = {}
        for name in fields:
            try:
                out[name] = steady_state(self.trajectory, name, window_fraction)
            except ValueError:
                out[name] = None
        return out


# -- output -------------------------------------------------------------------

def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n"


def _mean(values):
    vals = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.mean(vals)) if vals else None


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for v in row])
    return buf.getvalue()


# -- commands -----------------------------------------------------------------

def validation_report(cfg: ExperimentConfig) -> dict:
    """Matrix validators in the algorithm's mode plus the monotonicity check."""
    exp = Experiment.prepare(cfg)
    C = exp.topology.inference_for(cfg.algorithm)
    reports = check_matrices(cfg.algorithm, exp.topology.A1, exp.topology.A2, C)
    out = {"algorithm": cfg.algorithm.value, "required_mode": cfg.algorithm.required_mode.value,
           "matrices": [r.to_dict() for r in reports]}
    passed = all(r.passed for r in reports)
    if cfg.algorithm is Algorithm.ATC_ITC_PO and not exp.game.has_adversary_oracle:
        out["capability"] = "game provides no adversary-gradient oracle"
        passed = False
    if exp.game.is_affine:
        nu = monotonicity_constant(affine_operator(exp.game)[0])
        out["monotonicity"] = {"nu": nu, "passed": nu > 0}
        passed = passed and nu > 0
    out["passed"] = passed
    return out


def cmd_validate(cfg: ExperimentConfig) -> tuple[int, dict]:
    report = validation_report(cfg)
    return (0 if report["passed"] else 2), report


def cmd_spectral(cfg: ExperimentConfig) -> dict:
    exp = Experiment.prepare(cfg)
    C = exp.topology.inference_for(cfg.algorithm)
    rep = spectral_report(exp.topology.A1, exp.topology.A2, C).to_dict()
    lam = max(rep["subdominant_bx"], rep["subdominant_by"])
    rep["predicted_transient"] = predict_transient(cfg.mu, lam) if 0 < lam < 1 else None
    return rep


def _require_valid(cfg: ExperimentConfig, algorithms) -> None:
    for alg in algorithms:
        sub = copy.copy(cfg)
        sub.algorithm = Algorithm(alg)
        report = validation_report(sub)
        if not report["passed"]:
            raise ValidationError(f"validation failed for {sub.algorithm.value}: {json.dumps(_json_safe(report))}")


def _seed_summary(res: SeedResult, window: float) -> dict:
    return {
        "diverged": res.diverged,
        "failing_iteration": res.failing_iteration,
        "records": len(res.trajectory),
        "steady_state": res.steady(window),
    }


def cmd_run(cfg: ExperimentConfig, out_dir=None) -> dict:
    """One CSV per seed plus ``summary.json``; returns the summary."""
    _require_valid(cfg, [cfg.algorithm])
    out = Path(out_dir or cfg.output_path)
    exp = Experiment.prepare(cfg)
    per_seed = {}
    for seed in cfg.seeds:
        res = exp.run_seed(seed)
        atomic_write(out / f"seed_{seed}.csv", res.trajectory.to_csv())
        per_seed[str(seed)] = _seed_summary(res, cfg.window_fraction)
    fields = list(SCALAR_FIELDS) + list(exp.game.extra_fields)
    ok = [s for s in per_seed.values() if not s["diverged"]]
    summary = {
        "config": cfg.to_dict(),
        "seeds": per_seed,
        "any_diverged": any(s["diverged"] for s in per_seed.values()),
        "steady_state_mean": {f: _mean(s["steady_state"][f] for s in ok) for f in fields},
    }
    atomic_write(out / "summary.json", dumps(summary))
    return summary


SWEEP_FIELDS = ("consensus_err", "mse", "grad_norm", "d_norm_sq")


@dataclass
class SweepResult:
    mus: list[float]
    cells: list[dict]
    ratios: list[dict]

    def mean(self, mu: float, name: str):
        return _mean(c[name] for c in self.cells if c["mu"] == mu and not c["diverged"])


def run_sweep(cfg: ExperimentConfig, mus, seeds=None, algorithm=None) -> SweepResult:
    if not mus:
        raise ConfigError("mu list is empty")
    exp = Experiment.prepare(cfg)
    seeds = cfg.seeds if seeds is None else seeds
    cells = []
    for mu in mus:
        for seed in seeds:
            res = exp.run_seed(seed, algorithm, mu)
            ss = res.steady(cfg.window_fraction)
            cells.append({"mu": float(mu), "seed": seed, "diverged": res.diverged,
                          "failing_iteration": res.failing_iteration, **{f: ss[f] for f in SWEEP_FIELDS}})
    result = SweepResult(list(map(float, mus)), cells, [])
    for hi, lo in zip(result.mus, result.mus[1:]):
        row = {"mu_a": hi, "mu_b": lo}
        for f in SWEEP_FIELDS:
            a, b = result.mean(hi, f), result.mean(lo, f)
            row[f"{f}_ratio"] = None if a is None or not b else a / b
        result.ratios.append(row)
    return result


def cmd_sweep(cfg: ExperimentConfig, mus=None, out_dir=None) -> SweepResult:
    """Steady-state metrics per (mu, seed) in ``sweep.csv``; ratios between
    adjacent step sizes (seed means, ``mu_a / mu_b``) in ``ratios.csv``."""
    mus = cfg.mu_list if mus is None else list(mus)
    if not mus:
        raise ConfigError("mu list is empty")
    _require_valid(cfg, [cfg.algorithm])
    result = run_sweep(cfg, mus)
    out = Path(out_dir or cfg.output_path)
    cols = ["mu", "seed", "diverged", "failing_iteration", *SWEEP_FIELDS]
    atomic_write(out / "sweep.csv", _table(cols, ([c[k] for k in cols] for c in result.cells)))
    rcols = ["mu_a", "mu_b"] + [f"{f}_ratio" for f in SWEEP_FIELDS]
    atomic_write(out / "ratios.csv", _table(rcols, ([r[k] for k in rcols] for r in result.ratios)))
    return result


def cmd_compare(cfg: ExperimentConfig, algorithms=None, out_dir=None) -> dict:
    """Run several algorithms at matched seeds.

    Writes ``compare.csv`` (one row per algorithm and seed, with the first
    iteration meeting ``threshold`` if one is configured) and
    ``compare.json`` with per-algorithm means.
    """
    algorithms = [Algorithm(a) for a in (algorithms or cfg.algorithms or [cfg.algorithm])]
    _require_valid(cfg, algorithms)
    exp = Experiment.prepare(cfg)
    thr = cfg.threshold
    rows, per_alg = [], {}
    for alg in algorithms:
        cells = []
        for seed in cfg.seeds:
            res = exp.run_seed(seed, alg)
            ss = res.steady(cfg.window_fraction)
            hit = None
            if thr is not None:
                vals = res.trajectory.field(thr["field"])
                idx = np.flatnonzero(vals <= thr["value"])
                hit = int(res.trajectory.records[idx[0]].iteration) if idx.size else None
            cell = {"algorithm": alg.value, "seed": seed, "diverged": res.diverged,
                    "failing_iteration": res.failing_iteration, "first_hit": hit, **ss}
            cells.append(cell)
            rows.append(cell)
        per_alg[alg.value] = {
            "diverged_seeds": [c["seed"] for c in cells if c["diverged"]],
            "steady_state_mean": {f: _mean(c[f] for c in cells if not c["diverged"]) for f in ss},
        }
    out = Path(out_dir or cfg.output_path)
    cols = ["algorithm", "seed", "diverged", "failing_iteration", "first_hit", *SCALAR_FIELDS,
            *exp.game.extra_fields]
    atomic_write(out / "compare.csv", _table(cols, ([r.get(k) for k in cols] for r in rows)))
    summary = {"config": cfg.to_dict(), "threshold": thr, "algorithms": per_alg}
    atomic_write(out / "compare.json", dumps(summary))
    return summary


__all__ = [
    "ExperimentConfig", "Experiment", "SeedResult", "SweepResult", "Topology", "build_game", "build_topology",
    "cmd_compare", "cmd_run", "cmd_spectral", "cmd_sweep", "cmd_validate", "load_preset", "run_sweep",
    "validation_report",
]
