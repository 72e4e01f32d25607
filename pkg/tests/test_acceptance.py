"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines
appear at the end of the run.
"""

import time

import numpy as np
import pytest

from compnet import harness
from compnet.diffusion import (
    STEPPERS,
    Algorithm,
    NetworkState,
    NoiseStreams,
    StepConfig,
    run,
    step_atc_itc,
    step_atc_itc_po,
)
from compnet.games import QuadraticGame, WganGame, fd_gradient_check, game_nash
from compnet.metrics import centroids, first_hit, steady_state
from compnet.spectral import build_bx, build_by, perron_property_check, spectral_radius, subdominant_modulus
from compnet.topology import (
    Mode,
    paper_cournot_matrices,
    paper_wgan_matrices,
    perron_weights,
    validate_combination_matrix,
    validate_inference_matrix,
)

from conftest import make_cournot

SWEEP_MUS = (0.01, 0.005)
SWEEP_SEEDS = list(range(20))
SWEEP_ALGS = ("atc_itc_po", "atc_c")  # ATC-ITC on a non-zero-sum game uses the adversary-gradient oracle


def test_c01_matrix_suite(acceptance_report):
    t0 = time.perf_counter()
    A1, A2, C_weak, C_strong = paper_cournot_matrices()
    checks = {
        "A1 valid": validate_combination_matrix(A1).passed,
        "A2 valid": validate_combination_matrix(A2).passed,
        "C weak valid": validate_inference_matrix(C_weak.with_mode(Mode.WEAK)).passed,
        "C weak fails strong": not validate_inference_matrix(C_weak.with_mode(Mode.STRONG)).passed,
        "strong C valid": validate_inference_matrix(C_strong).passed,
    }
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 1.0
    acceptance_report(1, ok, f"{checks} in {elapsed:.3f}s")
    assert ok


def test_c02_perron_spectral(acceptance_report):
    t0 = time.perf_counter()
    A1, A2, C, _ = paper_cournot_matrices()
    p = perron_weights(A1, A2)
    Bx, By = build_bx(A1, C.C12, C.C2), build_by(A2, C.C21, C.C1)
    stoch = max(np.max(np.abs(Bx.sum(axis=0) - 1)), np.max(np.abs(By.sum(axis=0) - 1)))
    res = max(perron_property_check(Bx, p.p1), perron_property_check(By, p.p2))
    sub = (subdominant_modulus(Bx), subdominant_modulus(By))
    rho = (spectral_radius(C.C1), spectral_radius(C.C2))
    elapsed = time.perf_counter() - t0
    ok = stoch <= 1e-12 and res <= 1e-10 and max(sub) < 1 and max(rho) < 1 and elapsed < 1.0
    acceptance_report(2, ok, f"stochastic err {stoch:.1e}, Perron residual {res:.1e}, "
                             f"subdominant {sub[0]:.4f}/{sub[1]:.4f}, rho(C1/C2) {rho[0]:.4f}/{rho[1]:.4f}, "
                             f"{elapsed:.3f}s")
    assert ok


def test_c03_gradient_correctness(acceptance_report):
    t0 = time.perf_counter()
    A1, A2, _, _ = paper_cournot_matrices()
    cournot = make_cournot(perron_weights(A1, A2))
    W1, W2, _, _ = paper_wgan_matrices()
    wgan = WganGame(6, 4, perron_weights(W1, W2))
    rng = np.random.default_rng(2024)
    err_c = max(fd_gradient_check(cournot, (rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)), 1e-6, rng=rng)
                for _ in range(5))
    err_w = max(fd_gradient_check(wgan, (rng.normal(size=16), rng.normal(size=2)), 1e-6, rng=rng)
                for _ in range(5))
    elapsed = time.perf_counter() - t0
    ok = err_c < 1e-7 and err_w < 1e-5 and elapsed < 10
    acceptance_report(3, ok, f"Cournot {err_c:.2e}, WGAN {err_w:.2e}, {elapsed:.2f}s")
    assert ok


def test_c04_deterministic_convergence(acceptance_report):
    t0 = time.perf_counter()
    A1, A2, C_weak, C_strong = paper_cournot_matrices()
    game = make_cournot(perron_weights(A1, A2), noise=0.0)
    z = game_nash(game).z_star
    x_star, y_star = z[:3], z[3:]
    worst = {}
    for alg, C in (("atc_c", C_strong), ("atc_itc_po", C_weak)):
        state = NetworkState.zeros(3, 3, 3, 3)
        step = STEPPERS[Algorithm(alg)]
        rng = np.random.default_rng(0)  # unused: the game is noise-free
        best = np.inf
        for i in range(10_000):
            state = step(state, game, A1, A2, C, 0.05, rng, iteration=i)
            dev = max(np.max(np.abs(state.X1 - x_star)), np.max(np.abs(state.Y1 - y_star)),
                      np.max(np.abs(state.X2 - x_star)), np.max(np.abs(state.Y2 - y_star)))
            best = min(best, dev)
            if best <= 1e-6:
                break
        worst[alg] = best
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-6 and elapsed < 5
    acceptance_report(4, ok, "closest approach of any agent to Nash over 1e4 steps: "
                             + ", ".join(f"{a} {v:.2e}" for a, v in worst.items()) + f" (need 1e-6), {elapsed:.2f}s")
    assert ok


@pytest.fixture(scope="module")
def cournot_sweep():
    t0 = time.perf_counter()
    out = {}
    for alg in SWEEP_ALGS:
        cfg = harness.ExperimentConfig.from_dict({
            "preset": "cournot_paper", "algorithm": alg, "iterations": 10_000, "seeds": SWEEP_SEEDS,
            "record_every": 10,
        })
        out[alg] = harness.run_sweep(cfg, SWEEP_MUS)
    return out, time.perf_counter() - t0


def _ratio(result, field):
    return result.ratios[0][f"{field}_ratio"]


def test_c05_mse_scaling(cournot_sweep, acceptance_report):
    sweeps, elapsed = cournot_sweep
    ratios = {alg: _ratio(res, "mse") for alg, res in sweeps.items()}
    ok = all(1.5 <= r <= 3 for r in ratios.values()) and elapsed < 120
    acceptance_report(5, ok, "MSE ratio " + ", ".join(f"{a} {r:.3f}" for a, r in ratios.items())
                             + f" (band [1.5, 3]), sweep {elapsed:.1f}s")
    assert ok


def test_c06_consensus_and_perturbation_scaling(cournot_sweep, acceptance_report):
    sweeps, _ = cournot_sweep
    cons = {alg: _ratio(res, "consensus_err") for alg, res in sweeps.items()}
    pert = {alg: _ratio(res, "d_norm_sq") for alg, res in sweeps.items()}
    ok = all(2.5 <= r <= 6 for r in list(cons.values()) + list(pert.values()))
    acceptance_report(6, ok, "consensus ratio " + ", ".join(f"{a} {r:.3f}" for a, r in cons.items())
                             + "; d_norm_sq ratio " + ", ".join(f"{a} {r:.3f}" for a, r in pert.items())
                             + " (band [2.5, 6])")
    assert ok


def test_c07_centroid_recursion(acceptance_report):
    t0 = time.perf_counter()
    A1, A2, C_weak, C_strong = paper_cournot_matrices()
    p = perron_weights(A1, A2)
    game = make_cournot(p, noise=0.0)
    rng = np.random.default_rng(77)
    worst = 0.0
    for alg in Algorithm:
        C = C_strong if alg is Algorithm.ATC_C else C_weak
        for _ in range(10):
            s = NetworkState(*(rng.normal(size=(3, 3)) for _ in range(4)))
            x_c, y_c = centroids(s, p)
            x_pred = x_c - 0.05 * p.p1 @ game.grad_x(1, s.X1, s.Y1)
            y_pred = y_c - 0.05 * p.p2 @ game.grad_y(2, s.X2, s.Y2)
            x_new, y_new = centroids(STEPPERS[alg](s, game, A1, A2, C, 0.05, rng), p)
            worst = max(worst, np.max(np.abs(x_new - x_pred)), np.max(np.abs(y_new - y_pred)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1
    acceptance_report(7, ok, f"max centroid identity error {worst:.1e} over 4 steppers x 10 states, {elapsed:.3f}s")
    assert ok


def test_c08_baseline_ordering(acceptance_report):
    t0 = time.perf_counter()
    A1, A2, C_weak, _ = paper_cournot_matrices()
    game = make_cournot(perron_weights(A1, A2))
    z = game_nash(game).z_star
    wins, hits = 0, []
    for seed in range(20):
        h = []
        for alg in ("atc_itc_po", "cd"):
            traj = run(StepConfig(0.05, 3000, seed=seed, algorithm=alg), game, A1, A2, C_weak, z_star=z)
            h.append(first_hit(traj, "mse", 1e-3))
        hits.append(h)
        wins += h[0] is not None and (h[1] is None or h[0] < h[1])
    floor = steady_state(traj, "mse")
    elapsed = time.perf_counter() - t0
    ok = wins >= 16 and elapsed < 60
    acceptance_report(8, ok, f"ATC-ITC strictly first in {wins}/20 seeds (need 16); "
                             f"hits seed 0 {hits[0]}; CD steady MSE {floor:.2e}; {elapsed:.1f}s")
    assert ok


def test_c09_zero_sum_reduction(acceptance_report):
    t0 = time.perf_counter()
    A1, A2, C, _ = paper_cournot_matrices()
    game = QuadraticGame.random(3, 3, 2, 2, 0.5, perron_weights(A1, A2), np.random.default_rng(5),
                                zero_sum=True, noise_std=0.2)
    init = NetworkState(*(np.random.default_rng(6).normal(size=(3, 2)) for _ in range(4)))
    a, b = init.copy(), init.copy()
    streams_a, streams_b = NoiseStreams(31), NoiseStreams(31)
    identical = True
    for i in range(100):
        a = step_atc_itc_po(a, game, A1, A2, C, 0.05, streams_a.at(i), iteration=i)
        b = step_atc_itc(b, game, A1, A2, C, 0.05, streams_b.at(i), iteration=i)
        identical &= all(np.array_equal(u, v) for u, v in zip(a.blocks(), b.blocks()))
    elapsed = time.perf_counter() - t0
    ok = identical and elapsed < 1
    acceptance_report(9, ok, f"bitwise identical over 100 iterations: {identical}, {elapsed:.3f}s")
    assert ok


def _wgan_run(game, mats, alg, mu, seed, iters):
    A1, A2, C_weak, C_strong = mats
    C = C_strong if alg == "atc_c" else C_weak
    x0 = game.initial_generator(NoiseStreams(seed).init_stream())
    init = NetworkState.consensus(x0, np.zeros(2), game.K1, game.K2)
    return harness.SeedResult(seed, *_run_or_divergence(StepConfig(mu, iters, seed, alg, record_every=50),
                                                         game, A1, A2, C, init))


def _run_or_divergence(cfg, game, A1, A2, C, init):
    from compnet.errors import DivergenceError

    try:
        return run(cfg, game, A1, A2, C, init=init), None
    except DivergenceError as exc:
        return exc.trajectory, exc.iteration


def test_c10_wgan_stability(acceptance_report):
    t0 = time.perf_counter()
    mats = paper_wgan_matrices()
    game = WganGame(6, 4, perron_weights(*mats[:2]))
    unstable, ratios = 0, []
    for seed in range(5):
        cd = _wgan_run(game, mats, "cd", 0.05, seed, 5000)
        atc_c = _wgan_run(game, mats, "atc_c", 0.05, seed, 5000)
        if cd.diverged:
            unstable += 1
            ratios.append(np.inf)
            continue
        r = steady_state(cd.trajectory, "grad_norm") / steady_state(atc_c.trajectory, "grad_norm")
        ratios.append(r)
        unstable += r >= 2
    converged = 0
    for seed in range(5):
        good = True
        for alg in ("atc_itc", "atc_c", "cd"):
            res = _wgan_run(game, mats, alg, 0.01, seed, 5000)
            g = res.trajectory.field("grad_norm")
            reached = not res.diverged and np.any(g <= 0.1 * g[0])
            pi_hat = res.trajectory.records[-1].extras["pi_hat"]
            good &= bool(reached and abs(pi_hat) <= 0.05)
        converged += good
    elapsed = time.perf_counter() - t0
    ok = unstable >= 3 and converged >= 3 and elapsed < 180
    acceptance_report(10, ok, f"mu=0.05 CD unstable in {unstable}/5 seeds (CD/ATC-C grad-norm ratios "
                              + ", ".join(f"{r:.2f}" for r in ratios) + f"); mu=0.01 all three converge in "
                              f"{converged}/5 seeds; {elapsed:.1f}s")
    assert ok


def test_c11_reproducibility(tmp_path, acceptance_report):
    t0 = time.perf_counter()
    cfg = harness.ExperimentConfig.from_dict({"preset": "cournot_paper", "iterations": 2000, "seeds": [0, 1]})
    harness.cmd_run(cfg, tmp_path / "a")
    harness.cmd_run(cfg, tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    elapsed = time.perf_counter() - t0
    ok = same and names == ["seed_0.csv", "seed_1.csv", "summary.json"] and elapsed < 5
    acceptance_report(11, ok, f"{len(names)} files bitwise identical: {same}, {elapsed:.2f}s")
    assert ok
