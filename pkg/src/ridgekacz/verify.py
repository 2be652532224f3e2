"""Deterministic self-checks behind ``ridgekacz verify``.

Every check returns a CheckResult with the worst discrepancy it measured.
Step functions are looked up through ``solvers.step`` at call time, so a
patched solver is what gets verified.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from . import densela, harness, problems, solvers, theory
from .solvers import IZInit, SolverKind

SEED = 20240601
IDENTITY_RTOL = 1e-10
DOMINANCE_RTOL = 1e-10
CLOSURE_RTOL = 1e-10
ORACLE_RTOL = 1e-8
EIG_RTOL = 1e-9
COND_RTOL = 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    discrepancy: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{tag} {self.name}: discrepancy={self.discrepancy:.3e} tol={self.tolerance:.1e}{extra}"


def _check(name, worst, tol, detail=""):
    ok = bool(np.isfinite(worst) and worst <= tol)
    return CheckResult(name, ok, float(worst), tol, detail)


def random_instance(rng, max_dim=12, lam=None):
    """Small dense instance with Gaussian entries and a random positive lambda."""
    m = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(1, max_dim + 1))
    X = rng.standard_normal((m, n))
    y = rng.standard_normal(m)
    if lam is None:
        lam = float(10.0 ** rng.uniform(-3, 0))
    return problems.ProblemInstance.from_arrays(X, y, lam)


def random_state(kind, p, rng):
    """Solver state at a random point with a consistent mirror."""
    state = solvers.init(kind, p, seed=int(rng.integers(2**32)))
    X, y = p.X, p.y
    if kind is SolverKind.RKRidge:
        state.alpha[:] = rng.standard_normal(p.m)
        state.mirror[:] = X.T @ state.alpha
    else:
        state.beta[:] = rng.standard_normal(p.n)
        state.mirror[:] = y - X @ state.beta
    return state


def enumerate_expectation(kind, p, state):
    """Exact E[next weighted error] by trying every index with its probability."""
    probs = state.sampler.probabilities()
    total = 0.0
    for idx, pr in enumerate(probs):
        trial = copy.deepcopy(state)
        solvers.step(trial, p.X, p.y, p.lam, index=idx)
        total += pr * theory.weighted_error_sq(kind, p.X, p.lam, trial, p.oracle)
    return total


def _identity_and_dominance(instances=50, max_dim=12, seed=SEED):
    rng = densela.make_rng(seed)
    worst_id = worst_dom = 0.0
    for _ in range(instances):
        p = random_instance(rng, max_dim)
        spectrum = np.sort(densela.singular_values(p.X))
        for kind in (SolverKind.RKRidge, SolverKind.RGSRidge):
            state = random_state(kind, p, rng)
            current = theory.weighted_error_sq(kind, p.X, p.lam, state, p.oracle)
            expected = theory.expected_onestep_error(kind, p.X, p.y, p.lam, state, p.oracle)
            brute = enumerate_expectation(kind, p, state)
            # relative to the larger of the two sides' natural scales: the expected
            # error can be exactly zero (e.g. one row), the current error cannot
            denom = max(abs(expected), current, 1e-300)
            worst_id = max(worst_id, abs(brute - expected) / denom)
            bound = theory.contraction_factor(kind, p.m, p.n, p.lam, spectrum)
            excess = (expected - bound.factor * current) / max(current, 1e-300)
            worst_dom = max(worst_dom, excess)
    return (
        _check("expectation identity (rk-ridge, rgs-ridge)", worst_id, IDENTITY_RTOL,
               f"{instances} instances up to {max_dim}x{max_dim}"),
        _check("one-step bound dominance", max(worst_dom, 0.0), DOMINANCE_RTOL,
               f"max relative excess {worst_dom:.3e}"),
    )


def iz_closure(iz_init, p, steps, seed):
    """Run IZ and measure the invariant the init preserves plus no-op coverage.

    IZ0 keeps sqrt(lam) beta = X^T alpha' so every column step is a no-op;
    IZ1 keeps sqrt(lam) alpha' + X beta = y so every row step is.
    Returns (relative invariant violation, wasted steps, wasted no-ops).
    """
    state = solvers.init(SolverKind.IZ, p, iz_init, seed=seed)
    root = math.sqrt(p.lam)
    wasted_kind = "column" if iz_init is IZInit.IZ0 else "row"
    wasted = noops = 0
    worst = 0.0
    for _ in range(steps):
        rep = solvers.step(state, p.X, p.y, p.lam)
        if rep.picked_kind == wasted_kind:
            wasted += 1
            noops += rep.was_noop
        if iz_init is IZInit.IZ0:
            r = root * state.beta - p.X.T @ state.alpha
            scale = 1.0 + root * np.linalg.norm(state.beta)
        else:
            r = root * state.alpha + p.X @ state.beta - p.y
            scale = 1.0 + np.linalg.norm(p.y)
        worst = max(worst, float(np.linalg.norm(r)) / scale)
    return worst, wasted, noops


def _closures(seed=SEED, steps=2000):
    rng = densela.make_rng(seed + 1)
    out = []
    for label, iz_init in (("Claim-1 closure (iz0 column steps are no-ops)", IZInit.IZ0),
                           ("Claim-2 closure (iz1 row steps are no-ops)", IZInit.IZ1)):
        worst, missed, wasted = 0.0, 0, 0
        for shape in ((12, 8), (8, 12), (10, 10)):
            X = rng.standard_normal(shape)
            p = problems.ProblemInstance.from_arrays(X, rng.standard_normal(shape[0]), 0.05)
            w, n_wasted, n_noop = iz_closure(iz_init, p, steps, int(rng.integers(2**32)))
            worst = max(worst, w)
            missed += n_wasted - n_noop
            wasted += n_wasted
        res = _check(label, worst, CLOSURE_RTOL, f"no-ops {wasted - missed}/{wasted}")
        if missed or wasted == 0:
            res.passed = False
        out.append(res)
    return out


def _oracle_crosscheck(instances=50, seed=SEED):
    rng = densela.make_rng(seed + 2)
    worst = 0.0
    for _ in range(instances):
        p = random_instance(rng)
        beta = theory.solve_primal(p.X, p.y, p.lam)
        alpha = theory.solve_dual(p.X, p.y, p.lam)
        worst = max(worst, float(np.linalg.norm(beta - p.X.T @ alpha)) / (1 + np.linalg.norm(beta)))
    return _check("oracle primal/dual agreement", worst, ORACLE_RTOL)


def _augmented(instances=20, seed=SEED):
    rng = densela.make_rng(seed + 3)
    worst_eig = worst_cond = 0.0
    for _ in range(instances):
        p = random_instance(rng)
        s = np.sort(densela.singular_values(p.X))
        got = densela.sym_eigenvalues(theory.build_augmented(p.X, p.lam))
        want = theory.augmented_eigenvalues(s, p.m, p.n, p.lam)
        worst_eig = max(worst_eig, float(np.max(np.abs(got - want))) / float(np.max(np.abs(want))))
        cond_a, cond_m = theory.iz_condition_check(p.X, p.lam)
        if p.m > p.n:
            # A has eigenvalue sqrt(lam) here, which X^T X + lam I lacks;
            # the square-root relation then holds for X X^T + lam I instead
            ev = densela.sym_eigenvalues(theory.k_prime_apply(p.X, p.lam, np.eye(p.m)))
            cond_m = float(ev[-1] / ev[0])
        worst_cond = max(worst_cond, abs(cond_a - math.sqrt(cond_m)) / cond_a)
    return (
        _check("augmented eigenstructure", worst_eig, EIG_RTOL),
        _check("cond_A = sqrt(cond of the larger regularized Gram matrix)", worst_cond, COND_RTOL,
               "X^T X + lam I when m <= n, X X^T + lam I when m > n"),
    )


def _mirror_and_fixed_point(seed=SEED):
    rng = densela.make_rng(seed + 4)
    worst_mirror = worst_fixed = 0.0
    for _ in range(10):
        p = random_instance(rng)
        for kind in (SolverKind.RKRidge, SolverKind.RGSRidge):
            state = solvers.init(kind, p, seed=int(rng.integers(2**32)))
            for _ in range(300):
                solvers.step(state, p.X, p.y, p.lam)
            if kind is SolverKind.RKRidge:
                ref = p.X.T @ state.alpha
            else:
                ref = p.y - p.X @ state.beta
            worst_mirror = max(worst_mirror,
                               float(np.linalg.norm(state.mirror - ref)) / (1 + np.linalg.norm(ref)))
            # the oracle is a fixed point of every step
            at = solvers.init(kind, p, seed=0)
            if kind is SolverKind.RKRidge:
                at.alpha[:] = p.oracle.alpha_star
                at.mirror[:] = p.X.T @ at.alpha
            else:
                at.beta[:] = p.oracle.beta_star
                at.mirror[:] = p.y - p.X @ at.beta
            for idx in range(at.sampler.weights.size):
                probe = copy.deepcopy(at)
                rep = solvers.step(probe, p.X, p.y, p.lam, index=idx)
                worst_fixed = max(worst_fixed, rep.delta_magnitude / (1 + rep.scale))
    return (
        _check("mirror consistency after 300 steps", worst_mirror, 1e-10),
        _check("oracle is a fixed point of every step", worst_fixed, 1e-10),
    )


def crossover(m, n, sigma_min=0.1, lam=1e-2, trials=10, iterations=5000, base_seed=SEED):
    """Trial-mean final err_beta of (rgs-ridge, rk-ridge) on generated m x n instances."""
    cfg = harness.ExperimentConfig(
        dims=[(m, n)], lambdas=[lam], sigma_mins=[sigma_min],
        algorithms=[(SolverKind.RGSRidge, None), (SolverKind.RKRidge, None)],
        iterations=iterations, trace_every=iterations, trials=trials,
        base_seed=base_seed, metrics=["err_beta"],
    )
    finals = {SolverKind.RGSRidge.value: [], SolverKind.RKRidge.value: []}
    for cell in cfg.cells():
        for t in range(trials):
            for rec in harness.run_trial(cfg, cell, t):
                if rec.iteration == iterations:
                    finals[rec.algorithm].append(rec.err_beta)
    return (float(np.mean(finals[SolverKind.RGSRidge.value])),
            float(np.mean(finals[SolverKind.RKRidge.value])))


def _crossover_checks():
    out = []
    for m, n in ((200, 50), (50, 200)):
        rgs, rk = crossover(m, n)
        winner_ok = rgs < rk if m > n else rk < rgs
        # discrepancy: how far the expected winner is from beating the other
        ratio = (rgs / rk) if m > n else (rk / rgs)
        res = _check(f"crossover {m}x{n} ({'rgs' if m > n else 'rk'}-ridge faster)",
                     ratio, 1.0, f"rgs-ridge={rgs:.3e} rk-ridge={rk:.3e}")
        res.passed = bool(winner_ok)
        out.append(res)
    return out


def run_checks(full=False):
    results = []
    results.extend(_identity_and_dominance())
    results.extend(_closures())
    results.append(_oracle_crosscheck())
    results.extend(_augmented())
    results.extend(_mirror_and_fixed_point())
    if full:
        results.extend(_crossover_checks())
    return results
