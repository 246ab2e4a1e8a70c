"""Optimized transmission conditions by probing the Schur complements.

Pipeline:

1. optionally refine the probe vectors with a few power (or inverse power)
   iterations on each subdomain's Schur complement,
2. store the responses ``Sigma_i x_k`` (two subdomain solves per probe),
3. minimize over the family the worst probe's contraction estimate
   ``|Sigma_2 x - T_1 x| / |Sigma_1 x + T_1 x| * |Sigma_1 x - T_2 x| / |Sigma_2 x + T_2 x|``,
   which needs no further solves,
4. realize the optimal transmission matrices.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linalg import nelder_mead
from .schur import InterfaceProblem, SchurOperator
from .transmission import TransmissionFamily

log = logging.getLogger(__name__)

DEDUPE_DOT = 0.999


class ProbingError(ValueError):
    pass


def probe_frequencies(n_h: int, preset: str = "sines_3") -> list[float]:
    """Named frequency sets: ``sines_3`` = {1, sqrt(N_h), N_h}, ``sines_4`` adds 2, ``lo_hi`` = {1, N_h}."""
    mid = float(np.sqrt(n_h))
    sets = {
        "sines_3": [1.0, mid, float(n_h)],
        "sines_4": [1.0, 2.0, mid, float(n_h)],
        "lo_hi": [1.0, float(n_h)],
    }
    if preset not in sets:
        raise ProbingError(f"unknown probe preset {preset!r}; choose one of {sorted(sets)}")
    return sets[preset]


def sine_probes(n_h: int, frequencies: Sequence[float], t: Optional[np.ndarray] = None) -> np.ndarray:
    """Columns ``sin(k pi t_j)`` normalized to unit 2-norm.

    ``t`` defaults to the uniform interface parameters ``j / (N_h + 1)``.
    """
    if t is None:
        t = np.arange(1, n_h + 1) / (n_h + 1)
    freqs = np.asarray(frequencies, dtype=float)
    if freqs.size == 0:
        raise ProbingError("empty probe set")
    if np.any(freqs <= 0) or np.any(freqs > n_h):
        raise ProbingError(f"frequencies must lie in (0, {n_h}], got {freqs.tolist()}")
    X = np.sin(np.pi * np.outer(t, freqs))
    return X / np.linalg.norm(X, axis=0)


def default_tags(frequencies: Sequence[float]) -> list[Optional[str]]:
    """Lowest frequency -> inverse iteration, highest -> power iteration, others untouched."""
    f = list(frequencies)
    tags: list[Optional[str]] = [None] * len(f)
    tags[int(np.argmin(f))] = "low"
    tags[int(np.argmax(f))] = "high"
    return tags


def dedupe(X: np.ndarray, threshold: float = DEDUPE_DOT) -> np.ndarray:
    keep: list[int] = []
    for j in range(X.shape[1]):
        if all(abs(X[:, i] @ X[:, j]) <= threshold for i in keep):
            keep.append(j)
    return X[:, keep]


def _iterate(op: SchurOperator, x: np.ndarray, tag: Optional[str], n: int) -> np.ndarray:
    if tag is None:
        return x
    step = op.apply_inverse if tag == "low" else op.apply
    for _ in range(n):
        y = step(x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            raise ProbingError(f"power iteration broke down on side {op.side} (zero image)")
        x = y / ny
    return x


def power_enrich(sigma1: SchurOperator, sigma2: SchurOperator, seeds: np.ndarray, n_iter: int,
                 tags: Optional[Sequence[Optional[str]]] = None, dedupe_vectors: bool = True,
                 threads: int = 1) -> np.ndarray:
    """Refine each seed on both sides; returns up to ``2 * n_seeds`` unit vectors.

    Seeds tagged ``"low"`` run inverse iteration (one Neumann solve each
    step), ``"high"`` plain power iteration, untagged seeds are copied.
    Side 1 results come first, then side 2.
    """
    if n_iter < 1:
        raise ProbingError("power_enrich needs at least one iteration")
    seeds = np.asarray(seeds, dtype=float)
    if tags is None:
        tags = ["low"] + [None] * (seeds.shape[1] - 2) + ["high"] if seeds.shape[1] > 1 else ["low"]
    if len(tags) != seeds.shape[1]:
        raise ProbingError("one tag per seed required")
    jobs = [(op, seeds[:, j], tags[j]) for op in (sigma1, sigma2) for j in range(seeds.shape[1])]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        out = list(pool.map(lambda job: _iterate(job[0], job[1], job[2], n_iter), jobs))
    X = np.column_stack(out)
    return dedupe(X) if dedupe_vectors else X


def _colnorm(M):
    # contiguous rows make each column's reduction independent of its position
    return np.linalg.norm(np.ascontiguousarray(M.T), axis=1)


def _objective_terms(X, Y1, Y2, T1X, T2X):
    n1 = _colnorm(Y2 - T1X)
    d1 = _colnorm(Y1 + T1X)
    n2 = _colnorm(Y1 - T2X)
    d2 = _colnorm(Y2 + T2X)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (n1 / d1) * (n2 / d2)
    val[(d1 == 0) | (d2 == 0)] = np.inf
    return val


def objective_opt1(X, Y1, Y2, family: TransmissionFamily, params) -> float:
    """Worst-probe contraction estimate; infinite when a denominator vanishes."""
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    T1X = np.asarray(family.apply(params, 1, X))
    T2X = np.asarray(family.apply(params, 2, X))
    return float(np.max(_objective_terms(X, np.reshape(Y1, X.shape), np.reshape(Y2, X.shape), T1X, T2X)))


def naive_probe(X, Y, family: TransmissionFamily, start=None, tol: float = 1e-10):
    """Fit ``T`` directly to the probe pairs: min over the family of max_k |y_k - T x_k|.

    Only side 1 of the family is used.  Returns ``(params, value)``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X, Y = X[:, None], Y[:, None]
    if X.shape[1] == 0:
        raise ProbingError("empty probe set")
    if start is None:
        rq = np.abs(np.einsum("ij,ij->j", X, Y) / np.einsum("ij,ij->j", X, X))
        start = family.initial_guess([(rq.min(), rq.max())] * 2)

    def objective(theta):
        r = Y - family.apply(family.from_theta(theta), 1, X)
        return float(np.max(np.linalg.norm(r, axis=0)))

    res = nelder_mead(objective, family.to_theta(start), scale=0.3, tol=tol, max_eval=4000)
    return family.from_theta(res.x), res.fun


@dataclass
class ProbeSession:
    family: TransmissionFamily
    vectors: np.ndarray = None
    responses1: np.ndarray = None
    responses2: np.ndarray = None
    solve_count: int = 0
    step1_solves: int = 0
    step2_solves: int = 0
    trace: list = field(default_factory=list)
    params: np.ndarray = None
    objective: float = np.nan
    start: np.ndarray = None
    tm1: object = None
    tm2: object = None

    def report(self) -> dict:
        """JSON-ready summary (see README for the schema)."""
        return {
            "family": self.family.name,
            "params": self.family.describe(self.params),
            "objective": float(self.objective),
            "solve_count": int(self.solve_count),
            "step1_solves": int(self.step1_solves),
            "step2_solves": int(self.step2_solves),
            "n_probes": int(self.vectors.shape[1]),
            "start": [float(v) for v in self.start],
            "trace": [{"params": [float(v) for v in p], "objective": None if not np.isfinite(o) else float(o)}
                      for p, o in self.trace],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.report(), **kw)


def rayleigh_bounds(X, Y1, Y2):
    """Smallest and largest Rayleigh quotient of the responses, per side."""
    out = []
    for Y in (Y1, Y2):
        rq = np.abs(np.einsum("ij,ij->j", X, Y))
        out.append((float(rq.min()), float(rq.max())))
    return out


def run_algorithm1(problem: InterfaceProblem, family: TransmissionFamily,
                   probes: Optional[np.ndarray] = None, frequencies: Optional[Sequence[float]] = None,
                   n_power: int = 0, tags=None, dedupe_vectors: bool = True, start=None,
                   tol: float = 1e-10, max_eval: int = 4000, threads: int = 1) -> ProbeSession:
    """Probe ``problem`` and optimize ``family``.

    Supply either explicit unit ``probes`` (columns) or sine ``frequencies``.
    ``n_power >= 1`` enables the refinement step.
    """
    if probes is None:
        if frequencies is None:
            frequencies = probe_frequencies(problem.dim)
        probes = sine_probes(problem.dim, frequencies)
        if tags is None and n_power >= 1:
            tags = default_tags(frequencies)
    probes = np.asarray(probes, dtype=float)
    if probes.ndim != 2 or probes.shape[1] == 0:
        raise ProbingError("empty probe set")
    probes = probes / np.linalg.norm(probes, axis=0)

    session = ProbeSession(family=family)
    c0 = problem.counter.count
    if n_power >= 1:
        X = power_enrich(problem.sigma1, problem.sigma2, probes, n_power, tags, dedupe_vectors, threads)
    else:
        X = probes
    c1 = problem.counter.count
    session.step1_solves = c1 - c0

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        cols1 = list(pool.map(problem.sigma1.apply, X.T))
        cols2 = list(pool.map(problem.sigma2.apply, X.T))
    Y1, Y2 = np.column_stack(cols1), np.column_stack(cols2)
    c2 = problem.counter.count
    session.step2_solves = c2 - c1
    session.vectors, session.responses1, session.responses2 = X, Y1, Y2

    if start is None:
        start = family.initial_guess(rayleigh_bounds(X, Y1, Y2))
    session.start = np.asarray(start, dtype=float)

    def objective(theta):
        params = family.from_theta(theta)
        val = objective_opt1(X, Y1, Y2, family, params)
        session.trace.append((params, val))
        return val

    res = nelder_mead(objective, family.to_theta(start), scale=0.3, tol=tol, max_eval=max_eval)
    if problem.counter.count != c2:
        raise RuntimeError("objective evaluation performed subdomain solves")
    session.params = family.from_theta(res.x)
    session.objective = res.fun
    session.solve_count = c2 - c0
    session.tm1 = family.realize(session.params, 1, problem.dim)
    session.tm2 = family.realize(session.params, 2, problem.dim)
    log.info("probing: %s -> %s (objective %.4g, %d solves)", family.name,
             family.describe(session.params), res.fun, session.solve_count)
    return session
