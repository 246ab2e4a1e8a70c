"""Config-driven pipelines behind the command line."""
from __future__ import annotations

import csv
import io
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import problems
from .probing import probe_frequencies, run_algorithm1
from .runner import run_osm, recover_interior, spectral_radius_dense
from .transmission import FixedMatrices, TransmissionError, fourier_estimate, make_family

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


FAMILIES = ("robin", "robin2", "second_order", "physics")
PROBE_PRESETS = ("sines_3", "sines_4", "lo_hi")
METHODS = ("probe", "fourier", "exact", "params")

UNITS = {"s": "1/length", "s1": "1/length", "s2": "1/length", "p": "1/length", "q": "length"}


@dataclass
class ExperimentConfig:
    problem: str = "laplace_strip"
    n_h: Optional[int] = None
    nx: Optional[int] = None
    r: Optional[float] = None
    k_hat: int = 6
    coefficients: Optional[dict] = None
    family: Optional[str] = None
    probes: Any = "sines_3"
    power_its: int = 0
    dedupe: bool = True
    physics_at: str = "midpoint"
    k_min: Optional[float] = None
    k_max: Optional[float] = None
    fourier_samples: int = 200
    warm_start: str = "fourier"
    method: str = "probe"
    params: Optional[list] = None
    initial: str = "random"
    seed: int = 0
    tol: float = 1e-8
    max_it: int = 500
    grid: dict = field(default_factory=lambda: {"s1_range": [1.0, 1000.0], "s2_range": [1.0, 1000.0], "n": 30})
    compare_power_its: int = 1

    def resolved_family(self) -> str:
        if self.family is not None:
            return self.family
        return "physics" if self.problem == "curved_advection" else "robin2"


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 0


def _fail(text: str, key: str, msg: str):
    line = _line_of(text, key)
    where = f"line {line}: " if line else ""
    raise ConfigError(f"{where}{key}: {msg}")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a flat JSON config; errors carry the offending line."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("line 1: config must be a JSON object")
    known = ExperimentConfig.__dataclass_fields__
    for key in raw:
        if key not in known:
            _fail(text, key, f"unknown key (allowed: {', '.join(sorted(known))})")
    cfg = ExperimentConfig(**raw)

    if cfg.problem not in problems.PRESETS and cfg.problem != "custom":
        _fail(text, "problem", f"unknown preset {cfg.problem!r}; choose laplace_strip, curved_advection or custom")
    if cfg.problem == "custom" and not isinstance(cfg.coefficients, dict):
        _fail(text, "problem", "custom problem needs a 'coefficients' object with side1/side2")
    for key in ("n_h", "nx", "power_its", "fourier_samples", "max_it", "k_hat", "seed", "compare_power_its"):
        v = getattr(cfg, key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 0):
            _fail(text, key, f"expected a non-negative integer, got {v!r}")
    if cfg.n_h is not None and cfg.n_h < 3:
        _fail(text, "n_h", "need at least 3 interface nodes")
    if cfg.resolved_family() not in FAMILIES:
        _fail(text, "family", f"unknown family {cfg.family!r}; choose one of {', '.join(FAMILIES)}")
    if isinstance(cfg.probes, str):
        if cfg.probes not in PROBE_PRESETS:
            _fail(text, "probes", f"unknown preset {cfg.probes!r}; choose one of {', '.join(PROBE_PRESETS)} or a list")
    elif isinstance(cfg.probes, list):
        if not cfg.probes:
            _fail(text, "probes", "empty probe set")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in cfg.probes):
            _fail(text, "probes", "frequencies must be positive numbers")
    else:
        _fail(text, "probes", "expected a preset name or a list of frequencies")
    if cfg.method not in METHODS:
        _fail(text, "method", f"unknown method {cfg.method!r}; choose one of {', '.join(METHODS)}")
    if cfg.method == "params" and not cfg.params:
        _fail(text, "method", "method 'params' needs a 'params' list")
    if cfg.warm_start not in ("fourier", "rayleigh"):
        _fail(text, "warm_start", "expected 'fourier' or 'rayleigh'")
    if cfg.initial not in ("zero", "random"):
        _fail(text, "initial", "expected 'zero' or 'random'")
    if cfg.physics_at not in ("midpoint", "mean"):
        _fail(text, "physics_at", "expected 'midpoint' or 'mean'")
    if not (isinstance(cfg.tol, (int, float)) and cfg.tol > 0):
        _fail(text, "tol", "must be positive")
    g = cfg.grid
    if not isinstance(g, dict) or not {"s1_range", "n"} <= set(g):
        _fail(text, "grid", "expected {s1_range: [lo, hi], s2_range: [lo, hi], n: int}")
    for rk in ("s1_range", "s2_range"):
        if rk in g and (len(g[rk]) != 2 or not 0 < g[rk][0] <= g[rk][1]):
            _fail(text, "grid", f"{rk} must be [lo, hi] with 0 < lo <= hi")
    if not isinstance(g["n"], int) or g["n"] < 1:
        _fail(text, "grid", "n must be a positive integer")
    return cfg


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return parse_config("{}")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def build_setup(cfg: ExperimentConfig) -> problems.Setup:
    if cfg.problem == "laplace_strip":
        setup = problems.laplace_strip(cfg.n_h or 50, cfg.nx)
    elif cfg.problem == "curved_advection":
        r = 0.4 if cfg.r is None else cfg.r
        setup = problems.curved_advection(cfg.n_h or 100, cfg.nx or 20, r, cfg.k_hat, cfg.physics_at)
    else:
        c = cfg.coefficients
        if "side1" not in c or "side2" not in c:
            raise ConfigError("coefficients: need 'side1' and 'side2' objects")
        n_h = cfg.n_h or 50
        setup = problems.custom_strip(n_h, cfg.nx or n_h + 1, c["side1"], c["side2"],
                                      r=cfg.r or 0.0, k_hat=cfg.k_hat)
    if cfg.k_min is not None:
        setup.k_min = float(cfg.k_min)
    if cfg.k_max is not None:
        setup.k_max = float(cfg.k_max)
    return setup


def family_for(cfg: ExperimentConfig, setup: problems.Setup):
    return make_family(cfg.resolved_family(), h=setup.h, constants=setup.physics)


def frequencies_for(cfg: ExperimentConfig, n_h: int) -> list:
    if isinstance(cfg.probes, str):
        return probe_frequencies(n_h, cfg.probes)
    return [float(v) for v in cfg.probes]


def rho_of(setup, tm1, tm2) -> float:
    p = setup.problem
    return spectral_radius_dense(p.sigma1.materialize(), p.sigma2.materialize(), tm1, tm2)


def initial_guess(cfg: ExperimentConfig, n: int):
    if cfg.initial == "random":
        return np.random.default_rng(cfg.seed).standard_normal(n)
    return None


def _fmt(v) -> str:
    return f"{float(v):.12g}"


def probe(cfg: ExperimentConfig, setup=None, n_power: Optional[int] = None, frequencies=None,
          threads: int = 1) -> dict:
    setup = setup or build_setup(cfg)
    fam = family_for(cfg, setup)
    n_power = cfg.power_its if n_power is None else n_power
    freqs = frequencies if frequencies is not None else frequencies_for(cfg, setup.n_h)
    start = None
    if cfg.warm_start == "fourier":
        try:
            start = fourier_estimate(setup.symbols, fam, setup.k_min, setup.k_max, cfg.fourier_samples).params
        except TransmissionError as exc:
            log.warning("no Fourier warm start (%s); starting from the probe Rayleigh quotients", exc)
    session = run_algorithm1(setup.problem, fam, frequencies=freqs, n_power=n_power, start=start,
                             dedupe_vectors=cfg.dedupe, threads=threads)
    out = session.report()
    out["problem"] = setup.name
    out["n_h"] = setup.n_h
    out["frequencies"] = [float(f) for f in freqs]
    out["power_its"] = n_power
    out["rho"] = rho_of(setup, session.tm1, session.tm2)
    out["_params"] = session.params
    return out


def fourier(cfg: ExperimentConfig, setup=None) -> dict:
    setup = setup or build_setup(cfg)
    fam = family_for(cfg, setup)
    est = fourier_estimate(setup.symbols, fam, setup.k_min, setup.k_max, cfg.fourier_samples)
    n = setup.n_h
    return {"family": fam.name, "params": fam.describe(est.params), "objective": est.value,
            "k_min": setup.k_min, "k_max": setup.k_max,
            "rho": rho_of(setup, fam.realize(est.params, 1, n), fam.realize(est.params, 2, n)),
            "_params": est.params}


def sweep(cfg: ExperimentConfig, setup=None, threads: int = 1):
    """Spectral radius on a log grid.  Returns ``(csv_text, minimizer_row)``."""
    setup = setup or build_setup(cfg)
    fam = family_for(cfg, setup)
    n = setup.n_h
    p = setup.problem
    S1, S2 = p.sigma1.materialize(), p.sigma2.materialize()
    g = cfg.grid
    npts = g["n"]
    axis1 = np.geomspace(*g["s1_range"], npts)
    if fam.param_count == 1:
        points = [(a,) for a in axis1]
    elif fam.param_count == 2:
        axis2 = np.geomspace(*g.get("s2_range", g["s1_range"]), npts)
        points = [(a, b) for a in axis1 for b in axis2]
    else:
        raise ConfigError(f"family {fam.name} cannot be swept")

    def rho(pt):
        return spectral_radius_dense(S1, S2, fam.realize(pt, 1, n), fam.realize(pt, 2, n))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        values = list(pool.map(rho, points))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{name} [{UNITS[name]}]" for name in fam.param_names] + ["rho [-]"])
    for pt, v in zip(points, values):
        w.writerow([_fmt(x) for x in pt] + [_fmt(v)])
    k = int(np.argmin(values))
    return buf.getvalue(), (points[k], values[k])


def transmission_for(cfg: ExperimentConfig, setup, threads: int = 1):
    """Transmission matrices selected by ``cfg.method``; returns ``(tm1, tm2, info)``."""
    n = setup.n_h
    fam = family_for(cfg, setup)
    if cfg.method == "exact":
        p = setup.problem
        fixed = FixedMatrices(p.sigma2.materialize(), p.sigma1.materialize())
        return fixed.realize(None, 1, n), fixed.realize(None, 2, n), {"method": "exact"}
    if cfg.method == "params":
        params = np.asarray(cfg.params, dtype=float)
        fam.check(params)
        info = {"method": "params", "params": fam.describe(params)}
    elif cfg.method == "fourier":
        res = fourier(cfg, setup)
        params, info = res.pop("_params"), {"method": "fourier", **res}
    else:
        res = probe(cfg, setup, threads=threads)
        params, info = res.pop("_params"), {"method": "probe", **res}
    return fam.realize(params, 1, n), fam.realize(params, 2, n), info


def solve(cfg: ExperimentConfig, setup=None, threads: int = 1):
    """Run the interface iteration; returns ``(report, history_csv, field_csv, info)``."""
    setup = setup or build_setup(cfg)
    tm1, tm2, info = transmission_for(cfg, setup, threads)
    report, lam = run_osm(setup.problem, tm1, tm2, lam0=initial_guess(cfg, setup.n_h),
                          tol=cfg.tol, max_it=cfg.max_it)
    u = recover_interior(setup.problem, lam)
    hist = io.StringIO()
    w = csv.writer(hist, lineterminator="\n")
    w.writerow(["iteration [-]", "relative_error [-]"])
    for i, e in enumerate(report.error_history):
        w.writerow([i, _fmt(e)])
    fld = io.StringIO()
    w = csv.writer(fld, lineterminator="\n")
    w.writerow(["x [length]", "y [length]", "u [-]"])
    for (x, y), v in zip(setup.mesh.nodes, u):
        w.writerow([_fmt(x), _fmt(y), _fmt(v)])
    info = {**info, **report.to_dict()}
    return report, hist.getvalue(), fld.getvalue(), info


def compare(cfg: ExperimentConfig, setup=None, threads: int = 1):
    """Fourier baseline vs probing with sines vs probing with power refinement.

    Both probing rows start from the configured frequencies; the refined row
    runs ``compare_power_its`` inverse/power steps on the lowest/highest seed.
    """
    setup = setup or build_setup(cfg)
    fam = family_for(cfg, setup)
    n = setup.n_h
    lam0 = initial_guess(cfg, n)
    n_power = cfg.compare_power_its
    freqs = frequencies_for(cfg, n)
    rows = []
    jobs = [
        ("fourier", lambda: fourier(cfg, setup)),
        ("probe_sines", lambda: probe(cfg, setup, n_power=0, frequencies=freqs, threads=threads)),
        (f"probe_pm({n_power})", lambda: probe(cfg, setup, n_power=n_power, frequencies=freqs, threads=threads)),
    ]
    for name, job in jobs:
        try:
            res = job()
            params = res["_params"]
            tm1, tm2 = fam.realize(params, 1, n), fam.realize(params, 2, n)
            rep, _ = run_osm(setup.problem, tm1, tm2, lam0=lam0, tol=cfg.tol, max_it=cfg.max_it)
            rows.append({"method": name, "params": " ".join(_fmt(v) for v in params), "rho": _fmt(res["rho"]),
                         "iterations": rep.iterations if rep.converged else "", "status": "ok" if rep.converged
                         else ("diverged" if rep.diverged else "not converged"),
                         "offline_solves": res.get("solve_count", 0)})
        except (np.linalg.LinAlgError, ArithmeticError, RuntimeError, ValueError) as exc:
            rows.append({"method": name, "params": "", "rho": "", "iterations": "", "status": f"failed: {exc}",
                         "offline_solves": ""})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method [-]", f"params [{','.join(UNITS[p] for p in fam.param_names)}]", "rho [-]",
                "iterations [-]", "status [-]", "offline_solves [-]"])
    for r in rows:
        w.writerow([r["method"], r["params"], r["rho"], r["iterations"], r["status"], r["offline_solves"]])
    return buf.getvalue(), rows
