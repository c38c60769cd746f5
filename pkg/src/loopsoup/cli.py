"""``loopsoup`` command line.

Every subcommand produces a list of rows plus a JSON envelope::

    {command, params, seed, version, started_at, runtime_ms, rows, summary, warnings}

CSV bodies depend only on the configuration (timestamps live in the envelope),
so reruns with the same seed are byte-identical.  Parameter precedence is
command-line flag > ``--config`` JSON file > built-in default.

Exit codes: 0 ok, 2 validation error, 3 numerical non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__, capacity as cap, fixed_point as fp, soup1d, special_fn as sf
from . import planar
from .errors import ConvergenceError, DomainError, LoopSoupError
from .rng import RngStream, default_seed

EXIT_OK, EXIT_VALIDATION, EXIT_NONCONVERGENCE, EXIT_IO = 0, 2, 3, 4


class ValidationError(DomainError):
    """Bad command-line or config parameters."""


# ---------------------------------------------------------------------------
# config and envelope


@dataclass
class ExperimentConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int = field(default_factory=default_seed)
    output_path: str | None = None
    format: str = "csv"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    stream_id: int = 0


@dataclass
class ResultEnvelope:
    command: str
    params: dict
    seed: int
    version: str
    started_at: str
    runtime_ms: float
    rows: list
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "seed": self.seed,
                "version": self.version, "started_at": self.started_at,
                "runtime_ms": self.runtime_ms, "rows": self.rows, "summary": self.summary,
                "warnings": self.warnings}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_json_default, indent=2, sort_keys=False)

    def csv_body(self) -> str:
        return rows_to_csv(self.rows)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def rows_to_csv(rows: list) -> str:
    """CSV with a header taken from the union of row keys in first-seen order."""
    cols: list = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# parameter helpers


def _floats(v, name) -> list:
    if v is None:
        raise ValidationError(f"parameter {name} is required")
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, str):
        parts = [x for x in v.replace(";", ",").split(",") if x.strip()]
    else:
        parts = list(v)
    try:
        out = [float(x) for x in parts]
    except (TypeError, ValueError):
        raise ValidationError(f"parameter {name} must be a number or comma list, got {v!r}") from None
    if not out:
        raise ValidationError(f"parameter {name} is empty")
    return out


def _float(v, name) -> float:
    vals = _floats(v, name)
    if len(vals) != 1:
        raise ValidationError(f"parameter {name} takes a single value")
    if not math.isfinite(vals[0]):
        raise ValidationError(f"parameter {name} must be finite")
    return vals[0]


def _int(v, name, minimum=1) -> int:
    x = _float(v, name)
    if x != int(x) or x < minimum:
        raise ValidationError(f"parameter {name} must be an integer >= {minimum}")
    return int(x)


def _annuli(v) -> list:
    if isinstance(v, str):
        out = []
        for part in v.split(","):
            a, _, b = part.partition(":")
            out.append((float(a), float(b)))
        return out
    return [tuple(map(float, x)) for x in v]


# ---------------------------------------------------------------------------
# handlers: (params, rng, threads) -> (rows, summary)

DEFAULTS = {
    "finfty-table": {"theta": 0.5, "s": "1,2,4,8,16,100"},
    "fixed-point": {"theta": 0.5, "alpha": 0.25, "s_max": 1e4, "tol": 1e-10, "max_iter": 20000,
                    "start": None, "table_s": "1,1.5,2,4,10,100,1000,10000"},
    "bessel-residual": {"theta": "0.25,0.5"},
    "soup1d-cover": {"theta": 0.5, "s": 2.0, "epsilon": "1e-2,1e-3,1e-4", "n": 10000},
    "arcsine": {"theta": 0.5, "s": 2.0, "epsilon": 1e-4, "n": 10000, "delta0": None},
    "besq-check": {"theta": 0.5, "x0": 1.0, "t": "0.5,1,2", "n": 100000},
    "annulus-kernel": {"q": 1e-4, "n_angles": 13},
    "crossing-measure": {"theta": 0.5, "r1": math.exp(-4), "r2": math.exp(-1), "sep": None,
                         "rx": None, "ry": None, "R": None, "paper_regime_A": 10.0,
                         "regime_policy": "raise"},
    "wos-hit": {"geometry": "polar3", "n": 100000, "z": 0.5, "r": 0.1, "R": 1.0,
                "log_sep": 3.0, "log_r": 30.0, "shell_rel": 1e-6},
    "soup2d-cross": {"theta": "0.3,0.5", "annuli": "0.1:0.5,0.05:0.5", "n": 100, "t_min": 1e-3,
                     "t_max": 1.0, "n_steps": 64, "delta": None},
    "surround-scan": {"theta": 0.5, "radii": "0.001,0.003,0.01,0.03,0.09", "n": 100,
                      "t_min": 1e-3, "t_max": 1.0, "n_steps": 64},
    "capacity": {"cloud": "segment", "cloud_file": None, "h": "0.015625,0.0078125,0.00390625,0.001953125",
                 "alpha": "0.25,0.5,0.75,1", "theta": None},
    "tau-theta": {"theta": "0.6,0.7,0.8,0.9"},
    "tail-divergence": {"theta": 0.5, "S": "10,100,1000,10000"},
}


def h_finfty_table(p, rng, threads):
    theta = _float(p["theta"], "theta")
    rows = []
    for s in _floats(p["s"], "s"):
        rows.append({"theta": theta, "s": s, "value": sf.f_infty(s, theta),
                     "method_tolerance": sf.TOL.betainc})
    return rows, {}


def h_fixed_point(p, rng, threads):
    theta, alpha = _float(p["theta"], "theta"), _float(p["alpha"], "alpha")
    try:
        fp.check_alpha(theta, alpha)
    except DomainError as exc:
        raise ValidationError(f"invalid alpha for the contraction lemma: {exc}") from None
    s_max = _float(p["s_max"], "s_max")
    tol = _float(p["tol"], "tol")
    knots = fp.make_grid(s_max=s_max)
    start = p.get("start")
    start = (0.0 if theta < 1 else 0.5) if start is None else _float(start, "start")
    tail0 = theta - 1.0 if theta < 1 else 0.0
    f0 = fp.GridFunction.constant(knots, start, tail0)
    f, diag = fp.iterate_to_fixed_point(theta, alpha, f0, tol=tol,
                                        max_iter=_int(p["max_iter"], "max_iter"))
    if "diagnostics" in p and p["diagnostics"]:
        diag.write_csv(p["diagnostics"])
    if theta < 1:
        ref = lambda s: sf.f_infty(s, theta)  # noqa: E731
        sel = knots <= 100.0
    else:
        ref = lambda s: np.ones_like(np.asarray(s, dtype=float))  # noqa: E731
        sel = np.ones_like(knots, dtype=bool)
    table_s = [s for s in _floats(p["table_s"], "table_s") if s <= s_max]
    rows = []
    for s in table_s:
        v = f(s)
        r = float(ref(s))
        rows.append({"theta": theta, "alpha": alpha, "s": s, "value": v, "reference": r,
                     "abs_error": abs(v - r), "method_tolerance": tol})
    sup_err = float(np.max(np.abs(f.values[sel] - ref(knots[sel]))))
    summary = {"iterations": diag.iterations, "converged": diag.converged,
               "final_residual": diag.final_residual, "sup_error_vs_reference": sup_err,
               "reference": "f_infty" if theta < 1 else "constant 1",
               "lipschitz_constant": sf.lipschitz_constant(alpha, theta),
               "clamp_events": diag.clamp_events}
    try:
        summary["measured_contraction_ratio"] = fp.contraction_ratio(diag)
    except LoopSoupError:
        summary["measured_contraction_ratio"] = None
    if diag.clamp_events:
        warnings.warn(f"{diag.clamp_events} clamp events during iteration", RuntimeWarning)
    return rows, summary


def h_bessel_residual(p, rng, threads):
    rows = []
    for theta in _floats(p["theta"], "theta"):
        r = fp.verify_bessel_fixed_point(theta)
        rows.append({"theta": theta, "value": r.residual, "s_at_max": r.s_at_max,
                     "grid_size": r.grid_size, "method_tolerance": r.threshold})
    return rows, {}


def h_soup1d_cover(p, rng, threads):
    theta, s = _float(p["theta"], "theta"), _float(p["s"], "s")
    eps = _floats(p["epsilon"], "epsilon")
    n = _int(p["n"], "n")
    res = soup1d.covering_sweep(theta, s, eps, n, rng, threads=threads)
    rows = [r.row() for r in res]
    est = [r.estimate for r in res]
    se = [r.stderr for r in res]
    mono = all(est[i + 1] >= est[i] - 2 * math.hypot(se[i], se[i + 1]) for i in range(len(est) - 1))
    return rows, {"f_infty": sf.f_infty(s, theta), "monotone_within_2sigma": mono}


def h_arcsine(p, rng, threads):
    theta, s = _float(p["theta"], "theta"), _float(p["s"], "s")
    eps = _float(p["epsilon"], "epsilon")
    n = _int(p["n"], "n")
    d0 = p.get("delta0")
    d0 = 10.0 * eps if d0 is None else _float(d0, "delta0")
    g = soup1d.last_uncovered_statistic(theta, s, eps, n, rng, delta0=d0, threads=threads)
    ks = stats.kstest(g, lambda t: sf.arcsine_cdf(t, theta)).statistic
    rows = [{"replica": i, "g_over_s": float(v)} for i, v in enumerate(g)]
    return rows, {"ks_distance": float(ks), "mean": float(g.mean()),
                  "mean_stderr": float(g.std(ddof=1) / math.sqrt(n)) if n > 1 else None,
                  "beta_mean": 1.0 - theta, "delta0": d0, "n": n}


def h_besq_check(p, rng, threads):
    theta, x0 = _float(p["theta"], "theta"), _float(p["x0"], "x0")
    ts = _floats(p["t"], "t")
    if min(ts) <= 0:
        raise ValidationError("besq-check times must be positive")
    n = _int(p["n"], "n")
    X = soup1d.besq_marginals(theta, x0, ts, n, rng.substream(0))
    rows = []
    for k, t in enumerate(ts, start=1):
        x = X[:, k]
        m, v = soup1d.besq_moments(theta, x0, t)
        mean, var = x.mean(), x.var(ddof=1)
        m4 = np.mean((x - mean) ** 4)
        rows.append({"statistic": "mean", "t": t, "estimate": mean,
                     "stderr": math.sqrt(var / n), "n": n, "expected": m})
        rows.append({"statistic": "variance", "t": t, "estimate": var,
                     "stderr": math.sqrt(max(m4 - var * var, 0.0) / n), "n": n, "expected": v})
    summary = {}
    if 0 < theta < 1:
        tau = soup1d.excursion_death_time_samples(theta, n, rng.substream(1))
        ks = stats.kstest(tau, lambda u: sf.death_time_cdf(u, theta)).statistic
        q = float(np.mean(tau >= 1.0))
        rows.append({"statistic": "P(tau>=1)", "t": 1.0, "estimate": q,
                     "stderr": math.sqrt(q * (1 - q) / n), "n": n, "expected": 1 - 2 ** -theta})
        summary["death_time_ks"] = float(ks)
    return rows, summary


def h_annulus_kernel(p, rng, threads):
    q = _float(p["q"], "q")
    m = _int(p["n_angles"], "n_angles", minimum=2)
    angles = np.linspace(0.0, math.pi, m)
    f, d1, d2 = planar.annulus_inner_kernel_series(q, angles, derivatives=True)
    f0 = f[0]
    rows = [{"q": q, "angle": float(a), "value": float(v), "d1": float(a1), "d2": float(a2),
             "ratio_to_f0": float(v / f0), "method_tolerance": 1e-14}
            for a, v, a1, a2 in zip(angles, f, d1, d2)]
    return rows, {"max_flatness_deviation": float(np.max(np.abs(f / f0 - 1))),
                  "total_mass": planar.annulus_kernel_total(q),
                  "curvature_ratio": float(abs(d2[0]) * math.log(q) ** 2 / f0)}


def h_crossing_measure(p, rng, threads):
    theta = _float(p["theta"], "theta")
    r1, r2 = _float(p["r1"], "r1"), _float(p["r2"], "r2")
    tol = 1e-15
    rows = [
        {"quantity": "mu", "value": planar.annulus_crossing_measure(r1, r2), "method_tolerance": tol},
        {"quantity": "dmu_dr1", "value": planar.annulus_crossing_measure_dr1(r1, r2), "method_tolerance": tol},
        {"quantity": "single_loop_prob", "value": planar.single_loop_crossing_prob(theta, r1, r2),
         "method_tolerance": tol},
    ]
    if p.get("sep") is not None:
        sep = _float(p["sep"], "sep")
        rx = _float(p["rx"], "rx")
        ry = _float(p["ry"] if p.get("ry") is not None else rx, "ry")
        A = _float(p["paper_regime_A"], "paper_regime_A")
        policy = p.get("regime_policy", "raise")
        x, y = (0.0, 0.0), (sep, 0.0)
        rows.append({"quantity": "two_annuli", "method_tolerance": tol,
                     "value": planar.two_annuli_measure(x, y, rx, ry, A, policy)})
        if p.get("R") is not None:
            R = _float(p["R"], "R")
            rows.append({"quantity": "two_annuli_with_outer", "method_tolerance": tol,
                         "value": planar.two_annuli_measure_with_outer(x, y, rx, ry, R, A, policy)})
            b = planar.three_crossings_bound(x, y, rx, ry, R, theta, A, policy)
            for k, v in b.terms.items():
                rows.append({"quantity": f"three_crossings_{k}", "value": v, "method_tolerance": tol})
            rows.append({"quantity": "three_crossings_total", "value": b.total, "method_tolerance": tol})
    return rows, {}


def h_wos_hit(p, rng, threads):
    n = _int(p["n"], "n")
    geometry = p["geometry"]
    shell = _float(p["shell_rel"], "shell_rel")
    if geometry == "polar3":
        start, sr, targets, dom, lead = planar.polar3_configuration(_float(p["log_sep"], "log_sep"),
                                                                    _float(p["log_r"], "log_r"))
        res = planar.wos_hitting_prob(start, targets, dom, n, rng, start_radius=sr,
                                      shell_rel=shell, threads=threads)
        ref = lead
    elif geometry == "annulus":
        z, r, R = _float(p["z"], "z"), _float(p["r"], "r"), _float(p["R"], "R")
        res = planar.annulus_hit_inner_wos(z, r, R, n, rng, shell_rel=shell, threads=threads)
        ref = planar.bm_annulus_hit_inner(z, r, R)
    else:
        raise ValidationError(f"unknown geometry {geometry!r} (polar3 or annulus)")
    if res.unresolved:
        warnings.warn(f"{res.unresolved} walks hit the step cap", RuntimeWarning)
    rows = [{"geometry": geometry, "estimate": res.estimate, "stderr": res.stderr, "n": res.n,
             "reference": ref, "unresolved": res.unresolved, "mean_steps": res.mean_steps}]
    return rows, {"z_score": (res.estimate - ref) / res.stderr if res.stderr > 0 else None}


def _soup_config(p):
    delta = p.get("delta")
    return planar.SoupConfig(t_min=_float(p["t_min"], "t_min"), t_max=_float(p["t_max"], "t_max"),
                             n_steps=_int(p["n_steps"], "n_steps", 16),
                             proximity_delta=None if delta is None else _float(delta, "delta"))


def h_soup2d_cross(p, rng, threads):
    rows = planar.crossing_scan(_floats(p["theta"], "theta"), _annuli(p["annuli"]),
                                _int(p["n"], "n"), rng, _soup_config(p))
    return rows, {}


def h_surround_scan(p, rng, threads):
    sc = planar.surround_probability_scan(_float(p["theta"], "theta"), _floats(p["radii"], "radii"),
                                          _int(p["n"], "n"), rng, _soup_config(p))
    return sc.rows, {"slope": sc.slope, "slope_stderr": sc.slope_stderr}


def h_capacity(p, rng, threads):
    hs = sorted(_floats(p["h"], "h"), reverse=True)
    alphas = _floats(p["alpha"], "alpha")
    theta = p.get("theta")
    theta = None if theta is None else _float(theta, "theta")
    if p.get("cloud_file"):
        base = cap.load_cloud(p["cloud_file"], hs[-1])
        family = [cap.PointCloud(base.points, h) for h in hs]
    else:
        gen = cap.GENERATORS.get(p["cloud"])
        if gen is None:
            raise ValidationError(f"unknown cloud {p['cloud']!r}; choose from {sorted(cap.GENERATORS)}")
        family = [gen(h) for h in hs]
    rep = cap.polarity_diagnostic(family, alphas, theta=theta)
    rows = [r.row() for r in rep.rows]
    bad = [r for r in rep.rows if not r.gap <= 1e-9 * max(1.0, r.min_energy)]
    if bad:
        warnings.warn(f"{len(bad)} energy minimisations stopped with a large duality gap", RuntimeWarning)
    return rows, {"trends": rep.trends, "verdicts": rep.verdicts, "criterion": rep.criterion}


def h_tau_theta(p, rng, threads):
    rows = []
    for th in _floats(p["theta"], "theta"):
        tau = sf.tau_theta(th)
        rows.append({"theta": th, "value": tau, "heat_trace": sf.circle_heat_trace(tau),
                     "target": 1.0 / th, "method_tolerance": sf.TOL.bisection})
    return rows, {}


def h_tail_divergence(p, rng, threads):
    theta = _float(p["theta"], "theta")
    scan = fp.tail_divergence_scan(theta, _floats(p["S"], "S"))
    rows = [{"theta": theta, "S": float(S), "value": float(I), "method_tolerance": 1e-12}
            for S, I in zip(scan.S, scan.integrals)]
    return rows, {"slope": scan.slope, "predicted_slope": scan.predicted_slope,
                  "slope_rel_error": scan.slope_rel_error}


HANDLERS = {
    "finfty-table": h_finfty_table,
    "fixed-point": h_fixed_point,
    "bessel-residual": h_bessel_residual,
    "soup1d-cover": h_soup1d_cover,
    "arcsine": h_arcsine,
    "besq-check": h_besq_check,
    "annulus-kernel": h_annulus_kernel,
    "crossing-measure": h_crossing_measure,
    "wos-hit": h_wos_hit,
    "soup2d-cross": h_soup2d_cross,
    "surround-scan": h_surround_scan,
    "capacity": h_capacity,
    "tau-theta": h_tau_theta,
    "tail-divergence": h_tail_divergence,
}

# command-specific extra flags: name -> help
EXTRAS = {
    "fixed-point": {"tol": "stopping tolerance on the weighted increment",
                    "max_iter": "iteration cap", "start": "constant start value",
                    "table_s": "s values reported in the output table",
                    "diagnostics": "CSV path for per-iteration increments"},
    "arcsine": {"delta0": "inner cutoff (default 10 epsilon)"},
    "besq-check": {"x0": "BESQ start value", "t": "comma list of times"},
    "annulus-kernel": {"q": "inner radius", "n_angles": "angles on [0, pi]"},
    "crossing-measure": {"r1": "inner radius", "r2": "outer radius", "sep": "|x-y|",
                         "rx": "radius at x", "ry": "radius at y", "R": "outer radius around x",
                         "regime_policy": "raise or warn outside the separation regime"},
    "wos-hit": {"geometry": "polar3 or annulus", "z": "start radius (annulus)",
                "r": "inner radius (annulus)", "R": "outer radius (annulus)",
                "log_sep": "-log |x-y| (polar3)", "log_r": "-log r (polar3)",
                "shell_rel": "capture shell relative to radius"},
    "soup2d-cross": {"annuli": "r_in:r_out pairs, comma separated", "t_min": "minimal duration",
                     "t_max": "maximal duration", "n_steps": "steps per loop",
                     "delta": "proximity threshold (default per loop)"},
    "surround-scan": {"radii": "comma list in (0, 0.1)", "t_min": "minimal duration",
                      "t_max": "maximal duration", "n_steps": "steps per loop"},
    "capacity": {"cloud": "segment, circle, cantor or point", "cloud_file": "CSV of x,y points",
                 "h": "comma list of resolutions"},
    "tail-divergence": {"S": "comma list of upper limits"},
}


# ---------------------------------------------------------------------------
# run and sweep


def _collect_warnings(caught) -> list:
    out = []
    seen = set()
    for w in caught:
        item = (w.category.__name__, str(w.message))
        if item not in seen:
            seen.add(item)
            out.append({"category": item[0], "message": item[1]})
    return out


def _execute(config: ExperimentConfig):
    if config.command not in HANDLERS:
        raise ValidationError(f"unknown command {config.command!r}")
    params = {**DEFAULTS[config.command], **config.params}
    rng = RngStream(config.seed, config.stream_id)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows, summary = HANDLERS[config.command](params, rng, max(1, int(config.threads)))
    return params, rows, summary, _collect_warnings(caught)


def _finish(config, params, rows, summary, warns, started, t0) -> ResultEnvelope:
    env = ResultEnvelope(config.command, params, config.seed, __version__, started,
                         round((time.perf_counter() - t0) * 1000.0, 3), rows, summary, warns)
    if config.output_path:
        write_outputs(env, config.output_path, config.format)
    return env


def run(config: ExperimentConfig) -> ResultEnvelope:
    """Dispatch one command, write its outputs, return the envelope."""
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    params, rows, summary, warns = _execute(config)
    return _finish(config, params, rows, summary, warns, started, t0)


def sweep(config: ExperimentConfig, axis: str, values) -> ResultEnvelope:
    """Run ``config`` once per value of ``axis`` with stream id = sweep index."""
    values = list(values)
    if not values:
        raise ValidationError("sweep needs at least one value")
    if config.command not in HANDLERS:
        raise ValidationError(f"unknown command {config.command!r}")
    axis = axis.replace("-", "_")
    if axis not in DEFAULTS[config.command]:
        raise ValidationError(f"{config.command} has no parameter {axis!r}")
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    rows, summaries, warns = [], [], []
    for i, v in enumerate(values):
        sub = ExperimentConfig(config.command, {**config.params, axis: v}, config.seed,
                               None, config.format, config.threads, stream_id=i)
        _, r, s, w = _execute(sub)
        for row in r:
            rows.append({"sweep_index": i, f"sweep_{axis}": v, **row})
        summaries.append({"sweep_index": i, axis: v, **s})
        warns.extend(w)
    params = {**DEFAULTS[config.command], **config.params, "sweep_axis": axis, "sweep_values": values}
    return _finish(config, params, rows, {"per_value": summaries}, warns, started, t0)


def write_outputs(env: ResultEnvelope, path, fmt: str) -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(env.to_json() + "\n")
        return
    path.write_text(env.csv_body())
    path.with_suffix(path.suffix + ".json" if path.suffix != ".json" else ".env.json").write_text(
        env.to_json() + "\n")


# ---------------------------------------------------------------------------
# argument parsing

COMMON = [
    ("--theta", "theta", "loop-soup intensity (comma list where accepted)"),
    ("--alpha", "alpha", "weight exponent / capacity exponent"),
    ("--s", "s", "s value or comma list"),
    ("--s-max", "s_max", "right end of the fixed-point grid"),
    ("--epsilon", "epsilon", "interval length cutoff (comma list for a coupled sweep)"),
    ("--n", "n", "number of Monte Carlo replicas"),
    ("--paper-regime-A", "paper_regime_A", "separation parameter A of the two-annuli regime"),
]


def _add_common(p: argparse.ArgumentParser):
    for flag, dest, help_ in COMMON:
        p.add_argument(flag, dest=dest, default=argparse.SUPPRESS, help=help_)
    p.add_argument("--seed", type=lambda s: int(s, 0), default=argparse.SUPPRESS,
                   help="64-bit seed (default: LOOPSOUP_SEED or a fixed value)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    p.add_argument("--out", dest="out", default=argparse.SUPPRESS, help="output path")
    p.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS)
    p.add_argument("--config", dest="config", default=argparse.SUPPRESS,
                   help="JSON file with params (and optionally seed, threads, out, format)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loopsoup", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"loopsoup {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name, help=(HANDLERS[name].__doc__ or name).split("\n")[0])
        _add_common(p)
        for extra, help_ in EXTRAS.get(name, {}).items():
            flag = "--" + extra.replace("_", "-")
            if flag in {c[0] for c in COMMON}:
                continue
            p.add_argument(flag, dest=extra, default=argparse.SUPPRESS, help=help_)
    sw = sub.add_parser("sweep", help="run a command over a list of values of one parameter")
    sw.add_argument("--axis", required=True, help="parameter to vary, e.g. epsilon or theta")
    sw.add_argument("--values", required=True, help="comma separated values")
    sw.add_argument("base", choices=sorted(HANDLERS), help="command to sweep")
    sw.add_argument("rest", nargs=argparse.REMAINDER, help="flags for the base command")
    return parser


_META = {"seed", "threads", "out", "format", "config", "command"}


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    given = vars(ns).copy()
    file_cfg = {}
    if "config" in given:
        try:
            file_cfg = json.loads(Path(given["config"]).read_text())
        except OSError:
            raise
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ValidationError("config file must hold a JSON object")
    file_params = dict(file_cfg.get("params", {}))
    file_params.update({k: v for k, v in file_cfg.items() if k not in _META and k != "params"})
    params = {**file_params, **{k: v for k, v in given.items() if k not in _META}}
    seed = given.get("seed", file_cfg.get("seed", default_seed()))
    threads = given.get("threads", file_cfg.get("threads", os.cpu_count() or 1))
    return ExperimentConfig(command=given["command"], params=params, seed=int(seed),
                            output_path=given.get("out", file_cfg.get("out")),
                            format=given.get("format", file_cfg.get("format", "csv")),
                            threads=int(threads))


def _error(kind: str, exc: BaseException, command: str | None) -> None:
    report = {"error": kind, "type": type(exc).__name__, "message": str(exc), "command": command}
    print(json.dumps(report), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    command = ns.command
    try:
        if command == "sweep":
            base = parser.parse_args([ns.base] + list(ns.rest))
            cfg = config_from_args(base)
            env = sweep(cfg, ns.axis, [v for v in ns.values.split(",") if v.strip()])
        else:
            cfg = config_from_args(ns)
            env = run(cfg)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    except (DomainError, ValueError, KeyError) as exc:
        _error("validation", exc, command)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        _error("non-convergence", exc, command)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        _error("io", exc, command)
        return EXIT_IO
    if not cfg.output_path:
        sys.stdout.write(env.to_json() + "\n" if cfg.format == "json" else env.csv_body())
    else:
        summary = {"command": env.command, "rows": len(env.rows), "runtime_ms": env.runtime_ms,
                   "out": cfg.output_path, "warnings": len(env.warnings)}
        print(json.dumps(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
